from __future__ import annotations

import io
import json
import subprocess
import sys

import jsonschema
import pytest

from empath_eval import ingest
from empath_eval.cli import EXIT_INSUFFICIENT, EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_USAGE, SEED_ENV, run
from empath_eval.reports import load_schema


def call(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def json_commands(d):
    return {
        "evaluate": ["evaluate", "--pairs", f"{d}/pairs.jsonl", "--preds", f"{d}/preds.jsonl",
                     "--aspect", "empathy", "--swap", "mean"],
        "agreement": ["agreement", "--annotations", f"{d}/ann.csv", "--groups", f"{d}/groups.json",
                      "--aspect", "empathy"],
        "aspect-corr": ["aspect-corr", "--pairs", f"{d}/pairs.jsonl"],
        "errors": ["diagnose", "errors", "--pairs", f"{d}/pairs.jsonl", "--preds", f"{d}/preds.jsonl",
                   "--aspect", "empathy", "--swap", "standard"],
        "bottleneck": ["diagnose", "bottleneck", "--pairs", f"{d}/train.jsonl", "--preds",
                       f"{d}/probs.jsonl", "--aspect", "empathy"],
        "confusion": ["diagnose", "confusion", "--pairs", f"{d}/pairs.jsonl", "--preds",
                      f"{d}/preds.jsonl", "--aspect", "empathy", "--swap", "reverse"],
        "train-head": ["train-head", "--pairs", f"{d}/pairs.jsonl", "--embeddings", f"{d}/emb.bin",
                       "--train-aspect", "empathy", "--loss", "cosine_mse", "--epochs", "2", "--seed", "4"],
        "loss-eval": ["loss-eval", "--batch", f"{d}/batch.json", "--loss", "angle", "--grad-check"],
    }


class TestOutputs:
    def test_json_outputs_match_schemas(self, fixture_dir):
        for name, argv in json_commands(fixture_dir).items():
            code, out, err = call(*argv, "--format", "json")
            assert code == EXIT_OK, (name, err)
            doc = json.loads(out)
            jsonschema.validate(doc, load_schema(doc["kind"]))

    def test_md_and_csv(self, fixture_dir):
        argv = json_commands(fixture_dir)["evaluate"]
        code, md, _ = call(*argv)
        assert code == 0 and "| aspect" in md and "<!-- manifest " in md
        code, csv_text, _ = call("--format", "csv", *argv)
        assert code == 0 and csv_text.startswith("# manifest ")

    def test_score_writes_predictions_and_sidecar(self, fixture_dir):
        out = fixture_dir / "scores.jsonl"
        code, _, err = call("score", "--pairs", f"{fixture_dir}/pairs.jsonl", "--embeddings",
                            f"{fixture_dir}/emb.jsonl", "--aspect", "empathy", "--out", str(out))
        assert code == 0, err
        preds = ingest.parse_predictions(out.read_text())
        assert not preds.errors and len(preds) == 52
        for line in out.read_text().splitlines():
            jsonschema.validate(json.loads(line), load_schema("prediction"))
        manifest = json.loads((fixture_dir / "scores.jsonl.manifest.json").read_text())
        jsonschema.validate(manifest, load_schema("manifest"))

    def test_score_with_trained_head(self, fixture_dir):
        head = fixture_dir / "head.json"
        argv = json_commands(fixture_dir)["train-head"]
        assert call(*argv, "--format", "json", "--out", str(head))[0] == 0
        code, out, err = call("score", "--pairs", f"{fixture_dir}/pairs.jsonl", "--embeddings",
                              f"{fixture_dir}/emb.bin", "--head", str(head), "--aspect", "empathy")
        assert code == 0, err
        assert json.loads(out.splitlines()[0])["source"] == "cosine+head"

    def test_md_head_is_rejected_clearly(self, fixture_dir):
        head = fixture_dir / "head.md"
        call(*json_commands(fixture_dir)["train-head"], "--out", str(head))
        code, _, err = call("score", "--pairs", f"{fixture_dir}/pairs.jsonl", "--embeddings",
                            f"{fixture_dir}/emb.bin", "--head", str(head))
        assert code == EXIT_INVALID and "--format json" in err

    def test_bottleneck_without_preds_reports_prior(self, fixture_dir):
        code, out, _ = call("diagnose", "bottleneck", "--pairs", f"{fixture_dir}/train.jsonl",
                            "--aspect", "empathy", "--format", "json")
        assert code == 0
        emp = json.loads(out)["report"]["empirical"]
        assert emp == pytest.approx([0.1400, 0.3987, 0.4040, 0.0573], abs=5e-4)

    def test_repeat_runs_identical(self, fixture_dir):
        argv = json_commands(fixture_dir)["train-head"]
        assert call(*argv, "--format", "json") == call(*argv, "--format", "json")


class TestExitCodes:
    def test_usage(self, fixture_dir):
        assert call()[0] == EXIT_USAGE
        assert call("evaluate", "--pairs", "x")[0] == EXIT_USAGE
        assert call("evaluate", "--pairs", "x", "--preds", "y", "--aspect", "kindness")[0] == EXIT_USAGE
        assert call("diagnose", "errors", "--pairs", f"{fixture_dir}/pairs.jsonl",
                    "--aspect", "empathy")[0] == EXIT_USAGE

    def test_seed_required_or_from_env(self, fixture_dir, monkeypatch):
        argv = [a for a in json_commands(fixture_dir)["train-head"] if a not in ("--seed", "4")]
        monkeypatch.delenv(SEED_ENV, raising=False)
        code, out, err = call(*argv)
        assert code == EXIT_USAGE and out == "" and SEED_ENV in err
        monkeypatch.setenv(SEED_ENV, "4")
        from_env = call(*argv, "--format", "json")
        monkeypatch.delenv(SEED_ENV)
        explicit = call(*argv, "--seed", "4", "--format", "json")
        assert from_env[0] == 0 and from_env[1] == explicit[1]

    def test_io_error(self, fixture_dir):
        code, out, _ = call("aspect-corr", "--pairs", f"{fixture_dir}/missing.jsonl")
        assert code == EXIT_IO and out == ""

    def test_invalid_input_writes_nothing(self, fixture_dir):
        bad = fixture_dir / "bad.jsonl"
        bad.write_text('{"pair_id": "p", "story_a_id": "a", "story_b_id": "b", "gold": {"empathy": 9}}\n')
        target = fixture_dir / "report.md"
        code, out, _ = call("aspect-corr", "--pairs", str(bad), "--out", str(target))
        assert code == EXIT_INVALID and out == "" and not target.exists()

    def test_insufficient_data(self, fixture_dir):
        code, _, err = call("evaluate", "--pairs", f"{fixture_dir}/train.jsonl", "--preds",
                            f"{fixture_dir}/preds.jsonl", "--aspect", "empathy", "--swap", "mean")
        assert code == EXIT_INSUFFICIENT and "insufficient" in err

    def test_quiet_suppresses_warnings(self, fixture_dir):
        preds = fixture_dir / "extra.jsonl"
        preds.write_text((fixture_dir / "preds.jsonl").read_text()
                         + '{"pair_id": "nowhere", "aspect": "empathy", "variant": "standard", "score": 2.0}\n')
        argv = ["evaluate", "--pairs", f"{fixture_dir}/pairs.jsonl", "--preds", str(preds),
                "--aspect", "empathy", "--swap", "standard"]
        code, _, err = call(*argv)
        assert code == 0 and "warning" in err and "nowhere" in err
        code, _, err = call(*argv, "--quiet")
        assert code == 0 and err == ""


def test_console_script(fixture_dir):
    proc = subprocess.run([sys.executable, "-m", "empath_eval.cli", "aspect-corr", "--pairs",
                           f"{fixture_dir}/pairs.jsonl", "--format", "json"],
                          capture_output=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["kind"] == "aspect-corr"
    proc = subprocess.run(["empath-eval", "--help"], capture_output=True, check=False)
    assert proc.returncode == 0 and b"diagnose" in proc.stdout
