from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from empath_eval import ingest
from empath_eval.core import AnnotationRecord, PredictionRecord
from empath_eval.synthetic import canonical_pairs, recoverable_task
from helpers import ACCEPTANCE_LINES, P_Y


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def canonical_train():
    return canonical_pairs(("train",), seed=0)


@pytest.fixture
def fixture_dir(tmp_path: Path) -> Path:
    """A small on-disk fixture suite covering every CLI input type."""
    emb, pairs = recoverable_task(seed=3, n_train=40, n_dev=12)
    (tmp_path / "pairs.jsonl").write_text(ingest.dump_pairs(pairs))
    (tmp_path / "emb.bin").write_bytes(ingest.dump_embeddings_binary(emb))
    (tmp_path / "emb.jsonl").write_text(ingest.dump_embeddings_jsonl(emb))

    rng = random.Random(5)
    recs = []
    for p in pairs:
        base = p.gold["empathy"]
        for variant in ("standard", "reverse"):
            score = min(4.0, max(1.0, base + rng.uniform(-1.5, 1.5)))
            raw = [rng.random() + 0.01 for _ in range(4)]
            probs = [x / sum(raw) for x in raw]
            recs.append(PredictionRecord(p.pair_id, "empathy", variant, score, tuple(probs)))
    (tmp_path / "preds.jsonl").write_text(ingest.dump_predictions(recs))

    train = canonical_pairs(("train",), seed=0)
    (tmp_path / "train.jsonl").write_text(ingest.dump_pairs(train))
    (tmp_path / "probs.jsonl").write_text(ingest.dump_predictions(
        PredictionRecord(p.pair_id, "empathy", "standard", 2.5, P_Y) for p in train))

    ann = []
    for k in range(8):
        pid = f"p{k:04d}"
        for j, (a, shift) in enumerate((("a1", 0.0), ("a2", 0.5), ("a3", -0.5), ("a4", 1.0))):
            v = min(4.0, max(1.0, 1.0 + (k % 7) * 0.5 + (shift if k % 3 else 0.0)))
            ann.append(AnnotationRecord(a, pid, "empathy", "summary", v))
            ann.append(AnnotationRecord(a, pid, "empathy", "full", min(4.0, v + 0.5)))
            ann.append(AnnotationRecord(a, pid, "empathy", "discrete", "VMN"[(k + (j == 3)) % 3]))
    (tmp_path / "ann.csv").write_text(ingest.dump_annotations_csv(ann))
    (tmp_path / "groups.json").write_text(json.dumps({"high": ["a2", "a4"], "low": ["a1", "a3"]}))
    (tmp_path / "batch.json").write_text(json.dumps({
        "u": [[1.0, 0.5, -0.2, 0.3], [0.1, -0.4, 0.9, 0.2], [0.7, 0.7, 0.1, -0.3]],
        "v": [[0.9, 0.4, 0.1, 0.2], [-0.5, 0.3, 0.2, 0.8], [0.2, 0.6, -0.4, 0.1]],
        "labels": [3.5, 1.5, 2.0],
    }))
    return tmp_path
