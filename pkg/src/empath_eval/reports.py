"""Rendering of reports as markdown, CSV or JSON, plus run manifests.

Every report type exposes ``to_dict``; this module adds a tabular view
for the text formats. JSON output is an envelope holding the report kind,
the run manifest and the report body, with undefined values as null.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .agreement import METRICS as AGREEMENT_METRICS
from .agreement import AgreementReport
from .core import CLASSES
from .diagnostics import ConfusionMatrix, ProbabilityProfile, SevereErrorTable
from .errors import SchemaError
from .losses import LossResult
from .metrics import AspectCorrelationMatrix, EvalReport
from .trainer import TrainHistory

FORMATS = ("md", "csv", "json")
TOOL_NAME = "empath-eval"


def _version() -> str:
    from . import __version__
    return __version__


# ---------------------------------------------------------------------------
# report wrappers for commands without a single domain type


@dataclass(frozen=True)
class AgreementTable:
    rows: tuple[AgreementReport, ...]
    reference_rows: tuple[AgreementReport, ...] = ()

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows],
                "reference_rows": [r.to_dict() for r in self.reference_rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "AgreementTable":
        return cls(tuple(AgreementReport.from_dict(r) for r in d["rows"]),
                   tuple(AgreementReport.from_dict(r) for r in d.get("reference_rows", ())))


@dataclass(frozen=True)
class LossEvalReport:
    loss: str
    value: float
    grad_u: np.ndarray
    grad_v: np.ndarray
    n: int
    config: dict = field(default_factory=dict)
    grad_check_error: Optional[float] = None

    @classmethod
    def from_result(cls, loss: str, result: LossResult, config: dict,
                    grad_check_error: Optional[float] = None) -> "LossEvalReport":
        return cls(loss, result.value, result.grad_u, result.grad_v, result.grad_u.shape[0],
                   dict(config), grad_check_error)

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "n": self.n,
            "value": _clean(self.value),
            "grad_u": self.grad_u.tolist(),
            "grad_v": self.grad_v.tolist(),
            "config": dict(self.config),
            "grad_check_error": _clean(self.grad_check_error),
        }


REPORT_KINDS = {
    EvalReport: "evaluate",
    AgreementTable: "agreement",
    AspectCorrelationMatrix: "aspect-corr",
    SevereErrorTable: "diagnose-errors",
    ProbabilityProfile: "diagnose-bottleneck",
    ConfusionMatrix: "diagnose-confusion",
    TrainHistory: "train-head",
    LossEvalReport: "loss-eval",
}


def report_kind(report: Any) -> str:
    for cls, kind in REPORT_KINDS.items():
        if isinstance(report, cls):
            return kind
    raise SchemaError(f"cannot render object of type {type(report).__name__}")


# ---------------------------------------------------------------------------
# manifest


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class RunManifest:
    """What produced a report: command, resolved config, input digests, version, seed.

    Nothing time- or host-dependent goes in, so identical inputs give an
    identical manifest and hash.
    """

    command: str
    config: Mapping[str, Any]
    inputs: Mapping[str, str]
    version: str
    seed: Optional[int] = None

    def body(self) -> dict:
        return {
            "tool": TOOL_NAME,
            "command": self.command,
            "config": _jsonable(self.config),
            "inputs": dict(sorted(self.inputs.items())),
            "version": self.version,
            "seed": self.seed,
        }

    @property
    def hash(self) -> str:
        return sha256_bytes(canonical_json(self.body()).encode())

    def to_dict(self) -> dict:
        out = self.body()
        out["manifest_hash"] = self.hash
        return out

    @classmethod
    def build(cls, command: str, config: Mapping[str, Any], inputs: Mapping[str, bytes],
              seed: Optional[int] = None) -> "RunManifest":
        return cls(command, dict(config), {k: sha256_bytes(v) for k, v in inputs.items()},
                   _version(), seed)


# ---------------------------------------------------------------------------
# tabular views


@dataclass(frozen=True)
class Table:
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]


def _clean(v: Any) -> Any:
    if v is None:
        return None
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    return v


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    return _clean(obj)


EVAL_HEADERS = ("aspect", "r", "ρ", "MSE", "Acc", "Prec", "Recall", "F1-macro", "F1-weighted", "n")


def _eval_tables(r: EvalReport) -> list[Table]:
    row = (r.aspect,) + tuple(getattr(r, k) for k in EvalReport.METRIC_COLUMNS) + (r.n,)
    return [Table(f"Evaluation ({r.binning} binning, threshold {r.threshold})", EVAL_HEADERS, (row,))]


def _agreement_tables(t: AgreementTable) -> list[Table]:
    cols = ("group", "aspect", "setting", "n_items") + AGREEMENT_METRICS
    tables = [Table("Agreement", cols, tuple(
        (r.group_name, r.aspect, r.setting, r.n_items) + tuple(r.metric_values[m] for m in AGREEMENT_METRICS)
        for r in t.rows))]
    if t.reference_rows:
        tables.append(Table("Consensus vs reference", cols, tuple(
            (r.group_name, r.aspect, r.setting, r.n_items)
            + tuple(r.metric_values[m] for m in AGREEMENT_METRICS)
            for r in t.reference_rows)))
    return tables


def _aspect_corr_tables(m: AspectCorrelationMatrix) -> list[Table]:
    out = []
    for name, mat in (("Pearson", m.pearson), ("Spearman", m.spearman)):
        out.append(Table(f"{name} between aspects (n={m.n})", ("aspect",) + m.aspects,
                         tuple((a,) + tuple(float(x) for x in mat[i]) for i, a in enumerate(m.aspects))))
    return out


def _severe_tables(t: SevereErrorTable) -> list[Table]:
    rows = tuple((r.gold, r.split_count, r.error_count) for r in t.rows)
    rows += (("total", t.total, t.total_errors),)
    return [Table(f"Severe errors (|pred - gold| > {t.delta}, {t.aspect})",
                  ("gold", "split_count", "error_count"), rows)]


def _profile_tables(p: ProbabilityProfile) -> list[Table]:
    cols = ("group",) + tuple(f"P({c})" for c in CLASSES) + ("n", "max_abs", "tv", "kl")
    rows = [("P(Y)",) + tuple(p.empirical) + (None, None, None, None)]
    for g in p.groups:
        probs = g.profile if g.profile is not None else (None,) * len(CLASSES)
        rows.append((f"y_gold={g.gold_class}",) + tuple(probs) + (g.n, g.max_abs, g.tv, g.kl))
    return [Table(f"Probability profile ({p.aspect}, {p.rounding} rounding)", cols, tuple(rows))]


def _confusion_tables(c: ConfusionMatrix) -> list[Table]:
    cols = ("gold \\ pred",) + tuple(str(k) for k in CLASSES)
    rows = tuple((str(CLASSES[i]),) + tuple(int(x) for x in c.counts[i]) for i in range(len(CLASSES)))
    return [Table(f"Confusion matrix ({c.mode}, {c.aspect})", cols, rows)]


def _history_tables(h: TrainHistory) -> list[Table]:
    rows = [(0, None, h.initial_dev_spearman, h.initial_dev_pearson)]
    rows += [(e.epoch, e.train_loss, e.dev_spearman, e.dev_pearson) for e in h.epochs]
    return [Table(f"Training ({h.config.loss_kind}, train {h.train_aspect}, eval {h.eval_aspect}, "
                  f"best epoch {h.best_epoch})",
                  ("epoch", "train_loss", "dev_spearman", "dev_pearson"), tuple(rows))]


def _loss_tables(r: LossEvalReport) -> list[Table]:
    return [Table(f"Loss ({r.loss})", ("loss", "n", "value", "grad_check_error"),
                  ((r.loss, r.n, r.value, r.grad_check_error),))]


_TABLES = {
    "evaluate": _eval_tables,
    "agreement": _agreement_tables,
    "aspect-corr": _aspect_corr_tables,
    "diagnose-errors": _severe_tables,
    "diagnose-bottleneck": _profile_tables,
    "diagnose-confusion": _confusion_tables,
    "train-head": _history_tables,
    "loss-eval": _loss_tables,
}


def tables(report: Any) -> list[Table]:
    return _TABLES[report_kind(report)](report)


# ---------------------------------------------------------------------------
# renderers


def _md_cell(v: Any) -> str:
    v = _clean(v)
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _csv_cell(v: Any) -> str:
    v = _clean(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _render_md(tabs: Sequence[Table], manifest: Optional[RunManifest]) -> str:
    parts = []
    for t in tabs:
        cells = [[_md_cell(v) for v in row] for row in t.rows]
        widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(t.columns)]
        lines = [f"### {t.title}", ""]
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(t.columns, widths)) + " |")
        lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
        for r in cells:
            lines.append("| " + " | ".join(c.rjust(w) for c, w in zip(r, widths)) + " |")
        parts.append("\n".join(lines))
    if manifest is not None:
        parts.append(f"<!-- manifest {manifest.hash} {manifest.command} v{manifest.version} -->")
    return "\n\n".join(parts) + "\n"


def _render_csv(tabs: Sequence[Table], manifest: Optional[RunManifest]) -> str:
    buf = io.StringIO()
    if manifest is not None:
        buf.write(f"# manifest {manifest.hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    multi = len(tabs) > 1
    for t in tabs:
        w.writerow((("table",) if multi else ()) + t.columns)
        for row in t.rows:
            w.writerow(((t.title,) if multi else ()) + tuple(_csv_cell(v) for v in row))
    return buf.getvalue()


def report_document(report: Any, manifest: Optional[RunManifest] = None) -> dict:
    doc = {"kind": report_kind(report), "report": _jsonable(report.to_dict())}
    if manifest is not None:
        doc["manifest"] = manifest.to_dict()
    return doc


def render_report(report: Any, fmt: str = "md", manifest: Optional[RunManifest] = None) -> bytes:
    """Serialize ``report`` as markdown tables, flat CSV, or a JSON envelope."""
    if fmt not in FORMATS:
        raise SchemaError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt == "json":
        text = json.dumps(report_document(report, manifest), indent=2, sort_keys=True,
                          ensure_ascii=False, allow_nan=False) + "\n"
    elif fmt == "csv":
        text = _render_csv(tables(report), manifest)
    else:
        text = _render_md(tables(report), manifest)
    return text.encode("utf-8")


_LOADERS = {
    "evaluate": EvalReport.from_dict,
    "agreement": AgreementTable.from_dict,
    "aspect-corr": AspectCorrelationMatrix.from_dict,
    "diagnose-errors": SevereErrorTable.from_dict,
    "diagnose-bottleneck": ProbabilityProfile.from_dict,
    "train-head": TrainHistory.from_dict,
}


def load_report(data: bytes | str) -> Any:
    """Inverse of JSON rendering for the report kinds that have a domain type."""
    doc = json.loads(data)
    try:
        loader = _LOADERS[doc["kind"]]
    except KeyError:
        raise SchemaError(f"cannot load report kind {doc.get('kind')!r}") from None
    return loader(doc["report"])


def load_schema(kind: str) -> dict:
    """The JSON schema shipped for a report kind (or ``prediction`` / ``manifest``)."""
    from importlib import resources
    try:
        text = resources.files("empath_eval").joinpath("schemas", f"{kind}.schema.json").read_text()
    except FileNotFoundError:
        raise SchemaError(f"no schema for {kind!r}") from None
    return json.loads(text)
