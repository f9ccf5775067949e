"""Readers and writers for pair, annotation, prediction and embedding files.

Every parser is total: each non-blank input row becomes either a record
or a :class:`~empath_eval.core.RowError`, so
``len(result) + len(result.errors)`` equals the number of input rows.
Call ``raise_for_errors()`` on the result for fail-fast behaviour.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from collections.abc import Callable, Iterable, Iterator
from pathlib import Path
from typing import IO, Any, Optional, Union

import numpy as np

from .core import (
    ASPECTS,
    CLASSES,
    AnnotationRecord,
    AnnotationSet,
    EmbeddingSet,
    EmbeddingVector,
    PairSet,
    PredictionRecord,
    PredictionSet,
    RowError,
    StoryPair,
)
from .errors import (
    DimensionError,
    NonFiniteError,
    ParseError,
    SchemaError,
    ValidationError,
    ValueTypeError,
)

Stream = Union[str, bytes, IO[str], IO[bytes]]

EMBEDDING_MAGIC = b"EMBV1"
FORMATS = ("jsonl", "csv")

PAIR_TEXT_FIELDS = ("full_a", "full_b", "summary_a", "summary_b")
PAIR_META_FIELDS = ("split", "language", "theme", "reason")


def _read_bytes(stream: Stream) -> bytes:
    if isinstance(stream, bytes):
        return stream
    if isinstance(stream, str):
        return stream.encode("utf-8")
    data = stream.read()
    return data.encode("utf-8") if isinstance(data, str) else data


def _read_text(stream: Stream) -> str:
    data = _read_bytes(stream)
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8: {exc}") from None


def _jsonl_rows(text: str) -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, decoded_object_or_exception)`` for non-blank lines."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, ParseError(f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield lineno, ParseError("expected a JSON object")
            continue
        yield lineno, obj


def _csv_rows(text: str, required: Iterable[str]) -> Iterator[tuple[int, Any]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"CSV header lacks required columns: {', '.join(missing)}")
    reader.fieldnames = header
    for row in reader:
        lineno = reader.line_num
        if None in row:
            yield lineno, ParseError("row has more cells than the header")
            continue
        if all((v is None or not v.strip()) for v in row.values()):
            continue
        yield lineno, {k: (v.strip() if isinstance(v, str) else v) for k, v in row.items()}


def _rows(text: str, fmt: str, required: Iterable[str]) -> Iterator[tuple[int, Any]]:
    if fmt == "jsonl":
        return _jsonl_rows(text)
    if fmt == "csv":
        return _csv_rows(text, required)
    raise SchemaError(f"unsupported format {fmt!r}; expected one of {FORMATS}")


def _collect(rows: Iterator[tuple[int, Any]], build: Callable[[dict], Any],
             key: Callable[[Any], Any]) -> tuple[list, list[RowError]]:
    records, errors, seen = [], [], {}
    for lineno, row in rows:
        if isinstance(row, ValidationError):
            errors.append(RowError.from_exception(lineno, row))
            continue
        try:
            rec = build(row)
        except ValidationError as exc:
            errors.append(RowError.from_exception(lineno, exc))
            continue
        except (TypeError, ValueError) as exc:
            errors.append(RowError(lineno, "parse", str(exc)))
            continue
        k = key(rec)
        if k in seen:
            errors.append(RowError(lineno, "duplicate",
                                   f"duplicate key {k!r} (first seen on line {seen[k]})"))
            continue
        seen[k] = lineno
        records.append(rec)
    return records, errors


def _require(row: dict, name: str) -> Any:
    value = row.get(name)
    if value is None or (isinstance(value, str) and not value):
        raise SchemaError(f"missing required field {name!r}")
    return value


def _ident(row: dict, name: str) -> str:
    value = _require(row, name)
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ParseError(f"field {name!r} must be a string, got {value!r}")
    return str(value)


def _optional_text(row: dict, name: str) -> Optional[str]:
    value = row.get(name)
    if value is None or value == "":
        return None
    if not isinstance(value, str):
        raise ParseError(f"field {name!r} must be a string")
    return value


def _number(value: Any, what: str) -> float:
    if isinstance(value, bool):
        raise ParseError(f"{what} must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ParseError(f"{what} must be a number, got {value!r}") from None
    raise ParseError(f"{what} must be a number, got {value!r}")


# ---------------------------------------------------------------------------
# pairs


def _build_pair(row: dict, csv_mode: bool) -> StoryPair:
    if csv_mode:
        gold_raw = {a: row[a] for a in ASPECTS if row.get(a) not in (None, "")}
    else:
        gold_raw = row.get("gold", {})
        if not isinstance(gold_raw, dict):
            raise ParseError("field 'gold' must be an object")
        unknown = [k for k in gold_raw if k not in ASPECTS]
        if unknown:
            raise SchemaError(f"unknown aspect(s) in gold: {', '.join(map(str, unknown))}")
    gold = {a: _number(v, f"gold {a}") for a, v in gold_raw.items() if v is not None}
    kwargs = {f: _optional_text(row, f) for f in PAIR_TEXT_FIELDS + PAIR_META_FIELDS}
    if kwargs["language"] is None:
        kwargs["language"] = "en"
    return StoryPair(
        pair_id=_ident(row, "pair_id"),
        story_a_id=_ident(row, "story_a_id"),
        story_b_id=_ident(row, "story_b_id"),
        gold=gold,
        **kwargs,
    )


def parse_pairs(stream: Stream, format: str = "jsonl") -> PairSet:
    text = _read_text(stream)
    rows = _rows(text, format, ("pair_id", "story_a_id", "story_b_id"))
    records, errors = _collect(rows, lambda r: _build_pair(r, format == "csv"),
                               lambda p: p.pair_id)
    return PairSet(records, errors)


def pair_to_dict(pair: StoryPair) -> dict:
    out: dict[str, Any] = {
        "pair_id": pair.pair_id,
        "story_a_id": pair.story_a_id,
        "story_b_id": pair.story_b_id,
    }
    for f in PAIR_TEXT_FIELDS:
        if getattr(pair, f) is not None:
            out[f] = getattr(pair, f)
    out["gold"] = {a: pair.gold[a] for a in ASPECTS if a in pair.gold}
    for f in PAIR_META_FIELDS:
        if getattr(pair, f) is not None:
            out[f] = getattr(pair, f)
    return out


def dump_pairs(pairs: Iterable[StoryPair]) -> str:
    return "".join(json.dumps(pair_to_dict(p), ensure_ascii=False) + "\n" for p in pairs)


# ---------------------------------------------------------------------------
# annotations


def _build_annotation(row: dict) -> AnnotationRecord:
    setting = _ident(row, "setting")
    raw = _require(row, "value")
    if setting == "discrete":
        if isinstance(raw, bool) or not isinstance(raw, str):
            raise ValueTypeError(f"discrete setting expects a class label V/M/N, got {raw!r}")
        try:
            float(raw)
        except ValueError:
            value: Any = raw.strip().upper()
        else:
            raise ValueTypeError(f"discrete setting expects a class label V/M/N, got {raw!r}")
    elif isinstance(raw, str):
        try:
            value = float(raw)
        except ValueError:
            raise ValueTypeError(
                f"{setting} setting expects a real score, got {raw!r}") from None
    else:
        value = _number(raw, "value")
    return AnnotationRecord(
        annotator_id=_ident(row, "annotator_id"),
        pair_id=_ident(row, "pair_id"),
        aspect=_ident(row, "aspect"),
        setting=setting,
        value=value,
    )


def parse_annotations(stream: Stream, format: str = "csv") -> AnnotationSet:
    text = _read_text(stream)
    rows = _rows(text, format, ("annotator_id", "pair_id", "aspect", "setting", "value"))
    records, errors = _collect(rows, _build_annotation, lambda r: r.key)
    return AnnotationSet(records, errors)


def dump_annotations_csv(annotations: Iterable[AnnotationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["annotator_id", "pair_id", "aspect", "setting", "value"])
    for r in annotations:
        writer.writerow([r.annotator_id, r.pair_id, r.aspect, r.setting,
                         r.value if isinstance(r.value, str) else repr(r.value)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# predictions

PROB_COLUMNS = tuple(f"prob_{c}" for c in CLASSES)


def _build_prediction(row: dict, csv_mode: bool) -> PredictionRecord:
    if csv_mode:
        cells = [row.get(c) for c in PROB_COLUMNS]
        present = [c not in (None, "") for c in cells]
        if any(present) and not all(present):
            raise SchemaError(f"give all of {', '.join(PROB_COLUMNS)} or none")
        probs = [_number(c, "probability") for c in cells] if all(present) else None
    else:
        probs = row.get("probs")
        if probs is not None:
            if not isinstance(probs, list):
                raise ParseError("field 'probs' must be an array")
            probs = [_number(p, "probability") for p in probs]
    return PredictionRecord(
        pair_id=_ident(row, "pair_id"),
        aspect=_ident(row, "aspect"),
        variant=_ident(row, "variant") if row.get("variant") not in (None, "") else "standard",
        score=_number(_require(row, "score"), "score"),
        probs=probs,
        source=_optional_text(row, "source") or "",
    )


def parse_predictions(stream: Stream, format: str = "jsonl") -> PredictionSet:
    text = _read_text(stream)
    rows = _rows(text, format, ("pair_id", "aspect", "score"))
    records, errors = _collect(rows, lambda r: _build_prediction(r, format == "csv"),
                               lambda r: r.key)
    return PredictionSet(records, errors)


def prediction_to_dict(rec: PredictionRecord) -> dict:
    out: dict[str, Any] = {
        "pair_id": rec.pair_id,
        "aspect": rec.aspect,
        "variant": rec.variant,
        "score": rec.score,
    }
    if rec.probs is not None:
        out["probs"] = list(rec.probs)
    if rec.source:
        out["source"] = rec.source
    return out


def dump_predictions(preds: Iterable[PredictionRecord]) -> str:
    return "".join(json.dumps(prediction_to_dict(r)) + "\n" for r in preds)


# ---------------------------------------------------------------------------
# embeddings

_U32 = struct.Struct("<I")


def _build_embedding(row: dict) -> EmbeddingVector:
    values = _require(row, "values")
    if not isinstance(values, list):
        raise ParseError("field 'values' must be an array")
    arr = [_number(v, "embedding component") for v in values]
    if not all(math.isfinite(v) for v in arr):
        raise NonFiniteError("embedding has NaN or infinite components")
    return EmbeddingVector(_ident(row, "story_id"), np.array(arr, dtype=np.float64))


def _finish_embeddings(vectors: list[EmbeddingVector], errors: list[RowError],
                       lines: list[int], dim: Optional[int]) -> EmbeddingSet:
    kept = []
    for line, vec in zip(lines, vectors):
        if dim is None:
            dim = vec.dim
        if vec.dim != dim:
            errors.append(RowError(line, "dimension",
                                   f"embedding {vec.story_id!r} has dim {vec.dim}, expected {dim}"))
            continue
        kept.append(vec)
    errors.sort(key=lambda e: e.line)
    return EmbeddingSet(kept, dim=dim, errors=errors)


def _parse_embeddings_jsonl(text: str) -> EmbeddingSet:
    vectors, errors, lines, seen = [], [], [], set()
    for lineno, row in _jsonl_rows(text):
        if isinstance(row, ValidationError):
            errors.append(RowError.from_exception(lineno, row))
            continue
        try:
            vec = _build_embedding(row)
        except ValidationError as exc:
            errors.append(RowError.from_exception(lineno, exc))
            continue
        if vec.story_id in seen:
            errors.append(RowError(lineno, "duplicate", f"duplicate story_id {vec.story_id!r}"))
            continue
        seen.add(vec.story_id)
        vectors.append(vec)
        lines.append(lineno)
    return _finish_embeddings(vectors, errors, lines, None)


def _parse_embeddings_binary(data: bytes) -> EmbeddingSet:
    if not data.startswith(EMBEDDING_MAGIC):
        raise ParseError("packed embeddings must start with magic bytes 'EMBV1'")
    pos = len(EMBEDDING_MAGIC)
    if len(data) < pos + 4:
        raise ParseError("truncated header: missing dim")
    (dim,) = _U32.unpack_from(data, pos)
    pos += 4
    if dim == 0:
        raise DimensionError("packed embeddings declare dim 0")
    vec_bytes = 4 * dim
    vectors, errors, lines, seen = [], [], [], set()
    index = 0
    while pos < len(data):
        index += 1
        if len(data) < pos + 4:
            raise ParseError(f"record {index}: truncated id length")
        (id_len,) = _U32.unpack_from(data, pos)
        pos += 4
        end = pos + id_len + vec_bytes
        if len(data) < end:
            raise ParseError(f"record {index}: truncated record")
        try:
            story_id = data[pos:pos + id_len].decode("utf-8")
        except UnicodeDecodeError:
            errors.append(RowError(index, "parse", "story id is not valid UTF-8"))
            pos = end
            continue
        raw = np.frombuffer(data, dtype="<f4", count=dim, offset=pos + id_len)
        pos = end
        if not np.all(np.isfinite(raw)):
            errors.append(RowError(index, "validity",
                                   f"embedding {story_id!r} has NaN or infinite components"))
            continue
        if story_id in seen:
            errors.append(RowError(index, "duplicate", f"duplicate story_id {story_id!r}"))
            continue
        seen.add(story_id)
        vectors.append(EmbeddingVector(story_id, raw.astype(np.float64)))
        lines.append(index)
    return _finish_embeddings(vectors, errors, lines, dim)


def parse_embeddings(stream: Stream, format: str = "jsonl") -> EmbeddingSet:
    """Parse ``jsonl`` rows ``{"story_id", "values"}`` or the ``packed-binary`` layout.

    Binary values are float32; they are widened to float64 in memory, which
    is exact, so writing them back reproduces the original bytes.
    """
    if format == "jsonl":
        return _parse_embeddings_jsonl(_read_text(stream))
    if format in ("packed-binary", "binary"):
        return _parse_embeddings_binary(_read_bytes(stream))
    raise SchemaError(f"unsupported embedding format {format!r}")


def dump_embeddings_binary(embeddings: Iterable[EmbeddingVector],
                           dim: Optional[int] = None) -> bytes:
    """Pack vectors as float32 records; values not representable in float32 are rounded."""
    vectors = list(embeddings)
    if dim is None:
        if not vectors:
            raise DimensionError("cannot infer dim of an empty embedding set")
        dim = vectors[0].dim
    parts = [EMBEDDING_MAGIC, _U32.pack(dim)]
    for vec in vectors:
        if vec.dim != dim:
            raise DimensionError(f"embedding {vec.story_id!r} has dim {vec.dim}, expected {dim}")
        sid = vec.story_id.encode("utf-8")
        parts.append(_U32.pack(len(sid)))
        parts.append(sid)
        parts.append(np.asarray(vec.values, dtype="<f4").tobytes())
    return b"".join(parts)


def dump_embeddings_jsonl(embeddings: Iterable[EmbeddingVector]) -> str:
    return "".join(json.dumps({"story_id": v.story_id, "values": v.values.tolist()}) + "\n"
                   for v in embeddings)


# ---------------------------------------------------------------------------
# path helpers used by the CLI


def detect_format(path: Union[str, Path]) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def load_pairs(path: Union[str, Path]) -> PairSet:
    return parse_pairs(Path(path).read_bytes(), detect_format(path))


def load_annotations(path: Union[str, Path]) -> AnnotationSet:
    return parse_annotations(Path(path).read_bytes(), detect_format(path))


def load_predictions(path: Union[str, Path]) -> PredictionSet:
    return parse_predictions(Path(path).read_bytes(), detect_format(path))


def load_embeddings(path: Union[str, Path]) -> EmbeddingSet:
    data = Path(path).read_bytes()
    fmt = "packed-binary" if data.startswith(EMBEDDING_MAGIC) else "jsonl"
    return parse_embeddings(data, fmt)


__all__ = [
    "EMBEDDING_MAGIC",
    "detect_format",
    "dump_annotations_csv",
    "dump_embeddings_binary",
    "dump_embeddings_jsonl",
    "dump_pairs",
    "dump_predictions",
    "load_annotations",
    "load_embeddings",
    "load_pairs",
    "load_predictions",
    "pair_to_dict",
    "parse_annotations",
    "parse_embeddings",
    "parse_pairs",
    "parse_predictions",
    "prediction_to_dict",
]
