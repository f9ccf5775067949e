from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from empath_eval import ingest
from empath_eval.core import EmbeddingVector, PredictionRecord
from empath_eval.errors import ParseError
from empath_eval.synthetic import recoverable_task

PAIR = {"pair_id": "p1", "story_a_id": "a", "story_b_id": "b", "gold": {"empathy": 3.0, "event": 2.5}}


def jsonl(*rows) -> str:
    return "".join((json.dumps(r) if not isinstance(r, str) else r) + "\n" for r in rows)


class TestPairs:
    def test_roundtrip(self):
        _, pairs = recoverable_task(seed=1, n_train=5, n_dev=3)
        again = ingest.parse_pairs(ingest.dump_pairs(pairs))
        assert not again.errors
        assert [ingest.pair_to_dict(p) for p in again] == [ingest.pair_to_dict(p) for p in pairs]

    def test_errors_are_collected_with_line_numbers(self):
        text = jsonl(PAIR, "{broken", dict(PAIR, pair_id="p2", gold={"empathy": 7}),
                     dict(PAIR), dict(PAIR, pair_id="p3", gold={"kindness": 2}))
        ps = ingest.parse_pairs(text)
        assert len(ps) == 1
        kinds = {(e.line, e.kind) for e in ps.errors}
        assert kinds == {(2, "parse"), (3, "range"), (4, "duplicate"), (5, "schema")}
        with pytest.raises(ParseError):
            ps.raise_for_errors()

    def test_blank_lines_skipped(self):
        ps = ingest.parse_pairs("\n" + jsonl(PAIR) + "\n\n")
        assert len(ps) == 1 and not ps.errors

    def test_csv(self):
        text = "pair_id,story_a_id,story_b_id,empathy,event,split\np1,a,b,3.0,,train\n"
        ps = ingest.parse_pairs(text, "csv")
        assert ps["p1"].gold == {"empathy": 3.0}
        assert ps["p1"].split == "train"


class TestAnnotations:
    def test_discrete_needs_label(self):
        text = ("annotator_id,pair_id,aspect,setting,value\n"
                "a,p1,empathy,discrete,v\n"
                "a,p2,empathy,discrete,3\n"
                "a,p1,empathy,summary,V\n"
                "a,p3,empathy,summary,2.5\n")
        ann = ingest.parse_annotations(text)
        assert [r.value for r in ann.records] == ["V", 2.5]
        assert [(e.line, e.kind) for e in ann.errors] == [(3, "type"), (4, "type")]

    def test_roundtrip(self):
        text = "annotator_id,pair_id,aspect,setting,value\na,p1,empathy,summary,2.5\nb,p1,empathy,discrete,M\n"
        ann = ingest.parse_annotations(text)
        assert ingest.parse_annotations(ingest.dump_annotations_csv(ann.records)).records == ann.records


class TestPredictions:
    def test_defaults_and_probs(self):
        text = jsonl({"pair_id": "p", "aspect": "empathy", "score": 2.0,
                      "probs": [0.1, 0.2, 0.3, 0.4]})
        ps = ingest.parse_predictions(text)
        rec = list(ps)[0]
        assert rec.variant == "standard" and rec.probs == (0.1, 0.2, 0.3, 0.4)

    def test_bad_probs_are_row_errors(self):
        text = jsonl({"pair_id": "p", "aspect": "empathy", "score": 2.0, "probs": [0.5, 0.5]},
                     {"pair_id": "q", "aspect": "empathy", "score": 2.0, "probs": [0.9, 0.9, 0, 0]})
        ps = ingest.parse_predictions(text)
        assert len(ps) == 0 and len(ps.errors) == 2

    def test_csv_prob_columns(self):
        text = ("pair_id,aspect,variant,score,prob_1,prob_2,prob_3,prob_4\n"
                "p,empathy,reverse,3.1,0.25,0.25,0.25,0.25\n"
                "q,empathy,,2.0,,,,\n")
        ps = ingest.parse_predictions(text, "csv")
        recs = {r.pair_id: r for r in ps}
        assert recs["p"].variant == "reverse" and recs["q"].probs is None

    def test_roundtrip(self):
        recs = [PredictionRecord("p", "empathy", "mean", 2.25, (0.1, 0.2, 0.3, 0.4), "m")]
        assert list(ingest.parse_predictions(ingest.dump_predictions(recs))) == recs


class TestEmbeddings:
    def test_binary_roundtrip_is_float32(self):
        vecs = [EmbeddingVector("s1", [0.1, 0.2, 0.3]), EmbeddingVector("s2", [1.0, -2.0, 3.5])]
        es = ingest.parse_embeddings(ingest.dump_embeddings_binary(vecs), "packed-binary")
        assert es.dim == 3
        assert np.array_equal(es["s1"], np.array([0.1, 0.2, 0.3], dtype=np.float32).astype(np.float64))

    def test_binary_nan_is_row_error(self):
        vecs = [EmbeddingVector("s1", [0.1, 0.2]), EmbeddingVector("s2", [1.0, 2.0])]
        data = bytearray(ingest.dump_embeddings_binary(vecs))
        data[-4:] = struct.pack("<f", float("nan"))
        es = ingest.parse_embeddings(bytes(data), "packed-binary")
        assert es.story_ids == ("s1",) and len(es.errors) == 1

    def test_binary_bad_magic(self):
        with pytest.raises(ParseError):
            ingest.parse_embeddings(b"NOPE" + b"\0" * 8, "packed-binary")

    def test_jsonl_dim_mismatch(self):
        text = jsonl({"story_id": "a", "values": [1, 2]}, {"story_id": "b", "values": [1, 2, 3]})
        es = ingest.parse_embeddings(text)
        assert es.story_ids == ("a",) and es.errors[0].line == 2

    def test_load_detects_binary(self, tmp_path):
        vecs = [EmbeddingVector("s1", [0.5, 0.25])]
        path = tmp_path / "e.anything"
        path.write_bytes(ingest.dump_embeddings_binary(vecs))
        assert ingest.load_embeddings(path).dim == 2
