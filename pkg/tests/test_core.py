from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from empath_eval.core import (
    AnnotationRecord,
    AnnotationSet,
    AspectScores,
    EmbeddingSet,
    EmbeddingVector,
    EvalConfig,
    PairSet,
    PredictionRecord,
    StoryPair,
    bin_label,
    check_probs,
    grid_bucket,
    label_histogram,
    round_score,
    score_to_class,
)
from empath_eval.errors import (
    DimensionError,
    DuplicateError,
    MissingEmbeddingError,
    NonFiniteError,
    NormalizationError,
    RangeError,
    SchemaError,
    ShapeError,
    ValueTypeError,
)

scores = st.floats(min_value=1.0, max_value=4.0, allow_nan=False)


class TestConventions:
    def test_bin_label_is_strict(self):
        assert bin_label(2.5) == 0
        assert bin_label(2.6) == 1
        assert bin_label(1.0) == 0
        assert bin_label(3.0, threshold=3.0) == 0

    def test_bin_label_rejects_nan(self):
        with pytest.raises(NonFiniteError):
            bin_label(math.nan)

    @pytest.mark.parametrize("score,down,up", [
        (1.5, 1, 2), (2.5, 2, 3), (3.5, 3, 4), (1.0, 1, 1), (2.49, 2, 2), (2.51, 3, 3), (4.0, 4, 4),
    ])
    def test_rounding_modes(self, score, down, up):
        assert round_score(score, "half-down") == down
        assert round_score(score, "half-up") == up

    def test_nearest_even(self):
        assert round_score(2.5, "nearest-even") == 2
        assert round_score(3.5, "nearest-even") == 4

    def test_rounding_range_and_mode(self):
        with pytest.raises(RangeError):
            round_score(0.5)
        with pytest.raises(SchemaError):
            round_score(2.0, "banker")

    @given(scores)
    def test_half_down_is_nearest_integer(self, s):
        r = round_score(s)
        assert abs(r - s) <= 0.5
        if abs(r - s) == 0.5:
            assert r < s

    @given(scores)
    def test_grid_bucket_nearest(self, s):
        b = grid_bucket(s)
        assert abs(b - s) <= 0.25
        assert (2 * b).is_integer()

    def test_score_to_class_modes(self):
        assert score_to_class(2.7, "threshold") == 1
        assert score_to_class(2.7, "int") == 2
        assert score_to_class(2.7, "round") == 3
        assert score_to_class(-1.0, "round") == 1
        assert score_to_class(9.0, "int") == 4

    def test_eval_config_validation(self):
        with pytest.raises(RangeError):
            EvalConfig(bin_threshold=4.0)
        with pytest.raises(SchemaError):
            EvalConfig(rounding="up")
        assert EvalConfig(binning="round").class_labels() == (1, 2, 3, 4)
        assert EvalConfig().to_dict()["bin_threshold"] == 2.5


class TestPairs:
    def test_aspect_scores_range(self):
        with pytest.raises(RangeError):
            AspectScores(empathy=4.5)
        with pytest.raises(SchemaError):
            AspectScores(kindness=2.0)
        assert dict(AspectScores(empathy=2)) == {"empathy": 2.0}

    def test_pair_text_both_or_neither(self):
        with pytest.raises(SchemaError):
            StoryPair("p", "a", "b", {"empathy": 2.0}, full_a="text")
        pair = StoryPair("p", "a", "b", {"empathy": 2.0}, full_a="x", full_b="y")
        assert pair.gold["empathy"] == 2.0

    def test_pairset_duplicates_and_select(self):
        a = StoryPair("p1", "a", "b", {"empathy": 2.0}, split="train")
        b = StoryPair("p2", "c", "d", {"empathy": 3.0}, split="dev")
        ps = PairSet([a, b])
        assert len(ps.select("dev")) == 1
        assert ps.splits == {"train": 1, "dev": 1}
        with pytest.raises(DuplicateError):
            PairSet([a, a])

    def test_label_histogram_flags_off_grid(self):
        ps = PairSet(StoryPair(f"p{i}", "a", "b", {"empathy": g}) for i, g in enumerate([1.0, 2.5, 2.7, 4.0]))
        h = label_histogram(ps, "empathy")
        assert h.counts[2.5] == 1 and h.other == 1 and h.flagged and h.total == 4


class TestAnnotations:
    def test_value_types(self):
        with pytest.raises(ValueTypeError):
            AnnotationRecord("a", "p", "empathy", "discrete", 2.0)
        with pytest.raises(ValueTypeError):
            AnnotationRecord("a", "p", "empathy", "summary", "V")
        with pytest.raises(RangeError):
            AnnotationRecord("a", "p", "empathy", "summary", 5.0)

    def test_combined_concatenates_settings(self):
        ann = AnnotationSet([
            AnnotationRecord("a", "p1", "empathy", "summary", 2.0),
            AnnotationRecord("a", "p1", "empathy", "full", 3.0),
        ])
        assert ann.ratings("empathy", "combined") == {"a": {("summary", "p1"): 2.0, ("full", "p1"): 3.0}}

    def test_duplicate_annotation(self):
        rec = AnnotationRecord("a", "p1", "empathy", "summary", 2.0)
        with pytest.raises(DuplicateError):
            AnnotationSet([rec, rec])


class TestPredictions:
    def test_probs_renormalized_within_tolerance(self):
        probs = check_probs([0.25, 0.25, 0.25, 0.2500005])
        assert math.isclose(sum(probs), 1.0, abs_tol=1e-15)

    def test_probs_errors(self):
        with pytest.raises(ShapeError):
            check_probs([0.5, 0.5])
        with pytest.raises(NormalizationError):
            check_probs([0.5, 0.5, 0.5, 0.5])
        with pytest.raises(NormalizationError):
            check_probs([1.2, -0.2, 0.0, 0.0])

    def test_variant_validated(self):
        with pytest.raises(SchemaError):
            PredictionRecord("p", "empathy", "sideways", 2.0)


class TestEmbeddings:
    def test_lookup_and_dims(self):
        es = EmbeddingSet([EmbeddingVector("a", np.ones(3)), EmbeddingVector("b", np.zeros(3))])
        assert es.dim == 3
        with pytest.raises(MissingEmbeddingError):
            es["zzz"]
        with pytest.raises(DimensionError):
            EmbeddingSet([EmbeddingVector("a", np.ones(3)), EmbeddingVector("b", np.ones(4))])

    def test_vectors_are_read_only(self):
        v = EmbeddingVector("a", [1.0, 2.0])
        with pytest.raises(ValueError):
            v.values[0] = 5.0

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteError):
            EmbeddingVector("a", [1.0, math.nan])
