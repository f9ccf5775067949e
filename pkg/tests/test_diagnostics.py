from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from empath_eval import diagnostics as dg
from empath_eval.core import EvalConfig, PredictionSet
from empath_eval.errors import InsufficientDataError, SchemaError
from helpers import make_pairs, make_preds

UNIFORM = (0.25, 0.25, 0.25, 0.25)


def simplex(n=4):
    return st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda v: sum(v) > 0.1).map(
        lambda v: tuple(x / sum(v) for x in v))


class TestSevere:
    def test_strict_threshold(self):
        golds = [1.0, 1.0, 4.0, 2.5]
        table = dg.severe_error_table(make_preds([2.0, 2.1, 2.4, 3.5]), make_pairs(golds), "empathy")
        assert table.row(1.0).split_count == 2 and table.row(1.0).error_count == 1
        assert table.row(4.0).error_count == 1
        assert table.total == 4 and table.total_errors == 2

    def test_off_grid_single_warning(self):
        golds = [1.1, 1.2, 3.9]
        table = dg.severe_error_table(make_preds(golds), make_pairs(golds), "empathy")
        assert table.row(1.0).split_count == 2 and table.row(4.0).split_count == 1
        assert sum("off the 0.5 grid" in w for w in table.warnings) == 1

    def test_custom_delta_and_roundtrip(self):
        table = dg.severe_error_table(make_preds([1.0]), make_pairs([2.0]), "empathy",
                                      EvalConfig(severe_error_delta=0.5))
        assert table.total_errors == 1
        assert dg.SevereErrorTable.from_dict(table.to_dict()) == table

    def test_no_join(self):
        with pytest.raises(InsufficientDataError):
            dg.severe_error_table(make_preds([1.0], prefix="q"), make_pairs([2.0]), "empathy")


class TestDistances:
    def test_worked_values(self):
        p = (0.2625, 0.2425, 0.25, 0.245)
        assert dg.total_variation(p, UNIFORM) == pytest.approx(0.0125)
        assert dg.max_abs_diff(p, UNIFORM) == pytest.approx(0.0125)
        assert dg.kl_divergence(UNIFORM, UNIFORM) == pytest.approx(0.0, abs=1e-15)

    @given(simplex(), simplex())
    def test_properties(self, p, q):
        tv = dg.total_variation(p, q)
        assert 0.0 <= tv <= 1.0 + 1e-12
        assert tv == pytest.approx(dg.total_variation(q, p))
        assert dg.max_abs_diff(p, q) <= 2 * tv + 1e-12
        assert dg.kl_divergence(p, q) >= -1e-12

    def test_kl_finite_with_zeros(self):
        assert math.isfinite(dg.kl_divergence((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0)))


class TestProfile:
    def test_constant_profile_matches_prior(self):
        golds = [1.0, 2.0, 2.0, 3.0, 4.0, 2.5]
        preds = make_preds([2.0] * 6, probs=[(0.1, 0.4, 0.4, 0.1)] * 6)
        prof = dg.probability_profile(preds, make_pairs(golds), "empathy",
                                      empirical=(0.1, 0.4, 0.4, 0.1))
        for g in prof.groups:
            assert g.tv == pytest.approx(0.0, abs=1e-15)
        # 2.5 rounds half-down into class 2
        assert prof.n_per_group == {1: 1, 2: 3, 3: 1, 4: 1}

    def test_one_hot_profile(self):
        golds = [1.0, 3.0]
        probs = [(1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0)]
        prof = dg.probability_profile(make_preds(golds, probs=probs), make_pairs(golds), "empathy",
                                      empirical=UNIFORM)
        assert prof.group(1).profile == probs[0]
        assert prof.group(1).tv == pytest.approx(0.75)
        assert prof.group(2).absent and prof.group(2).n == 0

    def test_prior_from_pairs(self):
        golds = [1.0, 1.5, 3.0, 4.0]
        prof = dg.probability_profile(make_preds(golds, probs=[UNIFORM] * 4), make_pairs(golds), "empathy")
        assert prof.empirical == (0.5, 0.0, 0.25, 0.25)

    def test_probs_required(self):
        with pytest.raises(SchemaError):
            dg.probability_profile(make_preds([2.0]), make_pairs([2.0]), "empathy")

    def test_roundtrip(self):
        golds = [1.0, 3.0]
        prof = dg.probability_profile(make_preds(golds, probs=[UNIFORM] * 2), make_pairs(golds), "empathy")
        assert dg.ProbabilityProfile.from_dict(prof.to_dict()) == prof


class TestConfusion:
    def test_rounded_scores_clipped(self):
        golds = [1.0, 2.5, 4.0]
        cm = dg.confusion_matrix(make_preds([-3.0, 2.5, 9.0]), make_pairs(golds), "empathy")
        assert np.array_equal(np.diag(cm.counts), [1, 1, 0, 1])
        assert cm.row_sums() == [1, 1, 0, 1]

    def test_argmax_ties_go_low_and_missing_probs_are_errors(self):
        preds = PredictionSet(list(make_preds([2.0, 2.0], probs=[(0.4, 0.4, 0.1, 0.1), None])))
        cm = dg.confusion_matrix(preds, make_pairs([3.0, 2.0]), "empathy", mode="argmax-probs")
        assert cm.counts[2, 0] == 1 and cm.total == 1 and len(cm.errors) == 1

    def test_empty_predictions(self):
        cm = dg.confusion_matrix(PredictionSet([]), make_pairs([2.0]), "empathy")
        assert cm.total == 0 and cm.counts.shape == (4, 4)

    def test_row_sums_match_gold_counts(self):
        rng = np.random.default_rng(9)
        golds = list(rng.choice(np.arange(1.0, 4.01, 0.5), size=50))
        cm = dg.confusion_matrix(make_preds(list(rng.uniform(0, 5, size=50))), make_pairs(golds), "empathy")
        expected = [sum(1 for g in golds if math.ceil(g - 0.5) == c) for c in (1, 2, 3, 4)]
        assert cm.row_sums() == expected

    def test_unknown_mode(self):
        with pytest.raises(SchemaError):
            dg.confusion_matrix(make_preds([2.0]), make_pairs([2.0]), "empathy", mode="vote")
