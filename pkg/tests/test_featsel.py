from __future__ import annotations

import math

import numpy as np
import pytest

from soctriage.errors import DegenerateLabelError, UsageError
from soctriage.featsel import (
    FeatureScores,
    export_ranking_csv,
    rfe_ranks,
    score_features,
    select_top_k,
    unified_ranking,
)
from soctriage.ingest import FeatureMatrix

DIRECT_METHODS = ("chi2", "anova_f", "mutual_info", "tree_importance")


def matrix(columns: dict[str, list[float]], labels: list[bool]) -> FeatureMatrix:
    names = list(columns)
    rows = np.array([[columns[n][i] for n in names] for i in range(len(labels))], dtype=float)
    return FeatureMatrix(feature_names=names, rows=rows, labels=np.array(labels))


class TestScoreFeatures:
    def test_chi2_perfect_binary_match_is_four(self):
        # 2x2 table with cells (2,0 / 0,2), expected 1 everywhere:
        # sum (O-E)^2/E = 1+1+1+1 = 4.
        X = matrix({"f": [0, 0, 1, 1]}, [False, False, True, True])
        assert score_features(X, "chi2").scores["f"] == pytest.approx(4.0)

    def test_anova_zero_for_identical_groups(self):
        X = matrix({"f": [3, 7, 3, 7]}, [False, False, True, True])
        assert score_features(X, "anova_f").scores["f"] == 0.0

    def test_mutual_info_perfect_match_is_ln2(self):
        X = matrix({"f": [0, 0, 1, 1]}, [False, False, True, True])
        assert score_features(X, "mutual_info").scores["f"] == pytest.approx(math.log(2), rel=1e-12)

    def test_constant_label_rejected(self):
        X = matrix({"f": [1, 2, 3, 4]}, [True, True, True, True])
        with pytest.raises(DegenerateLabelError):
            score_features(X, "chi2")

    def test_unsupported_method_rejected(self):
        X = matrix({"f": [0, 1, 0, 1]}, [False, True, False, True])
        with pytest.raises(UsageError):
            score_features(X, "pca")

    def test_independent_feature_scores_zero(self):
        # Brute-force independent table: feature and label fully crossed.
        X = matrix({"f": [0, 0, 1, 1, 0, 0, 1, 1]},
                   [False, True, False, True, False, True, False, True])
        assert score_features(X, "chi2").scores["f"] == pytest.approx(0.0, abs=1e-12)
        assert score_features(X, "mutual_info").scores["f"] == pytest.approx(0.0, abs=1e-12)

    def test_duplicated_column_scores_equal(self):
        rng = np.random.default_rng(3)
        signal = rng.normal(size=40)
        labels = (signal + rng.normal(scale=0.3, size=40) > 0).tolist()
        X = matrix({"orig": signal.tolist(), "copy": signal.tolist(),
                    "noise": rng.normal(size=40).tolist()}, labels)
        for method in DIRECT_METHODS:
            scores = score_features(X, method).scores
            assert scores["orig"] == pytest.approx(scores["copy"], rel=1e-9), method

    def test_scores_finite_even_with_perfect_separation(self):
        X = matrix({"f": [0.0, 0.0, 1.0, 1.0], "g": [5, 6, 5, 6]},
                   [False, False, True, True])
        for method in DIRECT_METHODS:
            for value in score_features(X, method).scores.values():
                assert np.isfinite(value)


class TestRfe:
    def separable(self) -> FeatureMatrix:
        # Signal is strong but imperfect: a perfectly separating column would
        # leave zero tree importance for everything else and mask the noise.
        rng = np.random.default_rng(7)
        signal = np.concatenate([rng.normal(-1.2, 1.0, 100), rng.normal(1.2, 1.0, 100)])
        weak = np.concatenate([rng.normal(-0.6, 1.0, 100), rng.normal(0.6, 1.0, 100)])
        noise = rng.normal(size=200)
        labels = [False] * 100 + [True] * 100
        return matrix({"signal": signal.tolist(), "weak": weak.tolist(),
                       "noise": noise.tolist()}, labels)

    @pytest.mark.parametrize("base", ["tree_importance", "anova_f"])
    def test_noise_eliminated_first(self, base):
        scores = rfe_ranks(self.separable(), base_scorer=base, keep=1).scores
        assert scores["noise"] == min(scores.values())
        assert scores["signal"] == max(scores.values())

    def test_keep_all_equals_one_round_of_base_ranks(self):
        X = self.separable()
        rfe = rfe_ranks(X, base_scorer="anova_f", keep=3).scores
        base = score_features(X, "anova_f").scores
        base_order = sorted(base, key=lambda n: (-base[n], n))
        rfe_order = sorted(rfe, key=lambda n: -rfe[n])
        assert rfe_order == base_order
        assert sorted(rfe.values()) == [1.0, 2.0, 3.0]

    def test_deterministic(self):
        X = self.separable()
        a = rfe_ranks(X, keep=1)
        b = rfe_ranks(X, keep=1)
        assert a.scores == b.scores

    def test_keep_bounds(self):
        with pytest.raises(UsageError):
            rfe_ranks(self.separable(), keep=0)
        with pytest.raises(UsageError):
            rfe_ranks(self.separable(), keep=4)


class TestUnifiedRanking:
    def test_hand_normalization_example(self):
        sets = [
            FeatureScores(method="chi2", scores={"A": 2.0, "B": 0.0}),
            FeatureScores(method="anova_f", scores={"A": 4.0, "B": 1.0}),
        ]
        ranking = unified_ranking(sets)
        assert ranking == [("A", 1.0), ("B", 0.0)]

    def test_single_set_preserves_order(self):
        sets = [FeatureScores(method="chi2", scores={"A": 5.0, "B": 9.0, "C": 1.0})]
        assert [name for name, _ in unified_ranking(sets)] == ["B", "A", "C"]

    def test_permutation_of_sets_is_irrelevant(self):
        s1 = FeatureScores(method="chi2", scores={"A": 1.0, "B": 3.0, "C": 2.0})
        s2 = FeatureScores(method="mutual_info", scores={"A": 0.2, "B": 0.1, "C": 0.9})
        assert unified_ranking([s1, s2]) == unified_ranking([s2, s1])

    def test_constant_set_normalizes_to_half(self):
        sets = [FeatureScores(method="chi2", scores={"A": 7.0, "B": 7.0})]
        assert unified_ranking(sets) == [("A", 0.5), ("B", 0.5)]

    def test_affine_rescaling_of_one_set_keeps_ranking(self):
        s1 = FeatureScores(method="chi2", scores={"A": 1.0, "B": 3.0, "C": 2.0})
        s2 = FeatureScores(method="anova_f", scores={"A": 4.0, "B": 0.5, "C": 2.0})
        scaled = FeatureScores(method="anova_f",
                               scores={k: 10.0 * v + 3.0 for k, v in s2.scores.items()})
        order = [n for n, _ in unified_ranking([s1, s2])]
        order_scaled = [n for n, _ in unified_ranking([s1, scaled])]
        assert order == order_scaled

    def test_mismatched_universes_rejected(self):
        s1 = FeatureScores(method="chi2", scores={"A": 1.0})
        s2 = FeatureScores(method="anova_f", scores={"B": 1.0})
        with pytest.raises(UsageError):
            unified_ranking([s1, s2])

    def test_tie_breaks_lexicographically(self):
        sets = [FeatureScores(method="chi2", scores={"zed": 1.0, "abc": 1.0, "mid": 0.0})]
        names = [n for n, _ in unified_ranking(sets)]
        assert names[:2] == ["abc", "zed"]


class TestSelectTopK:
    RANKING = [("A", 1.0), ("B", 0.7), ("C", 0.1)]

    def test_k_equals_length(self):
        assert select_top_k(self.RANKING, 3) == ["A", "B", "C"]

    def test_k_one(self):
        assert select_top_k(self.RANKING, 1) == ["A"]

    def test_worked_example_top_one(self):
        sets = [
            FeatureScores(method="chi2", scores={"A": 2.0, "B": 0.0}),
            FeatureScores(method="anova_f", scores={"A": 4.0, "B": 1.0}),
        ]
        assert select_top_k(unified_ranking(sets), 1) == ["A"]

    def test_out_of_range_rejected(self):
        with pytest.raises(UsageError):
            select_top_k(self.RANKING, 0)
        with pytest.raises(UsageError):
            select_top_k(self.RANKING, 4)


def test_csv_export_carries_all_methods():
    sets = [
        FeatureScores(method="chi2", scores={"A": 2.0, "B": 0.0}),
        FeatureScores(method="mutual_info", scores={"A": 0.1, "B": 0.4}),
    ]
    text = export_ranking_csv(sets)
    lines = text.strip().splitlines()
    assert lines[0] == "feature,chi2,mutual_info,fused"
    assert len(lines) == 3
