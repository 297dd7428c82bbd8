from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sftforge.selection import (
    ScoreMatrix,
    minmax_normalize,
    select_checkpoint,
    suite_mean,
    total_scores,
)

# four benchmark suites scored across four epochs; epoch 3 wins
GRID = ScoreMatrix(
    suites=["GPT4All", "AGIEval", "IFEval", "MT-Bench"],
    epochs=["1", "2", "3", "4"],
    scores=[
        [76.85, 76.70, 76.59, 73.63],
        [54.21, 56.10, 55.99, 54.00],
        [76.52, 78.92, 81.33, 86.61],
        [8.37, 8.59, 8.99, 8.67],
    ],
)


class TestNormalize:
    def test_first_suite_row(self):
        values = minmax_normalize(GRID.scores[0])
        assert values[0] == 100.0
        assert values[3] == 0.0
        assert values[1] == pytest.approx(95.3416, abs=1e-4)
        assert values[2] == pytest.approx(91.9255, abs=1e-4)

    def test_third_suite_row_display(self):
        import math

        display = [math.floor(v) for v in minmax_normalize(GRID.scores[2])]
        assert display == [0, 23, 47, 100]

    def test_degenerate_constant_row(self):
        assert minmax_normalize([5, 5, 5]) == [0.0, 0.0, 0.0]

    def test_range_and_extremes(self):
        values = minmax_normalize([3.1, 9.9, 4.2, 7.7])
        assert all(0 <= v <= 100 for v in values)
        assert values.count(100.0) == 1 and values.count(0.0) == 1

    def test_empty_row_rejected(self):
        with pytest.raises(ValueError):
            minmax_normalize([])


class TestTotals:
    def test_grid_totals(self):
        totals = total_scores(GRID)
        assert totals[0] == pytest.approx(27.50, abs=0.001)
        assert totals[1] == pytest.approx(63.65, abs=0.001)
        assert totals[3] == pytest.approx(37.09, abs=0.001)

    def test_truncation_not_rounding(self):
        # epoch 4 mean is 37.0967...; rounding would print 37.10
        assert total_scores(GRID)[3] == 37.09

    def test_single_suite_totals_equal_normalized_row(self):
        m = ScoreMatrix(suites=["only"], epochs=["1", "2"], scores=[[1.0, 3.0]])
        assert total_scores(m) == [0.0, 100.0]


class TestSelect:
    def test_grid_selects_epoch_three(self):
        result = select_checkpoint(GRID)
        assert result.selected_epoch == "3"
        assert result.display_normalized == [
            [100, 95, 91, 0],
            [10, 100, 94, 0],
            [0, 23, 47, 100],
            [0, 35, 100, 48],
        ]
        # recomputed epoch-3 total; printed tables sometimes disagree with
        # their own row values, so the assertion is on the recomputation
        assert result.totals[2] == pytest.approx(83.58, abs=0.001)

    def test_dominant_epoch_wins(self):
        m = ScoreMatrix(
            suites=["a", "b"],
            epochs=["e1", "e2", "e3"],
            scores=[[1, 5, 2], [10, 50, 20]],
        )
        assert select_checkpoint(m).selected_epoch == "e2"

    def test_tie_prefers_earliest(self):
        m = ScoreMatrix(
            suites=["a"], epochs=["e1", "e2", "e3"], scores=[[2.0, 2.0, 1.0]]
        )
        # both e1 and e2 normalize to 100
        assert select_checkpoint(m).selected_epoch == "e1"

    def test_suite_permutation_invariance(self):
        shuffled = ScoreMatrix(
            suites=[GRID.suites[i] for i in (2, 0, 3, 1)],
            epochs=GRID.epochs,
            scores=[GRID.scores[i] for i in (2, 0, 3, 1)],
        )
        assert select_checkpoint(shuffled).totals == select_checkpoint(GRID).totals
        assert select_checkpoint(shuffled).selected_epoch == "3"

    @given(
        a=st.integers(min_value=1, max_value=1000),
        b=st.integers(min_value=-10_000, max_value=10_000),
        row=st.integers(min_value=0, max_value=3),
    )
    def test_affine_invariance(self, a, b, row):
        # integer scores and integer a, b keep the float ratios bit-identical
        base = ScoreMatrix(
            suites=["w", "x", "y", "z"],
            epochs=["1", "2", "3"],
            scores=[[3, 9, 6], [100, 20, 50], [7, 7, 8], [0, 1, 2]],
        )
        transformed_scores = [list(r) for r in base.scores]
        transformed_scores[row] = [a * v + b for v in transformed_scores[row]]
        transformed = ScoreMatrix(base.suites, base.epochs, transformed_scores)
        assert select_checkpoint(transformed).normalized == select_checkpoint(base).normalized
        assert select_checkpoint(transformed).totals == select_checkpoint(base).totals
        assert (
            select_checkpoint(transformed).selected_epoch
            == select_checkpoint(base).selected_epoch
        )


class TestSuiteMean:
    def test_simple(self):
        assert suite_mean([1, 2, 3]) == 2

    def test_single(self):
        assert suite_mean([41.5]) == 41.5

    def test_printed_suite_scores_differ_from_sub_means(self):
        # a suite's printed headline score need not equal the mean of its
        # printed sub-scores (higher-precision internals); assert only the
        # recomputed mean
        sub = [33.07, 49.00, 23.48, 67.25, 74.72, 87.38, 51.82, 45.91]
        assert suite_mean(sub) == pytest.approx(54.07875)
        assert suite_mean(sub) != 54.21

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            suite_mean([])


class TestMatrixIO:
    def test_csv_round_trip(self):
        csv_text = "suite,1,2,3,4\n" + "\n".join(
            f"{name},{','.join(str(v) for v in row)}"
            for name, row in zip(GRID.suites, GRID.scores)
        )
        m = ScoreMatrix.from_csv(csv_text)
        assert m == GRID

    def test_json_parse(self):
        import json

        text = json.dumps(
            {"suites": ["a"], "epochs": [1, 2], "scores": [[1.5, 2.5]]}
        )
        m = ScoreMatrix.from_json(text)
        assert m.epochs == ["1", "2"]
        assert m.scores == [[1.5, 2.5]]

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ScoreMatrix(suites=[], epochs=["1", "2"], scores=[])
        with pytest.raises(ValueError):
            ScoreMatrix(suites=["a"], epochs=["1"], scores=[[1.0]])
        with pytest.raises(ValueError):
            ScoreMatrix(suites=["a"], epochs=["1", "2"], scores=[[1.0]])
