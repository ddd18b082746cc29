"""Confusion-matrix metric exactness and invariances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s2fin.metrics import ConfusionMatrix, metrics_report


class TestMetrics:
    def test_perfect_diagonal(self):
        cm = ConfusionMatrix.from_counts(np.diag([5, 3, 9]))
        assert cm.overall_accuracy() == 1.0
        assert cm.average_accuracy() == 1.0
        assert cm.kappa() == 1.0

    def test_chance_agreement(self):
        cm = ConfusionMatrix.from_counts([[25, 25], [25, 25]])
        assert cm.overall_accuracy() == 0.5
        assert cm.kappa() == 0.0

    def test_hand_computed_example(self):
        cm = ConfusionMatrix.from_counts([[8, 2], [1, 9]])
        assert abs(cm.overall_accuracy() - 0.85) <= 1e-12
        assert abs(cm.average_accuracy() - 0.85) <= 1e-12
        assert abs(cm.kappa() - 0.7) <= 1e-12

    def test_update_counts(self):
        cm = ConfusionMatrix(3)
        cm.update([0, 1, 2, 2], [0, 2, 2, 1])
        assert cm.counts.tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 1]]
        assert cm.total == 4

    def test_absent_class_excluded_with_warning(self):
        cm = ConfusionMatrix.from_counts([[4, 0, 0], [0, 6, 0], [0, 0, 0]])
        with pytest.warns(UserWarning, match=r"\[2\]"):
            assert cm.average_accuracy() == 1.0

    def test_report_format(self):
        report = metrics_report(ConfusionMatrix.from_counts([[8, 2], [1, 9]]))
        lines = report.strip().splitlines()
        assert lines[0].startswith("oa 0.85")
        assert lines[1].startswith("aa 0.85")
        assert lines[2].startswith("kappa 0.7")
        assert lines[3].startswith("per_class_acc[0] 0.8")

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix.from_counts([[1, -1], [0, 2]])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 6))
def test_kappa_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 30, (k, k))
    counts[0, 0] += 1  # nonempty
    perm = rng.permutation(k)
    base = ConfusionMatrix.from_counts(counts)
    permuted = ConfusionMatrix.from_counts(counts[np.ix_(perm, perm)])
    assert base.kappa() == pytest.approx(permuted.kappa(), abs=1e-12)
