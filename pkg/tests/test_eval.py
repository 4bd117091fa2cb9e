import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textlier.evaluation import (ConfusionMatrix, confusion,
                                 evaluate_predictions, metrics)


class TestConfusion:
    def test_perfect_agreement(self):
        cm = confusion([0, 0, 0, 1, 1, 1], [0, 0, 0, 1, 1, 1])
        assert (cm.tn, cm.fp, cm.fn, cm.tp) == (3, 0, 0, 3)

    def test_all_predicted_positive(self):
        cm = confusion([0, 0, 1, 1, 1], [1, 1, 1, 1, 1])
        assert cm.fp == 2 and cm.tp == 3 and cm.tn == 0 and cm.fn == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion([0, 1], [0])

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=200))
    @settings(max_examples=50, deadline=None)
    def test_matches_counting_oracle(self, pairs):
        labels = [t for t, _ in pairs]
        preds = [p for _, p in pairs]
        cm = confusion(labels, preds)
        assert cm.tn == sum(1 for t, p in pairs if (t, p) == (0, 0))
        assert cm.fp == sum(1 for t, p in pairs if (t, p) == (0, 1))
        assert cm.fn == sum(1 for t, p in pairs if (t, p) == (1, 0))
        assert cm.tp == sum(1 for t, p in pairs if (t, p) == (1, 1))
        assert cm.n_samples == len(pairs)

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(0)
        labels = list(rng.integers(0, 2, size=60))
        preds = list(rng.integers(0, 2, size=60))
        order = rng.permutation(60)
        a = confusion(labels, preds)
        b = confusion([labels[i] for i in order], [preds[i] for i in order])
        assert a == b


class TestMetrics:
    def test_reference_confusion_matrix(self):
        r = metrics(ConfusionMatrix(tn=2284, fp=82, fn=206, tp=918))
        assert r.precision == pytest.approx(0.918, abs=1e-6)
        assert r.recall == pytest.approx(0.816725979, abs=1e-6)
        assert r.f1 == pytest.approx(0.86440678, abs=1e-6)
        assert r.n_samples == 3490

    def test_perfect_predictor(self):
        r = metrics(ConfusionMatrix(tn=5, fp=0, fn=0, tp=5))
        assert r.precision == r.recall == r.f1 == 1.0
        assert not r.degenerate

    def test_zero_numerator_not_degenerate(self):
        r = metrics(ConfusionMatrix(tn=5, fp=3, fn=2, tp=0))
        assert r.precision == r.recall == r.f1 == 0.0
        assert not r.degenerate

    def test_degenerate_denominator_flagged(self):
        r = metrics(ConfusionMatrix(tn=5, fp=0, fn=2, tp=0))
        assert r.precision == 0.0 and r.degenerate

    @given(tn=st.integers(0, 100), fp=st.integers(0, 100),
           fn=st.integers(0, 100), tp=st.integers(0, 100))
    @settings(max_examples=100, deadline=None)
    def test_harmonic_mean_bound(self, tn, fp, fn, tp):
        r = metrics(ConfusionMatrix(tn=tn, fp=fp, fn=fn, tp=tp))
        if r.precision + r.recall > 0:
            assert min(r.precision, r.recall) - 1e-12 <= r.f1
            assert r.f1 <= max(r.precision, r.recall) + 1e-12

    def test_recomputable_from_confusion(self):
        rng = np.random.default_rng(1)
        labels = list(rng.integers(0, 2, size=40))
        preds = list(rng.integers(0, 2, size=40))
        r = evaluate_predictions(labels, preds)
        again = metrics(r.confusion)
        assert (r.precision, r.recall, r.f1) == (again.precision, again.recall,
                                                 again.f1)


class TestReportRendering:
    def test_json_round_trip(self):
        r = metrics(ConfusionMatrix(tn=10, fp=2, fn=3, tp=5))
        data = json.loads(r.to_json())
        assert data["confusion"] == {"tn": 10, "fp": 2, "fn": 3, "tp": 5}
        assert data["n_samples"] == 20
        assert data["f1"] == pytest.approx(r.f1)

    def test_table_has_all_columns(self):
        r = metrics(ConfusionMatrix(tn=10, fp=2, fn=3, tp=5))
        table = r.to_table(item="toy")
        for col in ("Item", "Samples", "F1", "Precision", "Recall", "Confusion"):
            assert col in table
        assert "toy" in table and "20" in table
