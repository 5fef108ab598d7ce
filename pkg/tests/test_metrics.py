import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audioleak.evaluation import ScanOutcome, stat_sweep
from audioleak.metrics import ConfusionCounts, confusion, pooled_rates, roc
from audioleak.model import ParameterError


def scan_confusion(pred, act):
    tp = fp = tn = fn = 0
    for p, a in zip(pred, act):
        if p and a:
            tp += 1
        elif p:
            fp += 1
        elif a:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=60))
def test_confusion_matches_scan(pairs):
    pred = [p for p, _ in pairs]
    act = [a for _, a in pairs]
    assert confusion(pred, act) == scan_confusion(pred, act)


def test_rates():
    c = ConfusionCounts(tp=9, fp=1, tn=19, fn=1)
    assert (c.tpr, c.fpr) == (0.9, 0.05)


def test_zero_denominators_are_nan():
    assert math.isnan(ConfusionCounts(fp=2, tn=3).tpr)
    assert math.isnan(ConfusionCounts(tp=2, fn=3).fpr)


def test_negative_counts_rejected():
    with pytest.raises(ParameterError):
        ConfusionCounts(tp=-1)


def test_shape_mismatch():
    with pytest.raises(ParameterError):
        confusion([True], [True, False])


class TestPooling:
    devs = [ConfusionCounts(tp=9, fn=1, tn=90, fp=10), ConfusionCounts(tp=1, fn=1, tn=10, fp=0)]

    def test_micro(self):
        tpr, fpr = pooled_rates(self.devs)
        assert tpr == pytest.approx(10 / 12) and fpr == pytest.approx(10 / 110)

    def test_macro(self):
        tpr, fpr = pooled_rates(self.devs, "macro")
        assert tpr == pytest.approx((0.9 + 0.5) / 2) and fpr == pytest.approx((0.1 + 0.0) / 2)

    def test_macro_skips_undefined(self):
        tpr, _ = pooled_rates([ConfusionCounts(tp=1, fn=1), ConfusionCounts(tn=5)], "macro")
        assert tpr == 0.5

    def test_unknown(self):
        with pytest.raises(ParameterError):
            pooled_rates(self.devs, "weighted")


class TestRoc:
    def test_sorted_by_parameter(self):
        c = roc([(3, 0.1, 0.0), (1, 0.9, 0.4), (2, 0.5, 0.1)])
        assert [p.parameter for p in c] == [1, 2, 3] and len(c) == 3
        assert c.at(2).tpr == 0.5
        with pytest.raises(KeyError):
            c.at(7)

    @pytest.mark.parametrize("sweep", [[(1, 0.5, 0.5)], [(1, 1.2, 0.0), (2, 0.5, 0.5)], [(1, 0.5, -0.1), (2, 0, 0)]])
    def test_validation(self, sweep):
        with pytest.raises(ParameterError):
            roc(sweep)

    def test_nan_allowed(self):
        assert math.isnan(roc([(1, math.nan, 0.2), (2, math.nan, 0.1)]).at(1).tpr)

    def test_csv(self, tmp_path):
        p = tmp_path / "roc.csv"
        roc([(0.1, 0.2, 0.3), (0.2, 0.4, 0.5)]).to_csv(p)
        rows = list(csv.reader(open(p)))
        assert rows[0] == ["parameter", "tpr", "fpr"]
        assert [float(x) for x in rows[2]] == [0.2, 0.4, 0.5]


def random_outcomes(seed, n=40):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(4):
        out.append(ScanOutcome(rng.uniform(0, 1, n).round(3), rng.random(n) < 0.3))
    return out


@pytest.mark.parametrize("seed", range(5))
def test_stat_sweep_endpoints_and_monotone(seed):
    curve = stat_sweep(random_outcomes(seed), thresholds=np.linspace(0, 1, 21))
    # p < 0 never holds; p < 1 holds for every p-value below one
    assert (curve.at(0.0).tpr, curve.at(0.0).fpr) == (0.0, 0.0)
    tprs = [p.tpr for p in curve]
    fprs = [p.fpr for p in curve]
    assert tprs == sorted(tprs) and fprs == sorted(fprs)
