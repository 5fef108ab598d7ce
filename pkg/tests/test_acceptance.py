"""Acceptance criteria 1-11, one test each.

Every test logs a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary under "acceptance criteria".
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import stats as sps

from audioleak import devices
from audioleak.evaluation import (
    FREQUENCY_INTERVALS,
    burst_sweep,
    controlled_dataset,
    frequency_pvalues,
    idle_pvalues,
    probing_pvalues,
    stat_roc,
)
from audioleak.fuzzer import (
    SimulatedOracle,
    candidates_for,
    discovered,
    distance_histogram,
    load_false_wakewords,
    run_campaign,
)
from audioleak.fuzzer.campaign import all_discovered_probability
from audioleak.ingest import CaptureSource, ingest
from audioleak.orchestrator import ProbePlan, ProbeWord, VerdictStatus, judge, simulated_session
from audioleak.simulator import Scenario, simulate, write_pcap
from audioleak.stats import DistributionVector, Feature, auto_bin_count, welch_t_test

from conftest import record_criterion

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def controlled():
    t0 = time.perf_counter()
    data = controlled_dataset()
    return data, time.perf_counter() - t0


def test_criterion_01_burst_roc(controlled):
    data, gen = controlled
    t0 = time.perf_counter()
    pts = {p.n: p for p in burst_sweep(data, n_range=(1, 8))}
    elapsed = gen + time.perf_counter() - t0
    p5 = pts[5]
    ok = p5.tpr >= 0.90 and p5.fpr <= 0.10 and elapsed <= 60 and sorted(pts) == list(range(1, 9))
    record_criterion(1, ok, f"n=5 TPR={p5.tpr:.3f} FPR={p5.fpr:.4f} runtime={elapsed:.1f}s")


def test_criterion_02_stat_roc(controlled):
    data, gen = controlled
    t0 = time.perf_counter()
    curve = stat_roc(data, thresholds=(0.40, 0.41, 0.42, 0.43, 0.44, 0.45))
    elapsed = gen + time.perf_counter() - t0
    good = [p for p in curve if p.tpr >= 0.88 and p.fpr <= 0.12]
    best = good[0] if good else max(curve, key=lambda p: p.tpr - p.fpr)
    ok = bool(good) and elapsed <= 120
    record_criterion(2, ok, f"t={best.parameter:.2f} TPR={best.tpr:.3f} FPR={best.fpr:.3f} "
                            f"({len(good)}/6 thresholds qualify) runtime={elapsed:.1f}s")


def test_criterion_03_frequency_monotonicity():
    freq = [1 / iv for iv in FREQUENCY_INTERVALS]
    rhos = {}
    for name in devices.CONTROLLED:
        ps = frequency_pvalues(devices.device(name))
        rhos[name] = sps.spearmanr(freq, ps).statistic
    ok = all(r <= -0.8 for r in rhos.values())
    record_criterion(3, ok, "spearman " + " ".join(f"{k}={v:.2f}" for k, v in rhos.items()))


def test_criterion_04_probe_idle_separation():
    probe, idle = probing_pvalues(devices.device("EchoDot"), pairs=100)
    mp, mi = float(np.median(probe)), float(np.median(idle))
    record_criterion(4, mp < 0.3 and mi > 0.3, f"median probe p={mp:.3g} median idle p={mi:.3f}")


def test_criterion_05_fleet_specificity():
    fleet = devices.fleet()
    google = devices.device("GoogleHome").address
    nest = devices.device("NestProtect").address
    errors = []
    for word, expected in (("Hey Google", {google}), ("major", set())):
        plan = ProbePlan((ProbeWord(word),))
        for seed in range(20):
            verdicts = judge(simulated_session(plan, fleet, seed))
            reactive = {v.device for v in verdicts if v.reactive}
            if reactive != expected:
                errors.append(f"{word!r} seed {seed}: {sorted(d.network_id for d in reactive)}")
            nest_status = {v.device: v.status for v in verdicts}.get(nest)
            if nest_status is not VerdictStatus.SILENT:
                errors.append(f"NestProtect {nest_status} on {word!r} seed {seed}")
    record_criterion(5, not errors, f"40 sessions, {len(errors)} false verdict(s)" +
                     (f": {errors[:3]}" if errors else ""))


def test_criterion_06_welch_oracle():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 40))
        scale = float(rng.choice([5, 50, 500, 5000]))
        a = rng.poisson(rng.uniform(0, scale, k))
        b = rng.poisson(rng.uniform(0, scale, k))
        edges = tuple(float(i) for i in range(k + 1))
        got = welch_t_test(DistributionVector(edges, tuple(a.tolist()), Feature.PACKET_SIZE),
                           DistributionVector(edges, tuple(b.tolist()), Feature.PACKET_SIZE)).p_value
        with warnings.catch_warnings():
            # scipy warns on near-constant inputs; its p-value is still the reference
            warnings.simplefilter("ignore", RuntimeWarning)
            ref = sps.ttest_ind(a, b, equal_var=False).pvalue
        if math.isnan(ref):
            ref = 1.0
        worst = max(worst, abs(got - ref))
    same = DistributionVector((0.0, 1.0, 2.0, 3.0), (4, 9, 2), Feature.PACKET_SIZE)
    p_same = welch_t_test(same, same).p_value
    record_criterion(6, worst <= 1e-9 and p_same == 1.0, f"max |dp|={worst:.2e} identical p={p_same}")


def bins_by_formula(x):
    m = len(x)
    sturges = math.ceil(math.log2(m)) + 1
    iqr = sps.iqr(x)
    width = 2 * iqr * m ** (-1 / 3)
    fd = math.ceil((x.max() - x.min()) / width) if iqr > 0 else 0
    return max(sturges, fd)


def test_criterion_07_binning_formula():
    rng = np.random.default_rng(7)
    mismatches = 0
    for i in range(100):
        m = int(rng.integers(2, 3000))
        kind = i % 4
        if kind == 0:
            x = rng.uniform(40, 1500, m)
        elif kind == 1:
            x = rng.normal(600, 200, m)
        elif kind == 2:
            x = np.concatenate([rng.normal(100, 10, m), rng.uniform(1000, 1500, max(1, m // 20))])
        else:
            x = rng.lognormal(5, 1, m).round()
        mismatches += auto_bin_count(x) != bins_by_formula(x)
    record_criterion(7, mismatches == 0, f"{100 - mismatches}/100 fixtures match")


def test_criterion_08_idle_calibration():
    rates = {}
    for name in devices.CONTROLLED:
        ps = np.array(idle_pvalues(devices.device(name), trials=500))
        rates[name] = float(np.mean(ps < 0.42))
    ok = all(r <= 0.47 for r in rates.values())
    record_criterion(8, ok, "reactive rate " + " ".join(f"{k}={v:.3f}" for k, v in rates.items()))


def test_criterion_09_fuzzer_fidelity():
    probs = load_false_wakewords()
    words = sorted(w for w in probs if w != "alexa")
    cands = candidates_for(words, "alexa")
    runs = []
    for seed in range(20):
        res = run_campaign(cands, SimulatedOracle(probs, seed=seed, mode="replay"))
        runs.append(len(discovered(res)))
    hist = distance_histogram(cands, None)
    far = sum(c for d, c in hist.items() if d >= 3)
    # independent trials would rarely find every 2/10 word; recorded in the decisions ledger
    bernoulli = all_discovered_probability(probs[w] for w in words)
    ok = len(words) == 89 and all(r == 89 for r in runs) and sum(hist.values()) == 89 and 47 <= far <= 57
    record_criterion(9, ok, f"replay: all 89 found in {sum(r == 89 for r in runs)}/20 seeds; "
                            f"distance>=3: {far}/89 hist={hist}; bernoulli P(all)={bernoulli:.2e}")


def test_criterion_10_pcap_roundtrip(tmp_path):
    data = simulate(Scenario(22 * 3600.0, devices.fleet(), (), seed=10))
    total = sum(len(t) for t in data.traces.values())
    path = tmp_path / "big.pcap"
    t0 = time.perf_counter()
    write_pcap(data, path)
    got, rep = ingest(CaptureSource.pcap(path))
    elapsed = time.perf_counter() - t0
    # a device that never transmits leaves nothing in the capture
    sent = {dev: tr for dev, tr in data.traces.items() if len(tr)}
    same = got.keys() == sent.keys()
    for dev, tr in sent.items():
        g = got.get(dev)
        if g is None or len(g) != len(tr):
            same = False
            break
        # ingest keeps capture order; compare as sorted multisets of (t, size, dir)
        want = np.lexsort((tr.outbound, tr.sizes, tr.t_us))
        have = np.lexsort((g.outbound, g.sizes, g.t_us))
        same &= bool(np.all(np.abs(g.t_us[have] - tr.t_us[want]) <= 1)
                     and np.array_equal(g.sizes[have], tr.sizes[want])
                     and np.array_equal(g.outbound[have], tr.outbound[want]))
    ok = total >= 1_000_000 and same and rep.dropped == 0 and elapsed <= 30
    record_criterion(10, ok, f"{total} packets, exact={same}, runtime={elapsed:.1f}s")


def test_criterion_11_property_suites():
    import test_burst
    import test_fuzzer
    import test_model
    import test_simulator

    suites = {
        "tiling": test_model.test_window_tiling_conservation,
        "burst-n": test_burst.test_monotone_in_n,
        "burst-B": test_burst.test_monotone_in_threshold,
        "levenshtein": test_fuzzer.test_levenshtein_metric_axioms,
        "determinism": test_simulator.test_same_seed_is_byte_identical,
    }
    failed = []
    for name, fn in suites.items():
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report every suite
            failed.append(f"{name}: {type(exc).__name__}")
    record_criterion(11, not failed, f"{len(suites) - len(failed)}/{len(suites)} suites" +
                     (f" failed={failed}" if failed else ""))
