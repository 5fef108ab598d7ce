import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audioleak.fuzzer import (
    Outcome,
    SensorLogOracle,
    SimulatedOracle,
    UnknownWord,
    WakeWordCandidate,
    candidates_for,
    distance_histogram,
    fuzz_report,
    levenshtein,
    load_dictionary,
    load_false_wakewords,
    metaphone,
    parse_dictionary,
    run_campaign,
    select_candidates,
)
from audioleak.fuzzer.campaign import all_discovered_probability, discovery_probability
from audioleak.orchestrator import SinkError

from conftest import DATA

SAMPLE = DATA / "cmudict_sample.txt"


@pytest.fixture(scope="module")
def entries():
    return load_dictionary(SAMPLE)[0]


class TestDictionary:
    def test_alexa_line(self, entries):
        (alexa,) = [e for e in entries if e.word == "alexa"]
        assert alexa.phonemes == ("AH", "L", "EH", "K", "S", "AH") and alexa.phoneme_count == 6

    def test_report_counts(self):
        entries, rep = load_dictionary(SAMPLE)
        assert rep.comments == 3 and rep.skipped == 0
        assert rep.entries == len(entries) == rep.lines - rep.comments

    def test_variants(self):
        entries, _ = parse_dictionary(["READ  R EH1 D", "READ(2)  R IY1 D"])
        assert [(e.word, e.variant) for e in entries] == [("read", 1), ("read", 2)]

    def test_empty(self):
        entries, rep = parse_dictionary([])
        assert entries == [] and rep.lines == 0

    def test_malformed_lines_skipped(self):
        entries, rep = parse_dictionary(["GOOD  G UH1 D", "LONELY", "BAD  B 9 D", "X  AH0 # trailing comment"])
        assert [e.word for e in entries] == ["good", "x"]
        assert rep.skipped == 2 and rep.skipped_lines == [2, 3]


class TestSelection:
    def test_tolerance_zero(self, entries):
        got = select_candidates(entries, "alexa", tolerance=0)
        assert got and all(c.phoneme_count == 6 for c in got)
        assert "alexa" in {c.word for c in got}

    def test_tolerance_one_superset(self, entries):
        t0 = {c.word for c in select_candidates(entries, "alexa", tolerance=0)}
        t1 = {c.word for c in select_candidates(entries, "alexa", tolerance=1)}
        assert t0 < t1

    def test_default_counts(self, entries):
        assert {c.phoneme_count for c in select_candidates(entries, "alexa")} == {5, 6}

    def test_brute_force_oracle(self, entries):
        want = set()
        for e in entries:
            if e.phoneme_count in (5, 6, 7):
                want.add(e.word)
        got = select_candidates(entries, "Alexa", tolerance=1)
        assert [c.word for c in got] == sorted(want)
        for c in got:
            assert c.distance == levenshtein(metaphone(c.word), "ALKS")

    def test_line_order_invariant(self, entries):
        shuffled = list(entries)
        random.Random(3).shuffle(shuffled)
        assert select_candidates(shuffled, "alexa", tolerance=1) == select_candidates(entries, "alexa", tolerance=1)

    def test_unknown_word_suggests(self, entries):
        with pytest.raises(UnknownWord) as err:
            select_candidates(entries, "alexza")
        assert "alexa" in err.value.suggestions

    def test_negative_tolerance(self, entries):
        with pytest.raises(ValueError):
            select_candidates(entries, "alexa", tolerance=-1)


# hand-worked encodings under the 1990 rule set
METAPHONE_CASES = {
    "alexa": "ALKS",
    "aaa": "A",
    "thompson": "0MPSN",
    "knight": "NT",
    "science": "SNS",
    "philip": "FLP",
    "which": "WX",
    "xavier": "SFR",
    "dodge": "TJ",
    "ghost": "KST",
    "lamb": "LM",
    "sign": "SN",
    "signed": "SNT",
    "yes": "YS",
    "box": "BKS",
    "church": "XRX",
    "nation": "NXN",
    "ahead": "AHT",
    "wright": "RT",
    "echo": "AX",
    "google": "KKL",
    "": "",
}


@pytest.mark.parametrize("word,code", METAPHONE_CASES.items())
def test_metaphone(word, code):
    assert metaphone(word) == code


def test_metaphone_ignores_case_and_punctuation():
    assert metaphone("Hey-Google!") == metaphone("heygoogle")


def dp_distance(a, b):
    d = {(i, j): 0 for i in range(len(a) + 1) for j in range(len(b) + 1)}
    for i in range(len(a) + 1):
        d[i, 0] = i
    for j in range(len(b) + 1):
        d[0, j] = j
    for i, j in itertools.product(range(1, len(a) + 1), range(1, len(b) + 1)):
        d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a), len(b)]


words = st.text(alphabet="ABKLSTX0", max_size=10)


class TestLevenshtein:
    @pytest.mark.parametrize("a,b,d", [("kitten", "sitting", 3), ("", "abc", 3), ("ALKS", "ALKS", 0), ("ab", "ba", 2)])
    def test_examples(self, a, b, d):
        assert levenshtein(a, b) == d

    @settings(max_examples=300, deadline=None)
    @given(words, words)
    def test_matches_table_oracle(self, a, b):
        assert levenshtein(a, b) == dp_distance(a, b)


@settings(max_examples=300, deadline=None)
@given(words, words, words)
def test_levenshtein_metric_axioms(a, b, c):
    assert levenshtein(a, a) == 0
    assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


class TestCampaign:
    def test_certain_word(self):
        cands = candidates_for(["alyssa", "banana"], "alexa")
        res = run_campaign(cands, SimulatedOracle({"alyssa": 1.0}))
        assert [(r.word, r.trials, r.activations) for r in res] == [("alyssa", 10, 10), ("banana", 10, 0)]

    def test_zero_probability(self):
        res = run_campaign(candidates_for(["x"], "alexa"), SimulatedOracle({"x": 0.0}))
        assert res[0].activations == 0 and distance_histogram(res) == {}

    def test_timeouts_are_retried(self):
        oracle = SimulatedOracle({"w": 1.0}, seed=1, timeout_rate=0.3)
        (res,) = run_campaign(candidates_for(["w"], "alexa"), oracle, trials_per_word=50)
        # a trial is lost only after three straight timeouts
        assert 40 <= res.trials <= 50 and res.activations == res.trials

    def test_always_timeout(self):
        (res,) = run_campaign(candidates_for(["w"], "alexa"), SimulatedOracle({}, timeout_rate=1.0))
        assert res.trials == 0 and res.rate == 0.0

    def test_deterministic(self):
        probs = load_false_wakewords()
        cands = candidates_for(sorted(probs), "alexa")
        a = run_campaign(cands, SimulatedOracle(probs, seed=5))
        b = run_campaign(cands, SimulatedOracle(probs, seed=5))
        assert a == b

    def test_replay_exact_counts(self):
        probs = {"a": 0.2, "b": 0.7}
        res = run_campaign(candidates_for(probs, "alexa"), SimulatedOracle(probs, seed=9, mode="replay"))
        assert [r.activations for r in res] == [2, 7]

    def test_cooldown_sleeps(self):
        slept = []
        run_campaign(candidates_for(["a"], "alexa"), SimulatedOracle({}), trials_per_word=3, cooldown=1.5,
                     sleep=slept.append)
        assert slept == [1.5] * 3

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            SimulatedOracle({}, mode="coin")


def test_histogram_alexa_only():
    res = [WakeWordCandidate("alexa", 6, "ALKS", 0, 10, 4)]
    assert distance_histogram(res) == {0: 1}
    assert distance_histogram([]) == {}


def test_report_shape():
    res = run_campaign(candidates_for(["alyssa", "banana"], "alexa"), SimulatedOracle({"alyssa": 1.0}))
    rep = fuzz_report(res, "alexa", 10)
    assert rep["discovered"] == ["alyssa"] and rep["target_metaphone"] == "ALKS"
    assert rep["histogram"] == {str(levenshtein("ALS", "ALKS")): 1}


def test_table_has_89_false_wakewords():
    probs = load_false_wakewords()
    # the true wake-word is listed alongside its 89 false positives
    assert "alexa" in probs and len(probs) == 90
    assert all(p >= 0.2 for p in probs.values())


class TestBinomial:
    def test_discovery_probability(self):
        assert discovery_probability(1.0) == pytest.approx(1.0)
        assert discovery_probability(0.0) == 0.0
        # 1 - P(0) - P(1) at p = 0.2
        want = 1 - 0.8 ** 10 - 10 * 0.2 * 0.8 ** 9
        assert discovery_probability(0.2) == pytest.approx(want, abs=1e-12)

    def test_all_discovered_is_product(self):
        assert all_discovered_probability([0.5, 0.5]) == pytest.approx(discovery_probability(0.5) ** 2)


class FakeSink:
    def __init__(self, fail=False):
        self.fail = fail
        self.t = 100.0

    def play(self, audio):
        if self.fail:
            raise SinkError("player exited 1")
        self.t += 1.0
        return self.t - 1.0, self.t


class TestSensorLog:
    def oracle(self, log, sink):
        return SensorLogOracle(sink, lambda w: f"{w}.wav", log, sleep=lambda s: None, clock=lambda: sink.t + 5)

    def test_event_in_window(self, tmp_path):
        log = tmp_path / "sensor.log"
        log.write_text("101.5\n")
        assert self.oracle(log, FakeSink()).trial("alexa") is Outcome.ACTIVATED

    def test_event_outside_window(self, tmp_path):
        log = tmp_path / "sensor.log"
        log.write_text("50.0\n110.0\n")
        assert self.oracle(log, FakeSink()).trial("alexa") is Outcome.NOT_ACTIVATED

    def test_missing_log_is_no_activation(self, tmp_path):
        assert self.oracle(tmp_path / "none.log", FakeSink()).trial("x") is Outcome.NOT_ACTIVATED

    def test_sink_failure_is_timeout(self, tmp_path):
        assert self.oracle(tmp_path / "s.log", FakeSink(fail=True)).trial("x") is Outcome.TIMEOUT
