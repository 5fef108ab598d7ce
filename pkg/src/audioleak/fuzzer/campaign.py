"""Wake-word fuzzing campaigns against an activation oracle."""

from __future__ import annotations

import enum
import logging
import math
import random
import time
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from typing import Callable, Iterable, Mapping, Optional, Protocol, Sequence

from ..orchestrator import SinkError
from .dictionary import WakeWordCandidate
from .phonetics import levenshtein, metaphone

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 10
DEFAULT_MIN_ACTIVATIONS = 2
OBSERVATION_WINDOW = 2.0


class Outcome(enum.Enum):
    ACTIVATED = "activated"
    NOT_ACTIVATED = "not_activated"
    TIMEOUT = "timeout"


class ActivationOracle(Protocol):
    def trial(self, word: str) -> Outcome: ...


def load_false_wakewords(path=None) -> dict[str, float]:
    """Word -> activation probability from the shipped Echo Dot fuzzing results."""
    if path is None:
        text = resources.files("audioleak").joinpath("data/alexa_false_wakewords.tsv").read_text()
    else:
        with open(path) as fp:
            text = fp.read()
    probs = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        word, hits = line.split("\t")
        probs[word.strip()] = int(hits) / 10
    return probs


class SimulatedOracle:
    """Activation oracle driven by per-word probabilities.

    ``mode="bernoulli"`` activates each trial independently with the word's
    probability. ``mode="replay"`` treats the probability as a recorded
    round: every block of `round_size` trials contains exactly
    ``round(p * round_size)`` activations in a seeded random order.
    """

    def __init__(self, probabilities: Mapping[str, float], seed: int = 0, mode: str = "bernoulli",
                 round_size: int = DEFAULT_TRIALS, timeout_rate: float = 0.0):
        if mode not in ("bernoulli", "replay"):
            raise ValueError(f"unknown oracle mode {mode!r}")
        for w, p in probabilities.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"activation probability for {w!r} outside [0, 1]")
        self.probabilities = {w.lower(): p for w, p in probabilities.items()}
        self.mode = mode
        self.round_size = round_size
        self.timeout_rate = timeout_rate
        self._rng = random.Random(seed)
        self._urns: dict[str, list[bool]] = {}

    def trial(self, word: str) -> Outcome:
        if self.timeout_rate and self._rng.random() < self.timeout_rate:
            return Outcome.TIMEOUT
        p = self.probabilities.get(word.lower(), 0.0)
        if self.mode == "bernoulli":
            hit = self._rng.random() < p
        else:
            urn = self._urns.get(word)
            if not urn:
                hits = round(p * self.round_size)
                urn = [True] * hits + [False] * (self.round_size - hits)
                self._rng.shuffle(urn)
                self._urns[word] = urn
            hit = urn.pop()
        return Outcome.ACTIVATED if hit else Outcome.NOT_ACTIVATED


class SensorLogOracle:
    """Oracle for real devices: play the word, then look for a sensor event.

    An external light sensor process appends one Unix timestamp per line to
    `log_path` whenever the device's indicator lights up. A trial counts as
    activated if an event falls between the start of playback and
    `window` seconds after it ends.
    """

    def __init__(self, sink, audio_for: Callable[[str], object], log_path, window: float = OBSERVATION_WINDOW,
                 sleep: Callable[[float], None] = time.sleep, clock: Callable[[], float] = time.time):
        self.sink = sink
        self.audio_for = audio_for
        self.log_path = log_path
        self.window = window
        self.sleep = sleep
        self.clock = clock

    def _events(self) -> list[float]:
        try:
            with open(self.log_path) as fp:
                return [float(x) for x in fp.read().split()]
        except (OSError, ValueError):
            return []

    def trial(self, word: str) -> Outcome:
        try:
            start, stop = self.sink.play(self.audio_for(word))
        except (TimeoutError, SinkError):
            return Outcome.TIMEOUT
        remaining = stop + self.window - self.clock()
        if remaining > 0:
            self.sleep(remaining)
        if any(start <= t <= stop + self.window for t in self._events()):
            return Outcome.ACTIVATED
        return Outcome.NOT_ACTIVATED


def candidates_for(words: Iterable[str], target: str, phoneme_count: int = 0) -> list[WakeWordCandidate]:
    """Candidates for arbitrary words (no dictionary lookup needed)."""
    code = metaphone(target)
    return [WakeWordCandidate(w, phoneme_count, metaphone(w), levenshtein(metaphone(w), code)) for w in words]


def run_campaign(candidates: Sequence[WakeWordCandidate], oracle: ActivationOracle,
                 trials_per_word: int = DEFAULT_TRIALS, cooldown: float = 0.0, max_retries: int = 2,
                 sleep: Callable[[float], None] = time.sleep) -> list[WakeWordCandidate]:
    """Try each candidate `trials_per_word` times, one emission at a time.

    A timed-out trial is retried up to `max_retries` times and dropped from
    the count if it never completes.
    """
    results = []
    for cand in candidates:
        trials = activations = 0
        for _ in range(trials_per_word):
            for _attempt in range(max_retries + 1):
                outcome = oracle.trial(cand.word)
                if cooldown:
                    sleep(cooldown)
                if outcome is not Outcome.TIMEOUT:
                    break
            else:
                log.info("trial for %r timed out %d times; not counted", cand.word, max_retries + 1)
                continue
            trials += 1
            activations += outcome is Outcome.ACTIVATED
        results.append(replace(cand, trials=trials, activations=activations))
    return results


def discovered(results: Iterable[WakeWordCandidate],
               min_activations: int = DEFAULT_MIN_ACTIVATIONS) -> list[WakeWordCandidate]:
    return [r for r in results if r.activations >= min_activations and r.activations > 0]


def distance_histogram(results: Iterable[WakeWordCandidate],
                       min_activations: Optional[int] = DEFAULT_MIN_ACTIVATIONS) -> dict[int, int]:
    """Count of discovered words per phonetic distance, sorted by distance.

    Pass ``min_activations=None`` to histogram every result regardless of trials.
    """
    rows = list(results) if min_activations is None else discovered(results, min_activations)
    hist = Counter(r.distance for r in rows)
    return dict(sorted(hist.items()))


def discovery_probability(p: float, trials: int = DEFAULT_TRIALS,
                          min_activations: int = DEFAULT_MIN_ACTIVATIONS) -> float:
    """P(at least `min_activations` successes in `trials` Bernoulli(p) trials)."""
    return math.fsum(math.comb(trials, k) * p ** k * (1 - p) ** (trials - k)
                     for k in range(min_activations, trials + 1))


def all_discovered_probability(probabilities: Iterable[float], trials: int = DEFAULT_TRIALS,
                               min_activations: int = DEFAULT_MIN_ACTIVATIONS) -> float:
    return math.prod(discovery_probability(p, trials, min_activations) for p in probabilities)


def fuzz_report(results: Sequence[WakeWordCandidate], target: str, trials_per_word: int,
                min_activations: int = DEFAULT_MIN_ACTIVATIONS) -> dict:
    found = discovered(results, min_activations)
    return {
        "target": target,
        "target_metaphone": metaphone(target),
        "trials_per_word": trials_per_word,
        "min_activations": min_activations,
        "candidates": [
            {
                "word": r.word,
                "phoneme_count": r.phoneme_count,
                "metaphone": r.metaphone,
                "distance": r.distance,
                "trials": r.trials,
                "activations": r.activations,
                "discovered": r.activations >= min_activations and r.activations > 0,
            }
            for r in results
        ],
        "discovered": [r.word for r in found],
        "histogram": {str(d): c for d, c in distance_histogram(found, None).items()},
    }
