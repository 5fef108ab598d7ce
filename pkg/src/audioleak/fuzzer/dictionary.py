"""CMU pronouncing dictionary parsing and phoneme-count candidate selection."""

from __future__ import annotations

import difflib
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .phonetics import levenshtein, metaphone

log = logging.getLogger(__name__)

_PHONEME = re.compile(r"^([A-Z]{1,2})[012]?$")
_VARIANT = re.compile(r"^(.+)\((\d+)\)$")


@dataclass(frozen=True)
class PronunciationEntry:
    word: str
    phonemes: tuple[str, ...]
    variant: int = 1

    @property
    def phoneme_count(self) -> int:
        return len(self.phonemes)


@dataclass
class ParseReport:
    lines: int = 0
    entries: int = 0
    comments: int = 0
    skipped: int = 0
    skipped_lines: list[int] = field(default_factory=list)


def parse_dictionary(lines: Iterable[str]) -> tuple[list[PronunciationEntry], ParseReport]:
    report = ParseReport()
    entries = []
    for lineno, raw in enumerate(lines, 1):
        report.lines += 1
        line = raw.strip()
        if not line:
            continue
        if line.startswith(";;;"):
            report.comments += 1
            continue
        # the modern cmudict layout allows trailing "# comment"
        line = line.split(" #", 1)[0]
        parts = line.split()
        phonemes = []
        ok = len(parts) >= 2
        for p in parts[1:]:
            m = _PHONEME.match(p)
            if not m:
                ok = False
                break
            phonemes.append(m.group(1))
        if not ok:
            report.skipped += 1
            report.skipped_lines.append(lineno)
            continue
        word, variant = parts[0].lower(), 1
        m = _VARIANT.match(word)
        if m:
            word, variant = m.group(1), int(m.group(2))
        entries.append(PronunciationEntry(word, tuple(phonemes), variant))
        report.entries += 1
    if report.skipped:
        log.warning("skipped %d malformed dictionary lines", report.skipped)
    return entries, report


def load_dictionary(path) -> tuple[list[PronunciationEntry], ParseReport]:
    with open(path, encoding="latin-1") as fp:
        return parse_dictionary(fp)


class UnknownWord(KeyError):
    def __init__(self, word: str, suggestions: Sequence[str]):
        super().__init__(word)
        self.word = word
        self.suggestions = list(suggestions)

    def __str__(self) -> str:
        hint = ", ".join(self.suggestions) or "none"
        return f"{self.word!r} not in dictionary (nearest: {hint})"


@dataclass
class WakeWordCandidate:
    word: str
    phoneme_count: int
    metaphone: str
    distance: int
    trials: int = 0
    activations: int = 0

    @property
    def rate(self) -> float:
        return self.activations / self.trials if self.trials else 0.0


def primary_pronunciation(entries: Sequence[PronunciationEntry], word: str) -> PronunciationEntry:
    """The lowest-numbered pronunciation of `word`."""
    found = [e for e in entries if e.word == word]
    if not found:
        vocab = sorted({e.word for e in entries})
        raise UnknownWord(word, difflib.get_close_matches(word, vocab, n=5))
    return min(found, key=lambda e: (e.variant, e.phonemes))


def select_candidates(entries: Sequence[PronunciationEntry], target_word: str,
                      tolerance: Optional[int] = None,
                      counts: Optional[Iterable[int]] = None) -> list[WakeWordCandidate]:
    """Dictionary words whose phoneme count is close to the target's.

    With `tolerance` t, words within t phonemes of the target's (first)
    pronunciation are kept. With neither `tolerance` nor `counts`, the
    target count and one fewer are used, e.g. {5, 6} for "alexa". Each word
    appears once, ordered alphabetically; a word qualifies if any of its
    pronunciations does.
    """
    target_word = target_word.lower()
    target_count = primary_pronunciation(entries, target_word).phoneme_count
    if counts is not None:
        wanted = set(counts)
    elif tolerance is not None:
        if tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        wanted = set(range(target_count - tolerance, target_count + tolerance + 1))
    else:
        wanted = {target_count - 1, target_count}
    target_code = metaphone(target_word)
    best: dict[str, PronunciationEntry] = {}
    for e in entries:
        if e.phoneme_count not in wanted:
            continue
        cur = best.get(e.word)
        if cur is None or (e.variant, e.phonemes) < (cur.variant, cur.phonemes):
            best[e.word] = e
    out = []
    for word in sorted(best):
        code = metaphone(word)
        out.append(WakeWordCandidate(word, best[word].phoneme_count, code, levenshtein(code, target_code)))
    return out
