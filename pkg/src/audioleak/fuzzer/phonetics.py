"""Original Metaphone encoding and Levenshtein edit distance."""

from __future__ import annotations

VOWELS = frozenset("AEIOU")
FRONT = frozenset("EIY")
_INITIAL_DROP = ("KN", "GN", "PN", "AE", "WR")


def metaphone(word: str) -> str:
    """Encode `word` with Lawrence Philips' 1990 Metaphone rules.

    Every leading vowel is emitted as ``A``; no length cap is applied.
    Non-alphabetic characters are ignored.
    """
    w = "".join(ch for ch in word.upper() if "A" <= ch <= "Z")
    if not w:
        return ""

    # collapse doubled letters except C
    dedup = [w[0]]
    for ch in w[1:]:
        if ch != dedup[-1] or ch == "C":
            dedup.append(ch)
    w = "".join(dedup)

    if w[:2] in _INITIAL_DROP:
        w = w[1:]
    elif w[0] == "X":
        w = "S" + w[1:]
    elif w[:2] == "WH":
        w = "W" + w[2:]

    n = len(w)
    out = []

    def at(i: int) -> str:
        return w[i] if 0 <= i < n else ""

    for i, ch in enumerate(w):
        prev, nxt, nxt2 = at(i - 1), at(i + 1), at(i + 2)
        if ch in VOWELS:
            if i == 0:
                out.append("A")
        elif ch == "B":
            if not (prev == "M" and i == n - 1):
                out.append("B")
        elif ch == "C":
            if nxt == "I" and nxt2 == "A":
                out.append("X")
            elif nxt == "H":
                out.append("K" if prev == "S" else "X")
            elif nxt in FRONT:
                if prev != "S":
                    out.append("S")
            else:
                out.append("K")
        elif ch == "D":
            if nxt == "G" and nxt2 in FRONT:
                out.append("J")
            else:
                out.append("T")
        elif ch == "G":
            if nxt == "H" and not (i + 2 >= n or nxt2 in VOWELS):
                continue
            if nxt == "N" and (i + 2 == n or w[i + 1:] == "NED"):
                continue
            if prev == "D" and nxt in FRONT:
                continue
            if nxt in FRONT and prev != "G":
                out.append("J")
            else:
                out.append("K")
        elif ch == "H":
            if prev in VOWELS and nxt not in VOWELS:
                continue
            if prev in ("C", "S", "P", "T", "G"):
                continue
            out.append("H")
        elif ch == "K":
            if prev != "C":
                out.append("K")
        elif ch == "P":
            out.append("F" if nxt == "H" else "P")
        elif ch == "Q":
            out.append("K")
        elif ch == "S":
            if nxt == "H" or (nxt == "I" and nxt2 in ("O", "A")):
                out.append("X")
            else:
                out.append("S")
        elif ch == "T":
            if nxt == "I" and nxt2 in ("O", "A"):
                out.append("X")
            elif nxt == "H":
                out.append("0")
            elif not (nxt == "C" and nxt2 == "H"):
                out.append("T")
        elif ch == "V":
            out.append("F")
        elif ch == "W" or ch == "Y":
            if nxt in VOWELS:
                out.append(ch)
        elif ch == "X":
            out.append("KS")
        elif ch == "Z":
            out.append("S")
        else:
            # F J L M N R
            out.append(ch)
    return "".join(out)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]
