"""Cyclically reduced words over {pi_1^{+-1}, ..., pi_d^{+-1}} modulo rotation and inversion.

Letters are encoded as small integers: ``2*(g-1)`` for ``pi_g`` and
``2*(g-1) + 1`` for its inverse, so the natural integer order is
``pi_1 < pi_1^-1 < pi_2 < ...`` and the inverse of a code is ``code ^ 1``.
A word is a tuple of codes.  Everything here is exact (ints and Fractions).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

Word = tuple[int, ...]

#: Default cap on the number of cyclically reduced words an enumeration may visit.
ENUMERATION_BUDGET = 5_000_000


class WordError(ValueError):
    """Input is not a valid cyclically reduced word."""


class BudgetExceeded(RuntimeError):
    """A requested enumeration or count is beyond the configured work budget."""


class Letter(NamedTuple):
    generator: int
    inverted: bool = False

    @property
    def code(self) -> int:
        return 2 * (self.generator - 1) + int(self.inverted)

    @classmethod
    def from_code(cls, code: int) -> "Letter":
        return cls(code // 2 + 1, bool(code & 1))

    def __str__(self) -> str:
        return f"{self.generator}'" if self.inverted else str(self.generator)


def inverse_word(w: Sequence[int]) -> Word:
    return tuple(x ^ 1 for x in reversed(w))


def is_cyclically_reduced(w: Sequence[int]) -> bool:
    k = len(w)
    if k == 0:
        return False
    return all(w[(i + 1) % k] != w[i] ^ 1 for i in range(k))


def _check(w: Sequence[int]) -> Word:
    w = tuple(int(x) for x in w)
    if not w:
        raise WordError("empty word")
    if any(x < 0 for x in w):
        raise WordError(f"negative letter code in {w}")
    if not is_cyclically_reduced(w):
        raise WordError(f"{format_word(w)} is not cyclically reduced")
    return w


def primitive_exponent(w: Sequence[int]) -> int:
    """Largest m with w = u^m."""
    k = len(w)
    for p in range(1, k + 1):
        if k % p == 0 and all(w[i] == w[i % p] for i in range(p, k)):
            return k // p
    return 1  # pragma: no cover


def double_letter_count(w: Sequence[int]) -> int:
    k = len(w)
    if k == 1:
        return 0
    return sum(1 for i in range(k) if w[i] == w[(i + 1) % k])


def orbit(w: Sequence[int]) -> set[Word]:
    """All rotations of w and of its inverse."""
    w = tuple(w)
    k = len(w)
    inv = inverse_word(w)
    out = set()
    for i in range(k):
        out.add(w[i:] + w[:i])
        out.add(inv[i:] + inv[:i])
    return out


def _least_rotation(w: Word) -> Word:
    k = len(w)
    return min(w[i:] + w[:i] for i in range(k))


@dataclass(frozen=True, order=True)
class WordClass:
    """Dihedral class of a cyclically reduced word, stored as its canonical representative."""

    word: Word
    h: int = field(compare=False)
    c: int = field(compare=False)

    @property
    def length(self) -> int:
        return len(self.word)

    def __len__(self) -> int:
        return len(self.word)

    @property
    def orbit_size(self) -> int:
        return 2 * len(self.word) // self.h

    @property
    def generators(self) -> frozenset[int]:
        return frozenset(x // 2 + 1 for x in self.word)

    def letter_counts(self, d: int) -> list[int]:
        """Occurrences of pi_i^{+-1} for i = 1..d."""
        e = [0] * d
        for x in self.word:
            e[x // 2] += 1
        return e

    def __str__(self) -> str:
        return format_word(self.word)


@lru_cache(maxsize=1 << 20)
def _canonical(w: Word) -> WordClass:
    rep = min(_least_rotation(w), _least_rotation(inverse_word(w)))
    return WordClass(rep, primitive_exponent(rep), double_letter_count(rep))


def canonicalize(w: Sequence[int] | WordClass) -> WordClass:
    if isinstance(w, WordClass):
        return w
    return _canonical(_check(w))


def word_stats(w: Sequence[int]) -> tuple[int, int, int]:
    """(length, h, c) of a cyclically reduced word."""
    w = _check(w)
    return len(w), primitive_exponent(w), double_letter_count(w)


def double(cls: WordClass, i: int) -> WordClass:
    """Class of w_1...w_i w_i w_{i+1}...w_k, positions 1-based on the canonical word."""
    w = cls.word
    if not 1 <= i <= len(w):
        raise IndexError(f"position {i} out of range for {cls}")
    return _canonical(w[:i] + w[i - 1 : i] + w[i:])


@lru_cache(maxsize=1 << 18)
def doublings(cls: WordClass) -> tuple[WordClass, ...]:
    """All |w| doublings, in position order (a multiset)."""
    return tuple(double(cls, i) for i in range(1, len(cls) + 1))


@lru_cache(maxsize=1 << 18)
def halvings(cls: WordClass) -> Counter:
    """Multiset of classes obtained by halving one pair of double letters."""
    w = cls.word
    k = len(w)
    out: Counter = Counter()
    if k == 1:
        return out
    for i in range(k):
        j = (i + 1) % k
        if w[i] == w[j]:
            # drop the second letter of the pair
            out[_canonical(tuple(w[m] for m in range(k) if m != j))] += 1
    return out


def a_count(d: int, k: int) -> int:
    """Number of cyclically reduced words of length k over d generators."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    if k == 0:
        return 0
    q = 2 * d - 1
    return q**k - 1 + 2 * d if k % 2 == 0 else q**k + 1


def enumerate_words(d: int, k: int, budget: int = ENUMERATION_BUDGET) -> Iterable[Word]:
    """Every cyclically reduced word of length k, by backtracking."""
    if d < 1 or k < 1:
        raise ValueError("need d >= 1 and k >= 1")
    if a_count(d, k) > budget:
        raise BudgetExceeded(f"a({d},{k}) = {a_count(d, k)} words exceeds budget {budget}")
    letters = range(2 * d)
    w = [0] * k

    def rec(pos: int):
        for x in letters:
            if pos and x == w[pos - 1] ^ 1:
                continue
            if pos == k - 1 and k > 1 and x == w[0] ^ 1:
                continue
            w[pos] = x
            if pos == k - 1:
                yield tuple(w)
            else:
                yield from rec(pos + 1)

    return rec(0)


@lru_cache(maxsize=256)
def _classes(d: int, k: int, budget: int) -> tuple[WordClass, ...]:
    out = []
    for w in enumerate_words(d, k, budget):
        cls = _canonical(w)
        if cls.word == w:
            out.append(cls)
    return tuple(out)


def enumerate_classes(d: int, k: int, budget: int = ENUMERATION_BUDGET) -> list[WordClass]:
    """Duplicate-free list of W_k/D_2k over d generators, sorted by canonical word."""
    return list(_classes(d, k, budget))


def classes_up_to(d: int, L: int, budget: int = ENUMERATION_BUDGET) -> list[WordClass]:
    out: list[WordClass] = []
    for k in range(1, L + 1):
        out.extend(_classes(d, k, budget))
    return out


def mu_weight(cls: WordClass) -> Fraction:
    """Spontaneous-formation rate (|w| - c(w)) / h(w)."""
    return Fraction(len(cls) - cls.c, cls.h)


def mu_k(d: int, k: int) -> Fraction:
    return Fraction(a_count(d, k) - a_count(d, k - 1), 2)


def nu_rate(d: int, k: int) -> Fraction:
    """Immigration rate at length k of the words using pi_{d+1}."""
    return mu_k(d + 1, k) - mu_k(d, k)


def stationary_mean_k(d: int, k: int) -> Fraction:
    return Fraction(a_count(d, k), 2 * k)


def parse_word(text: str) -> Word:
    """Parse ``"1 2' 1"`` (apostrophe marks an inverse) into letter codes."""
    codes = []
    for tok in text.replace(",", " ").split():
        inv = tok.endswith("'")
        g = int(tok.rstrip("'"))
        if g < 1:
            raise WordError(f"bad generator {tok!r}")
        codes.append(Letter(g, inv).code)
    return tuple(codes)


def format_word(w: Sequence[int]) -> str:
    return " ".join(str(Letter.from_code(x)) for x in w)


def word_alphabet_size(w: Sequence[int]) -> int:
    return max(w) // 2 + 1 if w else 0



class IdentityCheck(NamedTuple):
    name: str
    d: int
    k: int
    passed: bool


def identity_checks(d: int, K: int, budget: int = ENUMERATION_BUDGET) -> list[IdentityCheck]:
    """Exact checks of the class statistics for every length 1..K over d generators.

    Per length k: orbit sizes equal 2k/h and sum to a(d,k); sum of 1/h is a(d,k)/2k;
    sum of mu is (a(d,k) - a(d,k-1))/2; doubling and halving multiplicities satisfy
    a/h(u) = b/h(w); and the doublings of length k-1, weighted by 1/h, reproduce c/h.
    """
    out = []
    for k in range(1, K + 1):
        classes = enumerate_classes(d, k, budget)
        orbits = all(len(orbit(c.word)) == c.orbit_size == 2 * k // c.h for c in classes)
        out.append(IdentityCheck("orbit size 2k/h", d, k, orbits and sum(c.orbit_size for c in classes) == a_count(d, k)))
        out.append(IdentityCheck("sum 1/h", d, k, sum(Fraction(1, c.h) for c in classes) == stationary_mean_k(d, k)))
        out.append(IdentityCheck("sum mu", d, k, sum(mu_weight(c) for c in classes) == mu_k(d, k)))
        if k < 2:
            continue
        lower = enumerate_classes(d, k - 1, budget)
        ratio = all(
            Fraction(a, u.h) == Fraction(halvings(w)[u], w.h) for u in lower for w, a in Counter(doublings(u)).items()
        )
        out.append(IdentityCheck("doubling/halving ratio", d, k, ratio))
        lhs: Counter = Counter()
        for u in lower:
            for w in doublings(u):
                lhs[w] += Fraction(1, u.h)
        rhs = {w: Fraction(w.c, w.h) for w in classes if w.c}
        out.append(IdentityCheck("c/h vector", d, k, dict(lhs) == rhs))
    return out
