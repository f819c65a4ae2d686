import itertools
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrgrowth.words import (
    BudgetExceeded,
    Letter,
    WordError,
    a_count,
    canonicalize,
    classes_up_to,
    double,
    doublings,
    enumerate_classes,
    enumerate_words,
    format_word,
    halvings,
    mu_k,
    mu_weight,
    nu_rate,
    parse_word,
    stationary_mean_k,
    word_stats,
)


def P(text):
    return parse_word(text)


# -- brute-force oracles ---------------------------------------------------------------


def brute_words(d, k):
    """All cyclically reduced words by filtering every letter tuple."""
    out = []
    for w in itertools.product(range(2 * d), repeat=k):
        if all(w[i] != w[(i + 1) % k] ^ 1 for i in range(k)) or k == 1:
            out.append(w)
    return out


def brute_orbit(w):
    k = len(w)
    inv = tuple(y ^ 1 for y in reversed(w))
    return {u[i:] + u[:i] for u in (tuple(w), inv) for i in range(k)}


def brute_h(w):
    k = len(w)
    return max(m for m in range(1, k + 1) if k % m == 0 and tuple(w) == tuple(w[: k // m]) * m)


def brute_c(w):
    k = len(w)
    return 0 if k == 1 else sum(w[i] == w[(i + 1) % k] for i in range(k))


# -- examples ----------------------------------------------------------------------------


def test_parse_and_format_round_trip():
    w = P("1 2' 1")
    assert w == (0, 3, 0)
    assert format_word(w) == "1 2' 1"
    assert str(Letter.from_code(3)) == "2'"


def test_parse_rejects_backtracking():
    with pytest.raises(WordError):
        canonicalize(P("1 1'"))


def test_inversion_rotation_equivalence():
    assert canonicalize(P("1 2'")) == canonicalize(P("2 1'"))


def test_c_example():
    assert canonicalize(P("1 1 2' 2' 1")).c == 3


def test_periodic_word_orbit():
    cls = canonicalize(P("1 2 1 2"))
    assert cls.h == 2
    assert cls.orbit_size == 4
    assert len(brute_orbit(P("1 2 1 2"))) == 4


@pytest.mark.parametrize(
    "text, stats",
    [("1 2", (2, 1, 0)), ("1 1", (2, 2, 2)), ("1 2 1 1 2", (5, 1, 1)), ("1", (1, 1, 0))],
)
def test_word_stats(text, stats):
    assert word_stats(P(text)) == stats


def test_double_examples():
    assert double(canonicalize(P("1")), 1) == canonicalize(P("1 1"))
    u = canonicalize(P("1 2 1 1 2"))
    target = canonicalize(P("1 1 2 1 1 2"))
    # the double letter "1 1" of u can be doubled only to "1 1 1"; exactly one position gives target
    assert Counter(doublings(u))[target] == 1
    assert Counter(doublings(canonicalize(P("1 2")))) == Counter(
        {canonicalize(P("1 1 2")): 1, canonicalize(P("1 2 2")): 1}
    )


def test_double_position_refers_to_canonical_form():
    cls = canonicalize(P("2 1 1"))
    for i in range(1, len(cls) + 1):
        w = cls.word
        assert double(cls, i) == canonicalize(w[:i] + w[i - 1 : i] + w[i:])
    with pytest.raises(IndexError):
        double(cls, 0)


def test_halving_examples():
    assert halvings(canonicalize(P("1 2"))) == Counter()
    assert halvings(canonicalize(P("1 1 2 1 1 2"))) == Counter({canonicalize(P("1 2 1 1 2")): 2})
    assert halvings(canonicalize(P("1 1"))) == Counter({canonicalize(P("1")): 2})


def test_enumerate_classes_examples():
    (c,) = enumerate_classes(1, 3)
    assert c.h == 3
    assert [str(c) for c in enumerate_classes(2, 1)] == ["1", "2"]
    two = enumerate_classes(2, 2)
    assert sorted(str(c) for c in two) == ["1 1", "1 2", "1 2'", "2 2"]
    assert sum(c.orbit_size for c in two) == 12


@pytest.mark.parametrize("d, k, value", [(2, 1, 4), (2, 2, 12), (1, 1, 2), (1, 5, 2), (1, 6, 2), (3, 3, 5**3 + 1)])
def test_a_count(d, k, value):
    assert a_count(d, k) == value
    assert a_count(d, k) == len(brute_words(d, k))


def test_mu_examples():
    assert mu_weight(canonicalize(P("1"))) == 1
    assert mu_weight(canonicalize(P("1 1"))) == 0
    assert sum(mu_weight(c) for c in enumerate_classes(2, 2)) == 4
    assert mu_k(2, 1) == 2
    assert nu_rate(1, 1) == 1
    assert [mu_k(1, k) for k in range(1, 6)] == [1, 0, 0, 0, 0]


def test_budget_guard():
    with pytest.raises(BudgetExceeded):
        list(enumerate_words(3, 12, budget=1000))


# -- exhaustive properties ---------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3])
def test_enumeration_matches_brute_force(d):
    for k in range(1, 6 if d == 3 else 8):
        brute = brute_words(d, k)
        assert sorted(enumerate_words(d, k)) == sorted(brute)
        orbits = {frozenset(brute_orbit(w)) for w in brute}
        classes = enumerate_classes(d, k)
        assert len(classes) == len(orbits)
        for c in classes:
            assert c.orbit_size == len(brute_orbit(c.word))
            assert c.h == brute_h(c.word)
            assert c.c == brute_c(c.word)


def test_canonical_form_is_class_function():
    for d in (1, 2, 3):
        for k in range(1, 7 if d == 3 else 9):
            for w in itertools.islice(enumerate_words(d, k), 0, None, 7):
                cls = canonicalize(w)
                assert cls.word == min(brute_orbit(w))
                for u in brute_orbit(w):
                    assert canonicalize(u) == cls


@given(st.integers(1, 3), st.lists(st.integers(0, 5), min_size=1, max_size=9))
@settings(max_examples=200, deadline=None)
def test_canonicalize_random_words(d, raw):
    w = [raw[0] % (2 * d)]
    for y in raw[1:]:
        y %= 2 * d
        w.append(y if y != w[-1] ^ 1 else (y + 2) % (2 * d) if d > 1 else w[-1])
    w = tuple(w)
    while len(w) > 1 and w[-1] == w[0] ^ 1:
        w = w[:-1]
    cls = canonicalize(w)
    k, h, c = word_stats(w)
    assert (k, h, c) == (len(w), brute_h(w), brute_c(w))
    assert cls.orbit_size == 2 * k // h
    assert 0 <= c <= k


def test_doubling_halving_ratio():
    # a / h(u) == b / h(w) for every adjacent pair
    for d in (1, 2, 3):
        for k in range(1, 6 if d == 3 else 7):
            for u in enumerate_classes(d, k):
                for w, a in Counter(doublings(u)).items():
                    b = halvings(w)[u]
                    assert Fraction(a, u.h) == Fraction(b, w.h)


def test_c_vector_identity():
    for d in (1, 2, 3):
        for K in range(2, 6 if d == 3 else 8):
            lhs = Counter()
            for u in enumerate_classes(d, K - 1):
                for w in doublings(u):
                    lhs[w] += Fraction(1, u.h)
            rhs = Counter({w: Fraction(w.c, w.h) for w in enumerate_classes(d, K) if w.c})
            assert lhs == rhs


def test_rate_and_mean_identities():
    for d in (1, 2, 3, 4):
        for k in range(1, 9 if d < 3 else 6):
            classes = enumerate_classes(d, k)
            assert sum(mu_weight(c) for c in classes) == Fraction(a_count(d, k) - a_count(d, k - 1), 2)
            assert sum(Fraction(1, c.h) for c in classes) == Fraction(a_count(d, k), 2 * k)
            assert stationary_mean_k(d, k) == Fraction(a_count(d, k), 2 * k)


def test_classes_up_to_is_sorted_by_length():
    cs = classes_up_to(2, 3)
    assert [len(c) for c in cs] == sorted(len(c) for c in cs)
    assert len(cs) == 2 + 4 + len(enumerate_classes(2, 3))
