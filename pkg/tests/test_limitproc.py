import io
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from rrgrowth import limitproc as lp
from rrgrowth.stats import chi_square_counts, chi_square_poisson
from rrgrowth.words import a_count, canonicalize, doublings, enumerate_classes, mu_weight, nu_rate, parse_word


def W(text):
    return canonicalize(parse_word(text))


# -- initial law and immigration ---------------------------------------------------------


def test_stationary_init_loop_count_is_poisson_one():
    rng = np.random.default_rng(0)
    counts = np.array([len(lp.sample_stationary_init(1, 1, rng)) for _ in range(20_000)])
    assert chi_square_poisson(counts, 1.0)[1] > 0.01
    assert lp.sample_stationary_init(2, 0, rng) == []


def test_stationary_init_length_totals():
    rng = np.random.default_rng(1)
    totals = np.zeros((3000, 5))
    for i in range(len(totals)):
        for atom in lp.sample_stationary_init(2, 4, rng):
            totals[i, len(atom.word)] += 1
    for k in range(1, 5):
        mean = a_count(2, k) / (2 * k)
        assert abs(totals[:, k].mean() - mean) < 3 * math.sqrt(mean / len(totals))


@pytest.mark.parametrize("k", [3, 4])
def test_random_word_class_laws(k):
    # uniform cyclically reduced words give classes with probability proportional to 1/h,
    # and conditioning on distinct end letters gives (k - c)/h
    rng = np.random.default_rng(k)
    classes = enumerate_classes(2, k)
    for ends, weight in ((False, lambda c: Fraction(1, c.h)), (True, mu_weight)):
        got = Counter(canonicalize(tuple(w)) for w in lp.random_words(2, k, 40_000, rng, distinct_ends=ends).tolist())
        wts = np.array([float(weight(c)) for c in classes])
        assert set(got) <= set(classes)
        assert chi_square_counts([got[c] for c in classes], wts / wts.sum())[1] > 0.01


def test_no_doubled_two_cycles_immigrate():
    rng = np.random.default_rng(2)
    path = lp.simulate(2, 4, 3.0, rng, init=[])
    born = Counter(a.states[0] for a in path.immigrations())
    assert born[W("1 1")] == 0 and born[W("2 2")] == 0
    assert born[W("1 2")] > 0


def test_d1_only_loops_immigrate_and_lengths_grow_by_one():
    rng = np.random.default_rng(3)
    path = lp.simulate(1, 10, 3.0, rng)
    assert all(a.states[0] == W("1") for a in path.immigrations())
    for a in path.atoms:
        lens = [len(s) for s in a.states]
        assert lens == list(range(lens[0], lens[0] + len(lens)))
    rate = np.mean([len(lp.simulate(1, 3, 2.0, rng, init=[]).immigrations()) for _ in range(2000)])
    assert abs(rate - 2.0) < 3 * math.sqrt(2.0 / 2000)


def test_chain_holding_rate_equals_length():
    rng = np.random.default_rng(4)
    start = W("1 2 2")
    holds = []
    for _ in range(4000):
        a = lp._run_chain(start, 0.0, 10, 50.0, rng)
        holds.append(a.times[1] if len(a.times) > 1 else a.death)
    assert abs(np.mean(holds) - 1 / 3) < 3 * (1 / 3) / math.sqrt(len(holds))


def test_path_counts_and_horizon():
    rng = np.random.default_rng(5)
    path = lp.simulate(2, 5, 1.0, rng)
    with pytest.raises(ValueError):
        lp.aggregate_k(path, 2.0)
    assert lp.aggregate_k(lp.CyclePath(2, 5, 1.0), 0.5).sum() == 0
    agg = lp.aggregate_k(path, 1.0, 5)
    c = path.counts(1.0)
    assert agg.sum() == sum(c.values())


# -- stationarity -------------------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2])
def test_word_marginals_stay_poisson(d):
    rng = np.random.default_rng(10 + d)
    ws = lp.sample_word_counts(d, [0.0, 0.5, 1.0], 20_000, rng, max_len=3, L=8)
    for ti in range(3):
        for i, cls in enumerate(ws.classes):
            assert chi_square_poisson(ws.counts[:, ti, i], 1 / cls.h)[1] > 0.01 / len(ws.classes), (ti, str(cls))


def test_full_paths_agree_with_batch_sampler():
    rng = np.random.default_rng(6)
    agg = np.array([lp.aggregate_k(lp.simulate(2, 6, 1.0, rng), 1.0, 3) for _ in range(400)])
    for k in range(1, 4):
        mean = a_count(2, k) / (2 * k)
        assert abs(agg[:, k].mean() - mean) < 3 * math.sqrt(mean / len(agg))


def test_length_means_and_poisson_variance():
    rng = np.random.default_rng(7)
    x = lp.sample_length_counts(2, [0.7], 40_000, rng, 3)[:, 0]
    for k, mean in ((1, 2.0), (2, 3.0), (3, 14 / 3)):
        assert abs(x[:, k].mean() - mean) < 3 * math.sqrt(mean / len(x))
        # var of a Poisson sample variance is about 2 m^2 / R + m / R
        assert abs(x[:, k].var(ddof=1) - mean) < 3 * math.sqrt((2 * mean**2 + mean) / len(x))


def test_generator_on_bounded_coordinate_functions():
    # E[(f(X_{t+delta}) - f(X_t)) g(X_t)] / delta against E[(L f)(X_t) g(X_t)]
    d, delta, R = 2, 0.01, 200_000
    rng = np.random.default_rng(8)
    ws = lp.sample_word_counts(d, [1.0, 1.0 + delta], R, rng, max_len=3)
    idx = {c: i for i, c in enumerate(ws.classes)}
    for w in (W("1 2"), W("1 1"), W("1 1 2")):
        parents = Counter()
        for u in ws.classes:
            if len(u) == len(w) - 1:
                for v in doublings(u):
                    if v == w:
                        parents[u] += 1
        x0 = ws.counts[:, 0, idx[w]]
        x1 = ws.counts[:, 1, idx[w]]
        up = float(mu_weight(w)) + sum(a * ws.counts[:, 0, idx[u]] for u, a in parents.items())
        down = len(w) * x0
        f = lambda x: np.minimum(x, 3)  # noqa: E731
        Lf = up * (f(x0 + 1) - f(x0)) + down * (f(x0 - 1) - f(x0))
        for m in range(3):
            g = (x0 == m).astype(float)
            diff = (f(x1) - f(x0)) * g / delta - Lf * g
            se = diff.std(ddof=1) / math.sqrt(R)
            assert abs(diff.mean()) < 3 * se + 0.05 * abs((Lf * g).mean()), (str(w), m)


# -- closed forms --------------------------------------------------------------------------


def test_cov_formula_examples():
    assert lp.cov_formula(lp.CovSpec(2, 3, 3, 1.0, 1.0)) == pytest.approx(a_count(2, 3) / 6)
    assert lp.cov_formula(lp.CovSpec(2, 1, 2, 0.0, math.log(2))) == pytest.approx(0.5)
    assert lp.cov_formula(lp.CovSpec(2, 3, 2, 0.0, 1.0)) == 0.0
    with pytest.raises(ValueError):
        lp.CovSpec(2, 1, 1, 2.0, 1.0)
    with pytest.raises(ValueError):
        lp.CovSpec(2, 0, 1, 0.0, 1.0)


def test_expec_alpha_examples():
    assert lp.expec_alpha(2, 2, 0.0) == 1.0
    assert lp.expec_alpha(1, 2, math.log(2)) == pytest.approx(0.25)
    for j in (1, 3):
        total = sum(lp.expec_alpha(j, k, 1.0) for k in range(j, 400))
        assert abs(total - 1) < 1e-10
    with pytest.raises(ValueError):
        lp.expec_alpha(3, 2, 1.0)


@pytest.mark.parametrize("j, delta", [(1, math.log(2)), (2, 0.5), (3, 1.0)])
def test_yule_occupancy_matches_closed_form(j, delta):
    R = 50_000
    k = lp.sample_yule(j, delta, R, np.random.default_rng(j))
    for kk in range(j, j + 6):
        p = lp.expec_alpha(j, kk, delta)
        assert abs((k == kk).mean() - p) < 3 * math.sqrt(p * (1 - p) / R) + 1e-12


@pytest.mark.parametrize("gap", [0.25, 1.0])
def test_empirical_covariances(gap):
    R = 40_000
    x = lp.sample_length_counts(2, [0.5, 0.5 + gap], R, np.random.default_rng(int(gap * 100)), 4)
    for j in range(1, 5):
        for k in range(1, 5):
            a, b = x[:, 1, k].astype(float), x[:, 0, j].astype(float)
            prod = (a - a.mean()) * (b - b.mean())
            se = prod.std(ddof=1) / math.sqrt(R)
            assert abs(prod.mean() - lp.cov_nk(2, k, 0.5 + gap, j, 0.5)) < 3 * se, (j, k)


def test_ou_covariance_examples():
    assert lp.ou_covariance(3, 3, 1.0, 1.0) == 1.5
    assert lp.ou_covariance(2, 2, 0.0, math.log(2)) == pytest.approx(0.25)
    assert lp.ou_covariance(1, 2, 0.0, 1.0) == 0.0


def test_chebyshev_covariance_diagonal_tends_to_half_k():
    for k in (1, 2, 3):
        vals = [lp.chebyshev_trace_cov(d, k, k, 0.0, 0.0) for d in (2, 10, 100, 1000)]
        errs = [abs(v - k / 2) for v in vals]
        assert errs == sorted(errs, reverse=True)
        assert errs[-1] < 0.01 * k


# -- time reversal ------------------------------------------------------------------------


def test_reversed_rate_examples():
    table = lp.reversed_rates(Counter({W("1 1"): 1}), 3, 2)
    moves = [(kind, str(a), str(b) if b else None, r) for kind, a, b, r in table if kind != "create"]
    assert moves == [("shrink", "1 1", "1", Fraction(2))]
    table = lp.reversed_rates(Counter({W("1 2"): 1}), 3, 2)
    assert [(k, r) for k, a, b, r in table if k != "create"] == [("death", Fraction(2))]
    empty = lp.reversed_rates(Counter(), 2, 2)
    assert {k for k, *_ in empty} == {"create"}
    assert {str(a) for _, a, _, _ in empty} == {str(c) for c in enumerate_classes(2, 2)}
    assert all(r == Fraction(2, a.h) for _, a, _, r in empty)


def test_reversed_paths_match_reversed_rates():
    # counts of each reversed jump minus the integrated reversed rate have mean zero
    rng = np.random.default_rng(12)
    total: dict = {}
    for _ in range(1500):
        for key, (cnt, area) in lp.reversed_compensators(lp.simulate(2, 3, 1.0, rng)).items():
            t = total.setdefault(key, [0.0, 0.0])
            t[0] += cnt
            t[1] += area
    assert any(k[0] == "shrink" for k in total) and any(k[0] == "create" for k in total)
    for key, (cnt, area) in total.items():
        if area < 20:
            continue
        assert abs(cnt - area) < 3 * math.sqrt(area), key


def test_reversed_compensator_bookkeeping():
    # a lone atom that immigrates, grows once and leaves the window produces one of each move
    path = lp.CyclePath(1, 2, 1.0, [lp.AtomPath(0.2, [W("1")], [0.2], death=0.6)])
    path.atoms[0].states.append(W("1 1"))
    path.atoms[0].times.append(0.4)
    path.atoms[0].death = 0.7
    got = lp.reversed_compensators(path)
    assert got[("death", W("1"))][0] == 1
    assert got[("shrink", W("1 1"), W("1"))][0] == 1
    assert got[("create", W("1 1"))][0] == 1
    assert got[("shrink", W("1 1"), W("1"))][1] == pytest.approx(2 * 0.3)


# -- truncation and increments -------------------------------------------------------------


def test_truncation_ablation():
    # statistics of short words do not depend on the truncation level
    rng = np.random.default_rng(13)
    R = 600
    stats = {}
    for L in (8, 16):
        stats[L] = np.array([lp.aggregate_k(lp.simulate(1, L, 2.0, rng), 2.0, 4)[1:] for _ in range(R)], float)
    for k in range(4):
        a, b = stats[8][:, k], stats[16][:, k]
        se = math.sqrt(a.var(ddof=1) / R + b.var(ddof=1) / R)
        assert abs(a.mean() - b.mean()) < 3 * se


def test_increment_process_means():
    rng = np.random.default_rng(14)
    R, T = 1500, 1.0
    counts = np.zeros((R, 4))
    immig = np.zeros((R, 4))
    for i in range(R):
        path = lp.simulate_increment_process(1, 6, T, rng)
        counts[i] = lp.aggregate_k(path, T, 3)
        for a in path.immigrations():
            if a.states[0] <= 3:
                immig[i, a.states[0]] += 1
    for k in range(1, 4):
        m = (a_count(2, k) - a_count(1, k)) / (2 * k)
        assert abs(counts[:, k].mean() - m) < 3 * math.sqrt(m / R)
        nu = float(nu_rate(1, k)) * T
        assert abs(immig[:, k].mean() - nu) < 3 * math.sqrt(nu / R)
    assert nu_rate(1, 1) == 1


def test_word_level_split_reproduces_increment_means():
    rng = np.random.default_rng(15)
    ws = lp.sample_word_counts(2, [1.0], 20_000, rng, 3)
    uses2 = np.array([2 in c.generators for c in ws.classes])
    lens = np.array([len(c) for c in ws.classes])
    for k in range(1, 4):
        inc = ws.counts[:, 0, uses2 & (lens == k)].sum(axis=1)
        m = (a_count(2, k) - a_count(1, k)) / (2 * k)
        assert abs(inc.mean() - m) < 3 * math.sqrt(m / len(inc))
        total = ws.counts[:, 0, lens == k].sum(axis=1)
        assert np.array_equal(total, inc + ws.counts[:, 0, ~uses2 & (lens == k)].sum(axis=1))


# -- export --------------------------------------------------------------------------------


def test_csv_and_moment_report():
    rng = np.random.default_rng(16)
    path = lp.simulate(2, 3, 0.5, rng)
    buf = io.StringIO()
    lp.write_counts_csv(buf, lp.path_rows(path, [0.0, 0.5], replica=3))
    lines = buf.getvalue().split("\r\n")
    assert lines[0] == "replica,t,word,count"
    assert all(line.startswith("3,") for line in lines[1:-1])
    rep = lp.moment_report(lp.CovSpec(2, 1, 2, 0.0, math.log(2)), 0.49, 0.02)
    assert rep["formula_value"] == pytest.approx(0.5)
    assert set(rep) == {"covariance", "formula_value", "mc_estimate", "stderr"}

