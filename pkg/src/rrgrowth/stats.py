"""Validation harness: exact oracles at tiny sizes, Poisson references, total variation
estimates, the conditioned-graph coupling and Monte Carlo comparisons of the graph
process with the limit process.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from . import __version__
from .graph import Clock, CycleRecord, GraphState, PermTower, RandomStreams, advance, cycle_lengths, list_cycles
from .graph._kernels import sample_short_counts
from .limitproc import chebyshev_trace_cov, cov_nk, ou_covariance, sample_length_counts
from .words import BudgetExceeded, WordClass, a_count, enumerate_classes

#: Default bound on (n!)^d for exhaustive enumeration.
EXACT_BUDGET = 10**7
#: Per-coordinate truncation of the count support used by TV estimates.
TV_TRUNCATION = 10
MIN_TV_SAMPLES = 10**4


# -- seeds and parallel fan-out ----------------------------------------------------------


def replica_seed(master: int, index: int) -> np.random.SeedSequence:
    """Seed of replica (or chunk) ``index``; reproducible in isolation."""
    return np.random.SeedSequence(master, spawn_key=(index,))


def replica_rng(master: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replica_seed(master, index)))


def map_replicas(fn: Callable[[int], object], count: int, threads: int = 1) -> list:
    """[fn(0), ..., fn(count-1)] in index order, whatever the thread count."""
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


# -- reports -----------------------------------------------------------------------------


@dataclass
class Row:
    """One compared statistic; ``stderr == 0`` marks an exact comparison."""

    statistic: str
    formula: float
    estimate: float
    stderr: float

    @property
    def z(self) -> float:
        diff = self.estimate - self.formula
        if self.stderr > 0:
            return diff / self.stderr
        return 0.0 if abs(diff) < 1e-9 else math.copysign(math.inf, diff)


@dataclass
class Gate:
    """A pass/fail check that is not a z-score, e.g. a chi-square p-value or a shape test."""

    statistic: str
    passed: bool
    detail: str = ""


def config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Report:
    name: str
    rows: list[Row] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int | None = None
    notes: list[str] = field(default_factory=list)
    gates: list[Gate] = field(default_factory=list)

    def passed(self, threshold: float = 3.0) -> bool:
        return all(abs(r.z) < threshold for r in self.rows) and all(g.passed for g in self.gates)

    def failures(self, threshold: float = 3.0) -> list[Row]:
        return [r for r in self.rows if not abs(r.z) < threshold]

    def to_dict(self) -> dict:
        return {
            "report": self.name,
            "version": __version__,
            "seed": self.seed,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "rows": [dict(asdict(r), z=r.z) for r in self.rows],
            "gates": [asdict(g) for g in self.gates],
            "notes": self.notes,
            "passed": self.passed(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)

    def to_text(self) -> str:
        head = f"# {self.name}  version={__version__}  seed={self.seed}  config={config_hash(self.config)}"
        cols = ["statistic", "formula", "estimate", "stderr", "z"]
        body = [[r.statistic, f"{r.formula:.6g}", f"{r.estimate:.6g}", f"{r.stderr:.3g}", f"{r.z:+.2f}"] for r in self.rows]
        widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(cols)]
        lines = [head]
        if body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip())
        lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)).rstrip() for b in body]
        lines += [f"{'PASS' if g.passed else 'FAIL'}  {g.statistic}  {g.detail}".rstrip() for g in self.gates]
        lines += [f"# {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def mean_row(name: str, x: np.ndarray, formula: float) -> Row:
    x = np.asarray(x, dtype=float)
    return Row(name, float(formula), float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))))


def cov_row(name: str, x: np.ndarray, y: np.ndarray, formula: float) -> Row:
    """Sample covariance with the delta-method stderr sd((x - xbar)(y - ybar)) / sqrt(R)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    prod = (x - x.mean()) * (y - y.mean())
    return Row(name, float(formula), float(prod.sum() / (len(x) - 1)), float(prod.std(ddof=1) / math.sqrt(len(x))))


def chi_square_poisson(counts: np.ndarray, mean: float) -> tuple[float, float, int]:
    """Goodness of fit of integer samples to Poisson(mean); cells with expected < 5 are pooled.

    Returns (statistic, p-value, degrees of freedom).
    """
    counts = np.asarray(counts, dtype=np.int64)
    N = len(counts)
    top = int(counts.max()) + 1
    pmf = sps.poisson.pmf(np.arange(top), mean)
    obs = np.bincount(counts, minlength=top).astype(float)
    exp = pmf * N
    exp[-1] += sps.poisson.sf(top - 1, mean) * N
    cells_o, cells_e, acc_o, acc_e = [], [], 0.0, 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        if cells_e:
            cells_o[-1] += acc_o
            cells_e[-1] += acc_e
        else:
            cells_o, cells_e = [acc_o], [acc_e]
    o, e = np.array(cells_o), np.array(cells_e)
    df = len(o) - 1
    if df < 1:
        return 0.0, 1.0, 0
    stat = float(((o - e) ** 2 / e).sum())
    return stat, float(sps.chi2.sf(stat, df)), df


def chi_square_counts(observed: Sequence[float], probs: Sequence[float]) -> tuple[float, float, int]:
    """Goodness of fit of category counts to probabilities, pooling cells with expected < 5."""
    o = np.asarray(observed, dtype=float)
    p = np.asarray(probs, dtype=float)
    order = np.argsort(p)
    o, e = o[order], p[order] * o.sum()
    cells_o, cells_e, acc_o, acc_e = [], [], 0.0, 0.0
    for oi, ei in zip(o, e):
        acc_o += oi
        acc_e += ei
        if acc_e >= 5:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if cells_e:
        cells_o[-1] += acc_o
        cells_e[-1] += acc_e
    o, e = np.array(cells_o), np.array(cells_e)
    df = len(o) - 1
    if df < 1:
        return 0.0, 1.0, 0
    stat = float(((o - e) ** 2 / e).sum())
    return stat, float(sps.chi2.sf(stat, df)), df


# -- exact oracles -----------------------------------------------------------------------


def exact_cycle_distribution(n: int, d: int, r: int, budget: int = EXACT_BUDGET) -> dict[tuple[int, ...], Fraction]:
    """Joint law of (C_1, ..., C_r) by enumerating all d-tuples of permutations of [n]."""
    total = math.factorial(n) ** d
    if total > budget:
        raise BudgetExceeded(f"(n!)^d = {total} exceeds the enumeration budget {budget}")
    if r < 1:
        return {(): Fraction(1)}
    perms = list(itertools.permutations(range(n)))
    tally: Counter = Counter()
    for combo in itertools.product(perms, repeat=d):
        if n == 0:
            tally[(0,) * r] += 1
            continue
        c = cycle_lengths(GraphState.from_permutations(combo), r)
        tally[tuple(int(v) for v in c[1:])] += 1
    return {k: Fraction(v, total) for k, v in sorted(tally.items())}


def permutation_cycle_law(n: int, r: int) -> dict[tuple[int, ...], Fraction]:
    """Law of the numbers of j-cycles (j <= r) of a uniform permutation of [n], from Cauchy's formula."""
    # e_i: coefficients of exp(-sum_{j<=r} x^j / j); g(m) = sum_{i<=m} e_i counts the
    # proportion of permutations of [m] with no cycle of length <= r
    e = [Fraction(1)]
    for i in range(1, n + 1):
        e.append(-sum(e[i - j] for j in range(1, min(r, i) + 1)) / i)
    g = list(itertools.accumulate(e))
    law = {}
    ranges = [range(n // j + 1) for j in range(1, r + 1)]
    for c in itertools.product(*ranges):
        used = sum(j * cj for j, cj in zip(range(1, r + 1), c))
        if used > n:
            continue
        p = g[n - used]
        for j, cj in zip(range(1, r + 1), c):
            p *= Fraction(1, j**cj * math.factorial(cj))
        if p:
            law[c] = p
    return law


def falling(n: int, k: int) -> int:
    return math.perm(n, k) if 0 <= k <= n else 0


def labeled_cycle_mean(n: int, k: int) -> Fraction:
    """Probability that a fixed labeled k-cycle with distinct vertices is present."""
    return Fraction(1, falling(n, k))


# -- Poisson reference and TV ------------------------------------------------------------


@dataclass(frozen=True)
class PoissonReference:
    """Independent Poisson coordinates with the given means (keys fix the coordinate order)."""

    means: dict

    @classmethod
    def lengths(cls, d: int, r: int) -> "PoissonReference":
        return cls({k: Fraction(a_count(d, k), 2 * k) for k in range(1, r + 1)})

    @classmethod
    def classes(cls, d: int, r: int) -> "PoissonReference":
        return cls({w: Fraction(1, w.h) for k in range(1, r + 1) for w in enumerate_classes(d, k)})

    @property
    def keys(self) -> list:
        return list(self.means)

    def pmf(self, x: Sequence[int]) -> float:
        return float(np.prod([sps.poisson.pmf(v, float(m)) for v, m in zip(x, self.means.values())]))

    def grid(self, T: int = TV_TRUNCATION) -> np.ndarray:
        """Cell probabilities on {0..T, >T}^r (last index of each axis is the tail)."""
        out = np.ones(())
        for m in self.means.values():
            axis = np.append(sps.poisson.pmf(np.arange(T + 1), float(m)), sps.poisson.sf(T, float(m)))
            out = np.multiply.outer(out, axis)
        return out

    def exact_tv(self, law: dict[tuple[int, ...], Fraction]) -> float:
        """TV distance between a finitely supported law and this reference (untruncated)."""
        covered = 0.0
        diff = 0.0
        for x, p in law.items():
            q = self.pmf(x)
            covered += q
            diff += abs(float(p) - q)
        return 0.5 * (diff + max(0.0, 1.0 - covered))


@dataclass
class TvReport:
    d: int
    n: int
    r: int
    estimate: float
    stderr: float
    bound_shape: float
    raw: float = 0.0
    floor: float = 0.0
    samples: int = 0

    def __post_init__(self):
        if self.estimate < 0:
            raise ValueError("TV estimate must be nonnegative")


def _cells(samples: np.ndarray, r: int, T: int) -> np.ndarray:
    s = np.minimum(np.asarray(samples, dtype=np.int64), T + 1)
    return np.ravel_multi_index(s.T, (T + 2,) * r)


def _plugin_tv(counts: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(counts / counts.sum() - q).sum())


def empirical_tv(
    samples: np.ndarray,
    ref: PoissonReference,
    d: int = 0,
    n: int = 0,
    rng: np.random.Generator | None = None,
    resamples: int = 100,
    truncate: int = TV_TRUNCATION,
    bias_correct: bool = True,
) -> TvReport:
    """TV distance between the empirical joint law of ``samples`` (rows) and ``ref``.

    The plug-in estimate on the truncated grid is biased upward by sampling noise.
    With ``bias_correct`` the mean plug-in value for samples of the same size drawn
    from the reference itself is subtracted (clipped at 0).  The stderr is a
    parametric bootstrap from the empirical cell law.
    """
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    N, r = samples.shape
    if N < MIN_TV_SAMPLES:
        raise ValueError(f"need at least {MIN_TV_SAMPLES} samples, got {N}")
    if r != len(ref.means):
        raise ValueError("sample width does not match the reference")
    rng = np.random.default_rng(0) if rng is None else rng
    q = ref.grid(truncate).ravel()
    counts = np.bincount(_cells(samples, r, truncate), minlength=q.size)
    raw = _plugin_tv(counts, q)
    phat = counts / N
    boot = [_plugin_tv(rng.multinomial(N, phat), q) for _ in range(resamples)]
    floor = float(np.mean([_plugin_tv(rng.multinomial(N, q), q) for _ in range(resamples)])) if bias_correct else 0.0
    est = max(raw - floor, 0.0)
    shape = (2 * d - 1) ** (2 * r - 1) / n if d and n else math.nan
    return TvReport(d, n, r, est, float(np.std(boot, ddof=1)), shape, raw, floor, N)


def sample_short_cycle_counts(n: int, d: int, N: int, seed: int, chunk: int = 50_000, threads: int = 1) -> np.ndarray:
    """(C_1, C_2) of N independent graphs G_n, shape (N, 2); chunk i uses seed stream i."""
    sizes = [min(chunk, N - s) for s in range(0, N, chunk)]
    parts = map_replicas(lambda i: sample_short_counts(replica_rng(seed, i), n, d, sizes[i]), len(sizes), threads)
    return np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)


def tv_scan(d: int, r: int, n_list: Sequence[int], samples: int | Sequence[int], seed: int, threads: int = 1) -> list[TvReport]:
    """Bias-corrected TV of (C_1, ..., C_r) to the Poisson reference along n_list (r <= 2)."""
    if not 1 <= r <= 2:
        raise ValueError("the fast sampler covers r in {1, 2}")
    sizes = [samples] * len(n_list) if isinstance(samples, int) else list(samples)
    ref = PoissonReference.lengths(d, r)
    out = []
    for i, (n, N) in enumerate(zip(n_list, sizes)):
        x = sample_short_cycle_counts(n, d, N, seed + 7919 * (i + 1), threads=threads)[:, :r]
        out.append(empirical_tv(x, ref, d, n, rng=replica_rng(seed, 10**6 + i)))
    return out


# -- conditioned graphs ------------------------------------------------------------------


def alpha_edges(alpha: CycleRecord, n: int, d: int) -> list[tuple[int, int, int]]:
    """Directed edges (l, a, b) meaning pi_l(a) = b, checked for well-formedness."""
    k = len(alpha.vertices)
    if k == 0 or len(alpha.word) != k:
        raise ValueError("alpha needs matching nonempty vertex and word sequences")
    if len(set(alpha.vertices)) != k or not all(0 <= v < n for v in alpha.vertices):
        raise ValueError("alpha's vertices must be distinct labels in [0, n)")
    edges = []
    for i, y in enumerate(alpha.word):
        if not 0 <= y < 2 * d:
            raise ValueError(f"letter code {y} outside the alphabet of d={d}")
        u, v = alpha.vertices[i], alpha.vertices[(i + 1) % k]
        edges.append((y >> 1, v, u) if y & 1 else (y >> 1, u, v))
    if k > 1 and any(alpha.word[i] == alpha.word[i - 1] ^ 1 for i in range(k)):
        raise ValueError("alpha backtracks")
    seen_out, seen_in = set(), set()
    for l, a, b in edges:
        if (l, a) in seen_out or (l, b) in seen_in:
            raise ValueError("alpha assigns two images to one point")
        seen_out.add((l, a))
        seen_in.add((l, b))
    return edges


def contains_cycle(state: GraphState, alpha: CycleRecord) -> bool:
    return all(state.towers[l].succ[a] == b for l, a, b in alpha_edges(alpha, state.n, state.d))


def sample_conditioned(state: GraphState, alpha: CycleRecord) -> GraphState:
    """Couple ``state`` with a graph conditioned to contain alpha by transposition swaps.

    For each edge pi_l(a_m) = b_m of alpha in turn, the current image of a_m is
    swapped with b_m.  Uniform input permutations give outputs that are uniform
    subject to alpha's constraints.  ``state`` is not modified.
    """
    edges = alpha_edges(alpha, state.n, state.d)
    perms = [t.permutation() for t in state.towers]
    for l, a, b in edges:
        p = perms[l]
        c = p[a]
        if c != b:
            j = int(np.flatnonzero(p == b)[0])
            p[a], p[j] = b, c
    return GraphState.from_permutations(perms)


def coupling_violations(base: GraphState, cond: GraphState, alpha: CycleRecord) -> list[tuple[int, int, int]]:
    """Edges of ``base`` lost in ``cond`` that do not conflict with alpha (should be empty)."""
    edges = alpha_edges(alpha, base.n, base.d)
    out_of = {(l, a): b for l, a, b in edges}
    into = {(l, b): a for l, a, b in edges}
    bad = []
    for l in range(base.d):
        for i in range(base.n):
            j = int(base.towers[l].succ[i])
            if cond.towers[l].succ[i] == j:
                continue
            conflict = ((l, i) in out_of and out_of[(l, i)] != j) or ((l, j) in into and into[(l, j)] != i)
            if not conflict:
                bad.append((l, i, j))
    return bad


def conflicts_with(alpha: CycleRecord, beta: CycleRecord, d: int, n: int) -> bool:
    """beta uses an edge leaving or entering alpha's path with the wrong endpoint."""
    ea = alpha_edges(alpha, n, d)
    out_of = {(l, a): b for l, a, b in ea}
    into = {(l, b): a for l, a, b in ea}
    for l, a, b in alpha_edges(beta, n, d):
        if ((l, a) in out_of and out_of[(l, a)] != b) or ((l, b) in into and into[(l, b)] != a):
            return True
    return False


def random_state(n: int, d: int, rng: np.random.Generator) -> GraphState:
    return GraphState([PermTower.from_permutation(rng.permutation(n)) for _ in range(d)])


# -- overlap -----------------------------------------------------------------------------


def overlap_probability(d: int, n: int, r: int, replicas: int, seed: int = 0, threads: int = 1) -> tuple[float, float]:
    """Monte Carlo P[two cycles of length <= r share a vertex], with its stderr."""
    if replicas < 1000:
        raise ValueError("need at least 1000 replicas")
    if r < 1:
        return 0.0, 0.0

    def one(i: int) -> bool:
        state = random_state(n, d, replica_rng(seed, i))
        seen: set[int] = set()
        for rec in list_cycles(state, r):
            if seen.intersection(rec.vertices):
                return True
            seen.update(rec.vertices)
        return False

    hits = np.array(map_replicas(one, replicas, threads), dtype=float)
    p = float(hits.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / replicas)


# -- graph process versus limit ----------------------------------------------------------


def grow_and_count(d: int, K: int, times: Sequence[float], seed: int, index: int) -> np.ndarray:
    """C_1..C_K of one growing graph at each of ``times`` (ascending), shape (len(times), K)."""
    streams = RandomStreams(replica_seed(seed, index))
    state, clock = GraphState.empty(d), Clock()
    out = np.zeros((len(times), K), dtype=np.int64)
    for i, t in enumerate(times):
        advance(clock, state, t, streams)
        if state.n:
            out[i] = cycle_lengths(state, K)[1:]
    return out


def graph_vs_limit(
    d: int,
    K: int,
    s_list: Sequence[float],
    t_list: Sequence[float],
    replicas: int,
    seed: int = 0,
    limit_replicas: int = 0,
    threads: int = 1,
) -> Report:
    """Moments of C_k at times s + t (s in s_list, t in t_list) against the stationary limit.

    Rows compare means with a(d,k)/2k and covariances with the closed form; with
    ``limit_replicas`` the limit process is also simulated and its moments reported.
    """
    t_list = sorted(t_list)
    config = dict(d=d, K=K, s_list=list(s_list), t_list=t_list, replicas=replicas, limit_replicas=limit_replicas)
    rep = Report("graph_vs_limit", config=config, seed=seed)
    for si, s in enumerate(s_list):
        times = [s + t for t in t_list]
        data = np.stack(map_replicas(lambda i: grow_and_count(d, K, times, seed + si, i), replicas, threads))
        for ti, t in enumerate(t_list):
            for k in range(1, K + 1):
                rep.rows.append(mean_row(f"graph s={s} E C_{k}(t={t})", data[:, ti, k - 1], a_count(d, k) / (2 * k)))
        for (ta, t0), (tb, t1) in itertools.combinations_with_replacement(enumerate(t_list), 2):
            for j in range(1, K + 1):
                for k in range(1, K + 1):
                    if ta == tb and k < j:
                        continue
                    rep.rows.append(
                        cov_row(
                            f"graph s={s} cov(C_{k}(t={t1}), C_{j}(t={t0}))",
                            data[:, tb, k - 1],
                            data[:, ta, j - 1],
                            cov_nk(d, k, t1, j, t0),
                        )
                    )
    if limit_replicas:
        rng = replica_rng(seed, 2**31)
        x = sample_length_counts(d, t_list, limit_replicas, rng, K)
        for ti, t in enumerate(t_list):
            for k in range(1, K + 1):
                rep.rows.append(mean_row(f"limit E N_{k}(t={t})", x[:, ti, k], a_count(d, k) / (2 * k)))
        for (ta, t0), (tb, t1) in itertools.combinations(enumerate(t_list), 2):
            for j in range(1, K + 1):
                for k in range(1, K + 1):
                    rep.rows.append(
                        cov_row(f"limit cov(N_{k}({t1}), N_{j}({t0}))", x[:, tb, k], x[:, ta, j], cov_nk(d, k, t1, j, t0))
                    )
    return rep


def chebyshev_traces(d: int, N: np.ndarray, i_max: int) -> np.ndarray:
    """2 tr T_i for i = 1..i_max from length counts N[..., k] (last axis indexed by k)."""
    out = np.zeros(N.shape[:-1] + (i_max + 1,))
    for i in range(1, i_max + 1):
        acc = sum(2 * k * N[..., k].astype(float) for k in range(1, i + 1) if i % k == 0)
        out[..., i] = (2 * d - 1) ** (-i / 2) * acc
    return out


def ou_limit_scan(
    d_list: Sequence[int],
    k_list: Sequence[int],
    s: float,
    t: float,
    replicas: int,
    seed: int = 0,
) -> Report:
    """cov(tr T_i(t), tr T_k(s)) from limit-process samples against the exact fixed-d value.

    Each row's formula is the exact pre-limit covariance; the d -> infinity value is
    recorded in the statistic label.
    """
    if list(d_list) != sorted(d_list):
        raise ValueError("d_list must be increasing")
    if s > t:
        raise ValueError("need s <= t")
    kmax = max(k_list)
    rep = Report("ou_limit_scan", config=dict(d_list=list(d_list), k_list=list(k_list), s=s, t=t, replicas=replicas), seed=seed)
    for di, d in enumerate(d_list):
        x = sample_length_counts(d, [s, t], replicas, replica_rng(seed, di), kmax)
        tr = chebyshev_traces(d, x, kmax) / 2
        for i in k_list:
            for k in k_list:
                exact = chebyshev_trace_cov(d, i, k, s, t)
                limit = ou_covariance(i, k, s, t)
                rep.rows.append(cov_row(f"d={d} cov(trT_{i}(t), trT_{k}(s)) [limit {limit:.4g}]", tr[:, 1, i], tr[:, 0, k], exact))
    return rep
