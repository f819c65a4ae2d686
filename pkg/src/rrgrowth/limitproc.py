"""The limiting cycle process: Poisson immigration of words, Yule-type letter doubling,
stationary starts, time reversal and closed-form moments.

Two simulators are provided.  :func:`simulate` builds a full :class:`CyclePath`
with every atom's trajectory.  :func:`sample_word_counts` and
:func:`sample_length_counts` are vectorised Monte Carlo samplers that return
counts at fixed observation times for many replicas at once; they only carry
atoms that can still be observed (lengths never decrease, so an atom that
leaves the observed range is dropped).
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

import numpy as np

from .words import (
    WordClass,
    a_count,
    canonicalize,
    classes_up_to,
    double,
    doublings,
    halvings,
    enumerate_classes,
    mu_k,
    mu_weight,
    nu_rate,
)


@dataclass(frozen=True)
class ImmigrationAtom:
    word: WordClass
    birth_time: float = 0.0


@dataclass
class AtomPath:
    """One atom's chain: ``states[i]`` holds on [times[i], times[i+1]); killed at ``death``."""

    birth: float
    states: list
    times: list[float]
    death: float = math.inf
    immigrant: bool = True

    def state_at(self, t: float):
        if t < self.birth or t >= self.death:
            return None
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[i]


def _length(state) -> int:
    return state if isinstance(state, int) else len(state)


@dataclass
class CyclePath:
    """A realised trajectory of the limit process on [0, horizon], truncated at length L."""

    d: int
    L: int
    horizon: float
    atoms: list[AtomPath] = field(default_factory=list)

    def counts(self, t: float) -> Counter:
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        out: Counter = Counter()
        for a in self.atoms:
            s = a.state_at(t)
            if s is not None:
                out[s] += 1
        return out

    def immigrations(self, t0: float = 0.0, t1: float | None = None) -> list[AtomPath]:
        t1 = self.horizon if t1 is None else t1
        return [a for a in self.atoms if a.immigrant and t0 < a.birth <= t1]

    def jumps(self):
        """(time, kind, from_state, to_state) for every event in (0, horizon], time-ordered.

        kind is "immigrate", "grow" or "exit" (growth beyond L).
        """
        ev = []
        for a in self.atoms:
            if a.immigrant and a.birth > 0:
                ev.append((a.birth, "immigrate", None, a.states[0]))
            for i in range(1, len(a.states)):
                ev.append((a.times[i], "grow", a.states[i - 1], a.states[i]))
            if a.death <= self.horizon:
                ev.append((a.death, "exit", a.states[-1], None))
        ev.sort(key=lambda e: e[0])
        return ev


def aggregate_k(path: CyclePath, t: float, K: int | None = None) -> np.ndarray:
    """Length totals N_k(t) for k = 0..K (index 0 unused); K defaults to the truncation L."""
    if t > path.horizon:
        raise ValueError(f"t={t} beyond horizon {path.horizon}")
    K = path.L if K is None else K
    out = np.zeros(K + 1, dtype=np.int64)
    for s, c in path.counts(t).items():
        k = _length(s)
        if k <= K:
            out[k] += c
    return out


# -- random words -----------------------------------------------------------------------


def random_words(d: int, k: int, m: int, rng: np.random.Generator, distinct_ends: bool = False) -> np.ndarray:
    """m uniform cyclically reduced words of length k (rows of letter codes).

    With ``distinct_ends`` the first and last letters differ (k >= 2), which makes
    the induced class law proportional to (k - c(w)) / h(w).
    """
    nl = 2 * d
    out = np.empty((m, k), dtype=np.int64)
    filled = 0
    while filled < m:
        want = max(2 * (m - filled), 16)
        w = np.empty((want, k), dtype=np.int64)
        w[:, 0] = rng.integers(0, nl, want)
        for i in range(1, k):
            y = rng.integers(0, nl - 1, want)
            inv = w[:, i - 1] ^ 1
            w[:, i] = np.where(y >= inv, y + 1, y)
        ok = np.ones(want, dtype=bool)
        if k > 1:
            ok &= w[:, -1] != (w[:, 0] ^ 1)
            if distinct_ends:
                ok &= w[:, -1] != w[:, 0]
        w = w[ok][: m - filled]
        out[filled : filled + len(w)] = w
        filled += len(w)
    return out


def _random_classes(d, k, m, rng, distinct_ends=False) -> list[WordClass]:
    if m == 0:
        return []
    return [canonicalize(tuple(row)) for row in random_words(d, k, m, rng, distinct_ends).tolist()]


# -- path simulation ---------------------------------------------------------------------


def sample_stationary_init(d: int, L: int, rng: np.random.Generator) -> list[ImmigrationAtom]:
    """Independent Poisson(1/h(w)) atoms at time 0 for every class with |w| <= L.

    Drawn per length: Poisson(a(d,k)/2k) atoms whose classes come from uniform
    cyclically reduced words, which splits into the per-class product law.
    """
    atoms = []
    for k in range(1, L + 1):
        m = int(rng.poisson(a_count(d, k) / (2 * k)))
        atoms.extend(ImmigrationAtom(c, 0.0) for c in _random_classes(d, k, m, rng))
    return atoms


def _run_chain(cls: WordClass, t: float, L: int, T: float, rng) -> AtomPath:
    path = AtomPath(t, [cls], [t])
    while True:
        t = t + rng.standard_exponential() / len(cls)
        if t > T:
            return path
        cls = double(cls, int(rng.integers(len(cls))) + 1)
        if len(cls) > L:
            path.death = t
            return path
        path.states.append(cls)
        path.times.append(t)


def simulate(
    d: int,
    L: int,
    T: float,
    rng: np.random.Generator,
    init: Sequence[ImmigrationAtom] | None = None,
) -> CyclePath:
    """Exact simulation on [0, T]; ``init=None`` starts from the stationary law."""
    if T < 0 or L < 1:
        raise ValueError("need T >= 0 and L >= 1")
    if init is None:
        init = sample_stationary_init(d, L, rng)
    path = CyclePath(d, L, T)
    for atom in init:
        if len(atom.word) <= L:
            path.atoms.append(_run_chain(atom.word, atom.birth_time, L, T, rng))
            path.atoms[-1].immigrant = atom.birth_time > 0
    for k in range(1, L + 1):
        rate = float(mu_k(d, k))
        m = int(rng.poisson(rate * T)) if rate > 0 else 0
        births = np.sort(rng.uniform(0.0, T, m))
        for b, cls in zip(births, _random_classes(d, k, m, rng, distinct_ends=True)):
            path.atoms.append(_run_chain(cls, float(b), L, T, rng))
    return path


def simulate_increment_process(d: int, L: int, T: float, rng: np.random.Generator, stationary: bool = True) -> CyclePath:
    """Length-level process of the cycles that use pi_{d+1}: immigration nu(d,k), Yule growth.

    States of the returned path are integer lengths.
    """
    path = CyclePath(d, L, T)

    def run(k: int, t: float, immigrant: bool) -> AtomPath:
        a = AtomPath(t, [k], [t], immigrant=immigrant)
        while True:
            t = t + rng.standard_exponential() / k
            if t > T:
                return a
            k += 1
            if k > L:
                a.death = t
                return a
            a.states.append(k)
            a.times.append(t)

    for k in range(1, L + 1):
        if stationary:
            m0 = int(rng.poisson((a_count(d + 1, k) - a_count(d, k)) / (2 * k)))
            path.atoms.extend(run(k, 0.0, False) for _ in range(m0))
        rate = float(nu_rate(d, k))
        m = int(rng.poisson(rate * T)) if rate > 0 else 0
        for b in np.sort(rng.uniform(0.0, T, m)):
            path.atoms.append(run(k, float(b), True))
    return path


# -- vectorised samplers -----------------------------------------------------------------


@dataclass
class WordSample:
    """Counts N_w(t) for replicas x times x classes, plus immigration counts on (0, max(times)]."""

    classes: list[WordClass]
    times: np.ndarray
    counts: np.ndarray
    immigrants: np.ndarray

    def by_length(self, K: int | None = None) -> np.ndarray:
        """Aggregate to replicas x times x (K+1) (index 0 unused)."""
        K = max(len(c) for c in self.classes) if K is None else K
        lens = np.array([len(c) for c in self.classes])
        out = np.zeros(self.counts.shape[:2] + (K + 1,), dtype=np.int64)
        for k in range(1, K + 1):
            out[:, :, k] = self.counts[:, :, lens == k].sum(axis=2)
        return out

    def column(self, cls: WordClass) -> np.ndarray:
        return self.counts[:, :, self.classes.index(cls)]


def _evolve(rep, birth, state, length, child, times, out, rng):
    """Advance atoms through their jumps, adding 1 to out[rep, time, state] while observable.

    ``child(state, pos)`` returns the next state or -1 once unobservable.
    """
    cur = birth.astype(float)
    R, nt, ns = out.shape
    flat = out.reshape(-1)
    tmax = float(times[-1])
    while len(cur):
        nxt = cur + rng.standard_exponential(len(cur)) / length
        for i, tau in enumerate(times):
            hit = (cur <= tau) & (tau < nxt)
            if hit.any():
                flat += np.bincount((rep[hit] * nt + i) * ns + state[hit], minlength=flat.size)
        alive = nxt <= tmax
        pos = (rng.random(len(cur)) * length).astype(np.int64)
        new_state = child(state, pos)
        alive &= new_state >= 0
        rep, cur, state, length = rep[alive], nxt[alive], new_state[alive], length[alive] + 1


def sample_word_counts(
    d: int,
    times: Sequence[float],
    replicas: int,
    rng: np.random.Generator,
    max_len: int,
    L: int | None = None,
    stationary: bool = True,
) -> WordSample:
    """Monte Carlo N_w(t) for every class with |w| <= max_len, under the truncation L >= max_len."""
    L = max_len if L is None else L
    if L < max_len:
        raise ValueError("truncation L must be at least max_len")
    times = np.sort(np.asarray(times, dtype=float))
    tmax = float(times[-1])
    classes = classes_up_to(d, max_len)
    index = {c: i for i, c in enumerate(classes)}
    lens = np.array([len(c) for c in classes], dtype=np.int64)
    kmax = max_len
    child = np.full((len(classes), kmax), -1, dtype=np.int64)
    for i, c in enumerate(classes):
        for p, w in enumerate(doublings(c)):
            child[i, p] = index.get(w, -1)

    reps, births, states = [], [], []
    immigrants = np.zeros((replicas, len(classes)), dtype=np.int64)
    for i, c in enumerate(classes):
        if stationary:
            m0 = rng.poisson(1.0 / c.h, replicas)
            reps.append(np.repeat(np.arange(replicas), m0))
            births.append(np.zeros(int(m0.sum())))
            states.append(np.full(int(m0.sum()), i))
        rate = float(mu_weight(c))
        if rate > 0 and tmax > 0:
            m = rng.poisson(rate * tmax, replicas)
            immigrants[:, i] = m
            reps.append(np.repeat(np.arange(replicas), m))
            births.append(rng.uniform(0.0, tmax, int(m.sum())))
            states.append(np.full(int(m.sum()), i))
    rep = np.concatenate(reps) if reps else np.empty(0, np.int64)
    state = np.concatenate(states).astype(np.int64) if states else np.empty(0, np.int64)
    birth = np.concatenate(births) if births else np.empty(0)
    out = np.zeros((replicas, len(times), len(classes)), dtype=np.int64)
    _evolve(rep, birth, state, lens[state], lambda s, p: child[s, p], times, out, rng)
    return WordSample(classes, times, out, immigrants)


def sample_length_counts(
    d: int,
    times: Sequence[float],
    replicas: int,
    rng: np.random.Generator,
    max_len: int,
    init_means: Sequence[float] | None = None,
    rates: Sequence[float] | None = None,
) -> np.ndarray:
    """Monte Carlo N_k(t), replicas x times x (max_len+1), from the length-level dynamics.

    Defaults are the stationary means a(d,k)/2k and immigration rates mu(k); pass
    other vectors (index k) to run e.g. the increment process.
    """
    times = np.sort(np.asarray(times, dtype=float))
    tmax = float(times[-1])
    if init_means is None:
        init_means = [0.0] + [a_count(d, k) / (2 * k) for k in range(1, max_len + 1)]
    if rates is None:
        rates = [0.0] + [float(mu_k(d, k)) for k in range(1, max_len + 1)]
    reps, births, states = [], [], []
    for k in range(1, max_len + 1):
        if init_means[k] > 0:
            m0 = rng.poisson(init_means[k], replicas)
            reps.append(np.repeat(np.arange(replicas), m0))
            births.append(np.zeros(int(m0.sum())))
            states.append(np.full(int(m0.sum()), k))
        if rates[k] > 0 and tmax > 0:
            m = rng.poisson(rates[k] * tmax, replicas)
            reps.append(np.repeat(np.arange(replicas), m))
            births.append(rng.uniform(0.0, tmax, int(m.sum())))
            states.append(np.full(int(m.sum()), k))
    rep = np.concatenate(reps) if reps else np.empty(0, np.int64)
    state = np.concatenate(states).astype(np.int64) if states else np.empty(0, np.int64)
    birth = np.concatenate(births) if births else np.empty(0)
    out = np.zeros((replicas, len(times), max_len + 1), dtype=np.int64)
    _evolve(rep, birth, state, state.copy(), lambda s, p: np.where(s < max_len, s + 1, -1), times, out, rng)
    return out


def sample_yule(j: int, delta: float, replicas: int, rng: np.random.Generator, cap: int = 10_000) -> np.ndarray:
    """State at time delta of independent Yule chains started at j."""
    k = np.full(replicas, j, dtype=np.int64)
    t = np.zeros(replicas)
    live = np.ones(replicas, dtype=bool)
    while live.any():
        idx = np.flatnonzero(live)
        t[idx] += rng.standard_exponential(len(idx)) / k[idx]
        jumped = t[idx] <= delta
        k[idx[jumped]] += 1
        live[idx[~jumped]] = False
        live &= k < cap
    return k


# -- closed forms ------------------------------------------------------------------------


@dataclass(frozen=True)
class CovSpec:
    """cov(N_k(t), N_j(s)) at level d, for s <= t."""

    d: int
    j: int
    k: int
    s: float
    t: float

    def __post_init__(self):
        if self.j < 1 or self.k < 1:
            raise ValueError("j, k must be >= 1")
        if self.s > self.t:
            raise ValueError("need s <= t")


def expec_alpha(j: int, k: int, delta: float) -> float:
    """P[a Yule process started at j is at k after time delta]."""
    if j > k:
        raise ValueError("need j <= k")
    if delta < 0:
        raise ValueError("need delta >= 0")
    p = math.exp(-delta)
    return math.comb(k - 1, k - j) * p**j * (1 - p) ** (k - j)


def cov_formula(spec: CovSpec) -> float:
    if spec.k < spec.j:
        return 0.0
    return a_count(spec.d, spec.j) / (2 * spec.j) * expec_alpha(spec.j, spec.k, spec.t - spec.s)


def cov_nk(d: int, k: int, t: float, j: int, s: float) -> float:
    """cov(N_k(t), N_j(s)) for any ordering of s and t."""
    if s <= t:
        return cov_formula(CovSpec(d, j, k, s, t))
    return cov_formula(CovSpec(d, k, j, t, s))


def chebyshev_trace_cov(d: int, i: int, j: int, s: float, t: float) -> float:
    """Pre-limit cov(tr T_i at time t, tr T_j at time s), s <= t, at fixed d."""
    if s > t:
        raise ValueError("need s <= t")
    total = 0.0
    for k in range(1, i + 1):
        if i % k:
            continue
        for l in range(1, j + 1):
            if j % l == 0:
                total += 4 * l * k * cov_nk(d, k, t, l, s)
    return 0.25 * (2 * d - 1) ** (-(i + j) / 2) * total


def ou_covariance(i: int, k: int, s: float, t: float) -> float:
    """d -> infinity limit of cov(tr T_i(t), tr T_k(s)): delta_ik (k/2) e^{k(s-t)}."""
    if s > t:
        raise ValueError("need s <= t")
    return k / 2 * math.exp(k * (s - t)) if i == k else 0.0


def stationary_means(d: int, K: int) -> np.ndarray:
    return np.array([0.0] + [a_count(d, k) / (2 * k) for k in range(1, K + 1)])


# -- time reversal -----------------------------------------------------------------------


def reversed_rates(x: Counter, L: int, d: int) -> list[tuple[str, WordClass, WordClass | None, Fraction]]:
    """Outgoing rates of the stationary time-reversed chain on classes with |w| <= L.

    Entries are (kind, from_class, to_class, rate) with kind "shrink" (x -> x + e_u - e_w),
    "death" (x -> x - e_w) or "create" (x -> x + e_w, top layer |w| = L only).
    """
    out = []
    for w, n in sorted(x.items()):
        if n <= 0 or len(w) > L:
            continue
        for u, b in sorted(halvings(w).items()):
            out.append(("shrink", w, u, Fraction(b * n)))
        rate = (len(w) - w.c) * n
        if rate:
            out.append(("death", w, None, Fraction(rate)))
    for w in enumerate_classes(d, L):
        out.append(("create", w, None, Fraction(L, w.h)))
    return out


def reversed_compensators(path: CyclePath) -> dict[tuple, list[float]]:
    """For each reversed jump type, [observed count, integrated reversed rate] along the path.

    The forward path on [0, T] is read backwards; under stationarity each count minus
    its compensator has mean zero.  Keys are (kind, class) with kind "shrink" keyed by
    (w, u), "death" by w and "create" by w.
    """
    T, L = path.horizon, path.L
    ev = path.jumps()
    x = path.counts(T)
    tally: dict[tuple, list[float]] = {}

    def add(key, count=0.0, area=0.0):
        cur = tally.setdefault(key, [0.0, 0.0])
        cur[0] += count
        cur[1] += area

    def integrate(state: Counter, dt: float):
        for w, n in state.items():
            if n <= 0:
                continue
            for u, b in halvings(w).items():
                add(("shrink", w, u), area=b * n * dt)
            if len(w) - w.c:
                add(("death", w), area=(len(w) - w.c) * n * dt)

    # reversed time r = T - t; walk forward events from last to first
    last = T
    for t, kind, a, b in reversed(ev):
        integrate(x, last - t)
        last = t
        if kind == "grow":
            add(("shrink", b, a), count=1)
            x[b] -= 1
            x[a] += 1
        elif kind == "immigrate":
            add(("death", b), count=1)
            x[b] -= 1
        elif kind == "exit":
            add(("create", a), count=1)
            x[a] += 1
    integrate(x, last)
    for w in enumerate_classes(path.d, L):
        add(("create", w), area=L / w.h * T)
    return tally


# -- export ------------------------------------------------------------------------------


def path_rows(path: CyclePath, times: Sequence[float], replica: int = 0, by_length: bool = False) -> list[tuple]:
    """(replica, t, word-or-k, count) rows of a path observed at ``times``."""
    rows = []
    for t in times:
        if by_length:
            agg = aggregate_k(path, t)
            rows.extend((replica, t, k, int(agg[k])) for k in range(1, len(agg)) if agg[k])
        else:
            for s, c in sorted(path.counts(t).items(), key=lambda kv: (_length(kv[0]), str(kv[0]))):
                rows.append((replica, t, str(s), c))
    return rows


def write_counts_csv(fh: TextIO, rows: Iterable[tuple], key: str = "word") -> None:
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(["replica", "t", key, "count"])
    w.writerows(rows)


def moment_report(spec: CovSpec, estimate: float, stderr: float) -> dict:
    return {"covariance": asdict(spec), "formula_value": cov_formula(spec), "mc_estimate": estimate, "stderr": stderr}
