"""Exact counts of short cycles and closed cyclically nonbacktracking walks."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..words import BudgetExceeded, WordClass, canonicalize
from ._kernels import cnbw_dfs, simple_cycles
from .perm import GraphState

#: Default bound on n * 2d * (2d-1)^(K-1), the worst-case number of DFS steps.
WORK_BUDGET = 5 * 10**9

CountVector = Counter


@dataclass(frozen=True)
class CycleRecord:
    """A cycle as traversed: vertices[i] --word[i]--> vertices[i+1] (0-based vertices)."""

    vertices: tuple[int, ...]
    word: tuple[int, ...]

    @property
    def cls(self) -> WordClass:
        return canonicalize(self.word)

    def __len__(self) -> int:
        return len(self.vertices)


def _work(state: GraphState, K: int) -> int:
    d = state.d
    return state.n * 2 * d * (2 * d - 1) ** max(K - 1, 0)


def _guard(state: GraphState, K: int, budget: int) -> None:
    if K < 1:
        raise ValueError("K must be >= 1")
    if _work(state, K) > budget:
        raise BudgetExceeded(f"walk enumeration to length {K} on n={state.n}, d={state.d} exceeds budget {budget}")


def list_cycles(state: GraphState, K: int, budget: int = WORK_BUDGET) -> list[CycleRecord]:
    """Every simple cycle of length <= K, each geometric cycle once."""
    _guard(state, K, budget)
    n = state.n
    if n == 0:
        return []
    succ, pred = state.succ_array(), state.pred_array()
    cap = 64
    while True:
        words = np.empty((cap, K), np.int64)
        verts = np.empty((cap, K), np.int64)
        lens = np.empty(cap, np.int64)
        got = simple_cycles(succ, pred, n, K, words, verts, lens)
        if got >= 0:
            break
        cap *= 4
    return [
        CycleRecord(tuple(int(v) for v in verts[i, : lens[i]]), tuple(int(y) for y in words[i, : lens[i]]))
        for i in range(got)
    ]


def count_cycles(state: GraphState, K: int, budget: int = WORK_BUDGET) -> Counter:
    """Number of cycles of length <= K with each word class."""
    out: Counter = Counter()
    for rec in list_cycles(state, K, budget):
        out[canonicalize(rec.word)] += 1
    return out


def counts_by_length(counts: Counter, K: int) -> np.ndarray:
    """Collapse a class-keyed count vector to lengths; index k holds C_k (index 0 unused)."""
    out = np.zeros(K + 1, dtype=np.int64)
    for cls, c in counts.items():
        if len(cls) <= K:
            out[len(cls)] += c
    return out


def cycle_lengths(state: GraphState, K: int, budget: int = WORK_BUDGET) -> np.ndarray:
    return counts_by_length(count_cycles(state, K, budget), K)


def cnbw_counts(state: GraphState, K: int, budget: int = WORK_BUDGET, method: str = "auto") -> np.ndarray:
    """CNBW_k for k = 0..K (entry 0 is 0).

    ``method`` is "dfs" (walk enumeration), "transfer" (powers of the
    nonbacktracking operator on the 2dn directed letter-edges) or "auto".
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    n, d = state.n, state.d
    if n == 0:
        return np.zeros(K + 1, np.int64)
    dfs_cost = _work(state, K)
    m = 2 * d * n
    transfer_cost = m * m * (2 * d - 1) * K
    if method == "auto":
        method = "dfs" if dfs_cost <= transfer_cost else "transfer"
    if method == "dfs":
        if dfs_cost > budget:
            raise BudgetExceeded(f"CNBW enumeration to length {K} exceeds budget {budget}")
        return cnbw_dfs(state.succ_array(), state.pred_array(), n, K)
    if method == "transfer":
        if transfer_cost > budget:
            raise BudgetExceeded(f"transfer-matrix CNBW to length {K} exceeds budget {budget}")
        return _cnbw_transfer(state, K)
    raise ValueError(f"unknown method {method!r}")


def _cnbw_transfer(state: GraphState, K: int) -> np.ndarray:
    # state (y, u): leave u along letter y, arriving at y(u); successors take any letter but y^1
    n, d = state.n, state.d
    succ, pred = state.succ_array(), state.pred_array()
    nl = 2 * d
    head = np.empty((nl, n), np.int64)
    for y in range(nl):
        head[y] = pred[y >> 1] if y & 1 else succ[y >> 1]
    idx = lambda y, u: y * n + u  # noqa: E731
    nexts = np.empty((nl * n, nl - 1), np.int64)
    for y in range(nl):
        others = [z for z in range(nl) if z != y ^ 1]
        for j, z in enumerate(others):
            nexts[idx(y, 0) : idx(y, 0) + n, j] = idx(z, head[y])
    m = nl * n
    X = np.eye(m, dtype=np.int64)
    out = np.zeros(K + 1, np.int64)
    for k in range(1, K + 1):
        # B^k = B @ B^{k-1}: row s of B^k is the sum of rows of B^{k-1} at the successors of s
        X = X[nexts].sum(axis=1)
        out[k] = np.trace(X)
    return out


def cnbw_count(state: GraphState, k: int, budget: int = WORK_BUDGET) -> int:
    return int(cnbw_counts(state, k, budget)[k])


def divisors(k: int) -> list[int]:
    return [j for j in range(1, k + 1) if k % j == 0]


def bad_walk_exists(state: GraphState, K: int, budget: int = WORK_BUDGET) -> bool:
    """True iff some CNBW of length <= K is not a repeated walk around a simple cycle."""
    if K < 1 or state.n == 0:
        return False
    C = cycle_lengths(state, K, budget)
    W = cnbw_counts(state, K, budget)
    for k in range(1, K + 1):
        if W[k] != sum(2 * j * C[j] for j in divisors(k)):
            return True
    return False
