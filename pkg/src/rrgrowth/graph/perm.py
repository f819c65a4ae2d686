"""Permutation towers grown by the Chinese restaurant process, and the Poissonized clock."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import crp_insert

_CHUNK = 4096


class PermTower:
    """A permutation of {0..n-1} kept as a doubly linked cycle list.

    ``succ[i]`` is the image of i and ``pred[i]`` its preimage.  Element n is
    seated by :meth:`insert` in O(1); :meth:`delete_last` undoes it.
    """

    def __init__(self, capacity: int = 16):
        self.n = 0
        self.succ = np.empty(max(capacity, 1), dtype=np.int64)
        self.pred = np.empty(max(capacity, 1), dtype=np.int64)

    def _reserve(self, size: int) -> None:
        if size <= self.succ.shape[0]:
            return
        cap = max(size, 2 * self.succ.shape[0])
        for name in ("succ", "pred"):
            old = getattr(self, name)
            new = np.empty(cap, dtype=np.int64)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def insert(self, choice: int) -> "PermTower":
        """Seat element n: left of customer ``choice`` if choice < n, else at a new table."""
        n = self.n
        if not 0 <= choice <= n:
            raise ValueError(f"choice {choice} outside [0, {n}]")
        self._reserve(n + 1)
        crp_insert(self.succ, self.pred, n, np.array([choice], dtype=np.int64))
        self.n = n + 1
        return self

    def insert_many(self, choices: np.ndarray) -> None:
        choices = np.asarray(choices, dtype=np.int64)
        self._reserve(self.n + len(choices))
        self.n = int(crp_insert(self.succ, self.pred, self.n, choices))

    def delete_last(self) -> "PermTower":
        """Remove element n-1 from its cycle (the inverse of the last insertion)."""
        if self.n == 0:
            raise ValueError("empty tower")
        m = self.n - 1
        p, s = self.pred[m], self.succ[m]
        if p != m:
            self.succ[p] = s
            self.pred[s] = p
        self.n = m
        return self

    def permutation(self) -> np.ndarray:
        return self.succ[: self.n].copy()

    def cycles(self) -> list[list[int]]:
        """Cycle decomposition (0-based), each cycle starting at its least element."""
        seen = np.zeros(self.n, dtype=bool)
        out = []
        for i in range(self.n):
            if seen[i]:
                continue
            cyc = []
            j = i
            while not seen[j]:
                seen[j] = True
                cyc.append(int(j))
                j = int(self.succ[j])
            out.append(cyc)
        return out

    def copy(self) -> "PermTower":
        t = PermTower(self.n)
        t.n = self.n
        t.succ[: self.n] = self.succ[: self.n]
        t.pred[: self.n] = self.pred[: self.n]
        return t

    @classmethod
    def from_permutation(cls, perm: Sequence[int]) -> "PermTower":
        perm = np.asarray(perm, dtype=np.int64)
        n = len(perm)
        if n and sorted(perm.tolist()) != list(range(n)):
            raise ValueError("not a permutation of 0..n-1")
        t = cls(n)
        t.n = n
        t.succ[:n] = perm
        t.pred[perm] = np.arange(n)
        return t

    @classmethod
    def from_cycles(cls, cycles: Sequence[Sequence[int]], n: int) -> "PermTower":
        perm = np.arange(n)
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                perm[a] = b
        return cls.from_permutation(perm)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PermTower):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.succ[: self.n], other.succ[: other.n])

    def __repr__(self) -> str:
        cyc = "".join("(" + " ".join(str(i + 1) for i in c) + ")" for c in self.cycles())
        return f"PermTower(n={self.n}, {cyc or '()'})"


def crp_step(tower: PermTower, choice: int) -> PermTower:
    """Seat element n+1 given a 1-based choice in [1, n+1] (n+1 opens a new table).

    Mutates and returns ``tower``.
    """
    if not 1 <= choice <= tower.n + 1:
        raise ValueError(f"choice {choice} outside [1, {tower.n + 1}]")
    return tower.insert(choice - 1)


class GraphState:
    """d permutation towers of common size n; the graph sums P_l + P_l^T."""

    def __init__(self, towers: Sequence[PermTower]):
        towers = list(towers)
        if not towers:
            raise ValueError("need at least one permutation")
        sizes = {t.n for t in towers}
        if len(sizes) != 1:
            raise ValueError(f"towers have different sizes {sorted(sizes)}")
        self.towers = towers

    @classmethod
    def empty(cls, d: int) -> "GraphState":
        return cls([PermTower() for _ in range(d)])

    @classmethod
    def from_permutations(cls, perms: Sequence[Sequence[int]]) -> "GraphState":
        return cls([PermTower.from_permutation(p) for p in perms])

    @property
    def d(self) -> int:
        return len(self.towers)

    @property
    def n(self) -> int:
        return self.towers[0].n

    def succ_array(self) -> np.ndarray:
        return np.stack([t.succ[: self.n] for t in self.towers]) if self.n else np.zeros((self.d, 0), np.int64)

    def pred_array(self) -> np.ndarray:
        return np.stack([t.pred[: self.n] for t in self.towers]) if self.n else np.zeros((self.d, 0), np.int64)

    def adjacency(self) -> np.ndarray:
        n = self.n
        A = np.zeros((n, n))
        idx = np.arange(n)
        for t in self.towers:
            np.add.at(A, (idx, t.succ[:n]), 1.0)
        return A + A.T

    def delete_last(self) -> "GraphState":
        for t in self.towers:
            t.delete_last()
        return self

    def copy(self) -> "GraphState":
        return GraphState([t.copy() for t in self.towers])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphState):
            return NotImplemented
        return self.d == other.d and all(a == b for a, b in zip(self.towers, other.towers))

    def __repr__(self) -> str:
        return f"GraphState(d={self.d}, n={self.n})"

    # snapshots use 1-based vertex labels, as in cycle notation
    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "perms": [[[v + 1 for v in c] for c in t.cycles()] for t in self.towers],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GraphState":
        n, d = int(doc["n"]), int(doc["d"])
        perms = doc["perms"]
        if len(perms) != d:
            raise ValueError(f"snapshot lists {len(perms)} permutations, expected {d}")
        towers = [PermTower.from_cycles([[v - 1 for v in c] for c in cycles], n) for cycles in perms]
        return cls(towers) if towers else cls.empty(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GraphState":
        return cls.from_dict(json.loads(text))


class RandomStreams:
    """Buffered exponential and uniform streams over one Generator.

    Values are drawn in fixed-size chunks, so the sequence handed out does not
    depend on how callers split their requests.  ``used`` counters make a
    stream position restorable with :meth:`skip`.
    """

    def __init__(self, seed: int | np.random.SeedSequence | np.random.Generator | None = None):
        if isinstance(seed, np.random.Generator):
            self._exp_rng = self._unif_rng = seed
        else:
            ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
            a, b = ss.spawn(2)
            self._exp_rng = np.random.Generator(np.random.PCG64(a))
            self._unif_rng = np.random.Generator(np.random.PCG64(b))
        self._exp = np.empty(0)
        self._unif = np.empty(0)
        self.exp_used = 0
        self.unif_used = 0

    def _peek(self, which: str, m: int) -> np.ndarray:
        buf = getattr(self, "_" + which)
        while buf.shape[0] < m:
            rng = self._exp_rng if which == "exp" else self._unif_rng
            more = rng.standard_exponential(_CHUNK) if which == "exp" else rng.random(_CHUNK)
            buf = np.concatenate([buf, more])
        setattr(self, "_" + which, buf)
        return buf[:m]

    def _take(self, which: str, m: int) -> np.ndarray:
        out = self._peek(which, m).copy()
        setattr(self, "_" + which, getattr(self, "_" + which)[m:])
        setattr(self, which + "_used", getattr(self, which + "_used") + m)
        return out

    def peek_exponentials(self, m: int) -> np.ndarray:
        return self._peek("exp", m)

    def exponentials(self, m: int) -> np.ndarray:
        return self._take("exp", m)

    def uniforms(self, m: int) -> np.ndarray:
        return self._take("unif", m)

    def skip(self, exp_used: int, unif_used: int) -> None:
        self.exponentials(exp_used)
        self.uniforms(unif_used)


@dataclass
class Clock:
    """Continuous time t and size n; the insertion taking size m to m+1 waits Exp(m+1).

    ``next_time`` is the already-drawn time of the next insertion, if any.
    """

    t: float = 0.0
    n: int = 0
    next_time: float | None = None

    def to_dict(self) -> dict:
        return {"t": self.t, "n": self.n, "next_time": self.next_time}


@dataclass
class GrowthLog:
    times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.times)


def advance(clock: Clock, state: GraphState, until: float, rng) -> tuple[Clock, GraphState, GrowthLog]:
    """Run the insertion clock to time ``until``, seating one element in every tower per event.

    ``rng`` is a :class:`RandomStreams` (or a Generator, wrapped on the fly).
    ``clock`` and ``state`` are updated in place and also returned.
    """
    if until < clock.t:
        raise ValueError(f"cannot advance backwards from {clock.t} to {until}")
    if clock.n != state.n:
        raise ValueError("clock and state disagree on n")
    streams = rng if isinstance(rng, RandomStreams) else RandomStreams(rng)
    d = state.d
    if clock.next_time is None:
        clock.next_time = clock.t + float(streams.exponentials(1)[0]) / (clock.n + 1)

    event_times = []
    while clock.next_time <= until:
        n = clock.n
        block = 1024
        e = streams.peek_exponentials(block)
        # sequential sums from the pending time keep event times independent of how [t, until] is split
        tail = np.cumsum(np.concatenate([[clock.next_time], e / (n + 2 + np.arange(block))]))[1:]
        q = int(np.searchsorted(tail, until, side="right"))
        used = min(q + 1, block)
        times = np.concatenate([[clock.next_time], tail[: used - 1]])
        streams.exponentials(used)
        clock.next_time = float(tail[used - 1])
        m = len(times)
        sizes = n + np.arange(m)
        u = streams.uniforms(m * d).reshape(m, d)
        choices = np.minimum((u * (sizes + 1)[:, None]).astype(np.int64), sizes[:, None])
        for l, tower in enumerate(state.towers):
            tower.insert_many(choices[:, l])
        clock.n = n + m
        event_times.append(times)
    clock.t = float(until)
    log = GrowthLog(np.concatenate(event_times) if event_times else np.empty(0))
    return clock, state, log
