"""Switching digraphs over a leader-follower node set and their normalized
weighted adjacency matrices.

Node 0 is always the leader; nodes 1..N are followers.  A weighted digraph
stores entry ``weights[i, j] = a_ij``, the weight of the edge from node j to
node i (information flows j -> i).  Normalization produces the row-stochastic
matrix with

    omega_ii = 1 / (1 + sum_j a_ij)
    omega_ij = a_ij / (1 + sum_j a_ij),   i != j

whose lower-right N x N sub-block (the follower block) drives every
convergence argument in this toolkit: under joint connectivity, products of
follower blocks contract to zero at a geometric rate.

All types are immutable after construction and all operations are pure,
so concurrent read access is safe.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when matrix or vector dimensions are inconsistent."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """Weighted digraph over nodes {0, .., N} with leader node 0.

    ``weights[i, j]`` is the weight of the edge (j, i), i.e. of the link that
    lets node i read node j.  Weights are nonnegative and the diagonal is
    zero (no self-loops).
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"weight matrix must be square, got shape {w.shape}")
        if w.shape[0] < 1:
            raise DimensionError("graph needs at least the leader node")
        if np.any(w < 0):
            raise ValueError("edge weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("diagonal weights (self-loops) must be zero")
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def node_count(self) -> int:
        return self.weights.shape[0]

    @property
    def n_followers(self) -> int:
        return self.node_count - 1

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Present edges as (source, receiver) pairs, sorted."""
        ii, jj = np.nonzero(self.weights)
        return sorted((int(j), int(i)) for i, j in zip(ii, jj))

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        weight: float = 1.0,
    ) -> "WeightedDigraph":
        """Build a digraph from (source, receiver) pairs with uniform weight."""
        w = np.zeros((node_count, node_count))
        for j, i in edges:
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise ValueError(f"edge ({j}, {i}) outside node range 0..{node_count - 1}")
            if i == j:
                raise ValueError(f"self-loop ({j}, {i}) not allowed")
            w[i, j] = weight
        return cls(w)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Row-stochastic normalization of a weighted digraph.

    Attributes
    ----------
    omega : (N+1, N+1) row-stochastic matrix with strictly positive diagonal.
    lambda_block : (N, N) follower sub-block (last N rows and columns).
    delta : (N, N) diagonal matrix of leader-coupling weights omega_i0.
    """

    omega: np.ndarray
    lambda_block: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        row_sums = om.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-12):
            raise ValueError("omega rows must sum to 1")
        if np.any(om < 0) or np.any(om > 1):
            raise ValueError("omega entries must lie in [0, 1]")
        if np.any(np.diag(om) <= 0):
            raise ValueError("omega diagonal must be strictly positive")
        object.__setattr__(self, "omega", _readonly(om))
        object.__setattr__(self, "lambda_block", _readonly(self.lambda_block))
        object.__setattr__(self, "delta", _readonly(self.delta))

    @property
    def node_count(self) -> int:
        return self.omega.shape[0]


def normalize_adjacency(g: WeightedDigraph) -> NormalizedAdjacency:
    """Normalize a weighted digraph into its row-stochastic form.

    Row i is divided by 1 + (sum of the in-edge weights of node i), and the
    freed mass is placed on the diagonal, so every row sums to exactly 1 and
    the diagonal stays strictly positive.  Total for any nonnegative weights.
    """
    w = g.weights
    row = w.sum(axis=1)
    omega = w / (1.0 + row)[:, None]
    np.fill_diagonal(omega, 1.0 / (1.0 + row))
    return NormalizedAdjacency(
        omega=omega,
        lambda_block=omega[1:, 1:],
        delta=np.diag(omega[1:, 0]),
    )


def union_digraph(graphs: Sequence[WeightedDigraph]) -> WeightedDigraph:
    """Union of digraphs: an edge is present iff present in any input.

    The union weight is the maximum of the input weights; any positive
    convention would do since only reachability is read off the union.
    """
    if not graphs:
        raise ValueError("union of an empty graph list")
    n = graphs[0].node_count
    for g in graphs[1:]:
        if g.node_count != n:
            raise DimensionError(
                f"union over mismatched node counts: {n} vs {g.node_count}"
            )
    w = np.maximum.reduce([g.weights for g in graphs])
    return WeightedDigraph(w)


def leader_reachable(g: WeightedDigraph) -> np.ndarray:
    """Boolean mask of nodes reachable from node 0 by directed paths (BFS)."""
    n = g.node_count
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    # weights[i, j] > 0 means j -> i, so successors of j sit in column j
    support = g.weights > 0
    while queue:
        j = queue.popleft()
        for i in np.nonzero(support[:, j])[0]:
            if not seen[i]:
                seen[i] = True
                queue.append(int(i))
    return seen


@dataclass(frozen=True)
class ConnectivityResult:
    """Outcome of a joint-connectivity check.

    ``witness`` is the first (start time, unreachable node) pair when the
    check fails, None otherwise.  ``checked_up_to`` records the horizon the
    verdict covers; for aperiodic signals it is finite evidence only.
    """

    connected: bool
    witness: tuple[int, int] | None
    checked_up_to: int

    def __bool__(self) -> bool:
        return self.connected


@dataclass(frozen=True, eq=False)
class SwitchingSignal:
    """Piecewise-constant map from time to a mode index in {1, .., n0}.

    Two descriptions are supported: a periodic schedule given by
    (mode, length) segments that repeat forever, or an explicit per-step
    table with a default tail mode after the table ends.  The dwell time is
    the minimum interval length of the description.
    """

    segments: tuple[tuple[int, int], ...] | None = None
    table: tuple[int, ...] | None = None
    tail_mode: int | None = None

    def __post_init__(self):
        if (self.segments is None) == (self.table is None):
            raise ValueError("signal needs exactly one of segments / table")
        if self.segments is not None:
            segs = tuple((int(m), int(l)) for m, l in self.segments)
            if not segs:
                raise ValueError("periodic signal needs at least one segment")
            for m, l in segs:
                if m < 1:
                    raise ValueError(f"mode index {m} must be >= 1")
                if l < 1:
                    raise ValueError(f"segment length {l} must be >= 1")
            object.__setattr__(self, "segments", segs)
        else:
            tab = tuple(int(m) for m in self.table)
            if self.tail_mode is None:
                raise ValueError("table signal needs a tail mode")
            if any(m < 1 for m in tab) or self.tail_mode < 1:
                raise ValueError("mode indices must be >= 1")
            object.__setattr__(self, "table", tab)
            object.__setattr__(self, "tail_mode", int(self.tail_mode))

    @classmethod
    def periodic(cls, segments: Iterable[tuple[int, int]]) -> "SwitchingSignal":
        return cls(segments=tuple(segments))

    @classmethod
    def from_table(cls, modes: Iterable[int], tail_mode: int) -> "SwitchingSignal":
        return cls(table=tuple(modes), tail_mode=tail_mode)

    @property
    def is_periodic(self) -> bool:
        return self.segments is not None

    @property
    def period(self) -> int | None:
        if self.segments is None:
            return None
        return sum(l for _, l in self.segments)

    @property
    def dwell(self) -> int:
        """Minimum dwell time implied by the description."""
        if self.segments is not None:
            runs = [l for _, l in self.segments]
        else:
            runs = [l for _, l in _runs(self.table)] or [1]
        return min(runs)

    @property
    def max_mode(self) -> int:
        if self.segments is not None:
            return max(m for m, _ in self.segments)
        return max(max(self.table, default=1), self.tail_mode)

    def mode_at(self, t: int) -> int:
        """Active mode index (1-based) at time t >= 0."""
        if t < 0:
            raise ValueError("time index must be nonnegative")
        if self.segments is not None:
            r = t % self.period
            for m, l in self.segments:
                if r < l:
                    return m
                r -= l
            raise AssertionError("unreachable: segment lengths cover the period")
        if t < len(self.table):
            return self.table[t]
        return self.tail_mode


def _runs(seq: Sequence[int]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for m in seq:
        if out and out[-1][0] == m:
            out[-1] = (m, out[-1][1] + 1)
        else:
            out.append((m, 1))
    return out


@dataclass(frozen=True, eq=False)
class SwitchingTopology:
    """A finite family of weighted digraphs plus a switching signal."""

    graphs: tuple[WeightedDigraph, ...]
    signal: SwitchingSignal
    _normalized: tuple[NormalizedAdjacency, ...] = field(init=False, repr=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise ValueError("topology needs at least one graph")
        n = graphs[0].node_count
        for g in graphs[1:]:
            if g.node_count != n:
                raise DimensionError("all graphs in a topology must share node_count")
        if self.signal.max_mode > len(graphs):
            raise ValueError(
                f"signal uses mode {self.signal.max_mode} but only "
                f"{len(graphs)} graphs are defined"
            )
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(
            self, "_normalized", tuple(normalize_adjacency(g) for g in graphs)
        )

    @property
    def node_count(self) -> int:
        return self.graphs[0].node_count

    @property
    def n_followers(self) -> int:
        return self.node_count - 1

    @property
    def n_modes(self) -> int:
        return len(self.graphs)

    def mode_at(self, t: int) -> int:
        return self.signal.mode_at(t)

    def graph_at(self, t: int) -> WeightedDigraph:
        return self.graphs[self.signal.mode_at(t) - 1]

    def adjacency_at(self, t: int) -> NormalizedAdjacency:
        """Normalized adjacency of the active graph (precomputed per mode)."""
        return self._normalized[self.signal.mode_at(t) - 1]

    def adjacency_of_mode(self, mode: int) -> NormalizedAdjacency:
        return self._normalized[mode - 1]


def _default_horizon(topo: SwitchingTopology, window: int) -> int:
    sig = topo.signal
    if sig.is_periodic:
        return sig.period + window
    return len(sig.table) + window


def is_jointly_connected(
    topo: SwitchingTopology,
    window: int,
    horizon: int | None = None,
) -> ConnectivityResult:
    """Check that every follower is reachable from the leader in every
    sliding union window of the schedule.

    For each start time t in [0, horizon - window], the union digraph over
    modes active at t, .., t + window is built and reachability from node 0
    is decided by BFS.  For periodic signals the horizon is capped at one
    full period plus the window, which is sufficient by periodicity; for
    table signals the verdict only covers the checked horizon.

    Returns a ConnectivityResult whose witness is the first failing
    (start time, node) pair.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    cap = _default_horizon(topo, window)
    if horizon is None:
        horizon = cap
    if horizon < window:
        raise ValueError("horizon must be >= window")
    horizon = min(horizon, cap) if topo.signal.is_periodic else horizon
    for t in range(horizon - window + 1):
        modes = {topo.mode_at(t + s) for s in range(window + 1)}
        union = union_digraph([topo.graphs[m - 1] for m in modes])
        seen = leader_reachable(union)
        if not seen[1:].all():
            bad = int(np.nonzero(~seen)[0][0])
            return ConnectivityResult(False, (t, bad), horizon)
    return ConnectivityResult(True, None, horizon)


def find_connectivity_window(
    topo: SwitchingTopology,
    t_max: int,
    horizon: int | None = None,
) -> int | None:
    """Smallest window T in [0, t_max] for which the topology verifies as
    jointly connected, or None if none does."""
    for window in range(t_max + 1):
        if is_jointly_connected(topo, window, horizon):
            return window
    return None


def consensus_step(adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """One synchronous averaging step x -> omega @ x over all N+1 nodes."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != adj.node_count:
        raise DimensionError(
            f"state has {x.shape[0]} entries for {adj.node_count} nodes"
        )
    return adj.omega @ x


def transition_product(
    topo: SwitchingTopology,
    t0: int,
    t: int,
    block: str = "lambda",
) -> np.ndarray:
    """Product of active-mode matrices M(t-1) M(t-2) .. M(t0).

    ``block`` selects the full normalized adjacency ("full_omega") or its
    follower sub-block ("lambda").  Returns the identity when t == t0.
    """
    if t < t0:
        raise ValueError("t must be >= t0")
    if block not in ("lambda", "full_omega"):
        raise ValueError(f"unknown block {block!r}")
    size = topo.n_followers if block == "lambda" else topo.node_count
    out = np.eye(size)
    for s in range(t0, t):
        adj = topo.adjacency_at(s)
        m = adj.lambda_block if block == "lambda" else adj.omega
        out = m @ out
    return out
