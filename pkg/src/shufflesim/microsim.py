"""Exact event-driven simulation of the pairwise-interaction CTMC.

Dynamics per event: every directed edge (i, j) carries an exponential
clock of rate gamma[s_i, s_j]; the superposition is simulated Gillespie
style (total rate, exponential waiting time, categorical edge choice).
The chosen pair is updated through the model's update rule and the whole
state vector is then shuffled by a uniform permutation.

Reproducibility contract (same seed => bit-identical trajectories in both
simulator implementations):

* the total rate is accumulated as sum over state pairs (m, l) in row-major
  order of gamma[m, l] * T[m, l], where T counts directed edges whose
  endpoints currently hold states (m, l);
* per event the stream is consumed as: one uniform for the waiting time
  (dt = -log1p(-u)/rate), one uniform for edge selection (scan state-pair
  buckets in row-major order, then take the r-th directed edge of that
  type in canonical edge order, r = floor((u*rate - cum)/gamma)), then
  N-1 uniforms for the shuffle;
* a no-op event consumes the shuffle draws only under the default
  ``shuffle_on="every_event"``; under ``"state_change"`` it does not.

:func:`simulate` is the reference implementation (per-edge scans, plain
Python); :func:`simulate_optimized` vectorizes the per-event bookkeeping
with numpy but is bit-for-bit equivalent by construction and by test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError
from .model import ModelSpec
from .network import RegularBipartiteGraph, directed_edges, shuffle_states
from .rng import make_stream, uniform_index

RECORD_LEVELS = ("counts", "events", "snapshots")
SHUFFLE_MODES = ("every_event", "state_change")


@dataclass
class MacroTrajectory:
    """Event-time-stamped count vectors, piecewise constant in between."""

    times: np.ndarray   # (n_events + 1,), times[0] = 0
    counts: np.ndarray  # (n_events + 1, K) int64
    N: int
    horizon: float

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.N

    def value_at(self, t: float) -> np.ndarray:
        """Count vector at time t (right-continuous step function)."""
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.counts[max(idx, 0)]


@dataclass
class EventLog:
    times: np.ndarray      # (n_events,)
    node_i: np.ndarray     # initiator node per event
    node_j: np.ndarray     # contacted node per event
    pre: np.ndarray        # (n_events, 2) states before the update
    post: np.ndarray       # (n_events, 2) states after the update


@dataclass
class SimResult:
    trajectory: MacroTrajectory
    events: EventLog | None
    snapshots: np.ndarray | None        # (S, N) int8, post-shuffle states
    snapshot_events: np.ndarray | None  # event index of each snapshot row
    N: int
    K: int
    seed: int
    event_count: int
    shuffle_on: str


def counts_from_fractions(y0, N: int) -> np.ndarray:
    """Round target fractions to integer counts by largest remainder."""
    y0 = np.asarray(y0, dtype=np.float64)
    if y0.min() < 0 or abs(y0.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must be nonnegative and sum to 1, got {y0}")
    base = np.floor(y0 * N).astype(np.int64)
    remainder = int(N - base.sum())
    frac = y0 * N - base
    order = np.lexsort((np.arange(len(y0)), -frac))
    base[order[:remainder]] += 1
    return base


def initial_state_from_counts(counts, gen: np.random.Generator | None = None
                              ) -> np.ndarray:
    """Block state vector for the given counts, optionally pre-shuffled."""
    counts = np.asarray(counts, dtype=np.int64)
    states = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    if gen is not None:
        shuffle_states(states, gen)
    return states


def _positive_rates(spec: ModelSpec) -> list[tuple[int, int, float]]:
    """(m, l, gamma) triples with gamma > 0, in row-major scan order."""
    out = []
    for m in range(spec.K):
        for l in range(spec.K):
            g = float(spec.gamma[m, l])
            if g > 0.0:
                out.append((m, l, g))
    return out


def _total_rate(rates: list[tuple[int, int, float]], T) -> float:
    """Accumulate sum of gamma[m,l] * T[m,l] in the documented fixed order."""
    lam = 0.0
    for m, l, g in rates:
        cnt = T[m][l]
        if cnt:
            lam += g * cnt
    return lam


def _select_pair(rates, T, u: float, lam: float) -> tuple[int, int, int]:
    """Map one uniform to (state pair, r-th edge of that type).

    Scans buckets in the same fixed order as _total_rate; r indexes
    directed edges of the chosen type in canonical edge order.
    """
    target = u * lam
    cum = 0.0
    last = None
    for m, l, g in rates:
        cnt = T[m][l]
        if not cnt:
            continue
        w = g * cnt
        nxt = cum + w
        if nxt > target:
            r = int((target - cum) / g)
            if r >= cnt:  # float slop at the bucket boundary
                r = cnt - 1
            return m, l, r
        cum = nxt
        last = (m, l, cnt)
    m, l, cnt = last  # target landed on the top boundary
    return m, l, cnt - 1


def _check_inputs(spec, graph, initial, horizon, record, snapshot_stride,
                  shuffle_on):
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if graph.N == 0 or not graph.matchings:
        raise ValueError("graph has no edges")
    if len(initial) != graph.N:
        raise ValueError(f"initial state has length {len(initial)}, graph N={graph.N}")
    if initial.min() < 0 or initial.max() >= spec.K:
        raise ValueError("initial state labels outside 0..K-1")
    if record not in RECORD_LEVELS:
        raise ValueError(f"record must be one of {RECORD_LEVELS}, got {record!r}")
    if snapshot_stride < 1:
        raise ValueError(f"snapshot stride must be >= 1, got {snapshot_stride}")
    if shuffle_on not in SHUFFLE_MODES:
        raise ValueError(f"shuffle_on must be one of {SHUFFLE_MODES}, got {shuffle_on!r}")


class _Recorder:
    """Accumulates trajectory rows, event records and state snapshots."""

    def __init__(self, spec, graph, initial, horizon, seed, record,
                 snapshot_stride, shuffle_on):
        self.K = spec.K
        self.N = graph.N
        self.seed = seed
        self.horizon = horizon
        self.shuffle_on = shuffle_on
        self.record = record
        self.stride = snapshot_stride
        counts0 = np.bincount(initial, minlength=spec.K).astype(np.int64)
        self.times = [0.0]
        self.counts = [counts0.copy()]
        self.cur_counts = counts0
        self.ev_times: list[float] = []
        self.ev_nodes: list[tuple[int, int]] = []
        self.ev_pre: list[tuple[int, int]] = []
        self.ev_post: list[tuple[int, int]] = []
        self.snaps: list[np.ndarray] = []
        self.snap_idx: list[int] = []
        self.n_events = 0
        if record == "snapshots":
            self._snapshot(initial)

    def _snapshot(self, states):
        self.snaps.append(np.asarray(states, dtype=np.int8).copy())
        self.snap_idx.append(self.n_events)

    def event(self, t, i, j, pre, post, inc_row, states_after_shuffle):
        self.n_events += 1
        self.cur_counts = self.cur_counts + inc_row
        self.times.append(t)
        self.counts.append(self.cur_counts.copy())
        if self.record != "counts":
            self.ev_times.append(t)
            self.ev_nodes.append((i, j))
            self.ev_pre.append(pre)
            self.ev_post.append(post)
        if self.record == "snapshots" and self.n_events % self.stride == 0:
            self._snapshot(states_after_shuffle)

    def finish(self) -> SimResult:
        trajectory = MacroTrajectory(
            times=np.asarray(self.times, dtype=np.float64),
            counts=np.vstack(self.counts).astype(np.int64),
            N=self.N, horizon=self.horizon)
        if (trajectory.counts.sum(axis=1) != self.N).any():
            raise InvariantViolationError("node count not conserved")
        events = None
        if self.record != "counts":
            nodes = np.asarray(self.ev_nodes, dtype=np.int64).reshape(-1, 2)
            events = EventLog(
                times=np.asarray(self.ev_times, dtype=np.float64),
                node_i=nodes[:, 0], node_j=nodes[:, 1],
                pre=np.asarray(self.ev_pre, dtype=np.int64).reshape(-1, 2),
                post=np.asarray(self.ev_post, dtype=np.int64).reshape(-1, 2))
        snapshots = snap_idx = None
        if self.record == "snapshots":
            snapshots = np.vstack(self.snaps)
            snap_idx = np.asarray(self.snap_idx, dtype=np.int64)
        return SimResult(trajectory=trajectory, events=events,
                         snapshots=snapshots, snapshot_events=snap_idx,
                         N=self.N, K=self.K, seed=self.seed,
                         event_count=self.n_events, shuffle_on=self.shuffle_on)


def simulate(spec: ModelSpec, graph: RegularBipartiteGraph,
             initial: np.ndarray, horizon: float, seed: int,
             record: str = "counts", snapshot_stride: int = 1,
             shuffle_on: str = "every_event") -> SimResult:
    """Reference Gillespie simulator: recomputes all rates every event."""
    initial = np.asarray(initial, dtype=np.int64)
    _check_inputs(spec, graph, initial, horizon, record, snapshot_stride,
                  shuffle_on)
    gen = make_stream(seed)
    rates = _positive_rates(spec)
    inc = spec.increments
    K = spec.K
    tails, heads = directed_edges(graph)
    tails_l = tails.tolist()
    heads_l = heads.tolist()
    n_dir = len(tails_l)
    states = initial.copy()
    rec = _Recorder(spec, graph, initial, horizon, seed, record,
                    snapshot_stride, shuffle_on)
    t = 0.0
    while True:
        s = states.tolist()
        T = [[0] * K for _ in range(K)]
        for e in range(n_dir):
            T[s[tails_l[e]]][s[heads_l[e]]] += 1
        lam = _total_rate(rates, T)
        if lam == 0.0:
            break  # absorbing: constant to the horizon
        t_next = t + (-math.log1p(-gen.random()) / lam)
        if t_next > horizon:
            break
        t = t_next
        m, l, r = _select_pair(rates, T, gen.random(), lam)
        seen = 0
        edge = -1
        for e in range(n_dir):
            if s[tails_l[e]] == m and s[heads_l[e]] == l:
                if seen == r:
                    edge = e
                    break
                seen += 1
        i, j = tails_l[edge], heads_l[edge]
        a, b = spec.update[m, l]
        states[i] = a
        states[j] = b
        changed = (a, b) != (m, l)
        if shuffle_on == "every_event" or changed:
            shuffle_states(states, gen)
        rec.event(t, i, j, (m, l), (int(a), int(b)), inc[m, l], states)
    return rec.finish()


def simulate_optimized(spec: ModelSpec, graph: RegularBipartiteGraph,
                       initial: np.ndarray, horizon: float, seed: int,
                       record: str = "counts", snapshot_stride: int = 1,
                       shuffle_on: str = "every_event") -> SimResult:
    """Vectorized simulator, bit-identical to :func:`simulate` per seed.

    Identical draw sequence and selection semantics; the difference is
    internal only: directed-edge type codes and their per-pair counts are
    rebuilt with numpy in O(N d) per event instead of per-edge Python scans.
    """
    initial = np.asarray(initial, dtype=np.int64)
    _check_inputs(spec, graph, initial, horizon, record, snapshot_stride,
                  shuffle_on)
    gen = make_stream(seed)
    rates = _positive_rates(spec)
    inc = spec.increments
    K = spec.K
    tails, heads = directed_edges(graph)
    states = initial.copy()
    rec = _Recorder(spec, graph, initial, horizon, seed, record,
                    snapshot_stride, shuffle_on)
    t = 0.0
    while True:
        codes = states[tails] * K + states[heads]
        T = np.bincount(codes, minlength=K * K).reshape(K, K)
        lam = _total_rate(rates, T)
        if lam == 0.0:
            break
        t_next = t + (-math.log1p(-gen.random()) / lam)
        if t_next > horizon:
            break
        t = t_next
        m, l, r = _select_pair(rates, T, gen.random(), lam)
        edge = int(np.flatnonzero(codes == m * K + l)[r])
        i, j = int(tails[edge]), int(heads[edge])
        a, b = spec.update[m, l]
        states[i] = a
        states[j] = b
        changed = (a, b) != (m, l)
        if shuffle_on == "every_event" or changed:
            shuffle_states(states, gen)
        rec.event(t, i, j, (m, l), (int(a), int(b)), inc[m, l], states)
    return rec.finish()


def sample_auxiliary(counts, gen: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli indicator columns at the current fractions.

    Column m holds N i.i.d. Bernoulli(counts[m]/N) entries; columns are
    mutually independent and row sums need not be 1.  Consumes N uniforms
    per column, columns in state order.
    """
    counts = np.asarray(counts, dtype=np.int64)
    N = int(counts.sum())
    K = len(counts)
    out = np.empty((N, K), dtype=np.uint8)
    for m in range(K):
        out[:, m] = gen.random(N) < counts[m] / N
    return out


def couple_to_counts(column: np.ndarray, target_count: int,
                     gen: np.random.Generator) -> np.ndarray:
    """Flip a uniformly random set of entries so the column sums to target.

    Surplus ones are flipped down, missing ones are flipped up; the flip
    set is a uniform subset of the candidates (partial Fisher-Yates, one
    uniform per flip).  The output count is exact by construction.
    """
    column = np.asarray(column, dtype=np.uint8)
    n = len(column)
    if not 0 <= target_count <= n:
        raise ValueError(f"target count {target_count} outside 0..{n}")
    out = column.copy()
    have = int(column.sum())
    if have == target_count:
        return out
    if have > target_count:
        candidates = np.flatnonzero(column == 1).tolist()
        flips, new_value = have - target_count, 0
    else:
        candidates = np.flatnonzero(column == 0).tolist()
        flips, new_value = target_count - have, 1
    for step in range(flips):
        pick = step + uniform_index(gen, len(candidates) - step)
        candidates[step], candidates[pick] = candidates[pick], candidates[step]
        out[candidates[step]] = new_value
    assert int(out.sum()) == target_count
    return out
