"""Concentration diagnostics for simulated runs.

Implements the processes the fluid-limit argument is built from: the gap
between the normalized edge-count quadratic form and its mean-field proxy,
the martingale residual of the count trajectory with its L2 ceiling, tail
estimators for the auxiliary Bernoulli process with Bernstein ceilings,
the Poisson-Bernoulli counting check, path moduli of continuity, and the
sup-distance between empirical and fluid trajectories.

Conventions: states and pair indices are 0-based here (the CLI layer
translates to 1-based labels); all time integrals are exact event-time
quadrature over piecewise-constant integrands; every tail probability is
reported with a Wilson-score interval at the caller's confidence level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import InvariantViolationError, ResolutionError
from .fluid import FluidPath
from .microsim import (MacroTrajectory, SimResult, counts_from_fractions,
                       initial_state_from_counts, sample_auxiliary,
                       simulate_optimized)
from .model import ModelSpec
from .network import RegularBipartiteGraph, directed_edges, generate_regular_bipartite
from .rng import derive_seed, make_stream
from .util import line_fit, parallel_map

GAP_TOL = 1e-12


# ---------------------------------------------------------------------------
# interval statistics
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, confidence: float = 0.99
                    ) -> tuple[float, float]:
    """Wilson-score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes outside 0..trials")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class TailEstimate:
    """Monte-Carlo exceedance probability with a Wilson interval."""

    N: int
    epsilon: float
    trials: int
    exceedances: int
    confidence: float = 0.99
    p_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        self.p_hat = self.exceedances / self.trials
        self.ci_low, self.ci_high = wilson_interval(
            self.exceedances, self.trials, self.confidence)


# ---------------------------------------------------------------------------
# gap process
# ---------------------------------------------------------------------------

def quadratic_forms(snapshots: np.ndarray, graph: RegularBipartiteGraph,
                    K: int) -> np.ndarray:
    """Directed edge-type counts Q[s, m, l] for each snapshot row s.

    Q[s, m, l] counts ordered neighbor pairs (i, j) with states (m, l),
    accumulated matching by matching (each undirected pair contributes
    both orientations).  Equals the quadratic form X_m^T A X_l.
    """
    snapshots = np.asarray(snapshots)
    S, N = snapshots.shape
    if N != graph.N:
        raise ValueError(f"snapshots have {N} nodes, graph has {graph.N}")
    row_offset = np.arange(S, dtype=np.int64)[:, None] * (K * K)
    total = np.zeros(S * K * K, dtype=np.int64)
    for pairs in graph.matchings:
        su = snapshots[:, pairs[:, 0]].astype(np.int64)
        sv = snapshots[:, pairs[:, 1]].astype(np.int64)
        total += np.bincount((row_offset + su * K + sv).ravel(),
                             minlength=S * K * K)
        total += np.bincount((row_offset + sv * K + su).ravel(),
                             minlength=S * K * K)
    return total.reshape(S, K, K)


def counts_from_snapshots(snapshots: np.ndarray, K: int) -> np.ndarray:
    snapshots = np.asarray(snapshots)
    S, _ = snapshots.shape
    offs = np.arange(S, dtype=np.int64)[:, None] * K
    flat = np.bincount((offs + snapshots.astype(np.int64)).ravel(),
                       minlength=S * K)
    return flat.reshape(S, K)


@dataclass
class GapSeries:
    """R[s, m, l] = Q[s, m, l]/N - d * Ybar_m Ybar_l along snapshot times."""

    times: np.ndarray
    values: np.ndarray  # (S, K, K)
    d: float

    def sup_abs(self) -> float:
        return float(np.abs(self.values).max())

    def sup_abs_pair(self, m: int, l: int) -> float:
        return float(np.abs(self.values[:, m, l]).max())


def gap_series(snapshots: np.ndarray, times: np.ndarray,
               graph: RegularBipartiteGraph, K: int,
               d: float | None = None) -> GapSeries:
    """Exact gap process evaluated at each microstate snapshot."""
    snapshots = np.asarray(snapshots)
    times = np.asarray(times, dtype=np.float64)
    if len(times) != len(snapshots):
        raise ValueError("times and snapshots must align")
    d = float(graph.d if d is None else d)
    Q = quadratic_forms(snapshots, graph, K)
    if not np.array_equal(Q, Q.transpose(0, 2, 1)):
        raise InvariantViolationError("quadratic form lost its symmetry")
    ybar = counts_from_snapshots(snapshots, K) / graph.N
    proxy = d * np.einsum("sm,sl->sml", ybar, ybar)
    values = Q / graph.N - proxy
    if np.abs(values).max() > d + GAP_TOL:
        raise InvariantViolationError("|gap| exceeded the degree bound d")
    return GapSeries(times=times, values=values, d=d)


def gap_from_result(result: SimResult, graph: RegularBipartiteGraph,
                    d: float | None = None) -> GapSeries:
    if result.snapshots is None:
        raise ValueError("run was recorded without snapshots")
    times = result.trajectory.times[result.snapshot_events]
    return gap_series(result.snapshots, times, graph, result.K, d)


# ---------------------------------------------------------------------------
# sup-gap concentration across N
# ---------------------------------------------------------------------------

def _supgap_worker(payload) -> float:
    spec, N, d, T, run_seed, init_seed, graph_seed, shuffle_on, y0 = payload
    graph = generate_regular_bipartite(N, d, graph_seed)
    counts = counts_from_fractions(y0, N)
    initial = initial_state_from_counts(counts, make_stream(init_seed))
    result = simulate_optimized(spec, graph, initial, T, run_seed,
                                record="snapshots", snapshot_stride=1,
                                shuffle_on=shuffle_on)
    return gap_from_result(result, graph).sup_abs()


def sup_gap_concentration(spec: ModelSpec, d: int, N_list, epsilon: float,
                          T: float, seeds: int, base_seed: int, y0,
                          graph_seed: int = 0, shuffle_on: str = "every_event",
                          confidence: float = 0.99, workers: int = 1
                          ) -> list[TailEstimate]:
    """P(sup_t max_{m,l} |R_ml(t)| > eps) estimated per N by Monte Carlo.

    N_list must be strictly increasing; statistically meaningful output
    wants seeds >= 100.
    """
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N list must be strictly increasing")
    estimates = []
    for N in N_list:
        payloads = [(spec, N, d, T, derive_seed(base_seed, N, s, "run"),
                     derive_seed(base_seed, N, s, "init"), graph_seed,
                     shuffle_on, tuple(y0)) for s in range(seeds)]
        sups = parallel_map(_supgap_worker, payloads, workers)
        exceed = int(sum(1 for v in sups if v > epsilon))
        estimates.append(TailEstimate(N=N, epsilon=epsilon, trials=seeds,
                                      exceedances=exceed, confidence=confidence))
    return estimates


# ---------------------------------------------------------------------------
# auxiliary process tails and the Bernstein ceiling
# ---------------------------------------------------------------------------

def auxiliary_tail_estimate(alpha, graph: RegularBipartiteGraph,
                            epsilon: float, trials: int, seed: int,
                            pair: tuple[int, int] = (0, 1),
                            confidence: float = 0.99) -> TailEstimate:
    """Monte-Carlo tail of |Xt_m^T A Xt_l / N - d alpha_m alpha_l|.

    Columns of the auxiliary matrix are drawn i.i.d. Bernoulli at the
    rounded fractions; the quadratic form is evaluated over the directed
    edge list.
    """
    counts = counts_from_fractions(alpha, graph.N)
    m, l = pair
    am, al = counts[m] / graph.N, counts[l] / graph.N
    target = graph.d * am * al
    tails, heads = directed_edges(graph)
    gen = make_stream(seed)
    exceed = 0
    for _ in range(trials):
        aux = sample_auxiliary(counts, gen)
        q = int(np.count_nonzero(aux[tails, m] & aux[heads, l]))
        if abs(q / graph.N - target) > epsilon:
            exceed += 1
    return TailEstimate(N=graph.N, epsilon=epsilon, trials=trials,
                        exceedances=exceed, confidence=confidence)


def bernstein_bound(epsilon: float, c: float, v: float, N: int) -> float:
    """Two-sided Bernstein tail for N averaged independent terms.

    Evaluates 2 exp(-N eps^2 / (2 v^2 + 2 c eps / 3)); v enters squared, so
    pass the per-term standard-deviation bound.  Vacuous (> 1) for small N.
    """
    if epsilon <= 0 or c <= 0 or v <= 0:
        raise ValueError("epsilon, c, v must all be positive")
    return 2.0 * math.exp(-N * epsilon * epsilon
                          / (2.0 * v * v + 2.0 * c * epsilon / 3.0))


def auxiliary_tail_ceiling(alpha, d: int, epsilon: float, N: int,
                           pair: tuple[int, int] = (0, 1)) -> float:
    """Analytic ceiling for the auxiliary tail, capped at 1.

    Union bound over the d perfect matchings: each matching contributes N
    ordered pairs whose indicator products are i.i.d. Bernoulli(alpha_m
    alpha_l) for m != l, so a deviation of eps/d per matching is bounded by
    the two-sided Bernstein tail with c = max(a, 1-a) and v = sqrt(a(1-a)).
    """
    m, l = pair
    if m == l:
        raise ValueError("ceiling requires two distinct states (independent terms)")
    a = float(alpha[m]) * float(alpha[l])
    c = max(a, 1.0 - a)
    v = math.sqrt(a * (1.0 - a))
    return min(1.0, d * bernstein_bound(epsilon / d, c, v, N))


@dataclass
class AuxTailCurve:
    estimates: list[TailEstimate]
    ceilings: list[float]
    slope: float
    intercept: float
    r_squared: float


def auxiliary_tail_curve(alpha, d: int, N_list, epsilon: float, trials: int,
                         base_seed: int, pair: tuple[int, int] = (0, 1),
                         graph_seed: int = 0, confidence: float = 0.99
                         ) -> AuxTailCurve:
    """Tail estimates over an N grid plus the log-tail line fit.

    The fitted slope of log p_hat against N is the finite-sample signature
    of the exp(-kN) decay; p_hat enters the fit with a +1/2 pseudo-count so
    zero-exceedance cells stay finite.
    """
    estimates = []
    ceilings = []
    for N in N_list:
        graph = generate_regular_bipartite(N, d, graph_seed)
        est = auxiliary_tail_estimate(alpha, graph, epsilon, trials,
                                      derive_seed(base_seed, N, "aux"),
                                      pair, confidence)
        estimates.append(est)
        ceilings.append(auxiliary_tail_ceiling(alpha, d, epsilon, N, pair))
    logp = [math.log((e.exceedances + 0.5) / (e.trials + 1)) for e in estimates]
    slope, intercept, r2 = line_fit(list(N_list), logp)
    return AuxTailCurve(estimates=estimates, ceilings=ceilings, slope=slope,
                        intercept=intercept, r_squared=r2)


# ---------------------------------------------------------------------------
# Poisson-Bernoulli counting
# ---------------------------------------------------------------------------

@dataclass
class PoissonTailCheck:
    N: int
    alpha: float
    trials: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    analytic: float
    confidence: float
    within_ci: bool


def poisson_tail_closed_form(N: int, alpha: float) -> float:
    """P(at least one success among Poisson(N) Bernoulli(N^-alpha) trials)."""
    if alpha <= 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    return -math.expm1(-float(N) ** (1.0 - alpha))


def poisson_bernoulli_tail(N: int, alpha: float, trials: int, seed: int,
                           confidence: float = 0.99) -> PoissonTailCheck:
    """Simulated vs closed-form P(at least one success among Poisson(N) trials).

    Each of M ~ Poisson(N) independent Bernoulli(N^-alpha) variables flags
    an exceedance; the closed form of the hit probability is
    1 - exp(-N^(1-alpha)).  Requires alpha > 1 (the decay hypothesis).
    """
    if alpha <= 1.0:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if trials < 1:
        raise ValueError("trials must be positive")
    gen = make_stream(seed)
    p = float(N) ** (-alpha)
    m = gen.poisson(N, size=trials)
    hits = int(np.count_nonzero(gen.binomial(m, p) >= 1))
    p_hat = hits / trials
    lo, hi = wilson_interval(hits, trials, confidence)
    analytic = poisson_tail_closed_form(N, alpha)
    return PoissonTailCheck(N=N, alpha=alpha, trials=trials, hits=hits,
                            p_hat=p_hat, ci_low=lo, ci_high=hi,
                            analytic=analytic, confidence=confidence,
                            within_ci=lo <= analytic <= hi)


# ---------------------------------------------------------------------------
# martingale residual
# ---------------------------------------------------------------------------

@dataclass
class MartingaleResidualSeries:
    """Residual M_k(t) = Ybar_k(t) - Ybar_k(0) - drift_k(t).

    The drift is the exact event-time quadrature of
    (1/N) sum_{m,l} gamma[m,l] c[m,l,k] Q[m,l](s-) ds.  Jumps happen only
    at event times; between events the residual moves along -drift.  The
    final row samples the horizon T.
    """

    times: np.ndarray   # (n_events + 2,): event times then the horizon
    values: np.ndarray  # (n_events + 2, K)
    drift: np.ndarray   # (n_events + 2, K)
    ceiling: float      # 4 K^2 gamma_max d T / N

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


def martingale_residual(result: SimResult, spec: ModelSpec,
                        graph: RegularBipartiteGraph,
                        d: float | None = None) -> MartingaleResidualSeries:
    """Exact residual series; needs snapshots at every event (stride 1)."""
    if result.snapshots is None:
        raise ResolutionError("run must be recorded with snapshots")
    n_events = result.event_count
    if len(result.snapshots) != n_events + 1:
        raise ResolutionError(
            "snapshot stride > 1: residual needs a snapshot at every event")
    K = result.K
    N = result.N
    T = result.trajectory.horizon
    d = float(graph.d if d is None else d)
    times = result.trajectory.times
    Q = quadratic_forms(result.snapshots, graph, K).astype(np.float64)
    F = np.einsum("sml,mlk->sk", spec.gamma[None, :, :] * Q, spec.increments)
    dts = np.diff(times)
    drift = np.zeros((n_events + 2, K))
    if n_events:
        drift[1:-1] = np.cumsum(dts[:, None] * F[:-1], axis=0) / N
    drift[-1] = drift[-2] + (T - times[-1]) * F[-1] / N
    ybar = result.trajectory.fractions
    ybar_full = np.vstack([ybar, ybar[-1]])
    values = ybar_full - ybar_full[0] - drift
    ceiling = 4.0 * K * K * spec.max_rate * d * T / N
    return MartingaleResidualSeries(
        times=np.append(times, T), values=values, drift=drift, ceiling=ceiling)


@dataclass
class MartingaleL2Summary:
    N: int
    T: float
    seeds: int
    finals: np.ndarray    # (seeds, K) residuals at the horizon
    mean_square: np.ndarray  # (K,)
    ceiling: float


def _martingale_worker(payload) -> np.ndarray:
    spec, N, d, T, run_seed, init_seed, graph_seed, y0 = payload
    graph = generate_regular_bipartite(N, d, graph_seed)
    counts = counts_from_fractions(y0, N)
    initial = initial_state_from_counts(counts, make_stream(init_seed))
    result = simulate_optimized(spec, graph, initial, T, run_seed,
                                record="snapshots", snapshot_stride=1)
    return martingale_residual(result, spec, graph).final


def martingale_l2(spec: ModelSpec, d: int, N: int, T: float, seeds: int,
                  base_seed: int, y0, graph_seed: int = 0, workers: int = 1
                  ) -> MartingaleL2Summary:
    """Across-seed second moment of the horizon residual, vs its ceiling."""
    payloads = [(spec, N, d, T, derive_seed(base_seed, N, s, "run"),
                 derive_seed(base_seed, N, s, "init"), graph_seed, tuple(y0))
                for s in range(seeds)]
    finals = np.vstack(parallel_map(_martingale_worker, payloads, workers))
    ceiling = 4.0 * spec.K * spec.K * spec.max_rate * d * T / N
    return MartingaleL2Summary(N=N, T=T, seeds=seeds, finals=finals,
                               mean_square=(finals ** 2).mean(axis=0),
                               ceiling=ceiling)


# ---------------------------------------------------------------------------
# path functionals
# ---------------------------------------------------------------------------

def modulus_of_continuity(times, values, delta: float, T: float) -> float:
    """Largest oscillation of a step path over windows of width delta.

    `times` are jump times starting at 0 with `values` constant on
    [times[i], times[i+1]) and to T after the last jump.  Segments i < j
    are comparable when times[j] - times[i+1] < delta; the sup is the
    largest value spread over any comparable window (exact, no sampling).
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta > T:
        raise ValueError(f"delta={delta} exceeds the horizon T={T}")
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = times <= T
    times, values = times[keep], values[keep]
    ends = np.append(times[1:], T)
    best = 0.0
    lo = 0
    max_deque: list[int] = []
    min_deque: list[int] = []
    for j in range(len(values)):
        while max_deque and values[max_deque[-1]] <= values[j]:
            max_deque.pop()
        max_deque.append(j)
        while min_deque and values[min_deque[-1]] >= values[j]:
            min_deque.pop()
        min_deque.append(j)
        while times[j] - ends[lo] >= delta:  # segment lo no longer reachable
            if max_deque and max_deque[0] == lo:
                max_deque.pop(0)
            if min_deque and min_deque[0] == lo:
                min_deque.pop(0)
            lo += 1
        spread = values[max_deque[0]] - values[min_deque[0]]
        if spread > best:
            best = float(spread)
    return best


def compare_to_fluid(traj: MacroTrajectory, fluid: FluidPath) -> float:
    """sup_t max_k |Ybar_k(t) - y_k(t)| over [0, T].

    Evaluated exactly on the union of event times and fluid grid times,
    including the step path's left limits at its jumps; the fluid grid must
    be fine enough that intra-step variation is negligible (the integrator
    default satisfies this).
    """
    if abs(traj.horizon - fluid.horizon) > 1e-9:
        raise ValueError(
            f"mismatched horizons: trajectory {traj.horizon}, fluid {fluid.horizon}")
    frac = traj.fractions
    # fluid grid against the step values holding there
    idx = np.searchsorted(traj.times, fluid.times, side="right") - 1
    np.clip(idx, 0, len(frac) - 1, out=idx)
    d_grid = np.abs(frac[idx] - fluid.states).max()
    # event times against the interpolated fluid, right and left limits
    at_events = fluid.value_at(traj.times)
    d_right = np.abs(frac - at_events).max()
    d_left = np.abs(frac[:-1] - at_events[1:]).max() if len(frac) > 1 else 0.0
    return float(max(d_grid, d_right, d_left))
