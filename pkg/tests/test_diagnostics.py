import itertools
import math

import numpy as np
import pytest

from shufflesim.diagnostics import (auxiliary_tail_ceiling,
                                    auxiliary_tail_estimate, bernstein_bound,
                                    compare_to_fluid, gap_from_result,
                                    gap_series, martingale_residual,
                                    modulus_of_continuity,
                                    poisson_bernoulli_tail,
                                    poisson_tail_closed_form, quadratic_forms,
                                    sup_gap_concentration, wilson_interval)
from shufflesim.errors import ResolutionError
from shufflesim.fluid import FluidPath, integrate
from shufflesim.microsim import MacroTrajectory, simulate_optimized
from shufflesim.model import make_model, sis_model, voter_model
from shufflesim.network import generate_regular_bipartite, shuffle_states
from shufflesim.rng import derive_seed, make_stream

from conftest import adjacency, random_model

# frozen oracle: 2*exp(-1000*0.01/(2*0.0625 + 2*0.1/3)), 50-digit evaluation
BERNSTEIN_01_1_025_1000 = 4.3872002876199145e-23
# frozen oracles: 1 - exp(-N^(1-alpha))
POISSON_100_2 = 0.009950166250831946
POISSON_1E6_15 = 0.0009995001666250083


def one_hot(states, K):
    eye = np.eye(K, dtype=np.int64)
    return eye[np.asarray(states)]


def dense_quadratic(states, A, K):
    X = one_hot(states, K)
    return X.T @ A @ X


def test_gap_zero_when_all_nodes_share_state():
    graph = generate_regular_bipartite(8, 3, seed=1)
    snaps = np.zeros((1, 8), dtype=np.int8)
    series = gap_series(snaps, [0.0], graph, K=2)
    assert series.values[0, 0, 0] == pytest.approx(0.0, abs=1e-15)


def test_gap_hand_value_single_infected_cycle():
    # one infected on the 4-cycle: X1^T A X2 / N = 2/4, proxy = 2*(1/4)*(3/4)
    graph = generate_regular_bipartite(4, 2, seed=3)
    for pos in range(4):
        snap = np.ones((1, 4), dtype=np.int8)
        snap[0, pos] = 0
        series = gap_series(snap, [0.0], graph, K=2)
        assert series.values[0, 0, 1] == pytest.approx(0.125, abs=1e-15)
        assert series.values[0, 1, 0] == pytest.approx(0.125, abs=1e-15)


def test_quadratic_forms_match_dense_adjacency():
    gen = make_stream(5)
    for trial in range(10):
        N = int(gen.integers(3, 8)) * 2
        d = int(gen.integers(1, N // 2 + 1))
        K = int(gen.integers(2, 4))
        graph = generate_regular_bipartite(N, d, seed=trial)
        A = adjacency(graph)
        snaps = gen.integers(0, K, size=(5, N)).astype(np.int8)
        Q = quadratic_forms(snaps, graph, K)
        for s in range(5):
            assert np.array_equal(Q[s], dense_quadratic(snaps[s], A, K))


def test_post_shuffle_expected_quadratic_form_matches_enumeration():
    # exhaustive average over all arrangements of Y=(2,2) on the 4-cycle
    graph = generate_regular_bipartite(4, 2, seed=7)
    base = np.array([0, 0, 1, 1], dtype=np.int64)
    values = []
    for perm in set(itertools.permutations(base.tolist())):
        snap = np.array([perm], dtype=np.int8)
        values.append(quadratic_forms(snap, graph, 2)[0, 0, 1] / 4)
    exact = float(np.mean(values))
    gen = make_stream(40)
    trials = 20000
    total = 0.0
    for _ in range(trials):
        states = base.copy()
        shuffle_states(states, gen)
        total += quadratic_forms(states[None].astype(np.int8), graph, 2)[0, 0, 1] / 4
    mc = total / trials
    spread = max(values) - min(values)
    assert abs(mc - exact) < 4 * spread / math.sqrt(trials)


def test_gap_bound_and_symmetry_on_simulated_run():
    spec = sis_model()
    graph = generate_regular_bipartite(40, 3, seed=9)
    initial = np.array([0] * 4 + [1] * 36, dtype=np.int64)
    result = simulate_optimized(spec, graph, initial, 3.0, seed=31,
                                record="snapshots", snapshot_stride=1)
    series = gap_from_result(result, graph)
    assert series.sup_abs() <= graph.d  # raises internally if violated
    assert np.array_equal(series.values, series.values.transpose(0, 2, 1))


def test_gap_series_validates_alignment():
    graph = generate_regular_bipartite(4, 2, seed=3)
    with pytest.raises(ValueError):
        gap_series(np.zeros((2, 6), dtype=np.int8), [0.0, 1.0], graph, K=2)
    with pytest.raises(ValueError):
        gap_series(np.zeros((2, 4), dtype=np.int8), [0.0], graph, K=2)


def test_sup_gap_estimate_zero_when_epsilon_exceeds_degree():
    estimates = sup_gap_concentration(sis_model(), d=2, N_list=[4, 8],
                                      epsilon=2.5, T=1.0, seeds=5,
                                      base_seed=3, y0=(0.25, 0.75))
    assert all(e.p_hat == 0.0 for e in estimates)
    with pytest.raises(ValueError):
        sup_gap_concentration(sis_model(), 2, [8, 8], 0.1, 1.0, 2, 3,
                              (0.5, 0.5))


def test_single_event_sup_gap_distribution_matches_enumeration():
    # first event of sis from one infected on the 4-cycle: counts always
    # become (2,2) and the post-shuffle arrangement is uniform over the 6
    # placements, so sup|R_12| over the first two segments has an exactly
    # enumerable law
    graph = generate_regular_bipartite(4, 2, seed=3)
    initial = np.array([0, 1, 1, 1], dtype=np.int64)
    r0 = abs(quadratic_forms(initial[None].astype(np.int8), graph, 2)[0, 0, 1] / 4
             - 2 * 0.25 * 0.75)
    support = {}
    for pair in itertools.combinations(range(4), 2):
        snap = np.ones(4, dtype=np.int8)
        snap[list(pair)] = 0
        # post-event proxy uses the post-event fractions (1/2, 1/2)
        r1 = abs(quadratic_forms(snap[None], graph, 2)[0, 0, 1] / 4 - 2 * 0.5 * 0.5)
        key = round(max(r0, r1), 12)
        support[key] = support.get(key, 0) + 1 / 6
    spec = sis_model()
    trials = 12000
    observed = {k: 0 for k in support}
    for s in range(trials):
        result = simulate_optimized(spec, graph, initial, 50.0,
                                    seed=derive_seed(8, s),
                                    record="snapshots", snapshot_stride=1)
        series = gap_from_result(result, graph)
        sup = round(float(np.abs(series.values[:2, 0, 1]).max()), 12)
        observed[sup] += 1
    for key, prob in support.items():
        lo, hi = wilson_interval(observed[key], trials, 0.999)
        assert lo <= prob <= hi


@pytest.mark.slow
def test_sup_gap_concentrates_as_n_grows():
    # true exceedance probabilities fall exponentially, so at a hundred
    # seeds the larger sizes pin their estimates to zero: require
    # non-increasing estimates with a strict overall drop
    import os
    estimates = sup_gap_concentration(
        sis_model(), d=2, N_list=[100, 400, 1600], epsilon=0.1, T=10.0,
        seeds=100, base_seed=31, y0=(0.1, 0.9), workers=os.cpu_count() or 1)
    p_hats = [e.p_hat for e in estimates]
    assert all(b <= a for a, b in zip(p_hats, p_hats[1:])), p_hats
    assert p_hats[-1] < p_hats[0], p_hats


def test_auxiliary_tail_epsilon_above_degree_is_zero():
    graph = generate_regular_bipartite(6, 2, seed=2)
    est = auxiliary_tail_estimate((0.5, 0.5), graph, epsilon=2.5, trials=50,
                                  seed=1)
    assert est.p_hat == 0.0


def test_auxiliary_tail_matches_exhaustive_enumeration_n4():
    # brute force over all 2^(4*2) auxiliary outcomes, exact cell weights
    graph = generate_regular_bipartite(4, 2, seed=6)
    tails = []
    heads = []
    for pairs in graph.matchings:
        for u, v in pairs:
            tails += [u, v]
            heads += [v, u]
    for alpha, eps in (((0.5, 0.5), 0.3), ((0.25, 0.75), 0.2)):
        p0, p1 = alpha
        target = 2 * p0 * p1
        exact = 0.0
        for bits in range(256):
            cells = [(bits >> i) & 1 for i in range(8)]
            col0, col1 = cells[:4], cells[4:]
            prob = 1.0
            for x in col0:
                prob *= p0 if x else 1 - p0
            for x in col1:
                prob *= p1 if x else 1 - p1
            q = sum(col0[t] * col1[h] for t, h in zip(tails, heads))
            if abs(q / 4 - target) > eps:
                exact += prob
        est = auxiliary_tail_estimate(alpha, graph, eps, trials=30000, seed=4,
                                      confidence=0.999)
        assert est.ci_low <= exact <= est.ci_high


def test_bernstein_bound_frozen_value_and_limits():
    value = bernstein_bound(0.1, c=1.0, v=0.25, N=1000)
    assert value == pytest.approx(BERNSTEIN_01_1_025_1000, rel=1e-12)
    assert bernstein_bound(50.0, 1.0, 0.25, 1000) < 1e-300
    assert bernstein_bound(0.1, 1.0, 0.25, 0) == 2.0  # vacuous, capped later
    assert bernstein_bound(0.1, 1.0, 0.25, 2000) < value
    with pytest.raises(ValueError):
        bernstein_bound(0.0, 1.0, 0.25, 10)


def test_auxiliary_ceiling_caps_at_one():
    assert auxiliary_tail_ceiling((0.5, 0.5), 2, 0.05, 10) == 1.0
    small = auxiliary_tail_ceiling((0.5, 0.5), 2, 0.5, 5000)
    assert 0.0 < small < 1e-6
    with pytest.raises(ValueError):
        auxiliary_tail_ceiling((0.5, 0.5), 2, 0.05, 10, pair=(1, 1))


def test_poisson_tail_analytic_values():
    check = poisson_bernoulli_tail(100, 2.0, trials=20000, seed=10)
    assert check.analytic == pytest.approx(POISSON_100_2, rel=1e-12)
    assert check.within_ci
    check = poisson_bernoulli_tail(10**6, 1.5, trials=20000, seed=11)
    assert check.analytic == pytest.approx(POISSON_1E6_15, rel=1e-12)
    # alpha -> infinity drives the analytic value to zero for fixed N >= 2
    assert poisson_tail_closed_form(100, 40.0) < 1e-70
    assert poisson_tail_closed_form(2, 200.0) < 1e-55
    with pytest.raises(ValueError):
        poisson_bernoulli_tail(100, 1.0, 100, seed=1)
    with pytest.raises(ValueError):
        poisson_bernoulli_tail(100, 2.0, 0, seed=1)


def test_zero_rate_model_residual_identically_zero():
    spec = make_model(2, np.zeros((2, 2)), rule="sis")
    graph = generate_regular_bipartite(6, 2, seed=1)
    result = simulate_optimized(spec, graph, np.array([0, 1, 0, 1, 0, 1]),
                                2.0, seed=5, record="snapshots")
    series = martingale_residual(result, spec, graph)
    assert not series.values.any()


def test_voter_single_event_residual_jump():
    # discordant voter contact moves one node: the residual jumps by
    # exactly the count change 1/N = 1/4 (the drift part is continuous)
    spec = make_model(2, np.array([[0.0, 1.0], [1.0, 0.0]]), rule="voter")
    graph = generate_regular_bipartite(4, 2, seed=2)
    result = simulate_optimized(spec, graph, np.array([0, 0, 1, 1]), 50.0,
                                seed=17, record="snapshots")
    assert result.event_count >= 1
    series = martingale_residual(result, spec, graph)
    jump = series.values[1] + series.drift[1]  # residual minus its left limit
    assert np.abs(np.abs(jump) - 0.25).max() < 1e-15


def test_residual_requires_stride_one():
    spec = sis_model()
    graph = generate_regular_bipartite(8, 2, seed=2)
    initial = np.array([0] + [1] * 7, dtype=np.int64)
    coarse = simulate_optimized(spec, graph, initial, 4.0, seed=21,
                                record="snapshots", snapshot_stride=3)
    with pytest.raises(ResolutionError):
        martingale_residual(coarse, spec, graph)
    bare = simulate_optimized(spec, graph, initial, 4.0, seed=21)
    with pytest.raises(ResolutionError):
        martingale_residual(bare, spec, graph)


def test_pathwise_identity_against_dense_oracle():
    # independent route: drift recomputed from dense-adjacency quadratic
    # forms; initial + residual + drift must reproduce the trajectory
    gen = make_stream(77)
    for trial in range(25):
        K = int(gen.integers(2, 4))
        spec = random_model(gen, K)
        N = int(gen.integers(3, 10)) * 2
        d = int(gen.integers(1, N // 2 + 1))
        graph = generate_regular_bipartite(N, d, seed=trial)
        A = adjacency(graph)
        initial = gen.integers(0, K, size=N)
        result = simulate_optimized(spec, graph, initial, 0.6,
                                    seed=derive_seed(13, trial),
                                    record="snapshots", snapshot_stride=1)
        series = martingale_residual(result, spec, graph)
        times = result.trajectory.times
        frac = result.trajectory.fractions
        drift = np.zeros(K)
        for e in range(result.event_count + 1):
            if e:
                q = dense_quadratic(result.snapshots[e - 1], A, K)
                fk = np.array([
                    (spec.gamma * spec.increments[:, :, k] * q).sum()
                    for k in range(K)])
                drift = drift + (times[e] - times[e - 1]) * fk / N
            recon = frac[0] + series.values[e] + drift
            assert np.abs(recon - frac[e]).max() <= 1e-12


def test_modulus_constant_and_single_jump():
    assert modulus_of_continuity([0.0], [0.7], 0.5, 2.0) == 0.0
    times, values = [0.0, 1.0], [0.0, 0.6]
    for delta in (1e-6, 0.3, 2.0):
        assert modulus_of_continuity(times, values, delta, 2.0) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        modulus_of_continuity(times, values, 0.0, 2.0)
    with pytest.raises(ValueError):
        modulus_of_continuity(times, values, 3.0, 2.0)


def test_modulus_window_semantics():
    # jumps at 0,1,2: values 0,1,0; window 0.5 only sees adjacent segments
    times, values = [0.0, 1.0, 2.0], [0.0, 1.0, 0.0]
    assert modulus_of_continuity(times, values, 0.5, 3.0) == 1.0
    # shrink below any inter-jump gap: still 1 because adjacent segments
    # meet at their shared jump time
    assert modulus_of_continuity(times, values, 1e-9, 3.0) == 1.0


def test_modulus_monotone_in_delta_on_simulated_path():
    spec = sis_model()
    graph = generate_regular_bipartite(60, 2, seed=4)
    initial = np.array([0] * 6 + [1] * 54, dtype=np.int64)
    result = simulate_optimized(spec, graph, initial, 3.0, seed=9)
    series = result.trajectory.fractions[:, 0]
    deltas = [0.02, 0.1, 0.5, 1.0, 3.0]
    omegas = [modulus_of_continuity(result.trajectory.times, series, dl, 3.0)
              for dl in deltas]
    assert all(a <= b + 1e-15 for a, b in zip(omegas, omegas[1:]))


def test_compare_to_fluid_trivial_cases():
    voter = voter_model(K=2)
    fluid_path = integrate(voter, 2.0, [1.0, 0.0], T=2.0, step=1e-2)
    traj = MacroTrajectory(times=np.array([0.0]),
                           counts=np.array([[10, 0]]), N=10, horizon=2.0)
    assert compare_to_fluid(traj, fluid_path) == 0.0
    offset = integrate(voter, 2.0, [0.9, 0.1], T=2.0, step=1e-2)
    assert compare_to_fluid(traj, offset) == pytest.approx(0.1, abs=1e-12)
    short = integrate(voter, 2.0, [1.0, 0.0], T=1.0, step=1e-2)
    with pytest.raises(ValueError):
        compare_to_fluid(traj, short)


def test_compare_to_fluid_catches_left_limit_gap():
    # one late jump: the step path's left limit at the jump is far from the
    # fluid even though both endpoints agree afterwards
    voter = voter_model(K=2)
    fluid_path = integrate(voter, 2.0, [1.0, 0.0], T=2.0, step=1e-2)
    traj = MacroTrajectory(times=np.array([0.0, 2.0]),
                           counts=np.array([[5, 5], [10, 0]]), N=10,
                           horizon=2.0)
    assert compare_to_fluid(traj, fluid_path) == pytest.approx(0.5, abs=1e-12)


def test_wilson_interval_behaviour():
    lo, hi = wilson_interval(50, 100, 0.95)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 100, 0.99)[0] == 0.0
    assert wilson_interval(100, 100, 0.99)[1] == 1.0
    wide = wilson_interval(5, 10, 0.99)
    narrow = wilson_interval(500, 1000, 0.99)
    assert (wide[1] - wide[0]) > (narrow[1] - narrow[0])
    with pytest.raises(ValueError):
        wilson_interval(5, 0)
