import itertools

import numpy as np
import pytest
from scipy.stats import chi2

from shufflesim.microsim import (counts_from_fractions, couple_to_counts,
                                 initial_state_from_counts, sample_auxiliary,
                                 simulate, simulate_optimized)
from shufflesim.model import make_model, sis_model, voter_model
from shufflesim.network import generate_regular_bipartite
from shufflesim.rng import derive_seed, make_stream

from conftest import random_model


def test_voter_all_same_state_constant_counts():
    spec = voter_model(K=2, rate=1.0)
    graph = generate_regular_bipartite(8, 2, seed=1)
    initial = np.zeros(8, dtype=np.int64)
    result = simulate(spec, graph, initial, horizon=2.0, seed=3)
    # same-state contacts keep firing (gamma_11 > 0) but counts never move
    assert (result.trajectory.counts[:, 0] == 8).all()
    assert (result.trajectory.counts[:, 1] == 0).all()


def test_sis_two_nodes_absorption_is_exponential_one():
    spec = sis_model(rate=1.0)
    graph = generate_regular_bipartite(2, 1, seed=0)
    initial = np.array([0, 1], dtype=np.int64)
    samples = []
    for s in range(10000):
        result = simulate_optimized(spec, graph, initial, horizon=60.0,
                                    seed=derive_seed(42, s))
        assert result.event_count == 1  # one infection then absorbing
        samples.append(result.trajectory.times[1])
    mean = float(np.mean(samples))
    assert abs(mean - 1.0) < 0.03


def test_sis_cycle_first_event_always_infects():
    spec = sis_model()
    graph = generate_regular_bipartite(4, 2, seed=5)
    initial = np.array([0, 1, 1, 1], dtype=np.int64)
    for s in range(200):
        result = simulate_optimized(spec, graph, initial, horizon=50.0,
                                    seed=derive_seed(7, s))
        assert result.trajectory.counts[1, 0] == 2


def test_zero_rate_model_is_absorbing_immediately():
    spec = make_model(2, np.zeros((2, 2)), rule="sis")
    graph = generate_regular_bipartite(6, 1, seed=2)
    result = simulate(spec, graph, np.array([0, 1, 0, 1, 0, 1]), 5.0, seed=1)
    assert result.event_count == 0
    assert len(result.trajectory.times) == 1


def test_invalid_arguments():
    spec = sis_model()
    graph = generate_regular_bipartite(4, 2, seed=1)
    good = np.array([0, 1, 1, 1])
    with pytest.raises(ValueError):
        simulate(spec, graph, good, horizon=0.0, seed=1)
    with pytest.raises(ValueError):
        simulate(spec, graph, np.array([0, 1]), horizon=1.0, seed=1)
    with pytest.raises(ValueError):
        simulate(spec, graph, np.array([0, 1, 2, 1]), horizon=1.0, seed=1)
    with pytest.raises(ValueError):
        simulate(spec, graph, good, horizon=1.0, seed=1, record="everything")
    with pytest.raises(ValueError):
        simulate(spec, graph, good, horizon=1.0, seed=1, shuffle_on="never")


def test_conservation_and_eventwise_increments():
    gen = make_stream(2024)
    for trial in range(20):
        K = int(gen.integers(2, 4))
        spec = random_model(gen, K)
        N = int(gen.integers(3, 10)) * 2
        d = int(gen.integers(1, N // 2 + 1))
        graph = generate_regular_bipartite(N, d, seed=trial)
        initial = gen.integers(0, K, size=N)
        result = simulate_optimized(spec, graph, initial, horizon=0.4,
                                    seed=derive_seed(9, trial),
                                    record="events")
        counts = result.trajectory.counts
        assert (counts.sum(axis=1) == N).all()
        deltas = np.diff(counts, axis=0)
        assert np.abs(deltas).max(initial=0) <= 2
        for e in range(result.event_count):
            m, l = result.events.pre[e]
            assert np.array_equal(deltas[e], spec.increments[m, l])


def test_naive_and_optimized_bit_identical_quick():
    gen = make_stream(55)
    for trial in range(15):
        K = int(gen.integers(2, 5))
        spec = random_model(gen, K)
        N = int(gen.integers(2, 26)) * 2
        d = int(gen.integers(1, min(4, N // 2) + 1))
        graph = generate_regular_bipartite(N, d, seed=100 + trial)
        initial = gen.integers(0, K, size=N)
        seed = derive_seed(1, trial)
        a = simulate(spec, graph, initial, 1.5, seed, record="events")
        b = simulate_optimized(spec, graph, initial, 1.5, seed, record="events")
        assert a.event_count == b.event_count
        assert np.array_equal(a.trajectory.times, b.trajectory.times)
        assert np.array_equal(a.trajectory.counts, b.trajectory.counts)
        if a.event_count:
            assert np.array_equal(a.events.times, b.events.times)
            assert np.array_equal(a.events.node_i, b.events.node_i)
            assert np.array_equal(a.events.node_j, b.events.node_j)
            assert np.array_equal(a.events.pre, b.events.pre)
            assert np.array_equal(a.events.post, b.events.post)


def test_shuffle_on_state_change_matches_for_sis():
    # the sis rule has no positive-rate no-op pairs, so both switches agree
    spec = sis_model()
    graph = generate_regular_bipartite(10, 2, seed=3)
    initial = np.array([0, 1] * 5, dtype=np.int64)
    a = simulate_optimized(spec, graph, initial, 3.0, seed=12,
                           shuffle_on="every_event")
    b = simulate_optimized(spec, graph, initial, 3.0, seed=12,
                           shuffle_on="state_change")
    assert np.array_equal(a.trajectory.times, b.trajectory.times)
    assert np.array_equal(a.trajectory.counts, b.trajectory.counts)


def test_shuffle_on_state_change_skips_noop_draws():
    # voter same-state contacts are no-ops: under state_change they must
    # not consume shuffle draws, so trajectories legitimately diverge
    spec = voter_model(K=2)
    graph = generate_regular_bipartite(6, 2, seed=3)
    initial = np.array([0, 0, 0, 0, 0, 1], dtype=np.int64)
    a = simulate_optimized(spec, graph, initial, 1.0, seed=9,
                           shuffle_on="every_event")
    b = simulate_optimized(spec, graph, initial, 1.0, seed=9,
                           shuffle_on="state_change")
    assert np.array_equal(a.trajectory.times[:1], b.trajectory.times[:1])
    assert a.shuffle_on != b.shuffle_on


def test_snapshots_track_events_at_stride_one():
    spec = sis_model()
    graph = generate_regular_bipartite(8, 2, seed=2)
    initial = np.array([0] + [1] * 7, dtype=np.int64)
    result = simulate_optimized(spec, graph, initial, 4.0, seed=21,
                                record="snapshots", snapshot_stride=1)
    assert result.snapshots.shape == (result.event_count + 1, 8)
    assert np.array_equal(result.snapshot_events,
                          np.arange(result.event_count + 1))
    # snapshot counts agree with the trajectory rows
    for row, snap in zip(result.trajectory.counts, result.snapshots):
        assert np.array_equal(row, np.bincount(snap, minlength=2))


def test_snapshot_stride_subsamples():
    spec = sis_model()
    graph = generate_regular_bipartite(8, 2, seed=2)
    initial = np.array([0] + [1] * 7, dtype=np.int64)
    result = simulate_optimized(spec, graph, initial, 4.0, seed=21,
                                record="snapshots", snapshot_stride=3)
    assert (result.snapshot_events % 3 == 0).all()


def test_post_shuffle_arrangement_uniform_chi_square():
    # conditional on counts (2, 2) after the first event, the arrangement
    # must be uniform over the 6 possible placements
    spec = sis_model()
    graph = generate_regular_bipartite(4, 2, seed=5)
    initial = np.array([0, 1, 1, 1], dtype=np.int64)
    arrangements = {c: i for i, c in
                    enumerate(itertools.combinations(range(4), 2))}
    obs = np.zeros(6, dtype=np.int64)
    trials = 12000
    for s in range(trials):
        result = simulate_optimized(spec, graph, initial, 50.0,
                                    seed=derive_seed(3, s),
                                    record="snapshots", snapshot_stride=1)
        snap = result.snapshots[1]
        obs[arrangements[tuple(np.flatnonzero(snap == 0))]] += 1
    expected = trials / 6
    stat = float(((obs - expected) ** 2 / expected).sum())
    assert chi2.sf(stat, df=5) > 0.001


def test_counts_from_fractions_largest_remainder():
    assert np.array_equal(counts_from_fractions([0.1, 0.9], 100), [10, 90])
    assert np.array_equal(counts_from_fractions([0.5, 0.5], 7), [4, 3])
    counts = counts_from_fractions([1 / 3, 1 / 3, 1 / 3], 10)
    assert counts.sum() == 10 and sorted(counts) == [3, 3, 4]
    with pytest.raises(ValueError):
        counts_from_fractions([0.7, 0.7], 10)


def test_initial_state_from_counts():
    states = initial_state_from_counts([2, 3])
    assert np.array_equal(states, [0, 0, 1, 1, 1])
    shuffled = initial_state_from_counts([2, 3], make_stream(4))
    assert np.array_equal(np.bincount(shuffled), [2, 3])


def test_sample_auxiliary_degenerate_counts():
    gen = make_stream(1)
    aux = sample_auxiliary(np.array([6, 0]), gen)
    assert aux[:, 0].all() and not aux[:, 1].any()


def test_sample_auxiliary_binomial_mean():
    gen = make_stream(2)
    total = 0
    trials = 400
    for _ in range(trials):
        total += int(sample_auxiliary(np.array([500, 500]), gen)[:, 0].sum())
    mean = total / trials
    # Binomial(1000, 0.5): se of the trial mean is sqrt(250/400) ~ 0.79
    assert abs(mean - 500.0) < 3.2


def test_sample_auxiliary_independent_across_matching_edges():
    graph = generate_regular_bipartite(4, 2, seed=5)
    pairs = graph.matchings[0]
    gen = make_stream(3)
    trials = 20000
    prods = np.empty((trials, 2))
    for t in range(trials):
        aux = sample_auxiliary(np.array([2, 2]), gen)
        prods[t, 0] = aux[pairs[0, 0], 0] * aux[pairs[0, 1], 0]
        prods[t, 1] = aux[pairs[1, 0], 0] * aux[pairs[1, 1], 0]
    corr = np.corrcoef(prods.T)[0, 1]
    assert abs(corr) < 4.0 / np.sqrt(trials)


def test_couple_to_counts_exact_and_lazy():
    gen = make_stream(6)
    col = np.array([1, 0, 1, 0], dtype=np.uint8)
    probe_before = make_stream(6).random()
    out = couple_to_counts(col, 2, gen)
    assert np.array_equal(out, col)      # already matching: unchanged
    assert gen.random() == probe_before  # and no randomness consumed
    out = couple_to_counts(np.zeros(5, dtype=np.uint8), 5, gen)
    assert out.all()
    out = couple_to_counts(np.ones(5, dtype=np.uint8), 0, gen)
    assert not out.any()
    with pytest.raises(ValueError):
        couple_to_counts(col, 5, gen)


def test_coupled_output_uniform_over_two_one_vectors():
    # aux column at fractions (1/2, 1/2) coupled to exactly two ones is
    # exchangeable, hence uniform over the C(4,2)=6 binary vectors
    gen = make_stream(9)
    keys = {c: i for i, c in enumerate(itertools.combinations(range(4), 2))}
    obs = np.zeros(6, dtype=np.int64)
    trials = 18000
    for _ in range(trials):
        aux = sample_auxiliary(np.array([2, 2]), gen)
        out = couple_to_counts(aux[:, 0], 2, gen)
        obs[keys[tuple(np.flatnonzero(out))]] += 1
    expected = trials / 6
    stat = float(((obs - expected) ** 2 / expected).sum())
    assert chi2.sf(stat, df=5) > 0.001


def test_event_times_strictly_increasing():
    spec = voter_model(K=3)
    graph = generate_regular_bipartite(12, 3, seed=8)
    gen = make_stream(10)
    initial = gen.integers(0, 3, size=12)
    result = simulate_optimized(spec, graph, initial, 1.0, seed=11)
    assert (np.diff(result.trajectory.times) > 0).all()
