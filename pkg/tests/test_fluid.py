import math

import numpy as np
import pytest

from shufflesim.errors import IntegrationError
from shufflesim.fluid import integrate, logistic_oracle, vector_field
from shufflesim.model import ModelSpec, identity_update, sis_model, voter_model
from shufflesim.rng import make_stream

from conftest import random_model

# closed form y0/(y0+(1-y0)e^{-2}) at (0.1, 2, 1, 1), 50-digit evaluation
LOGISTIC_01_2_1_1 = 0.45085306037928382


def test_vector_field_sis_half_half():
    field = vector_field(sis_model(), d=2.0, y=[0.5, 0.5])
    assert field == pytest.approx([0.5, -0.5], abs=1e-15)


def test_vector_field_voter_vanishes():
    spec = voter_model(K=3, rate=0.7)
    gen = make_stream(3)
    for _ in range(20):
        y = gen.random(3)
        y /= y.sum()
        assert np.abs(vector_field(spec, 2.0, y)).max() < 1e-14


def test_vector_field_absorbing_vertex():
    spec = sis_model()
    assert not vector_field(spec, 2.0, [1.0, 0.0]).any()
    assert not vector_field(spec, 2.0, [0.0, 1.0]).any()


def test_logistic_oracle_fixed_points_and_value():
    assert logistic_oracle(0.0, 2, 1, 5.0) == 0.0
    assert logistic_oracle(1.0, 2, 1, 5.0) == 1.0
    assert logistic_oracle(0.1, 2, 1, 1.0) == pytest.approx(
        LOGISTIC_01_2_1_1, abs=1e-15)
    with pytest.raises(ValueError):
        logistic_oracle(1.5, 2, 1, 1.0)


def test_integrator_matches_logistic_to_1e8():
    spec = sis_model()
    path = integrate(spec, d=2.0, y0=[0.1, 0.9], T=10.0, step=1e-3)
    closed = np.array([logistic_oracle(0.1, 2.0, 1.0, t) for t in path.times])
    assert np.abs(path.states[:, 0] - closed).max() <= 1e-8
    assert np.abs(path.states.sum(axis=1) - 1.0).max() <= 1e-9


def test_step_halving_shows_fourth_order():
    spec = sis_model()
    errors = []
    for step in (8e-3, 4e-3):
        path = integrate(spec, 2.0, [0.1, 0.9], T=10.0, step=step)
        closed = np.array([logistic_oracle(0.1, 2.0, 1.0, t)
                           for t in path.times])
        errors.append(np.abs(path.states[:, 0] - closed).max())
    order = math.log(errors[0] / errors[1], 2.0)
    assert order >= 3.7


def test_voter_path_constant():
    spec = voter_model(K=3)
    path = integrate(spec, 2.0, [0.2, 0.3, 0.5], T=5.0, step=1e-2)
    assert np.abs(path.states - path.states[0]).max() < 1e-12


def test_vertex_initial_condition_constant():
    path = integrate(sis_model(), 2.0, [1.0, 0.0], T=5.0, step=1e-2)
    assert np.abs(path.states[:, 0] - 1.0).max() < 1e-12


def test_simplex_and_hypercube_preserved_random_models():
    gen = make_stream(17)
    for trial in range(100):
        K = int(gen.integers(2, 5))
        spec = random_model(gen, K)
        y0 = gen.random(K)
        y0 /= y0.sum()
        path = integrate(spec, 2.0, y0, T=10.0, step=5e-2)
        assert np.abs(path.states.sum(axis=1) - 1.0).max() <= 1e-9
        assert path.states.min() >= 0.0 and path.states.max() <= 1.0


def test_finite_difference_consistency_with_field():
    spec = sis_model()
    step = 1e-2
    path = integrate(spec, 2.0, [0.1, 0.9], T=4.0, step=step)
    mid = slice(1, -1)
    central = (path.states[2:] - path.states[:-2]) / (2 * step)
    fields = np.array([vector_field(spec, 2.0, y) for y in path.states[mid]])
    assert np.abs(central - fields).max() < 5e-4  # O(step^2) residual


def test_grid_lands_on_horizon_for_awkward_step():
    path = integrate(sis_model(), 2.0, [0.3, 0.7], T=1.0, step=0.3)
    assert path.times[-1] == 1.0
    assert len(path.times) == 5  # ceil(1/0.3) = 4 steps


def test_bad_arguments():
    spec = sis_model()
    with pytest.raises(ValueError):
        integrate(spec, 2.0, [0.5, 0.5], T=1.0, step=0.0)
    with pytest.raises(ValueError):
        integrate(spec, 2.0, [0.5, 0.5], T=-1.0, step=0.1)
    with pytest.raises(ValueError):
        integrate(spec, 2.0, [0.9, 0.9], T=1.0, step=0.1)


def test_corrupt_tensor_escapes_hypercube():
    # doctored increments source state-1 mass out of nothing: the flow
    # leaves [0,1]^K and the integrator must refuse to continue
    inc = np.zeros((2, 2, 2), dtype=np.int64)
    inc[0, 0, 0] = 2
    inc[0, 0, 1] = -2
    bad = ModelSpec(K=2, gamma=np.array([[1.0, 0.0], [0.0, 0.0]]),
                    update=identity_update(2), increments=inc)
    with pytest.raises(IntegrationError):
        integrate(bad, 2.0, [0.9, 0.1], T=5.0, step=1e-2)
