import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shufflesim.errors import InvalidModelError
from shufflesim.model import (derive_increment_tensor, identity_update,
                              make_model, preset_update, sis_model,
                              update_from_pairs, validate_model, voter_model)


def test_sis_tensor_direct_counting():
    spec = sis_model()
    expected = np.zeros((2, 2, 2), dtype=np.int64)
    expected[0, 1, 0] = 1   # infected-healthy contact adds one infected
    expected[0, 1, 1] = -1  # and removes one healthy
    assert np.array_equal(spec.increments, expected)


def test_voter_tensor_direct_counting():
    spec = voter_model(K=3)
    inc = spec.increments
    for m in range(3):
        for l in range(3):
            if m == l:
                assert not inc[m, l].any()
            else:
                assert inc[m, l, m] == 1
                assert inc[m, l, l] == -1
                others = [k for k in range(3) if k not in (m, l)]
                assert not inc[m, l][others].any()


def test_identity_rule_all_zero():
    inc = derive_increment_tensor(identity_update(3), 3)
    assert not inc.any()


def test_update_outside_states_rejected():
    table = identity_update(2)
    table[0, 0] = (0, 2)
    with pytest.raises(InvalidModelError):
        derive_increment_tensor(table, 2)


def test_update_from_pairs_one_based():
    table = update_from_pairs(2, [[1, 2, 1, 1]])
    assert np.array_equal(table, preset_update("sis", 2))
    with pytest.raises(InvalidModelError):
        update_from_pairs(2, [[1, 2, 1, 1], [1, 2, 2, 2]])
    with pytest.raises(InvalidModelError):
        update_from_pairs(2, [[1, 3, 1, 1]])


def test_validate_passes_for_presets():
    assert validate_model(sis_model()).ok
    assert validate_model(voter_model(K=4)).ok


def test_validate_names_edited_tensor():
    spec = sis_model()
    inc = spec.increments.copy()
    inc[0, 0, 0] = 1  # two same-state nodes cannot create a third
    bad = type(spec)(K=2, gamma=spec.gamma.copy(), update=spec.update.copy(),
                     increments=inc)
    report = validate_model(bad)
    assert not report.ok
    assert any("c_kk(k)" in v for v in report.violations)
    assert any("[1][1][1]" in v for v in report.violations)


def test_validate_names_negative_gamma():
    spec = sis_model()
    gamma = spec.gamma.copy()
    gamma[1, 0] = -0.5
    bad = type(spec)(K=2, gamma=gamma, update=spec.update.copy(),
                     increments=spec.increments.copy())
    report = validate_model(bad)
    assert not report.ok
    assert any("nonnegativity" in v and "[2][1]" in v for v in report.violations)


def test_make_model_requires_rule_or_table():
    with pytest.raises(InvalidModelError):
        make_model(2, np.ones((2, 2)))
    with pytest.raises(InvalidModelError):
        make_model(2, np.ones((2, 2)), rule="sis", update=identity_update(2))
    with pytest.raises(InvalidModelError):
        make_model(2, np.ones((2, 2)), rule="nope")


@st.composite
def update_tables(draw):
    K = draw(st.integers(min_value=1, max_value=4))
    flat = draw(st.lists(st.integers(min_value=0, max_value=K - 1),
                         min_size=2 * K * K, max_size=2 * K * K))
    return K, np.array(flat, dtype=np.int64).reshape(K, K, 2)


@settings(max_examples=200, deadline=None)
@given(update_tables())
def test_tensor_invariants_for_any_rule(data):
    K, table = data
    inc = derive_increment_tensor(table, K)
    assert inc.min() >= -2 and inc.max() <= 2
    assert not inc.sum(axis=2).any()  # every interaction conserves nodes
    assert all(inc[k, k, k] <= 0 for k in range(K))


@settings(max_examples=50, deadline=None)
@given(update_tables())
def test_derivation_deterministic_and_idempotent(data):
    K, table = data
    first = derive_increment_tensor(table, K)
    again = derive_increment_tensor(table, K)
    assert np.array_equal(first, again)
    spec = make_model(K, np.ones((K, K)), update=table)
    assert np.array_equal(spec.increments, first)
    assert validate_model(spec).ok
