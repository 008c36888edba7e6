# -*- coding: utf-8 -*-
import numpy as np
import pytest

from negf_core.errors import StateError
from negf_core.fock import build_fock_system
from negf_core.states import (
    QuasiFreeDensity,
    initial_product_state,
    kms_residual,
    quasifree_correlator,
    random_gauge_invariant_monomial,
    trace_correlator,
    trace_field_correlator,
    wick_field_correlator,
)


def _unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def test_product_state_is_a_density_matrix(small_spec):
    system = build_fock_system(small_spec)
    state = initial_product_state(small_spec, system)
    assert state.sample_is_vacuum
    assert state.trace_residual() <= 1e-12
    assert np.allclose(state.rho, state.rho.conj().T)
    assert np.linalg.eigvalsh(state.rho).min() >= -1e-12
    # sample 은 비어 있다
    for x in range(small_spec.n_sample):
        assert abs(state.expect(system.ladder.number(x))) <= 1e-14


@pytest.mark.parametrize("order", [1, 2])
def test_quasi_free_correlators_match_the_trace(small_spec, rng, order):
    system = build_fock_system(small_spec)
    varrho = np.diag([0.3, 0.6, 0.0, 0.0]).astype(complex)
    state = initial_product_state(small_spec, system, sample_varrho=varrho[:2, :2])
    assert not state.sample_is_vacuum
    n = small_spec.n_modes
    for _ in range(5):
        vecs = [_unit(rng, n) for _ in range(2 * order)]
        creators, annihilators = vecs[:order], vecs[order:]
        qf = quasifree_correlator(state.varrho, creators, annihilators)
        tr = trace_correlator(state.rho, system.ladder, creators, annihilators)
        assert abs(qf - tr) <= 1e-10


def test_unbalanced_monomials_vanish(small_spec, rng):
    system = build_fock_system(small_spec)
    state = initial_product_state(small_spec, system)
    n = small_spec.n_modes
    f, g, h = (_unit(rng, n) for _ in range(3))
    assert quasifree_correlator(state.varrho, [f, g], [h]) == 0
    assert abs(trace_correlator(state.rho, system.ladder, [f, g], [h])) <= 1e-12


def test_field_wick_expansion(small_spec, rng):
    system = build_fock_system(small_spec)
    state = initial_product_state(small_spec, system, sample_varrho=np.diag([0.5, 0.2]))
    n = small_spec.n_modes
    fields = [_unit(rng, n) for _ in range(4)]
    wick = wick_field_correlator(state.varrho, fields)
    trace = trace_field_correlator(state.rho, system.ladder, fields)
    assert abs(wick - trace) <= 1e-10
    assert wick_field_correlator(state.varrho, fields[:3]) == 0


def test_kms_identity(small_spec, rng):
    system = build_fock_system(small_spec)
    state = initial_product_state(small_spec, system)
    n = small_spec.n_modes
    for j in range(len(small_spec.leads)):
        sl = small_spec.lead_slice(j)
        f = np.zeros(n, dtype=complex)
        f[sl] = 1.0
        for _ in range(5):
            a_op = random_gauge_invariant_monomial(system, rng, order=2)
            a_op /= np.max(np.abs(a_op))
            assert kms_residual(state, system, a_op, f) <= 1e-10


def test_kms_rejects_vectors_spanning_two_leads(small_spec):
    system = build_fock_system(small_spec)
    state = initial_product_state(small_spec, system)
    f = np.zeros(small_spec.n_modes, dtype=complex)
    f[2] = f[3] = 1.0
    with pytest.raises(StateError):
        kms_residual(state, system, np.eye(system.basis.dim), f)


def test_invalid_sample_density(small_spec):
    with pytest.raises(StateError):
        QuasiFreeDensity(np.diag([1.5, 0.0]))
    system = build_fock_system(small_spec)
    with pytest.raises(StateError):
        initial_product_state(small_spec, system, sample_varrho=np.eye(3))
