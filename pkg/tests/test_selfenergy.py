# -*- coding: utf-8 -*-
from types import SimpleNamespace

import numpy as np
import pytest

from negf_core.errors import NumericalFailure, StateError
from negf_core.fock import build_fock_system
from negf_core.greens import Dynamics, TimeGrid, gf_free, sample_kernels
from negf_core.model import build_one_body, reference_instance
from negf_core.selfenergy import (
    SelfEnergyKernel,
    adjoint_pairing_residual,
    dissipativity_checks,
    dyson_residuals,
    effective_propagator,
    expansion_remainder,
    hermiticity_residual,
    irreducible_correction,
    irreducible_from_reducible,
    keldysh_decoupling_residual,
    keldysh_identity_residual,
    lemma_weights,
    lesser_sigma,
    lesser_source_kernel,
    lesser_source_zeroth_spectral,
    positivity_form,
    random_families,
    reducible_identity_residual,
    reducible_kernel,
    xi_grading,
)
from negf_core.states import initial_product_state
from negf_core.transport import observed_order
from negf_core.volterra import zero_kernel


def _build(spec, grid: TimeGrid, sample_varrho=None):
    system = build_fock_system(spec)
    state = initial_product_state(spec, system, sample_varrho)
    dyn = Dynamics(state, system.spectrum_K, grid)
    gk = sample_kernels(state, system, grid, dyn)
    g0 = gf_free(build_one_body(spec).h, grid, 0.0, "retarded", spec.sample_basis())
    red = reducible_kernel(state, system.spectrum_K, system, grid, dynamics=dyn)
    irr = irreducible_from_reducible(red, g0)
    return SimpleNamespace(spec=spec, system=system, state=state, dyn=dyn, gk=gk, g0=g0, red=red, irr=irr, grid=grid)


@pytest.fixture(scope="module")
def interacting():
    return _build(reference_instance(xi=0.5, lead_sites=1), TimeGrid(1.5, 0.025))


@pytest.fixture(scope="module")
def interacting_coarse():
    return _build(reference_instance(xi=0.5, lead_sites=1), TimeGrid(1.5, 0.05))


# -----------------------------
# 구조
# -----------------------------
def test_hartree_fock_potential(interacting):
    v = interacting.red.instantaneous
    assert v.shape == (interacting.grid.n_points, 2, 2)
    assert hermiticity_residual(v) <= 1e-11
    # 빈 sample 에서 V_x 의 기대값은 0
    assert np.allclose(v[0], 0.0, atol=1e-14)
    assert np.max(np.abs(v[-1])) > 1e-6


def test_adjoint_pairing(interacting):
    s = interacting
    assert adjoint_pairing_residual(s.state, s.system.spectrum_K, s.system, s.grid, s.dyn) <= 1e-10
    adv = s.red.adjoint()
    assert adv.kind == "reducible_A"
    assert not adv.memory.causal


def test_noninteracting_kernel_vanishes(free_spec, make_setup, grid):
    system, state, dyn = make_setup(free_spec)
    red = reducible_kernel(state, system.spectrum_K, system, grid, dynamics=dyn)
    assert red.memory.max_norm() == 0.0
    assert np.max(np.abs(red.instantaneous)) == 0.0


def test_kernel_kind_is_checked(grid):
    with pytest.raises(ValueError):
        SelfEnergyKernel("sideways", grid, np.zeros((grid.n_points, grid.n_points, 1, 1)))
    lesser = SelfEnergyKernel("lesser_source", grid, np.zeros((grid.n_points, grid.n_points, 1, 1)))
    with pytest.raises(ValueError):
        lesser.volterra()


# -----------------------------
# 가약 / 기약 항등식
# -----------------------------
@pytest.mark.parametrize("energy", [0.0, 0.5])
def test_reducible_identity(interacting, energy):
    s = interacting
    res = reducible_identity_residual(s.gk["retarded"].at_energy(energy), s.g0.at_energy(energy), s.red.at_energy(energy))
    assert res <= 5e-3


def test_reducible_identity_is_second_order(interacting, interacting_coarse):
    errs = [
        reducible_identity_residual(s.gk["retarded"], s.g0, s.red) for s in (interacting_coarse, interacting)
    ]
    assert errs[0] / errs[1] >= 3.5


@pytest.mark.parametrize("energy", [0.0, 0.5])
def test_dyson_both_orders(interacting, energy):
    s = interacting
    left, right = dyson_residuals(s.gk["retarded"].at_energy(energy), s.g0.at_energy(energy), s.irr.at_energy(energy))
    assert left <= 5e-3
    assert right <= 5e-3


def test_irreducible_advanced_branch_is_the_adjoint(interacting):
    s = interacting
    adv = irreducible_from_reducible(s.red.adjoint(), s.g0.adjoint())
    assert adv.kind == "irreducible_A"
    assert np.allclose(adv.memory.values, s.irr.adjoint().memory.values)


def test_irreducible_correction_is_second_order_in_xi(coarse_grid):
    corrections = []
    for xi in (0.05, 0.1):
        s = _build(reference_instance(xi=xi, lead_sites=1), coarse_grid)
        corrections.append(irreducible_correction(s.red, s.g0))
    assert observed_order(corrections[1], corrections[0]) >= 1.9


def test_vanishing_interaction_matrix_gives_free_kernels(coarse_grid):
    spec = reference_instance(xi=0.5, lead_sites=1)
    spec = type(spec)(spec.sample_sites, spec.h_S, spec.leads, np.zeros((2, 2)), 0.5)
    s = _build(spec, coarse_grid)
    assert s.red.memory.max_norm() == 0.0
    assert reducible_identity_residual(s.gk["retarded"], s.g0, s.red) <= 1e-9


def test_energy_mismatch_is_rejected(interacting):
    from negf_core.errors import GridError

    s = interacting
    with pytest.raises(GridError, match="different energies"):
        reducible_identity_residual(s.gk["retarded"].at_energy(0.5), s.g0, s.red)


# -----------------------------
# Keldysh
# -----------------------------
def test_lesser_source_and_keldysh_identities(interacting):
    s = interacting
    src = lesser_source_kernel(s.state, s.system.spectrum_K, s.system, s.grid, s.dyn)
    closed = lesser_source_zeroth_spectral(s.spec, s.grid)
    assert np.max(np.abs(src.zeroth.memory - closed)) <= 1e-10
    assert keldysh_decoupling_residual(s.gk["lesser"], s.g0, src.total) <= 1e-2

    sig_less = lesser_sigma(src.total, s.irr, s.irr.adjoint(), s.g0, s.g0.adjoint(), s.grid)
    assert sig_less.kind == "lesser_sigma"
    assert keldysh_identity_residual(s.gk["lesser"], s.gk["retarded"], sig_less) <= 1e-2


def test_source_reduces_to_zeroth_order_without_interaction(grid):
    spec = reference_instance(xi=0.0, lead_sites=1)
    system = build_fock_system(spec)
    state = initial_product_state(spec, system)
    src = lesser_source_kernel(state, system.spectrum_K, system, grid)
    assert np.max(np.abs(src.total.memory - src.zeroth.memory)) <= 1e-10

    # w = 0 이면 ξ 와 무관하게 S^< = S^<(0)
    spec_w0 = reference_instance(xi=0.5, lead_sites=1)
    spec_w0 = type(spec_w0)(spec_w0.sample_sites, spec_w0.h_S, spec_w0.leads, np.zeros((2, 2)), 0.5)
    system = build_fock_system(spec_w0)
    state = initial_product_state(spec_w0, system)
    src = lesser_source_kernel(state, system.spectrum_K, system, grid)
    assert np.max(np.abs(src.total.memory - src.zeroth.memory)) <= 1e-10


def test_first_order_term_is_the_xi_derivative(coarse_grid):
    xi = 0.02
    sources = []
    for sign in (1.0, -1.0):
        spec = reference_instance(xi=sign * xi, lead_sites=1)
        system = build_fock_system(spec)
        state = initial_product_state(spec, system)
        sources.append(lesser_source_kernel(state, system.spectrum_K, system, coarse_grid))
    derivative = (sources[0].total.memory - sources[1].total.memory) / (2 * xi)
    s1 = sources[0].first.memory
    assert np.max(np.abs(derivative - s1)) <= 1e-2 * max(np.max(np.abs(s1)), 1e-12)


def test_expansion_remainder_is_stable_across_xi(coarse_grid):
    remainders = []
    for xi in (0.05, 0.1, 0.2):
        spec = reference_instance(xi=xi, lead_sites=1)
        system = build_fock_system(spec)
        state = initial_product_state(spec, system)
        src = lesser_source_kernel(state, system.spectrum_K, system, coarse_grid)
        remainders.append(expansion_remainder(src, xi))
    assert min(remainders) > 0.0
    assert (max(remainders) - min(remainders)) / max(remainders) <= 0.2


def test_coupling_grading_at_fixed_evolution(interacting):
    s = interacting
    grades = {g.part: g for g in xi_grading(s.state, s.system.spectrum_K, s.system, s.grid, s.dyn)}
    assert set(grades) == {"v_hf", "memory", "lesser_source"}
    for g in grades.values():
        assert g.fit <= 1e-6
        assert g.parity <= 1e-6


def test_coupling_grading_skips_the_source_for_occupied_samples(small_spec, make_setup, coarse_grid):
    system, state, dyn = make_setup(small_spec, sample_varrho=np.diag([0.5, 0.0]), on_grid=coarse_grid)
    grades = xi_grading(state, system.spectrum_K, system, coarse_grid, dyn)
    assert [g.part for g in grades] == ["v_hf", "memory"]
    assert max(g.worst for g in grades) <= 1e-6
    with pytest.raises(ValueError, match="coupling samples"):
        xi_grading(state, system.spectrum_K, system, coarse_grid, dyn, n_samples=4)


def test_lesser_source_needs_vacuum_sample(small_spec, grid):
    system = build_fock_system(small_spec)
    state = initial_product_state(small_spec, system, sample_varrho=np.diag([0.5, 0.0]))
    with pytest.raises(StateError):
        lesser_source_kernel(state, system.spectrum_K, system, grid)


# -----------------------------
# 양정치성 / 소산성
# -----------------------------
def test_lemma_form_for_constant_families():
    g = TimeGrid(2.0, 0.1)
    a = np.array([[1.0, 0.5j], [0.0, 2.0], [1.0, -1.0]])
    families = np.broadcast_to(a, (g.n_points,) + a.shape)
    expected = g.t_max**2 / 2 * np.linalg.eigvalsh(a.conj().T @ a).min()
    assert positivity_form(families, g, eta=0.0) == pytest.approx(expected, rel=1e-12)
    c = lemma_weights(g, 0.5)
    assert np.allclose(np.triu(c, 1), 0.0)


@pytest.mark.parametrize("eta", [0.0, 0.5, 2.0])
def test_positivity_for_random_families(rng, eta):
    g = TimeGrid(2.0, 0.05)
    for _ in range(20):
        assert positivity_form(random_families(g, rng), g, eta) >= -1e-8


def test_dissipativity_checks_pass(interacting, rng):
    s = interacting
    checks = dissipativity_checks(s.red, s.irr, s.grid, etas=(0.0, 0.5), n_samples=10, rng=rng)
    names = [c.name for c in checks]
    assert "positivity-lemma[eta=0.5]" in names
    assert "irreducible-dissipation[eta=0]" in names
    failed = [c for c in checks if not c.passed]
    assert not failed, failed


# -----------------------------
# 유효 전파자
# -----------------------------
def test_free_propagator_is_unitary(free_spec, make_setup, grid, rng):
    system, state, dyn = make_setup(free_spec)
    g0 = gf_free(build_one_body(free_spec).h, grid, 0.0, "retarded", free_spec.sample_basis())
    red = reducible_kernel(state, system.spectrum_K, system, grid, dynamics=dyn)
    irr = irreducible_from_reducible(red, g0)
    phi0 = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi0 /= np.linalg.norm(phi0)
    res = effective_propagator(irr, build_one_body(free_spec).h, 0.0, grid, phi0)
    assert np.allclose(res.norms, 1.0, atol=1e-12)
    assert res.contractive
    assert res.agreement <= 5e-3


def test_interacting_propagator_is_contractive(interacting, rng):
    s = interacting
    phi0 = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi0 /= np.linalg.norm(phi0)
    for z in (0.0, 0.3 - 0.5j):
        res = effective_propagator(s.irr, build_one_body(s.spec).h, z, s.grid, phi0)
        assert res.contractive
        assert res.agreement <= 5e-3


def test_propagator_rejects_upper_half_plane(interacting):
    s = interacting
    with pytest.raises(ValueError, match="Im z"):
        effective_propagator(s.irr, build_one_body(s.spec).h, 0.1j, s.grid, np.ones(4))


def test_singular_propagator_step_names_the_operation():
    g = TimeGrid(0.5, 0.125)
    sigma = SelfEnergyKernel("irreducible_R", g, zero_kernel(g, 2), np.zeros((g.n_points, 2, 2), dtype=complex))
    # I + (i dt/2) h = 0
    h = (2j / g.dt) * np.eye(2)
    with pytest.raises(NumericalFailure) as exc:
        effective_propagator(sigma, h, 0.0, g, np.ones(2))
    assert exc.value.operation == "effective_propagator"
