# -*- coding: utf-8 -*-
import numpy as np
import pytest

from negf_core.errors import GridError, NumericalFailure
from negf_core.greens import TimeGrid, sample_kernels
from negf_core.model import lead_spectral_measure
from negf_core.transport import (
    CurrentTrace,
    conservation_residual,
    decoupled_lead_kernels,
    direct_current,
    direct_current_lesser,
    jmw_current,
    langreth_current,
    langreth_residual,
    mixed_lesser,
    observed_order,
    one_body_current,
    particle_density,
    sample_particle_number,
    site_density,
)


def _jmw(spec, gk, grid, j):
    lead = spec.leads[j]
    return jmw_current(
        gk["lesser"], gk["retarded"], lead_spectral_measure(lead), lead.beta, lead.mu, lead.d, lead.phi, grid, lead=j
    )


def test_lesser_form_matches_direct_current(small_spec, make_setup, grid):
    system, state, dyn = make_setup(small_spec)
    for j in range(2):
        direct = direct_current(state, system, j, grid, dyn)
        lesser = direct_current_lesser(state, system, j, grid, dyn)
        assert direct.max_difference(lesser) <= 1e-10
        # 초기에는 sample 이 비어 있어 전류가 0 에서 시작
        assert abs(direct.values[0]) <= 1e-12


def test_noninteracting_current_matches_one_body(free_spec, make_setup, grid):
    system, state, dyn = make_setup(free_spec)
    for j in range(2):
        direct = direct_current(state, system, j, grid, dyn)
        assert direct.max_difference(one_body_current(free_spec, j, grid)) <= 1e-9


@pytest.mark.parametrize("xi", [0.0, 0.5])
def test_jmw_formula(small_spec, make_setup, grid, xi):
    spec = small_spec.with_xi(xi)
    system, state, dyn = make_setup(spec)
    gk = sample_kernels(state, system, grid, dyn)
    for j in range(2):
        direct = direct_current(state, system, j, grid, dyn)
        assert direct.max_difference(_jmw(spec, gk, grid, j)) <= 5e-3


def test_jmw_is_second_order(small_spec, make_setup):
    errs = []
    for dt in (0.05, 0.025):
        g = TimeGrid(1.5, dt)
        system, state, dyn = make_setup(small_spec, on_grid=g)
        gk = sample_kernels(state, system, g, dyn)
        direct = direct_current(state, system, 0, g, dyn)
        errs.append(direct.max_difference(_jmw(small_spec, gk, g, 0)))
    assert observed_order(*errs) >= 1.9


def test_jmw_rejects_times_beyond_the_grid(small_spec, make_setup, grid):
    system, state, dyn = make_setup(small_spec)
    gk = sample_kernels(state, system, grid, dyn)
    lead = small_spec.leads[0]
    with pytest.raises(GridError):
        jmw_current(gk["lesser"], gk["retarded"], lead_spectral_measure(lead), lead.beta, lead.mu, lead.d, lead.phi, grid, t_max=2.0)
    short = jmw_current(gk["lesser"], gk["retarded"], lead_spectral_measure(lead), lead.beta, lead.mu, lead.d, lead.phi, grid, t_max=1.0)
    assert short.times[-1] == pytest.approx(1.0)


def test_langreth_identity(small_spec, make_setup, grid):
    system, state, dyn = make_setup(small_spec)
    gk = sample_kernels(state, system, grid, dyn)
    for j in range(2):
        lead = small_spec.leads[j]
        mixed = mixed_lesser(state, system, j, grid, dyn)
        g_d = decoupled_lead_kernels(small_spec, j, grid)
        assert langreth_residual(mixed, gk["retarded"], gk["lesser"], g_d, grid, lead.phi, lead.d) <= 5e-3
        rebuilt = langreth_current(gk["retarded"], gk["lesser"], g_d, lead.phi, lead.d, grid, lead=j)
        assert rebuilt.max_difference(direct_current(state, system, j, grid, dyn)) <= 1e-2


def test_langreth_is_second_order(small_spec, make_setup):
    lead = small_spec.leads[1]
    errs = []
    for dt in (0.05, 0.025):
        g = TimeGrid(1.5, dt)
        system, state, dyn = make_setup(small_spec, on_grid=g)
        gk = sample_kernels(state, system, g, dyn)
        mixed = mixed_lesser(state, system, 1, g, dyn)
        g_d = decoupled_lead_kernels(small_spec, 1, g)
        # n_sub = 16: 두 격자 모두 t = 0, 0.1, …, 1.5 에서 비교
        errs.append(langreth_residual(mixed, gk["retarded"], gk["lesser"], g_d, g, lead.phi, lead.d, n_sub=16))
    assert observed_order(*errs) >= 1.9


def test_particle_conservation(small_spec, make_setup, grid):
    system, state, dyn = make_setup(small_spec)
    traces = [direct_current(state, system, j, grid, dyn) for j in range(2)]
    n_s = sample_particle_number(system, dyn)
    assert conservation_residual(traces, n_s, grid) <= 1e-6 + 5 * grid.dt**2
    with pytest.raises(GridError):
        conservation_residual([], n_s, grid)


def test_density_two_routes(small_spec, make_setup, grid):
    system, state, dyn = make_setup(small_spec)
    gk = sample_kernels(state, system, grid, dyn)
    for x in range(2):
        via_g = particle_density(gk["lesser"], x)
        assert np.max(np.abs(via_g - site_density(system, x, dyn))) <= 1e-10
    assert particle_density(gk["lesser"], 0, t_index=0) == pytest.approx(0.0, abs=1e-14)


def test_trace_frame_and_validation(grid):
    t = grid.points
    tr = CurrentTrace(1, t, np.sin(t) + 0j, "direct")
    frame = tr.to_frame()
    assert list(frame.columns) == ["t", "I", "method", "lead"]
    assert frame["t"].is_monotonic_increasing
    assert (frame["lead"] == 1).all()
    with pytest.raises(NumericalFailure, match="imaginary"):
        CurrentTrace(0, t, np.sin(t) + 1e-6j, "direct")
    with pytest.raises(ValueError):
        CurrentTrace(0, t, np.sin(t), "guess")


def test_observed_order():
    assert observed_order(4e-4, 1e-4) == pytest.approx(2.0)
    assert np.isnan(observed_order(0.0, 1e-4))
