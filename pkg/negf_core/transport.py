# -*- coding: utf-8 -*-
"""
transport.py
- 전류 I_j(t): 직접 기대값 ⟨τ^t(J_j)⟩, lesser 형태 2d_j Re⟨φ_j|G^<(t,t)|ψ_j⟩, JMW 공식
- Langreth 항등식 잔차, 입자밀도, 전역 보존 잔차, 관측 수렴차수
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import GridError, NumericalFailure
from .fock import FockSystem, current_operator, sample_number_operator, site_number_operator
from .greens import (
    Dynamics,
    GFKernel,
    TimeGrid,
    one_body_propagators,
    gf_decoupled,
    gf_lesser_greater,
    prefix_weights,
    require_same_grid,
)
from .model import ModelSpec, SpectralMeasure, build_one_body, coupled_pairs, fermi_factor, fermi_reservoir_density
from .states import InitialState

log = logging.getLogger(__name__)

METHODS = ("direct", "direct-lesser", "jmw", "one-body", "langreth-reconstructed")
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class CurrentTrace:
    lead: int
    times: np.ndarray
    values: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown current method {self.method!r}")
        vals = np.asarray(self.values)
        if np.iscomplexobj(vals):
            if np.max(np.abs(vals.imag), initial=0.0) > IMAG_TOL:
                raise NumericalFailure("current", f"{self.method} current has imaginary residue {np.max(np.abs(vals.imag)):.2e}")
            object.__setattr__(self, "values", vals.real.copy())

    def to_frame(self) -> pd.DataFrame:
        """CSV 스키마: t, I, method, lead (t 오름차순)."""
        return pd.DataFrame({"t": self.times, "I": self.values, "method": self.method, "lead": self.lead})

    def max_difference(self, other: "CurrentTrace") -> float:
        if self.values.shape != other.values.shape:
            raise GridError("[transport] traces live on different grids")
        return float(np.max(np.abs(self.values - other.values), initial=0.0))


# -----------------------------
# Direct routes
# -----------------------------
def direct_current(
    state: InitialState,
    system: FockSystem,
    j: int,
    grid: TimeGrid,
    dynamics: Optional[Dynamics] = None,
) -> CurrentTrace:
    """⟨τ_K^t(J_j)⟩,  J_j = i d_j (a*(ψ_j)a(φ_j) − a*(φ_j)a(ψ_j))."""
    dyn = dynamics or Dynamics(state, system.spectrum_K, grid)
    values = dyn.expectation(current_operator(system.spec, system.ladder, j))
    return CurrentTrace(j, grid.points, values, "direct")


def direct_current_lesser(
    state: InitialState,
    system: FockSystem,
    j: int,
    grid: TimeGrid,
    dynamics: Optional[Dynamics] = None,
) -> CurrentTrace:
    """I_j(t) = 2 d_j Re⟨φ_j|G^<(t,t)|ψ_j⟩ (혼합 lesser 의 대각)."""
    spec = system.spec
    phi, psi = coupled_pairs(spec, j)
    less, _ = gf_lesser_greater(state, system.spectrum_K, system.ladder, phi, psi, grid, dynamics=dynamics)
    diag = np.einsum("kk->k", less.base[:, :, 0, 0])
    return CurrentTrace(j, grid.points, 2.0 * spec.leads[j].d * diag.real, "direct-lesser")


def one_body_current(spec: ModelSpec, j: int, grid: TimeGrid, varrho: Optional[np.ndarray] = None) -> CurrentTrace:
    """ξ = 0 오라클: 2 d_j Re(i⟨φ_j|e^{−ith}ϱe^{ith}|ψ_j⟩)."""
    h = build_one_body(spec).h
    rho = fermi_reservoir_density(spec) if varrho is None else np.asarray(varrho, dtype=complex)
    phi, psi = coupled_pairs(spec, j)
    props = one_body_propagators(h, grid)
    left = np.einsum("i,tij->tj", phi.conj(), props)
    # e^{ith}ψ = props[t]† ψ
    right = np.einsum("tji,j->ti", np.conj(props), psi)
    g = 1j * np.einsum("tj,jk,tk->t", left, rho, right)
    return CurrentTrace(j, grid.points, 2.0 * spec.leads[j].d * g.real, "one-body")


# -----------------------------
# JMW
# -----------------------------
def jmw_current(
    G_less: GFKernel,
    G_R: GFKernel,
    measure: SpectralMeasure,
    beta: float,
    mu: float,
    d: float,
    phi: np.ndarray,
    grid: TimeGrid,
    lead: int = 0,
    t_max: Optional[float] = None,
) -> CurrentTrace:
    """
    I_j(t) = −2d²∫_0^t ds Σ_k w_k Im{e^{i(t−s)E_k}⟨φ|G^<(t,s) + G^R(t,s) f_j(E_k)|φ⟩}.
    E 적분은 ν_j 점 합, s 적분은 trapezoid. G^R(t,t) 는 closure 값(−i⟨φ|φ⟩).
    """
    require_same_grid(G_less.grid, G_R.grid, grid)
    if t_max is not None and t_max > grid.t_max + 1e-12:
        raise GridError(f"[transport] t = {t_max} beyond grid horizon {grid.t_max}")
    phi = np.asarray(phi, dtype=complex)
    g_less = np.einsum("i,klij,j->kl", phi.conj(), G_less.base, phi)
    g_ret = np.einsum("i,klij,j->kl", phi.conj(), G_R.at_energy(0.0).to_volterra().values, phi)
    t = grid.points
    occ = fermi_factor(measure.energies, beta, mu)
    # phase[k, m, e] = e^{i(t_k − t_m)E_e}
    phase = np.exp(1j * (t[:, None, None] - t[None, :, None]) * measure.energies[None, None, :])
    integrand = np.einsum("kme,e->km", phase, measure.weights) * g_less + np.einsum(
        "kme,e->km", phase, measure.weights * occ
    ) * g_ret
    values = -2.0 * d**2 * np.sum(prefix_weights(grid) * integrand.imag, axis=1)
    n = grid.n_points if t_max is None else grid.index_of(t_max) + 1
    return CurrentTrace(lead, t[:n], values[:n], "jmw")


# -----------------------------
# Langreth
# -----------------------------
def mixed_lesser(state: InitialState, system: FockSystem, j: int, grid: TimeGrid, dynamics: Optional[Dynamics] = None) -> np.ndarray:
    """⟨φ_j|G^<(t,t')|ψ_j⟩ 를 (n_t, n_t) 로."""
    phi, psi = coupled_pairs(system.spec, j)
    less, _ = gf_lesser_greater(state, system.spectrum_K, system.ladder, phi, psi, grid, dynamics=dynamics)
    return less.base[:, :, 0, 0]


def subgrid_indices(grid: TimeGrid, n_sub: int = 20) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, grid.n_points - 1, min(n_sub, grid.n_points))).astype(int))


def langreth_rhs(
    G_R: GFKernel,
    G_less: GFKernel,
    G_D: dict,
    phi: np.ndarray,
    d: float,
    grid: TimeGrid,
) -> np.ndarray:
    """
    d ∫ ds (⟨φ|G^R(t,s)|φ⟩⟨ψ|G_D^<(s,t')|ψ⟩ + ⟨φ|G^<(t,s)|φ⟩⟨ψ|G_D^A(s,t')|ψ⟩).
    첫 항은 [0,t], 둘째 항은 [0,t'] 에서만 0 이 아니다 (θ 인자).
    """
    phi = np.asarray(phi, dtype=complex)
    g_ret = np.einsum("i,klij,j->kl", phi.conj(), G_R.at_energy(0.0).to_volterra().values, phi)
    g_less = np.einsum("i,klij,j->kl", phi.conj(), G_less.base, phi)
    gd_less = G_D["lesser"].base[:, :, 0, 0]
    gd_adv = G_D["advanced"].at_energy(0.0).to_volterra().values[:, :, 0, 0]
    wmat = prefix_weights(grid)
    first = (wmat * g_ret) @ gd_less
    second = g_less @ (wmat.T * gd_adv)
    return d * (first + second)


def langreth_residual(
    G_less_mixed: np.ndarray,
    G_R: GFKernel,
    G_less: GFKernel,
    G_D: dict,
    grid: TimeGrid,
    phi: np.ndarray,
    d: float,
    n_sub: int = 20,
) -> float:
    """max over an n_sub × n_sub (t,t') 부분격자 |⟨φ|G^<|ψ⟩ − RHS|."""
    require_same_grid(G_R.grid, G_less.grid, grid)
    rhs = langreth_rhs(G_R, G_less, G_D, phi, d, grid)
    idx = subgrid_indices(grid, n_sub)
    diff = np.asarray(G_less_mixed)[np.ix_(idx, idx)] - rhs[np.ix_(idx, idx)]
    return float(np.max(np.abs(diff), initial=0.0))


def decoupled_lead_kernels(spec: ModelSpec, j: int, grid: TimeGrid) -> dict:
    """⟨ψ_j|G_D^{<,>,R,A}|ψ_j⟩ (lead 블록, ϱ_R)."""
    ob = build_one_body(spec)
    _, psi = coupled_pairs(spec, j)
    return gf_decoupled(ob.h_D, fermi_reservoir_density(spec), grid, vectors=psi)


def langreth_current(G_R: GFKernel, G_less: GFKernel, G_D: dict, phi: np.ndarray, d: float, grid: TimeGrid, lead: int = 0) -> CurrentTrace:
    """Langreth 로 재구성한 ⟨φ|G^<(t,t)|ψ⟩ 에서 얻은 전류."""
    rhs = langreth_rhs(G_R, G_less, G_D, phi, d, grid)
    return CurrentTrace(lead, grid.points, 2.0 * d * np.einsum("kk->k", rhs).real, "langreth-reconstructed")


# -----------------------------
# Density / conservation
# -----------------------------
def particle_density(G_less: GFKernel, x: int, t_index: Optional[int] = None):
    """ρ(x,t) = Im⟨x|G^<(t,t)|x⟩. t_index 가 없으면 격자 전체."""
    diag = np.einsum("kk->k", G_less.base[:, :, x, x]).imag
    return float(diag[t_index]) if t_index is not None else diag


def site_density(system: FockSystem, x: int, dynamics: Dynamics) -> np.ndarray:
    """⟨τ_K^t(N_x)⟩ (ED 경로)."""
    return dynamics.expectation(site_number_operator(system.ladder, x)).real


def sample_particle_number(system: FockSystem, dynamics: Dynamics) -> np.ndarray:
    return dynamics.expectation(sample_number_operator(system.spec, system.ladder)).real


def conservation_residual(traces: Sequence[CurrentTrace], n_sample: np.ndarray, grid: TimeGrid) -> float:
    """max_t |Σ_j I_j(t) − dN_S/dt| (중앙차분, 끝점 2차 one-sided)."""
    if not traces:
        raise GridError("[transport] conservation check needs at least one trace")
    total = np.sum([tr.values for tr in traces], axis=0)
    dn = np.gradient(np.asarray(n_sample, dtype=float), grid.dt, edge_order=2)
    return float(np.max(np.abs(total - dn)))


def observed_order(err_coarse: float, err_fine: float) -> float:
    """log2(err(Δt) / err(Δt/2)). 둘 중 하나가 0 이면 nan."""
    if err_coarse <= 0 or err_fine <= 0:
        return float("nan")
    return float(np.log2(err_coarse / err_fine))
