# -*- coding: utf-8 -*-
"""
selfenergy.py
- b(δ_x) = iξ[W, a_x] 를 Fock 행렬로 한 번 만들고, 모든 self-energy 는 그 Heisenberg 발전의 기대값
- Hartree-Fock 전위 v_HF, 메모리 커널 𝔖^±, 가약 Σ̃^±, 기약 Σ^± (Volterra 역원)
- lesser source S^< 와 ξ-전개 S^{<(0)}, S^{<(1)}, lesser self-energy Σ^<
- 소산성(dissipativity) / 양정치성 검사, 유효 전파자

부호 규약 (retarded = causal = "−" 가지)
- v_HF(s)_{yx} = ξ⟨τ^s({a_y, [W, a_x*]})⟩
- 𝔖^R(s,s')_{yx} = −iθ(s−s')⟨{τ^s(b_y), τ^{s'}(b_x*)}⟩ = +iξ²θ(s−s')⟨{τ^s([W,a_y]), τ^{s'}([W,a_x*])}⟩
- G^R_SS = G_0 + G_0 v G_0 + G_0∘𝔖∘G_0,  G_0 는 전체 h 의 자유 retarded 를 sample 블록으로 제한한 것
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import linalg

from .errors import GridError, NumericalFailure, StateError
from .fock import FockSystem, Spectrum, v_operator
from .greens import (
    Dynamics,
    GFKernel,
    TimeGrid,
    VectorFamily,
    one_body_propagators,
    gf_free,
    prefix_weights,
    require_same_grid,
)
from .model import ModelSpec, OneBody, fermi_factor, fermi_reservoir_density, lead_spectral_measure
from .states import InitialState
from .volterra import (
    VolterraKernel,
    anticausal_product,
    causal_product,
    instantaneous_left,
    instantaneous_right,
    kernel_compose,
    kernel_invert,
    kernel_solve,
)

log = logging.getLogger(__name__)

KINDS = ("reducible_R", "reducible_A", "irreducible_R", "irreducible_A", "lesser_source", "lesser_sigma")
POSITIVITY_TOL = 1e-8


# -----------------------------
# Domain type
# -----------------------------
@dataclass(frozen=True, eq=False)
class SelfEnergyKernel:
    """
    memory: R/A 종류는 E = 0 의 VolterraKernel, lesser 종류는 (n_t, n_t, d, d) 배열.
    instantaneous: v_HF 부분 (n_t, d, d). lesser 종류는 None.
    """

    kind: str
    grid: TimeGrid
    memory: Union[VolterraKernel, np.ndarray]
    instantaneous: Optional[np.ndarray] = None
    energy: complex = 0.0
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown self-energy kind {self.kind!r}")

    @property
    def is_lesser(self) -> bool:
        return self.kind.startswith("lesser")

    @property
    def d(self) -> int:
        return self.memory.d if isinstance(self.memory, VolterraKernel) else self.memory.shape[2]

    def volterra(self, z: Optional[complex] = None) -> VolterraKernel:
        """메모리 부분을 z (기본: 자기 energy) 위상으로."""
        if self.is_lesser:
            raise ValueError("lesser kernels are not Volterra kernels")
        z = self.energy if z is None else z
        return self.memory.with_phase(z) if z != 0 else self.memory

    def at_energy(self, energy: complex) -> "SelfEnergyKernel":
        return replace(self, energy=energy)

    def adjoint(self) -> "SelfEnergyKernel":
        """Σ^R ↔ Σ^A. v_HF 는 에르미트라 그대로."""
        swap = {"reducible_R": "reducible_A", "reducible_A": "reducible_R", "irreducible_R": "irreducible_A", "irreducible_A": "irreducible_R"}
        if self.kind not in swap:
            raise ValueError(f"{self.kind} has no adjoint partner")
        inst = None if self.instantaneous is None else np.conj(np.transpose(self.instantaneous, (0, 2, 1)))
        return SelfEnergyKernel(swap[self.kind], self.grid, self.memory.adjoint(), inst, np.conj(self.energy), self.labels)

    def lead_leakage(self, n_sample: int) -> float:
        """lead 인덱스를 가진 원소의 최대 크기 (sample 지지 검사, 0 이어야 함)."""
        vals = self.memory.values if isinstance(self.memory, VolterraKernel) else self.memory
        if vals.shape[2] <= n_sample:
            return 0.0
        mask = np.ones(vals.shape[2:], dtype=bool)
        mask[:n_sample, :n_sample] = False
        return float(np.max(np.abs(vals[:, :, mask]), initial=0.0))


class LesserSource(NamedTuple):
    total: SelfEnergyKernel
    zeroth: SelfEnergyKernel
    first: SelfEnergyKernel


@dataclass(frozen=True)
class FormCheck:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


# -----------------------------
# b-operators / Hartree-Fock
# -----------------------------
def interaction_operators(system: FockSystem, coupling: Optional[float] = None) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """b_x = iξ[W, a_x],  b*_x = (b_x)† = iξ[W, a*_x].  coupling: ξ 대신 쓸 계수 (발전은 그대로)."""
    W = system.hamiltonians.W
    xi = system.spec.xi if coupling is None else coupling
    bs, bds = [], []
    for a in system.sample_annihilators():
        a = a.toarray()
        b = 1j * xi * (W @ a - a @ W)
        bs.append(b)
        bds.append(b.conj().T)
    return bs, bds


def _dynamics(state, spectrum, grid, dynamics):
    return dynamics or Dynamics(state, spectrum, grid)


def hartree_fock_potential(
    state: InitialState,
    spectrum: Spectrum,
    system: FockSystem,
    grid: TimeGrid,
    dynamics: Optional[Dynamics] = None,
    coupling: Optional[float] = None,
) -> np.ndarray:
    """v_HF(s)_{yx} = ξ⟨τ^s({a_y, [W, a_x*]})⟩ → (n_t, |S|, |S|)."""
    dyn = _dynamics(state, spectrum, grid, dynamics)
    W = system.hamiltonians.W
    xi = system.spec.xi if coupling is None else coupling
    n_s = system.spec.n_sample
    out = np.zeros((grid.n_points, n_s, n_s), dtype=complex)
    if xi == 0:
        return out
    ann = [a.toarray() for a in system.sample_annihilators()]
    cre = [c.toarray() for c in system.sample_creators()]
    for x in range(n_s):
        comm = W @ cre[x] - cre[x] @ W
        for y in range(n_s):
            op = xi * (ann[y] @ comm + comm @ ann[y])
            out[:, y, x] = dyn.expectation(op)
    return out


def hermiticity_residual(v: np.ndarray) -> float:
    return float(np.max(np.abs(v - np.conj(np.transpose(v, (0, 2, 1)))), initial=0.0))


# -----------------------------
# Reducible kernel
# -----------------------------
def anticommutator_kernel(dyn: Dynamics, bs: Sequence[np.ndarray], bds: Sequence[np.ndarray]) -> np.ndarray:
    """C[k, k', y, x] = ⟨{τ^{t_k}(b_y), τ^{t_k'}(b_x*)}⟩."""
    fam_b = dyn.heisenberg(bs)
    fam_bd = dyn.heisenberg(bds)
    # ⟨τ^s(b_y) τ^{s'}(b_x*)⟩ = Σ p ⟨τ^s(b_y*)α | τ^{s'}(b_x*)α⟩
    forward = dyn.overlap(ket=fam_bd, bra=fam_bd).transpose(1, 0, 3, 2)
    # ⟨τ^{s'}(b_x*) τ^s(b_y)⟩ = Σ p ⟨τ^{s'}(b_x)α | τ^s(b_y)α⟩
    backward = dyn.overlap(ket=fam_b, bra=fam_b)
    return forward + backward


def reducible_kernel(
    state: InitialState,
    spectrum: Spectrum,
    system: FockSystem,
    grid: TimeGrid,
    energy: float = 0.0,
    branch: str = "R",
    dynamics: Optional[Dynamics] = None,
) -> SelfEnergyKernel:
    """Σ̃^{R/A} = v_HF (순간항) + 𝔖^{R/A} (메모리). 메모리 대각은 closure 값."""
    if branch not in ("R", "A"):
        raise ValueError("branch must be 'R' or 'A'")
    dyn = _dynamics(state, spectrum, grid, dynamics)
    v = hartree_fock_potential(state, spectrum, system, grid, dyn)
    n_s = system.spec.n_sample
    if system.spec.xi == 0:
        memory = np.zeros((grid.n_points, grid.n_points, n_s, n_s), dtype=complex)
    else:
        bs, bds = interaction_operators(system)
        memory = -1j * anticommutator_kernel(dyn, bs, bds)
    kernel = SelfEnergyKernel(
        "reducible_R",
        grid,
        VolterraKernel(grid, memory, causal=True),
        v,
        energy,
        tuple(system.spec.sample_sites),
    )
    return kernel if branch == "R" else kernel.adjoint()


def adjoint_pairing_residual(
    state: InitialState,
    spectrum: Spectrum,
    system: FockSystem,
    grid: TimeGrid,
    dynamics: Optional[Dynamics] = None,
) -> float:
    """
    ‖𝔖^R(s,s')† − 𝔖^A(s',s)‖ (E = 0). 𝔖^A 는 +iθ(s'−s)⟨{b_y(s), b_x*(s')}⟩ 로 따로 채운다.
    """
    if system.spec.xi == 0:
        return 0.0
    dyn = _dynamics(state, spectrum, grid, dynamics)
    bs, bds = interaction_operators(system)
    c = anticommutator_kernel(dyn, bs, bds)
    ret = VolterraKernel(grid, -1j * c, causal=True).values
    adv = VolterraKernel(grid, 1j * c, causal=False).values
    paired = np.conj(np.transpose(ret, (1, 0, 3, 2)))
    return float(np.max(np.abs(paired - adv), initial=0.0))


def _check_energy(*objs) -> complex:
    energies = [o.energy for o in objs]
    if any(abs(e - energies[0]) > 1e-12 for e in energies):
        raise GridError(f"[selfenergy] kernels carry different energies {energies}")
    return energies[0]


def reducible_identity_residual(G: GFKernel, G0: GFKernel, sigma: SelfEnergyKernel) -> float:
    """‖G − G_0 − G_0 v G_0 − G_0∘𝔖∘G_0‖ (trapezoid 합성, 같은 E)."""
    require_same_grid(G.grid, G0.grid, sigma.grid)
    _check_energy(G, G0, sigma)
    g = G.to_volterra()
    g0 = G0.to_volterra()
    mem = sigma.volterra()
    rhs = g0 + kernel_compose(g0, instantaneous_left(sigma.instantaneous, g0)) + kernel_compose(kernel_compose(g0, mem), g0)
    return (g - rhs).max_norm()


# -----------------------------
# Irreducible kernel
# -----------------------------
def irreducible_from_reducible(sigma: SelfEnergyKernel, G0: GFKernel) -> SelfEnergyKernel:
    """
    Σ = Σ̃(I + G_0Σ̃)^{-1}.
    M = G_0Σ̃ 의 커널 G_0(s,s')v(s') + G_0∘𝔖 를 B = −M 로 두고 (I − B)^{-1} = I + R.
    Σ = v (순간항) + [𝔖 + vR + 𝔖∘R] (메모리).  계산은 E = 0 에서, 결과에 E 를 붙인다.
    """
    if sigma.kind == "reducible_A":
        return irreducible_from_reducible(sigma.adjoint(), G0.adjoint()).adjoint()
    if sigma.kind != "reducible_R":
        raise ValueError(f"expected a reducible kernel, got {sigma.kind}")
    require_same_grid(sigma.grid, G0.grid)
    energy = _check_energy(sigma, G0)
    g0 = G0.at_energy(0.0).to_volterra()
    mem = sigma.memory
    v = sigma.instantaneous
    m = instantaneous_right(g0, v) + kernel_compose(g0, mem)
    r = kernel_invert(m.scaled(-1.0))
    irr_mem = mem + instantaneous_left(v, r) + kernel_compose(mem, r)
    log.debug("irreducible kernel: |R| = %.3e", r.max_norm())
    return SelfEnergyKernel("irreducible_R", sigma.grid, irr_mem, v, energy, sigma.labels)


def irreducible_correction(sigma: SelfEnergyKernel, G0: GFKernel) -> float:
    """‖Σ − Σ̃‖ (메모리 부분만, 순간항 v_HF 는 같다). ξ 에 대해 2차."""
    irr = irreducible_from_reducible(sigma, G0)
    return (irr.memory - sigma.memory).max_norm()


def dyson_residuals(G: GFKernel, G0: GFKernel, sigma: SelfEnergyKernel) -> Tuple[float, float]:
    """G = G_0 + G_0ΣG 와 G = G_0 + GΣG_0 의 잔차 (두 순서)."""
    require_same_grid(G.grid, G0.grid, sigma.grid)
    _check_energy(G, G0, sigma)
    g = G.to_volterra()
    g0 = G0.to_volterra()
    mem = sigma.volterra()
    v = sigma.instantaneous
    left = g - g0 - kernel_compose(g0, instantaneous_left(v, g)) - kernel_compose(kernel_compose(g0, mem), g)
    right = g - g0 - kernel_compose(g, instantaneous_left(v, g0)) - kernel_compose(kernel_compose(g, mem), g0)
    return left.max_norm(), right.max_norm()


# -----------------------------
# Lesser source S^<
# -----------------------------
def transfer_family(dyn: Dynamics, system: FockSystem, coupling: Optional[float] = None) -> VectorFamily:
    """T_x(s)α = a(e^{ish_D}h_Tδ_x)α + ξ τ_K^s(a_x V_x)α  (K 고유기저)."""
    spec = system.spec
    n_s = spec.n_sample
    ob = system.one_body
    ladder = system.ladder
    exp_d = one_body_propagators(ob.h_D, dyn.grid)
    # u_x(s) = e^{ish_D} h_T δ_x = exp_d[k]† h_T[:, x];  a(u) 는 반선형 → 계수 conj(u)
    u = np.einsum("tji,jx->txi", np.conj(exp_d), ob.h_T[:, :n_s])
    coeffs = np.conj(u)
    a_tilde = np.stack([dyn.tilde(a) for a in ladder.annihilators])
    x_tilde = np.stack(
        [dyn.tilde(ladder.annihilators[x] @ v_operator(spec, ladder, x)) for x in range(n_s)]
    )
    xi = spec.xi if coupling is None else coupling
    phases = dyn.phases

    def build(alpha: np.ndarray) -> np.ndarray:
        one_body = np.einsum("txi,idr->txdr", coeffs, np.matmul(a_tilde, alpha))
        if xi == 0:
            return one_body
        out = one_body
        for k, ph in enumerate(phases):
            a = alpha * ph[:, None]
            out[k] += xi * np.matmul(x_tilde, a) * np.conj(ph)[None, :, None]
        return out

    return VectorFamily(n_s, build)


def lesser_source_expansion(spec: ModelSpec, one_body: OneBody, grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """
    sample vacuum, ϱ = ϱ_R 에서의 닫힌 형태.
    S^{<(0)}_{xx'} = i⟨x|h_T e^{−ish_D} ϱ_R e^{is'h_D} h_T|x'⟩
    S^{<(1)}_{xx'} = i Σ_y [ w(x,y)(Q_{xx'}P_{yy} − P_{xy}Q_{yx'}) + w(x',y)(Rm_{xx'}P'_{yy} − Rm_{xy}P'_{yx'}) ]
      P(s) = e^{−ish}ϱ e^{ish},  Q = e^{−ish}ϱ e^{is'h_D}h_T,  Rm = h_T e^{−ish_D}ϱ e^{is'h},  P' = P(s')
    (ξ 1차 항은 i⟨T*T⟩ 의 Wick 전개에서 나온다)
    """
    n_s = spec.n_sample
    rho = fermi_reservoir_density(spec)
    h, h_D, h_T = one_body.h, one_body.h_D, one_body.h_T
    w = np.asarray(spec.w, dtype=complex)
    e_h = one_body_propagators(h, grid)
    e_d = one_body_propagators(h_D, grid)

    # L[k] = (h_T e^{−i t_k h_D})[S, :]
    L = np.einsum("xj,tjk->txk", h_T[:n_s], e_d)
    s0 = 1j * np.einsum("txj,jk,uyk->tuxy", L, rho, np.conj(L))

    # P[k] = (e^{−ish}ϱe^{ish})[S,S]
    eh_s = e_h[:, :n_s, :]
    P = np.einsum("txj,jk,tyk->txy", eh_s, rho, np.conj(eh_s))
    # Q[k,k'] = (e^{−ish}ϱ)[S,:] (e^{is'h_D}h_T)[:,S]
    A = np.einsum("txj,jk->txk", eh_s, rho)
    Bc = np.einsum("ujk,kx->ujx", np.conj(e_d).transpose(0, 2, 1), h_T[:, :n_s])
    Q = np.einsum("txj,ujy->tuxy", A, Bc)
    # Rm[k,k'] = L[k] ϱ (e^{is'h})[:, S]
    Rm = np.einsum("txj,jk,uyk->tuxy", L, rho, np.conj(eh_s))

    pdiag = np.einsum("txx->tx", P)
    wv = np.einsum("xy,ty->tx", w, pdiag)  # Σ_y w(x,y) P_yy(s)
    wP = w[None] * P  # w(x,y) P_xy(s)

    term_a = Q * wv[:, None, :, None] - np.einsum("txy,tuyz->tuxz", wP, Q)
    term_b = Rm * wv[None, :, None, :] - np.einsum("tuxy,uyz->tuxz", Rm, wP)
    s1 = 1j * (term_a + term_b)
    return s0, s1


def lesser_source_zeroth_spectral(spec: ModelSpec, grid: TimeGrid) -> np.ndarray:
    """S^{<(0)} 의 스펙트럴 합: i Σ_j d_j² Σ_k w_k e^{i(s'−s)E_k} f_j(E_k) |φ_j⟩⟨φ_j|."""
    t = grid.points
    n_s = spec.n_sample
    out = np.zeros((t.size, t.size, n_s, n_s), dtype=complex)
    for lead in spec.leads:
        nu = lead_spectral_measure(lead)
        occ = fermi_factor(nu.energies, lead.beta, lead.mu)
        ph = np.exp(1j * (t[None, :, None] - t[:, None, None]) * nu.energies[None, None, :])
        scalar = ph @ (nu.weights * occ)
        out += 1j * lead.d**2 * scalar[:, :, None, None] * np.outer(lead.phi, lead.phi.conj())[None, None]
    return out


def lesser_source_kernel(
    state: InitialState,
    spectrum: Spectrum,
    system: FockSystem,
    grid: TimeGrid,
    dynamics: Optional[Dynamics] = None,
) -> LesserSource:
    """S^<_{xx'}(s,s') = i⟨T*_{x'}(s') T_x(s)⟩ 와 전개항 S^{<(0)}, S^{<(1)}."""
    if not state.sample_is_vacuum:
        raise StateError("[selfenergy] lesser source requires a vacuum sample factor")
    dyn = _dynamics(state, spectrum, grid, dynamics)
    fam = transfer_family(dyn, system)
    total = 1j * dyn.overlap(ket=fam, bra=fam)
    s0, s1 = lesser_source_expansion(system.spec, system.one_body, grid)
    labels = tuple(system.spec.sample_sites)
    return LesserSource(
        SelfEnergyKernel("lesser_source", grid, total, None, 0.0, labels),
        SelfEnergyKernel("lesser_source", grid, s0, None, 0.0, labels),
        SelfEnergyKernel("lesser_source", grid, s1, None, 0.0, labels),
    )


def expansion_remainder(source: LesserSource, xi: float) -> float:
    """‖S^< − S^{<(0)} − ξS^{<(1)}‖ / ξ²."""
    rem = source.total.memory - source.zeroth.memory - xi * source.first.memory
    return float(np.max(np.abs(rem))) / xi**2


# -----------------------------
# ξ-grading (고정 발전)
# -----------------------------
class XiGrading(NamedTuple):
    """
    발전 τ_K 를 고정하고 결합 계수 c 만 바꿨을 때의 다항식 검사.
    fit: 차수 4 다항식 적합 잔차, parity: 허용되지 않은 차수 계수의 최대 크기 (× c_max^p).
    """

    part: str
    fit: float
    parity: float

    @property
    def worst(self) -> float:
        return max(self.fit, self.parity)


GRADING_DEGREES = {"v_hf": (1,), "memory": (2,), "lesser_source": (0, 1, 2)}


def _grade(part: str, couplings: np.ndarray, samples: np.ndarray, degree: int) -> XiGrading:
    y = samples.reshape(len(couplings), -1)
    y = np.concatenate([y.real, y.imag], axis=1)
    coef = P.polyfit(couplings, y, degree)
    fit = float(np.max(np.abs(P.polyval(couplings, coef).T - y), initial=0.0))
    c_max = float(np.max(np.abs(couplings)))
    forbidden = [p for p in range(degree + 1) if p not in GRADING_DEGREES[part]]
    parity = max((float(np.max(np.abs(coef[p]))) * c_max**p for p in forbidden), default=0.0)
    return XiGrading(part, fit, parity)


def xi_grading(
    state: InitialState,
    spectrum: Spectrum,
    system: FockSystem,
    grid: TimeGrid,
    dynamics: Optional[Dynamics] = None,
    n_samples: int = 5,
    degree: int = 4,
) -> List[XiGrading]:
    """
    v_HF 는 c 에 대해 홀수(1차), 𝔖 는 짝수(2차), S^< 는 2차 이하.
    c ∈ |ξ|·linspace(−1, 1, n_samples) (ξ = 0 이면 ±1). S^< 는 sample vacuum 일 때만.
    """
    if n_samples < degree + 1:
        raise ValueError(f"need at least {degree + 1} coupling samples for a degree-{degree} fit")
    dyn = _dynamics(state, spectrum, grid, dynamics)
    scale = abs(system.spec.xi) or 1.0
    couplings = scale * np.linspace(-1.0, 1.0, n_samples)
    v_hf, memory, lesser = [], [], []
    for c in couplings:
        v_hf.append(hartree_fock_potential(state, spectrum, system, grid, dyn, coupling=c))
        memory.append(-1j * anticommutator_kernel(dyn, *interaction_operators(system, coupling=c)))
        if state.sample_is_vacuum:
            fam = transfer_family(dyn, system, coupling=c)
            lesser.append(1j * dyn.overlap(ket=fam, bra=fam))
    out = [_grade("v_hf", couplings, np.stack(v_hf), degree), _grade("memory", couplings, np.stack(memory), degree)]
    if lesser:
        out.append(_grade("lesser_source", couplings, np.stack(lesser), degree))
    for g in out:
        log.debug("xi-grading %s: fit %.2e, parity %.2e", g.part, g.fit, g.parity)
    return out


def keldysh_decoupling_residual(G_less: GFKernel, G0R: GFKernel, S_less: SelfEnergyKernel) -> float:
    """‖G^< − G_0^R S^< G_0^A‖ (G_0^A = (G_0^R)†, 적분은 [0,t] × [0,t'])."""
    require_same_grid(G_less.grid, G0R.grid, S_less.grid)
    g0 = G0R.at_energy(0.0).to_volterra()
    rhs = anticausal_product(causal_product(g0, S_less.memory), g0.adjoint())
    return float(np.max(np.abs(G_less.base - rhs)))


# -----------------------------
# Lesser self-energy Σ^<
# -----------------------------
def lesser_sigma(
    S_less: SelfEnergyKernel,
    sigma_R: SelfEnergyKernel,
    sigma_A: SelfEnergyKernel,
    G0R: GFKernel,
    G0A: GFKernel,
    grid: TimeGrid,
) -> SelfEnergyKernel:
    """Σ^< = (I − Σ^R G_0^R) S^< (I − G_0^A Σ^A)."""
    require_same_grid(S_less.grid, sigma_R.grid, sigma_A.grid, G0R.grid, G0A.grid, grid)
    g0r = G0R.at_energy(0.0).to_volterra()
    g0a = G0A.at_energy(0.0).to_volterra()
    x = instantaneous_left(sigma_R.instantaneous, g0r) + kernel_compose(sigma_R.memory, g0r)
    y = instantaneous_right(g0a, sigma_A.instantaneous) + kernel_compose(g0a, sigma_A.memory)
    s = S_less.memory
    xs = causal_product(x, s)
    value = s - xs - anticausal_product(s, y) + anticausal_product(xs, y)
    return SelfEnergyKernel("lesser_sigma", grid, value, None, 0.0, S_less.labels)


def keldysh_identity_residual(G_less: GFKernel, G_R: GFKernel, sigma_less: SelfEnergyKernel) -> float:
    """‖G^< − G^R Σ^< G^A‖."""
    require_same_grid(G_less.grid, G_R.grid, sigma_less.grid)
    g = G_R.at_energy(0.0).to_volterra()
    rhs = anticausal_product(causal_product(g, sigma_less.memory), g.adjoint())
    return float(np.max(np.abs(G_less.base - rhs)))


# -----------------------------
# Dissipativity / positivity
# -----------------------------
def lemma_weights(grid: TimeGrid, eta: float = 0.0) -> np.ndarray:
    """c[k,k'] = w_k w_k' e^{−η(t_k − t_k')} (k' < k), ½ w_k² (k = k'), 0 (k' > k)."""
    w = grid.weights
    t = grid.points
    c = np.outer(w, w) * np.exp(-eta * (t[:, None] - t[None, :]))
    c = np.tril(c, -1)
    c[np.arange(t.size), np.arange(t.size)] = 0.5 * w**2
    return c


def positivity_form(families: np.ndarray, grid: TimeGrid, eta: float = 0.0) -> float:
    """Re Σ c_kk' A_k* A_k' 의 최소 고유값. families: (n_t, d, m)."""
    c = lemma_weights(grid, eta)
    q = np.einsum("kl,kdi,ldj->ij", c, np.conj(families), families)
    return float(linalg.eigvalsh(0.5 * (q + q.conj().T)).min())


def random_families(grid: TimeGrid, rng: np.random.Generator, d: int = 3, m: int = 2, degree: int = 3) -> np.ndarray:
    """A_s = Σ_p C_p (s/T)^p, 복소 가우시안 C_p."""
    s = grid.points / max(grid.t_max, 1e-300)
    coeffs = rng.normal(size=(degree + 1, d, m)) + 1j * rng.normal(size=(degree + 1, d, m))
    powers = s[:, None] ** np.arange(degree + 1)[None, :]
    return np.einsum("tp,pdm->tdm", powers, coeffs)


def memory_quadratic_form(sigma: SelfEnergyKernel, phi: np.ndarray, z: complex = 0.0) -> complex:
    """Σ_k w_k φ_k* v_k φ_k + Σ_{k ≥ k'} c_kk' φ_k* Σ(z|k,k') φ_k'  (c = lemma_weights(η=0))."""
    grid = sigma.grid
    w = grid.weights
    inst = 0.0j
    if sigma.instantaneous is not None:
        inst = np.einsum("k,ki,kij,kj->", w, np.conj(phi), sigma.instantaneous, phi)
    kern = sigma.volterra(z).values
    c = lemma_weights(grid, 0.0)
    mem = np.einsum("kl,ki,klij,lj->", c, np.conj(phi), kern, phi)
    return complex(inst + mem)


def random_grid_function(grid: TimeGrid, d: int, rng: np.random.Generator, degree: int = 3) -> np.ndarray:
    return random_families(grid, rng, d=d, m=1, degree=degree)[:, :, 0]


def dissipativity_checks(
    sigma_red: SelfEnergyKernel,
    sigma_irr: Optional[SelfEnergyKernel],
    grid: TimeGrid,
    etas: Sequence[float] = (0.0, 0.5, 2.0),
    energy: float = 0.0,
    n_samples: int = 50,
    rng: Optional[np.random.Generator] = None,
) -> List[FormCheck]:
    """
    - positivity: Re∬ e^{−η(s−s')} A_s*A_s' ≥ 0  (이산 형태, 최소 고유값 ≥ −1e-8)
    - reducible dissipation: Im ∫⟨φ|Σ̃^−(z)φ⟩ ≤ 0, z = E − iη  (이산 형태에서 정확)
    - irreducible dissipation: Im(z + Σ^−(z)) ≤ 0, 구적 여유 10Δt²∫‖φ‖²
    """
    rng = rng or np.random.default_rng(0)
    checks: List[FormCheck] = []
    for eta in etas:
        worst = min(positivity_form(random_families(grid, rng), grid, eta) for _ in range(n_samples))
        checks.append(FormCheck(f"positivity-lemma[eta={eta:g}]", worst, -POSITIVITY_TOL, worst >= -POSITIVITY_TOL))

    if sigma_red.kind != "reducible_R":
        raise ValueError("dissipativity checks expect the retarded (causal) branch")
    d = sigma_red.d
    for eta in etas:
        z = energy - 1j * eta
        worst = max(memory_quadratic_form(sigma_red, random_grid_function(grid, d, rng), z).imag for _ in range(n_samples))
        checks.append(FormCheck(f"reducible-dissipation[eta={eta:g}]", worst, POSITIVITY_TOL, worst <= POSITIVITY_TOL))

    if sigma_irr is not None:
        w = grid.weights
        for eta in etas:
            z = energy - 1j * eta
            worst = -np.inf
            for _ in range(n_samples):
                phi = random_grid_function(grid, d, rng)
                norm2 = float(np.sum(w * np.sum(np.abs(phi) ** 2, axis=1)))
                im = (z * norm2).imag + memory_quadratic_form(sigma_irr, phi, z).imag
                worst = max(worst, im - 10.0 * grid.dt**2 * norm2)
            checks.append(
                FormCheck(f"irreducible-dissipation[eta={eta:g}]", float(worst), POSITIVITY_TOL, worst <= POSITIVITY_TOL, "slack 10*dt^2*|phi|^2")
            )
    return checks


# -----------------------------
# Effective propagator
# -----------------------------
@dataclass(frozen=True)
class PropagatorResult:
    phi: np.ndarray
    phi_integral: np.ndarray
    norms: np.ndarray
    contraction_excess: float
    agreement: float

    @property
    def contractive(self) -> bool:
        return self.contraction_excess <= 0.0


def _pad(v: np.ndarray, n_modes: int) -> np.ndarray:
    out = np.zeros((v.shape[0], n_modes, n_modes), dtype=complex)
    d = v.shape[1]
    out[:, :d, :d] = v
    return out


def effective_propagator(
    sigma: SelfEnergyKernel,
    h: np.ndarray,
    z: complex,
    grid: TimeGrid,
    phi0: np.ndarray,
) -> PropagatorResult:
    """
    i∂_sφ = (h + z)φ + (Σ^−φ)(s), φ(0) = φ0  (Σ^− 는 sample 블록을 전체 공간으로 0-패딩).
    Crank-Nicolson + trapezoid 메모리 (대각 implicit) 로 진행하고,
    φ = e^{−is(h+z)}φ0 + G_0^−(z)Σ^−φ 를 Volterra 전진대입으로 풀어 교차검증.
    """
    if np.imag(z) > 0:
        raise ValueError("Im z must be <= 0")
    if sigma.kind not in ("irreducible_R", "reducible_R"):
        raise ValueError("effective propagator expects a causal self-energy")
    h = np.asarray(h, dtype=complex)
    n_modes = h.shape[0]
    n, dt = grid.n_points, grid.dt
    v = _pad(sigma.instantaneous, n_modes) if sigma.instantaneous is not None else np.zeros((n, n_modes, n_modes), dtype=complex)
    mem = sigma.memory.with_phase(z).embed(n_modes).values
    wmat = prefix_weights(grid)
    eye = np.eye(n_modes)
    gen = h + z * eye

    phi = np.zeros((n, n_modes), dtype=complex)
    phi[0] = phi0
    for k in range(n - 1):
        m_k = np.einsum("mij,mj->i", mem[k, : k + 1] * wmat[k, : k + 1, None, None], phi[: k + 1])
        f_k = (gen + v[k]) @ phi[k] + m_k
        m_next = np.einsum("mij,mj->i", mem[k + 1, : k + 1] * wmat[k + 1, : k + 1, None, None], phi[: k + 1])
        lhs = eye + 0.5j * dt * (gen + v[k + 1]) + 0.25j * dt**2 * mem[k + 1, k + 1]
        rhs = phi[k] - 0.5j * dt * (f_k + m_next)
        try:
            phi[k + 1] = linalg.solve(lhs, rhs)
        except linalg.LinAlgError as e:
            raise NumericalFailure("effective_propagator", f"Crank-Nicolson step {k + 1} is singular", e) from e

    # 적분방정식 경로
    g0 = gf_free(h, grid, 0.0, "retarded").to_volterra().with_phase(z)
    kernel = instantaneous_right(g0, v) + kernel_compose(g0, VolterraKernel(grid, mem, True))
    free = np.einsum("tij,j->ti", one_body_propagators(h, grid), phi0) * np.exp(-1j * z * grid.points)[:, None]
    phi_int = kernel_solve(kernel, free)

    norms = np.linalg.norm(phi, axis=1)
    bound = np.linalg.norm(phi0) * (1.0 + 10.0 * dt)
    return PropagatorResult(
        phi=phi,
        phi_integral=phi_int,
        norms=norms,
        contraction_excess=float(np.max(norms - bound)),
        agreement=float(np.max(np.abs(phi - phi_int))),
    )
