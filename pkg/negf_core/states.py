# -*- coding: utf-8 -*-
"""
states.py
- lead 별 유한 Gibbs 상태 e^{-β_j(H_j − μ_j N_j)}/Z (바닥 에너지 shift 후 지수화)
- 곱 초기상태 ρ = ρ_S ⊗ ρ_1 ⊗ … ⊗ ρ_m  (ρ_S 는 기본 vacuum, 또는 gauge-invariant quasi-free)
- quasi-free 상관함수: 행렬식 공식 / 필드 연산자 pairing 합
- KMS 항등식 잔차
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse

from .errors import StateError
from .fock import FockSystem, LadderOperators, ladder_operators, make_basis, second_quantize
from .model import LeadSpec, ModelSpec, fermi_reservoir_density

log = logging.getLogger(__name__)

MIXTURE_CUTOFF = 1e-14


# -----------------------------
# Domain types
# -----------------------------
@dataclass
class InitialState:
    rho: np.ndarray
    varrho: np.ndarray
    sample_is_vacuum: bool
    description: str = ""
    _mixture: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def mixture(self, cutoff: float = MIXTURE_CUTOFF) -> Tuple[np.ndarray, np.ndarray]:
        """ρ = Σ_α p_α |α⟩⟨α|. p_α ≤ cutoff·max p 는 버린다."""
        if self._mixture is None:
            p, vecs = linalg.eigh(self.rho)
            keep = p > cutoff * max(float(p.max()), 1.0)
            self._mixture = (p[keep].astype(float), vecs[:, keep])
        return self._mixture

    def expect(self, op) -> complex:
        if sparse.issparse(op):
            return complex((op @ self.rho).trace())
        return complex(np.trace(self.rho @ op))

    def trace_residual(self) -> float:
        return abs(np.trace(self.rho) - 1.0)


@dataclass(frozen=True)
class QuasiFreeDensity:
    varrho: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.varrho)
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
            raise StateError("[states] quasi-free density must be Hermitian")
        ev = linalg.eigvalsh(m)
        if ev.size and (ev.min() < -1e-10 or ev.max() > 1 + 1e-10):
            raise StateError("[states] quasi-free density must satisfy 0 <= varrho <= I")


# -----------------------------
# Builders
# -----------------------------
def _shifted_gibbs(generator: np.ndarray, beta: float) -> np.ndarray:
    """e^{-βG}/Z, 최소 고유값을 빼고 지수화해서 overflow 회피."""
    energies, vecs = linalg.eigh(generator)
    weights = np.exp(-beta * (energies - energies.min()))
    weights /= weights.sum()
    return (vecs * weights) @ vecs.conj().T


def gibbs_lead_state(lead: LeadSpec, ladder_j: Optional[LadderOperators] = None) -> np.ndarray:
    """lead-j Fock 공간(2^{n_j}) 위의 grand canonical Gibbs 상태."""
    if not lead.beta > 0:
        raise StateError("[states] beta must be > 0")
    ladder_j = ladder_j or ladder_operators(make_basis(lead.n_sites, cap=max(lead.n_sites, 1)))
    shifted = np.asarray(lead.h, dtype=complex) - lead.mu * np.eye(lead.n_sites)
    return _shifted_gibbs(second_quantize(shifted, ladder_j), lead.beta)


def quasifree_density_operator(varrho: np.ndarray, ladder: LadderOperators) -> np.ndarray:
    """
    1체 밀도 ϱ 를 갖는 gauge-invariant quasi-free 상태의 Fock 밀도행렬.
    ϱ = Σ_k n_k |u_k⟩⟨u_k| 일 때 ρ = Π_k [(1 − n_k)(1 − N(u_k)) + n_k N(u_k)].
    """
    QuasiFreeDensity(np.asarray(varrho))
    occ, vecs = linalg.eigh(varrho)
    occ = np.clip(occ, 0.0, 1.0)
    eye = np.eye(ladder.basis.dim, dtype=complex)
    rho = eye.copy()
    for n_k, u in zip(occ, vecs.T):
        num = (ladder.create(u) @ ladder.annihilate(u)).toarray()
        rho = rho @ ((1.0 - n_k) * (eye - num) + n_k * num)
    return rho


def initial_product_state(
    spec: ModelSpec,
    system: FockSystem,
    sample_varrho: Optional[np.ndarray] = None,
) -> InitialState:
    """ρ = ρ_S ⊗ ρ_1 ⊗ … ⊗ ρ_m. 모든 인자가 짝(even) 연산자라 크로네커 곱이 JW 순서와 일치."""
    n_s = spec.n_sample
    if sample_varrho is None:
        rho_S = np.zeros((1 << n_s, 1 << n_s), dtype=complex)
        rho_S[0, 0] = 1.0
        varrho_S = np.zeros((n_s, n_s), dtype=complex)
        vacuum = True
    else:
        varrho_S = np.asarray(sample_varrho, dtype=complex)
        if varrho_S.shape != (n_s, n_s):
            raise StateError(f"[states] sample density must be {n_s}x{n_s}")
        rho_S = quasifree_density_operator(varrho_S, ladder_operators(make_basis(n_s, cap=max(n_s, 1))))
        vacuum = bool(np.max(np.abs(varrho_S), initial=0.0) == 0)

    rho = rho_S
    for lead in spec.leads:
        rho = np.kron(rho, gibbs_lead_state(lead))
    if rho.shape[0] != system.basis.dim:
        raise StateError(f"[states] product state dimension {rho.shape[0]} != Fock dimension {system.basis.dim}")

    varrho = fermi_reservoir_density(spec)
    varrho[spec.sample_slice, spec.sample_slice] = varrho_S
    desc = "sample vacuum" if vacuum else "sample quasi-free"
    state = InitialState(rho=rho, varrho=varrho, sample_is_vacuum=vacuum, description=f"{desc} x {len(spec.leads)} Gibbs leads")
    log.info("initial state: %s, trace residual %.1e", state.description, state.trace_residual())
    return state


# -----------------------------
# Correlators
# -----------------------------
def quasifree_correlator(varrho: np.ndarray, creators: Sequence[np.ndarray], annihilators: Sequence[np.ndarray]) -> complex:
    """
    ⟨a*(f_1)…a*(f_k) a(g_l)…a(g_1)⟩ = δ_kl det[⟨g_j|ϱ|f_i⟩].
    annihilators 는 곱에 나타나는 순서 그대로 [g_l, …, g_1].
    """
    k, l = len(creators), len(annihilators)
    if k != l:
        return 0.0j
    if k == 0:
        return 1.0 + 0.0j
    gs = list(reversed(annihilators))
    m = np.array([[np.vdot(g, varrho @ f) for g in gs] for f in creators], dtype=complex)
    return complex(linalg.det(m))


def trace_correlator(rho: np.ndarray, ladder: LadderOperators, creators: Sequence[np.ndarray], annihilators: Sequence[np.ndarray]) -> complex:
    """같은 상관함수를 Fock 트레이스로 (검증용 오라클)."""
    op = ladder.identity()
    for f in creators:
        op = op @ ladder.create(f)
    for g in annihilators:
        op = op @ ladder.annihilate(g)
    return complex(np.trace(rho @ op.toarray()))


def field_pair(varrho: np.ndarray, f: np.ndarray, g: np.ndarray) -> complex:
    """⟨φ(f)φ(g)⟩ = ½(⟨g|ϱ|f⟩ + ⟨f|g⟩ − ⟨f|ϱ|g⟩),  φ(f) = 2^{-1/2}(a*(f) + a(f))."""
    return 0.5 * (np.vdot(g, varrho @ f) + np.vdot(f, g) - np.vdot(f, varrho @ g))


def wick_field_correlator(varrho: np.ndarray, fields: Sequence[np.ndarray]) -> complex:
    """⟨φ(f_1)…φ(f_k)⟩ 를 pairing 합으로 (재귀 전개, 홀수 k 면 0)."""
    k = len(fields)
    if k == 0:
        return 1.0 + 0.0j
    if k % 2:
        return 0.0j
    total = 0.0j
    first, rest = fields[0], list(fields[1:])
    for j in range(len(rest)):
        sign = -1.0 if j % 2 else 1.0
        total += sign * field_pair(varrho, first, rest[j]) * wick_field_correlator(varrho, rest[:j] + rest[j + 1 :])
    return total


def field_operator(ladder: LadderOperators, f: np.ndarray):
    return (ladder.create(f) + ladder.annihilate(f)) / np.sqrt(2.0)


def trace_field_correlator(rho: np.ndarray, ladder: LadderOperators, fields: Sequence[np.ndarray]) -> complex:
    op = ladder.identity()
    for f in fields:
        op = op @ field_operator(ladder, f)
    return complex(np.trace(rho @ op.toarray()))


# -----------------------------
# KMS
# -----------------------------
def _lead_of(spec: ModelSpec, f: np.ndarray) -> int:
    f = np.asarray(f)
    support = np.flatnonzero(np.abs(f) > 0)
    for j in range(len(spec.leads)):
        sl = spec.lead_slice(j)
        if support.size and support.min() >= sl.start and support.max() < sl.stop:
            return j
    raise StateError("[states] KMS test vector must be supported in a single lead")


def kms_residual(state: InitialState, system: FockSystem, a_op, f: np.ndarray) -> float:
    """
    |⟨A a*(f)⟩ − ⟨a*(e^{β(h_j−μ_j)}f) A⟩| 와
    |⟨A a(f)⟩ − ⟨a(e^{−β(h_j−μ_j)}f) A⟩| 중 큰 값.
    a(·) 는 반선형이라 소멸 쪽은 지수 부호가 뒤집힌다.
    """
    spec = system.spec
    j = _lead_of(spec, f)
    lead = spec.leads[j]
    sl = spec.lead_slice(j)
    gen = lead.beta * (np.asarray(lead.h, dtype=complex) - lead.mu * np.eye(lead.n_sites))
    f_up = np.array(f, dtype=complex)
    f_down = np.array(f, dtype=complex)
    f_up[sl] = linalg.expm(gen) @ f[sl]
    f_down[sl] = linalg.expm(-gen) @ f[sl]

    ladder = system.ladder
    a_mat = a_op.toarray() if sparse.issparse(a_op) else np.asarray(a_op)
    lhs_c = state.expect(a_mat @ ladder.create(f).toarray())
    rhs_c = state.expect(ladder.create(f_up).toarray() @ a_mat)
    lhs_a = state.expect(a_mat @ ladder.annihilate(f).toarray())
    rhs_a = state.expect(ladder.annihilate(f_down).toarray() @ a_mat)
    return float(max(abs(lhs_c - rhs_c), abs(lhs_a - rhs_a)))


def random_gauge_invariant_monomial(system: FockSystem, rng: np.random.Generator, order: int = 2) -> np.ndarray:
    """a*(u_1)…a*(u_k) a(v_k)…a(v_1) 형태의 무작위 gauge-invariant 단항식 (k = order/2)."""
    n = system.spec.n_modes
    ladder = system.ladder
    op = ladder.identity()
    half = order // 2
    for _ in range(half):
        op = op @ ladder.create(rng.normal(size=n) + 1j * rng.normal(size=n))
    for _ in range(half):
        op = op @ ladder.annihilate(rng.normal(size=n) + 1j * rng.normal(size=n))
    return op.toarray()
