# -*- coding: utf-8 -*-
"""
fock.py
- N-모드 페르미온 Fock 공간 (차원 2^N), Jordan-Wigner 사다리 연산자
- 2차 양자화 dΓ(q), 상호작용 W = ½ Σ w(x,y) N_x N_y, 해밀토니안 H, H_T, K, K_D
- 시간발전 전략: K, K_D 를 한 번 eigh 한 뒤 스펙트럴 계산으로 e^{-itK}

Jordan-Wigner 규약 (비트 단위로 재현 가능해야 함):
- 기저 상태의 정수 인덱스에서 모드 i 는 비트 1 << (N-1-i)  (모드 0 이 최상위 비트)
- a*_i = I_2 ⊗ … ⊗ I_2 ⊗ u ⊗ Z ⊗ … ⊗ Z,  u = [[0,0],[1,0]],  Z = diag(1,-1)
- a(f) = Σ_i conj(f_i) a_i  (f 에 대해 반선형),  a*(f) = Σ_i f_i a*_i
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cache, cached_property
from typing import Dict, List, Optional

import numpy as np
from scipy import linalg, sparse

from .errors import FockCapExceeded, ModelValidationError, NumericalFailure
from .model import ModelSpec, OneBody, build_one_body, coupled_pairs

log = logging.getLogger(__name__)

DEFAULT_FOCK_CAP = 14

# ManyBodyOperator: Fock 기저 위의 (2^N, 2^N) 복소 행렬 (dense ndarray 또는 scipy.sparse)
ManyBodyOperator = np.ndarray


# -----------------------------
# Basis / ladder operators
# -----------------------------
@dataclass(frozen=True)
class FockBasis:
    n_modes: int

    @property
    def dim(self) -> int:
        return 1 << self.n_modes

    @property
    def states(self) -> np.ndarray:
        """사전식 순서의 점유 비트열 (정수)."""
        return np.arange(self.dim)

    def occupations(self) -> np.ndarray:
        """(dim, N) 점유수 표. 열 i 는 모드 i."""
        shifts = np.arange(self.n_modes - 1, -1, -1)
        return (self.states[:, None] >> shifts[None, :]) & 1

    def particle_numbers(self) -> np.ndarray:
        return self.occupations().sum(axis=1)

    def sectors(self) -> Dict[int, np.ndarray]:
        """입자수 n → 해당 기저 인덱스. 섹터들은 기저를 분할한다."""
        counts = self.particle_numbers()
        return {n: np.flatnonzero(counts == n) for n in range(self.n_modes + 1)}

    def label(self, index: int) -> str:
        return format(index, f"0{self.n_modes}b") if self.n_modes else ""


def make_basis(n_modes: int, cap: int = DEFAULT_FOCK_CAP) -> FockBasis:
    if n_modes < 0:
        raise ModelValidationError("n_modes", "must be non-negative")
    if n_modes > cap:
        raise FockCapExceeded(n_modes, cap)
    return FockBasis(n_modes)


@cache
def _jordan_wigner_creators(n_modes: int) -> tuple:
    id2 = sparse.identity(2, format="csr")
    z = sparse.csr_matrix([[1.0, 0.0], [0.0, -1.0]])
    u = sparse.csr_matrix([[0.0, 0.0], [1.0, 0.0]])
    creators = []
    for i in range(n_modes):
        c = sparse.identity(1, format="csr")
        for j in range(n_modes):
            if j < i:
                c = sparse.kron(c, id2, format="csr")
            elif j == i:
                c = sparse.kron(c, u, format="csr")
            else:
                c = sparse.kron(c, z, format="csr")
        c = sparse.csr_matrix(c, dtype=complex)
        c.eliminate_zeros()
        creators.append(c)
    return tuple(creators)


@dataclass(frozen=True)
class LadderOperators:
    """모드별 a_i, a*_i (sparse CSR). a(f), a*(f) 는 선형결합으로 만든다."""

    basis: FockBasis
    creators: tuple
    annihilators: tuple

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    def create(self, f: np.ndarray) -> sparse.csr_matrix:
        f = np.asarray(f, dtype=complex)
        out = sparse.csr_matrix((self.basis.dim, self.basis.dim), dtype=complex)
        for i in np.flatnonzero(f):
            out = out + f[i] * self.creators[i]
        return out

    def annihilate(self, f: np.ndarray) -> sparse.csr_matrix:
        f = np.asarray(f, dtype=complex)
        out = sparse.csr_matrix((self.basis.dim, self.basis.dim), dtype=complex)
        for i in np.flatnonzero(f):
            out = out + np.conj(f[i]) * self.annihilators[i]
        return out

    def number(self, i: int) -> sparse.csr_matrix:
        return (self.creators[i] @ self.annihilators[i]).tocsr()

    def identity(self) -> sparse.csr_matrix:
        return sparse.identity(self.basis.dim, dtype=complex, format="csr")


def ladder_operators(basis: FockBasis) -> LadderOperators:
    """CAR 사다리 연산자 {a_i, a*_i}. cap 검사는 make_basis 에서 이미 끝남."""
    creators = _jordan_wigner_creators(basis.n_modes)
    annihilators = tuple(sparse.csr_matrix(c.conj().T) for c in creators)
    return LadderOperators(basis=basis, creators=creators, annihilators=annihilators)


def anticommutator(a, b):
    return a @ b + b @ a


def car_residual(ladder: LadderOperators) -> float:
    """max_{i,k} ‖{a_i,a*_k} − δ_ik I‖ 와 ‖{a_i,a_k}‖ 중 최대 (원소 max-norm)."""
    worst = 0.0
    eye = ladder.identity()
    for i, ai in enumerate(ladder.annihilators):
        for k in range(ladder.n_modes):
            mixed = anticommutator(ai, ladder.creators[k])
            if i == k:
                mixed = mixed - eye
            pure = anticommutator(ai, ladder.annihilators[k])
            for m in (mixed, pure):
                m = sparse.csr_matrix(m)
                if m.nnz:
                    worst = max(worst, float(np.max(np.abs(m.data))))
    return worst


# -----------------------------
# Second quantization / named operators
# -----------------------------
def second_quantize(q: np.ndarray, ladder: LadderOperators, dense: bool = True):
    """dΓ(q) = Σ_ij q_ij a*_i a_j."""
    q = np.asarray(q, dtype=complex)
    n = ladder.n_modes
    if q.shape != (n, n):
        raise ModelValidationError("q", f"one-particle operator must be {n}x{n}, got {q.shape}")
    out = sparse.csr_matrix((ladder.basis.dim, ladder.basis.dim), dtype=complex)
    rows, cols = np.nonzero(q)
    for i, j in zip(rows, cols):
        out = out + q[i, j] * (ladder.creators[i] @ ladder.annihilators[j])
    return out.toarray() if dense else out.tocsr()


def number_operator(ladder: LadderOperators) -> np.ndarray:
    """dΓ(I). 대각 원소 = 비트 카운트."""
    counts = ladder.basis.particle_numbers().astype(complex)
    return np.diag(counts)


def site_number_operator(ladder: LadderOperators, x: int) -> np.ndarray:
    return ladder.number(x).toarray()


def sample_number_operator(spec: ModelSpec, ladder: LadderOperators) -> np.ndarray:
    """N_S = dΓ(1_S)."""
    proj = np.zeros((spec.n_modes, spec.n_modes), dtype=complex)
    proj[spec.sample_slice, spec.sample_slice] = np.eye(spec.n_sample)
    return second_quantize(proj, ladder)


def v_operator(spec: ModelSpec, ladder: LadderOperators, x: int) -> np.ndarray:
    """V_x = Σ_y w(x,y) N_y."""
    out = np.zeros((ladder.basis.dim, ladder.basis.dim), dtype=complex)
    for y in range(spec.n_sample):
        if spec.w[x, y] != 0:
            out += spec.w[x, y] * site_number_operator(ladder, y)
    return out


def current_operator(spec: ModelSpec, ladder: LadderOperators, j: int) -> np.ndarray:
    """t=0 에서의 J_j = i d_j (a*(ψ_j)a(φ_j) − a*(φ_j)a(ψ_j))."""
    phi, psi = coupled_pairs(spec, j)
    d = spec.leads[j].d
    forward = ladder.create(psi) @ ladder.annihilate(phi)
    backward = ladder.create(phi) @ ladder.annihilate(psi)
    return (1j * d * (forward - backward)).toarray()


def build_interaction(spec: ModelSpec, ladder: LadderOperators) -> np.ndarray:
    """W = ½ Σ_{x,y} w(x,y) N_x N_y (sample 모드에만 작용)."""
    w = np.asarray(spec.w)
    if np.any(np.diag(w) != 0):
        raise ModelValidationError("w", "must have zero diagonal, w(x,x) = 0")
    occ = ladder.basis.occupations()[:, : spec.n_sample].astype(float)
    # N_x 는 점유 기저에서 대각이므로 W 도 대각
    diag = 0.5 * np.einsum("sx,xy,sy->s", occ, w.real, occ)
    return np.diag(diag.astype(complex))


# -----------------------------
# Hamiltonians / spectra
# -----------------------------
@dataclass(frozen=True)
class Spectrum:
    """K = U diag(E) U† 의 캐시. 시간발전은 모두 여기서."""

    energies: np.ndarray
    vectors: np.ndarray

    def to_eigenbasis(self, x) -> np.ndarray:
        u = self.vectors
        if sparse.issparse(x):
            return u.conj().T @ (x @ u)
        return u.conj().T @ np.asarray(x) @ u

    def from_eigenbasis(self, x: np.ndarray) -> np.ndarray:
        return self.vectors @ x @ self.vectors.conj().T

    def propagator(self, t: float) -> np.ndarray:
        """e^{-itK}."""
        return (self.vectors * np.exp(-1j * t * self.energies)) @ self.vectors.conj().T


def diagonalize(k: np.ndarray, name: str = "K") -> Spectrum:
    try:
        energies, vectors = linalg.eigh(k)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"diagonalize[{name}]", str(e), e) from e
    return Spectrum(energies=np.asarray(energies, dtype=float), vectors=vectors)


@dataclass(frozen=True)
class Hamiltonians:
    H: np.ndarray
    H_T: np.ndarray
    H_D: np.ndarray
    W: np.ndarray
    K: np.ndarray
    K_D: np.ndarray


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T), initial=0.0))


def build_hamiltonians(spec: ModelSpec, ladder: LadderOperators, one_body: Optional[OneBody] = None) -> Hamiltonians:
    """K_D = dΓ(h_D) + ξW,  K = K_D + H_T  (조립 항등식 K = K_D + H_T 가 정확히 성립하도록)."""
    ob = one_body or build_one_body(spec)
    H_D = second_quantize(ob.h_D, ladder)
    H_T = second_quantize(ob.h_T, ladder)
    W = build_interaction(spec, ladder)
    K_D = H_D + spec.xi * W
    K = K_D + H_T
    for name, m in (("H_D", H_D), ("H_T", H_T), ("W", W)):
        res = hermiticity_residual(m)
        if res > 1e-12 * max(1.0, float(np.max(np.abs(m), initial=0.0))):
            raise NumericalFailure("build_hamiltonians", f"{name} is not Hermitian (residual {res:.2e})")
    return Hamiltonians(H=H_D + H_T, H_T=H_T, H_D=H_D, W=W, K=K, K_D=K_D)


@dataclass
class FockSystem:
    """spec + 기저 + 사다리 + 해밀토니안 묶음. 스펙트럼은 처음 요청 시 한 번만 계산."""

    spec: ModelSpec
    basis: FockBasis
    ladder: LadderOperators
    one_body: OneBody
    hamiltonians: Hamiltonians

    @cached_property
    def spectrum_K(self) -> Spectrum:
        log.debug("diagonalizing K (dim=%d)", self.basis.dim)
        return diagonalize(self.hamiltonians.K, "K")

    @cached_property
    def spectrum_KD(self) -> Spectrum:
        return diagonalize(self.hamiltonians.K_D, "K_D")

    def sample_annihilators(self) -> List[sparse.csr_matrix]:
        return [self.ladder.annihilators[x] for x in range(self.spec.n_sample)]

    def sample_creators(self) -> List[sparse.csr_matrix]:
        return [self.ladder.creators[x] for x in range(self.spec.n_sample)]


def build_fock_system(spec: ModelSpec, cap: int = DEFAULT_FOCK_CAP) -> FockSystem:
    basis = make_basis(spec.n_modes, cap)
    ladder = ladder_operators(basis)
    ob = build_one_body(spec)
    hams = build_hamiltonians(spec, ladder, ob)
    log.info("fock system ready: %d modes, dim=%d, xi=%g", basis.n_modes, basis.dim, spec.xi)
    return FockSystem(spec=spec, basis=basis, ladder=ladder, one_body=ob, hamiltonians=hams)


def gauge_residual(m: np.ndarray, ladder: LadderOperators) -> float:
    """‖[M, dΓ(I)]‖ (max-norm)."""
    n = number_operator(ladder)
    return float(np.max(np.abs(m @ n - n @ m), initial=0.0))
