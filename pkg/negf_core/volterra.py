# -*- coding: utf-8 -*-
"""
volterra.py
- 격자 위 Volterra 연산자 대수: 적용 / 합성 / 군 역원 / 지수 bound
- 커널 저장: values[k, k'] (d×d), causal 이면 k' ≤ k 만 (대각은 삼각형 closure 값)
- 모든 적분은 trapezoid. 역원은 전진대입 (대각은 implicit), Neumann 급수는 교차검증 경로
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .errors import GridError, VolterraSolveError
from .greens import TimeGrid, prefix_weights, require_same_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VolterraKernel:
    """causal=True: 하삼각 (retarded 쪽),  causal=False: 상삼각 (advanced 쪽)."""

    grid: TimeGrid
    values: np.ndarray
    causal: bool = True
    bound: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        n = self.grid.n_points
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 4 or v.shape[:2] != (n, n) or v.shape[2] != v.shape[3]:
            raise GridError(f"[volterra] kernel shape {v.shape} does not match grid of {n} points")
        mask = np.tril(np.ones((n, n), dtype=bool)) if self.causal else np.triu(np.ones((n, n), dtype=bool))
        object.__setattr__(self, "values", np.where(mask[:, :, None, None], v, 0.0))

    @property
    def d(self) -> int:
        return self.values.shape[2]

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def adjoint(self) -> "VolterraKernel":
        vals = np.conj(np.transpose(self.values, (1, 0, 3, 2)))
        return VolterraKernel(self.grid, vals, not self.causal, self.bound)

    def diagonal(self) -> np.ndarray:
        idx = np.arange(self.n_points)
        return self.values[idx, idx]

    def scaled(self, c: complex) -> "VolterraKernel":
        return VolterraKernel(self.grid, c * self.values, self.causal)

    def __add__(self, other: "VolterraKernel") -> "VolterraKernel":
        _check_pair(self, other)
        return VolterraKernel(self.grid, self.values + other.values, self.causal)

    def __sub__(self, other: "VolterraKernel") -> "VolterraKernel":
        _check_pair(self, other)
        return VolterraKernel(self.grid, self.values - other.values, self.causal)

    def with_phase(self, z: complex) -> "VolterraKernel":
        """B(z|s,s') = e^{i(s'−s)z} B(0|s,s')."""
        t = self.grid.points
        ph = np.exp(1j * (t[None, :] - t[:, None]) * z)
        return VolterraKernel(self.grid, self.values * ph[:, :, None, None], self.causal)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def embed(self, n_modes: int, rows=None) -> "VolterraKernel":
        """sample 블록 커널을 전체 1체 공간으로 0-패딩."""
        idx = np.arange(self.d) if rows is None else np.asarray(rows)
        vals = np.zeros(self.values.shape[:2] + (n_modes, n_modes), dtype=complex)
        vals[:, :, idx[:, None], idx[None, :]] = self.values
        return VolterraKernel(self.grid, vals, self.causal)


def zero_kernel(grid: TimeGrid, d: int, causal: bool = True) -> VolterraKernel:
    n = grid.n_points
    return VolterraKernel(grid, np.zeros((n, n, d, d), dtype=complex), causal)


def constant_kernel(grid: TimeGrid, b: np.ndarray, causal: bool = True) -> VolterraKernel:
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    n = grid.n_points
    return VolterraKernel(grid, np.broadcast_to(b, (n, n) + b.shape).copy(), causal)


def _check_pair(a: VolterraKernel, b: VolterraKernel) -> None:
    require_same_grid(a.grid, b.grid)
    if a.causal != b.causal:
        raise GridError("[volterra] cannot combine a causal and an anti-causal kernel")
    if a.d != b.d:
        raise GridError(f"[volterra] block size mismatch {a.d} vs {b.d}")


# -----------------------------
# Block-matrix helpers
# -----------------------------
def to_block(values: np.ndarray) -> np.ndarray:
    n, _, d, _ = values.shape
    return values.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def from_block(block: np.ndarray, n: int, d: int) -> np.ndarray:
    return block.reshape(n, d, n, d).transpose(0, 2, 1, 3)


def _suffix_weights(grid: TimeGrid) -> np.ndarray:
    """W[k, m] = ∫_{t_k}^{T} trapezoid 가중치."""
    return prefix_weights(grid)[::-1, ::-1]


# -----------------------------
# Operations
# -----------------------------
def kernel_apply(kernel: VolterraKernel, phi: np.ndarray) -> np.ndarray:
    """
    (Vφ)(s) = φ(s) − ∫ B(s,s')φ(s')ds'  (V = I − B).
    causal 커널은 [0, s], anti-causal 은 [s, T] 구간. phi: (n_t, d) 또는 (n_t, d, m).
    """
    phi = np.asarray(phi, dtype=complex)
    if phi.shape[0] != kernel.n_points or phi.shape[1] != kernel.d:
        raise GridError(f"[volterra] grid function shape {phi.shape} does not match kernel")
    wmat = prefix_weights(kernel.grid) if kernel.causal else _suffix_weights(kernel.grid)
    weighted = kernel.values * wmat[:, :, None, None]
    if phi.ndim == 2:
        memory = np.einsum("kmij,mj->ki", weighted, phi)
    else:
        memory = np.einsum("kmij,mjl->kil", weighted, phi)
    return phi - memory


def kernel_compose(b1: VolterraKernel, b2: VolterraKernel) -> VolterraKernel:
    """
    (B1∘B2)(s,s') = ∫_{s'}^{s} B1(s,r) B2(r,s') dr  (trapezoid).
    블록행렬로 Δt·B1B2 − (Δt/2)(diag(B1)B2 + B1 diag(B2)); k = k' 원소는 자동으로 0.
    """
    _check_pair(b1, b2)
    n, d, dt = b1.n_points, b1.d, b1.grid.dt
    m1, m2 = to_block(b1.values), to_block(b2.values)
    diag1 = linalg.block_diag(*b1.diagonal())
    diag2 = linalg.block_diag(*b2.diagonal())
    out = dt * (m1 @ m2) - 0.5 * dt * (diag1 @ m2 + m1 @ diag2)
    return VolterraKernel(b1.grid, from_block(out, n, d), b1.causal)


def _forward_substitution(b: VolterraKernel) -> np.ndarray:
    """R = B + B∘R 를 인과 순서대로. R(k,k) = B(k,k)."""
    n, d, dt = b.n_points, b.d, b.grid.dt
    bv = b.values
    r = np.zeros((n * d, n * d), dtype=complex)
    eye = np.eye(d)
    diag_r = np.zeros((n, d, d), dtype=complex)
    for k in range(n):
        rows = slice(k * d, (k + 1) * d)
        r[rows, rows] = bv[k, k]
        diag_r[k] = bv[k, k]
        if k == 0:
            continue
        # B(k, 0..k−1) 를 가로로 이은 (d, k·d)
        b_row = bv[k, :k].transpose(1, 0, 2).reshape(d, k * d)
        # Σ_{m=k'}^{k−1} Δt B(k,m)R(m,k')  (R 은 하삼각이라 m < k' 항은 0)
        acc = dt * (b_row @ r[: k * d, : k * d])
        # m = k' 끝점 보정 (가중치 Δt/2)
        acc = acc.reshape(d, k, d)
        acc -= 0.5 * dt * np.einsum("pij,pjl->ipl", bv[k, :k], diag_r[:k])
        acc = acc.reshape(d, k * d)
        rhs = b_row + acc
        lhs = eye - 0.5 * dt * bv[k, k]
        try:
            cond = np.linalg.cond(lhs)
            if not np.isfinite(cond) or cond > 1e12:
                raise VolterraSolveError(k, f"implicit diagonal is singular (cond {cond:.2e}); reduce dt below 1/||B||")
            r[rows, : k * d] = linalg.solve(lhs, rhs)
        except linalg.LinAlgError as e:
            raise VolterraSolveError(k, str(e)) from e
    return from_block(r, n, d)


def kernel_invert(b: VolterraKernel) -> VolterraKernel:
    """
    (I − B)^{-1} = I + R.  anti-causal 은 adjoint 로 바꿔 풀고 다시 adjoint.
    (b, γ) 가 있으면 R 의 bound 를 (b, γ + b) 로 기록.
    """
    if not b.causal:
        return kernel_invert(b.adjoint()).adjoint()
    r = VolterraKernel(b.grid, _forward_substitution(b), True)
    if b.bound is not None:
        bb, gamma = b.bound
        r = replace(r, bound=(bb, gamma + bb))
    return r


def kernel_solve(b: VolterraKernel, rhs: np.ndarray) -> np.ndarray:
    """(I − B)φ = rhs 를 φ 에 대해 (causal 커널만, 전진대입)."""
    if not b.causal:
        raise GridError("[volterra] kernel_solve expects a causal kernel")
    rhs = np.asarray(rhs, dtype=complex)
    n, d, dt = b.n_points, b.d, b.grid.dt
    phi = np.zeros_like(rhs)
    wmat = prefix_weights(b.grid)
    eye = np.eye(d)
    for k in range(n):
        acc = rhs[k].copy()
        if k:
            acc += np.einsum("mij,mj->i", b.values[k, :k] * wmat[k, :k, None, None], phi[:k])
        lhs = eye - (0.5 * dt if k else 0.0) * b.values[k, k]
        try:
            phi[k] = linalg.solve(lhs, acc)
        except linalg.LinAlgError as e:
            raise VolterraSolveError(k, str(e)) from e
    return phi


def neumann_inverse(b: VolterraKernel, order: int = 12) -> VolterraKernel:
    """R ≈ B + B∘B + … (order 항). forward substitution 의 교차검증용."""
    term = b
    total = b
    for _ in range(order - 1):
        term = kernel_compose(b, term)
        total = total + term
    return total


def identity_residual(b: VolterraKernel, r: VolterraKernel) -> float:
    """‖(I − B)(I + R) − I‖_grid = ‖R − B − B∘R‖."""
    return (r - b - kernel_compose(b, r)).max_norm()


def kernel_bound(b: VolterraKernel, gamma: float = 0.0) -> Tuple[float, float]:
    """‖B(s,s')‖ ≤ b e^{γ(s−s')} 를 만족하는 가장 작은 b."""
    t = b.grid.points
    gap = np.abs(t[:, None] - t[None, :])
    norms = np.linalg.norm(b.values, ord=2, axis=(2, 3))
    return float(np.max(norms * np.exp(-gamma * gap), initial=0.0)), float(gamma)


def with_bound(b: VolterraKernel, gamma: float = 0.0) -> VolterraKernel:
    return replace(b, bound=kernel_bound(b, gamma))


def bound_violation(r: VolterraKernel, slack: float) -> float:
    """max ‖R(s,s')‖ / (b e^{γ(s−s')}(1 + slack)); ≤ 1 이면 bound 만족."""
    if r.bound is None:
        raise ValueError("kernel carries no (b, gamma) metadata")
    bb, gamma = r.bound
    t = r.grid.points
    gap = np.abs(t[:, None] - t[None, :])
    norms = np.linalg.norm(r.values, ord=2, axis=(2, 3))
    allowed = bb * np.exp(gamma * gap) * (1.0 + slack)
    mask = np.tril(np.ones_like(gap, dtype=bool)) if r.causal else np.triu(np.ones_like(gap, dtype=bool))
    return float(np.max(np.where(mask, norms / np.maximum(allowed, 1e-300), 0.0)))


# -----------------------------
# Two-time (non-Volterra) products
# -----------------------------
def causal_product(x: VolterraKernel, s: np.ndarray) -> np.ndarray:
    """(X∘S)(t,t') = ∫_0^t X(t,r) S(r,t') dr  (X causal, S 임의의 2-시간 배열)."""
    if not x.causal:
        raise GridError("[volterra] causal_product expects a causal left factor")
    n, d = x.n_points, x.d
    weighted = x.values * prefix_weights(x.grid)[:, :, None, None]
    out = to_block(weighted) @ to_block(np.asarray(s, dtype=complex))
    return from_block(out, n, d)


def anticausal_product(s: np.ndarray, y: VolterraKernel) -> np.ndarray:
    """(S∘Y)(t,t') = ∫_0^{t'} S(t,r) Y(r,t') dr  (Y anti-causal)."""
    if y.causal:
        raise GridError("[volterra] anticausal_product expects an anti-causal right factor")
    n, d = y.n_points, y.d
    weighted = y.values * prefix_weights(y.grid).T[:, :, None, None]
    out = to_block(np.asarray(s, dtype=complex)) @ to_block(weighted)
    return from_block(out, n, d)


def instantaneous_left(v: np.ndarray, b: VolterraKernel) -> VolterraKernel:
    """(vB)(s,s') = v(s) B(s,s')."""
    return VolterraKernel(b.grid, np.einsum("kij,kmjl->kmil", v, b.values), b.causal)


def instantaneous_right(b: VolterraKernel, v: np.ndarray) -> VolterraKernel:
    """(Bv)(s,s') = B(s,s') v(s')."""
    return VolterraKernel(b.grid, np.einsum("kmij,mjl->kmil", b.values, v), b.causal)
