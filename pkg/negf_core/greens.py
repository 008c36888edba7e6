# -*- coding: utf-8 -*-
"""
greens.py
- 균일 시간 격자 TimeGrid (trapezoid 가중치)
- 2-시간 Green 함수: 상호작용 G^<, G^>, G^{R/A} (ED), 자유 G_0 / decoupled G_D (1체 행렬 지수)
- 스펙트럴 함수 A, Keldysh G^K
- Duhamel 항등식 잔차

규약
- values[k, k', i, j] = ⟨f_i| G(t_k, t_k') |g_j⟩
- θ(0) = 1/2 (읽기 규약). Volterra 로 넘길 때는 삼각형 closure 값(θ → 1)으로 바꾼다.
- 에너지 E 는 메타데이터. 값은 E = 0 에서 한 번 계산하고, R/A 종류만 읽을 때 e^{i(s'−s)E} 위상을 곱한다.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse

from .errors import GridError, NumericalFailure
from .fock import FockSystem, LadderOperators, Spectrum
from .states import InitialState

log = logging.getLogger(__name__)

SPECIES = ("lesser", "greater", "retarded", "advanced", "spectral", "keldysh")
PHASED_SPECIES = ("retarded", "advanced")
ALPHA_CHUNK = 32


# -----------------------------
# Time grid
# -----------------------------
@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise GridError("[grid] dt must be > 0")
        if self.t_max < 0:
            raise GridError("[grid] negative times are not supported")
        ratio = self.t_max / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise GridError(f"[grid] T/dt = {ratio:.12g} is not integral")

    @property
    def n(self) -> int:
        return int(round(self.t_max / self.dt))

    @property
    def n_points(self) -> int:
        return self.n + 1

    @property
    def points(self) -> np.ndarray:
        return self.dt * np.arange(self.n_points)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.dt)
        if self.n_points > 1:
            w[0] = w[-1] = 0.5 * self.dt
        else:
            w[0] = 0.0
        return w

    def index_of(self, t: float) -> int:
        k = int(round(t / self.dt))
        if k < 0 or k > self.n or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise GridError(f"[grid] t = {t} is not on the grid (T = {self.t_max}, dt = {self.dt})")
        return k

    def halved(self) -> "TimeGrid":
        return TimeGrid(self.t_max, self.dt / 2)

    def describe(self) -> dict:
        return {"T": self.t_max, "dt": self.dt, "n_points": self.n_points}

    def same_as(self, other: "TimeGrid") -> bool:
        return self.n == other.n and abs(self.dt - other.dt) <= 1e-15 * max(1.0, self.dt)


def require_same_grid(*grids: TimeGrid) -> TimeGrid:
    first = grids[0]
    for g in grids[1:]:
        if not first.same_as(g):
            raise GridError(f"[grid] mismatch: {first.describe()} vs {g.describe()}")
    return first


def prefix_weights(grid: TimeGrid) -> np.ndarray:
    """W[k, m] = ∫_0^{t_k} 구간 trapezoid 에서 점 m 의 가중치 (m > k 는 0, k = 0 행은 0)."""
    n = grid.n_points
    wmat = np.tril(np.full((n, n), grid.dt))
    idx = np.arange(n)
    wmat[:, 0] = np.where(idx > 0, 0.5 * grid.dt, 0.0)
    wmat[idx, idx] = np.where(idx > 0, 0.5 * grid.dt, 0.0)
    return wmat


def phase_matrix(grid: TimeGrid, z: complex) -> np.ndarray:
    """P[k, k'] = e^{i(t_k' − t_k) z}."""
    t = grid.points
    return np.exp(1j * (t[None, :] - t[:, None]) * z)


# -----------------------------
# Kernel container
# -----------------------------
@dataclass(frozen=True, eq=False)
class GFKernel:
    species: str
    grid: TimeGrid
    base: np.ndarray
    energy: float = 0.0
    rows: Tuple[str, ...] = ()
    cols: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.species not in SPECIES:
            raise ValueError(f"unknown species {self.species!r}")
        if self.base.shape[:2] != (self.grid.n_points, self.grid.n_points):
            raise GridError(f"[greens] kernel shape {self.base.shape} does not match grid {self.grid.describe()}")

    @property
    def values(self) -> np.ndarray:
        if self.species in PHASED_SPECIES and self.energy != 0.0:
            return self.base * phase_matrix(self.grid, self.energy)[:, :, None, None]
        return self.base

    def at_energy(self, energy: float) -> "GFKernel":
        return replace(self, energy=float(energy))

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.values[:, :, i, j]

    def adjoint(self) -> "GFKernel":
        """K†(s,s') = K(s',s)†. retarded ↔ advanced."""
        swap = {"retarded": "advanced", "advanced": "retarded"}
        species = swap.get(self.species, self.species)
        base = np.conj(np.transpose(self.base, (1, 0, 3, 2)))
        return GFKernel(species, self.grid, base, self.energy, self.cols, self.rows)

    def to_volterra(self):
        """θ(0)=1/2 대각을 closure 값(2배)으로 바꾼 VolterraKernel."""
        from .volterra import VolterraKernel

        if self.species not in PHASED_SPECIES:
            raise ValueError("only retarded/advanced kernels are Volterra kernels")
        vals = np.array(self.values)
        idx = np.arange(self.grid.n_points)
        vals[idx, idx] *= 2.0
        return VolterraKernel(self.grid, vals, causal=self.species == "retarded")

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> "GFKernel":
        base = self.base[:, :, list(rows)][:, :, :, list(cols)]
        r = tuple(self.rows[i] for i in rows) if self.rows else ()
        c = tuple(self.cols[j] for j in cols) if self.cols else ()
        return GFKernel(self.species, self.grid, base, self.energy, r, c)


def theta_matrix(grid: TimeGrid) -> np.ndarray:
    """θ(t_k − t_k'), θ(0) = 1/2."""
    n = grid.n_points
    th = np.tril(np.ones((n, n)), -1)
    th[np.arange(n), np.arange(n)] = 0.5
    return th


# -----------------------------
# Heisenberg evolution
# -----------------------------
def evolve_heisenberg(spectrum: Spectrum, x, t: float) -> np.ndarray:
    """τ_K^t(X) = e^{itK} X e^{−itK}."""
    u = spectrum.propagator(t)
    xm = x.toarray() if sparse.issparse(x) else np.asarray(x)
    return u.conj().T @ xm @ u


class VectorFamily:
    """
    혼합상태 성분 α 에 대한 Fock 벡터 족 v_i(t_k) α (K 고유기저 표현).
    build(alpha) → (n_t, n_ops, dim, r).
    """

    def __init__(self, n_ops: int, build: Callable[[np.ndarray], np.ndarray]):
        self.n_ops = n_ops
        self.build = build


class Dynamics:
    """
    상태 ρ, 발전 K, 격자를 묶은 계산기.
    v(s) = D(s) X̃ D(−s) α̃ 를 고유기저에서 만들고 내적을 행렬곱 한 번으로 모은다.
    """

    def __init__(self, state: InitialState, spectrum: Spectrum, grid: TimeGrid, cutoff: float = 1e-14):
        self.state = state
        self.spectrum = spectrum
        self.grid = grid
        p, vecs = state.mixture(cutoff)
        self.alpha = (spectrum.vectors.conj().T @ vecs) * np.sqrt(p)[None, :]
        self.rank = self.alpha.shape[1]
        # phases[k] = e^{−i t_k E}
        self.phases = np.exp(-1j * np.outer(grid.points, spectrum.energies))

    @property
    def dim(self) -> int:
        return self.spectrum.energies.size

    def tilde(self, op) -> np.ndarray:
        return self.spectrum.to_eigenbasis(op)

    def heisenberg(self, ops: Sequence) -> VectorFamily:
        """τ^s(X_i) α 족."""
        stack = np.stack([self.tilde(op) for op in ops]) if len(ops) else np.zeros((0, self.dim, self.dim), dtype=complex)
        phases = self.phases

        def build(alpha: np.ndarray) -> np.ndarray:
            out = np.empty((phases.shape[0], stack.shape[0], self.dim, alpha.shape[1]), dtype=complex)
            for k, ph in enumerate(phases):
                a = alpha * ph[:, None]
                out[k] = np.matmul(stack, a) * np.conj(ph)[None, :, None]
            return out

        return VectorFamily(stack.shape[0], build)

    def overlap(self, ket: VectorFamily, bra: VectorFamily) -> np.ndarray:
        """O[k, k', i, j] = Σ_α p_α ⟨bra_j(t_k') α | ket_i(t_k) α⟩."""
        n_t = self.grid.n_points
        out = np.zeros((n_t * ket.n_ops, n_t * bra.n_ops), dtype=complex)
        for start in range(0, self.rank, ALPHA_CHUNK):
            alpha = self.alpha[:, start : start + ALPHA_CHUNK]
            kv = ket.build(alpha).reshape(n_t * ket.n_ops, -1)
            bv = bra.build(alpha).reshape(n_t * bra.n_ops, -1)
            out += kv @ bv.conj().T
        return out.reshape(n_t, ket.n_ops, n_t, bra.n_ops).transpose(0, 2, 1, 3)

    def expectation(self, op) -> np.ndarray:
        """⟨τ^{t_k}(X)⟩ = Σ_mn ρ̃_nm e^{itE_m} X̃_mn e^{−itE_n}."""
        rho_t = self.tilde(self.state.rho)
        m = rho_t.T * self.tilde(op)
        ph = self.phases
        return np.einsum("tm,mn,tn->t", np.conj(ph), m, ph)


# -----------------------------
# Interacting kernels (ED)
# -----------------------------
def _as_columns(vectors) -> np.ndarray:
    v = np.asarray(vectors, dtype=complex)
    return v[:, None] if v.ndim == 1 else v


def _labels(n: int, labels: Optional[Sequence[str]], prefix: str) -> Tuple[str, ...]:
    return tuple(labels) if labels else tuple(f"{prefix}{i}" for i in range(n))


def gf_lesser_greater(
    state: InitialState,
    spectrum: Spectrum,
    ladder: LadderOperators,
    f,
    g,
    grid: TimeGrid,
    row_labels: Optional[Sequence[str]] = None,
    col_labels: Optional[Sequence[str]] = None,
    dynamics: Optional[Dynamics] = None,
) -> Tuple[GFKernel, GFKernel]:
    """
    ⟨f|G^<(s,s')|g⟩ = +i⟨τ^{s'}(a*(g)) τ^s(a(f))⟩,
    ⟨f|G^>(s,s')|g⟩ = −i⟨τ^s(a(f)) τ^{s'}(a*(g))⟩.
    f, g: 1체 벡터 또는 열벡터 행렬 (N, n).
    """
    fs, gs = _as_columns(f), _as_columns(g)
    dyn = dynamics or Dynamics(state, spectrum, grid)
    try:
        a_f = dyn.heisenberg([ladder.annihilate(v) for v in fs.T])
        a_g = dyn.heisenberg([ladder.annihilate(v) for v in gs.T])
        lesser = 1j * dyn.overlap(ket=a_f, bra=a_g)
        c_f = dyn.heisenberg([ladder.create(v) for v in fs.T])
        c_g = dyn.heisenberg([ladder.create(v) for v in gs.T])
        # ⟨τ^s(a*(f))α | τ^{s'}(a*(g))α⟩ = conj(⟨τ^{s'}(a*(g))α | τ^s(a*(f))α⟩)
        greater = -1j * np.conj(dyn.overlap(ket=c_f, bra=c_g))
    except (MemoryError, np.linalg.LinAlgError) as e:
        raise NumericalFailure("gf_lesser_greater", str(e), e) from e
    rows = _labels(fs.shape[1], row_labels, "f")
    cols = _labels(gs.shape[1], col_labels, "g")
    return (
        GFKernel("lesser", grid, lesser, 0.0, rows, cols),
        GFKernel("greater", grid, greater, 0.0, rows, cols),
    )


def retarded_from_lesser_greater(less: GFKernel, great: GFKernel, energy: float = 0.0) -> Tuple[GFKernel, GFKernel]:
    """G^R = −iθ(s−s')A,  G^A = +iθ(s'−s)A,  A = i(G^> − G^<), θ(0) = 1/2."""
    grid = require_same_grid(less.grid, great.grid)
    spectral = 1j * (great.base - less.base)
    th = theta_matrix(grid)[:, :, None, None]
    ret = -1j * th * spectral
    adv = 1j * np.transpose(th, (1, 0, 2, 3)) * spectral
    return (
        GFKernel("retarded", grid, ret, energy, less.rows, less.cols),
        GFKernel("advanced", grid, adv, energy, less.rows, less.cols),
    )


def gf_retarded_advanced(
    state: InitialState,
    spectrum: Spectrum,
    ladder: LadderOperators,
    f,
    g,
    grid: TimeGrid,
    energy: float = 0.0,
    **kwargs,
) -> Tuple[GFKernel, GFKernel]:
    """−iθ(s−s')e^{i(s'−s)E}⟨{τ^{s'}(a*(g)), τ^s(a(f))}⟩ 와 +iθ(s'−s)(…)."""
    less, great = gf_lesser_greater(state, spectrum, ladder, f, g, grid, **kwargs)
    return retarded_from_lesser_greater(less, great, energy)


def sample_kernels(state: InitialState, system: FockSystem, grid: TimeGrid, dynamics: Optional[Dynamics] = None) -> dict:
    """sample 블록 G^<, G^>, G^R, G^A 한 번에."""
    spec = system.spec
    basis = spec.sample_basis()
    labels = list(spec.sample_sites)
    dyn = dynamics or Dynamics(state, system.spectrum_K, grid)
    less, great = gf_lesser_greater(state, system.spectrum_K, system.ladder, basis, basis, grid, labels, labels, dynamics=dyn)
    ret, adv = retarded_from_lesser_greater(less, great)
    return {"lesser": less, "greater": great, "retarded": ret, "advanced": adv}


# -----------------------------
# Free / decoupled kernels (one-body)
# -----------------------------
def one_body_propagators(h: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """P[k] = e^{−i t_k h}."""
    energies, vecs = linalg.eigh(h)
    ph = np.exp(-1j * np.outer(grid.points, energies))
    return np.einsum("ia,ta,ja->tij", vecs, ph, vecs.conj())


def gf_free(
    h: np.ndarray,
    grid: TimeGrid,
    energy: float = 0.0,
    species: str = "retarded",
    vectors: Optional[np.ndarray] = None,
    varrho: Optional[np.ndarray] = None,
    labels: Optional[Sequence[str]] = None,
) -> GFKernel:
    """
    자유 kernel (정확한 행렬 지수, 구적 오차 없음).
    retarded:  −iθ(s−s') e^{i(s'−s)E} e^{i(s'−s)h}
    advanced:  +iθ(s'−s) e^{i(s'−s)E} e^{i(s'−s)h}
    lesser:    +i e^{−ish} ϱ e^{is'h}      (h_R, ϱ_R 이면 iϱ_R e^{i(s'−s)h_R})
    greater:   −i e^{−ish} (I − ϱ) e^{is'h}
    """
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10:
        raise NumericalFailure("gf_free", "generator must be Hermitian")
    n = h.shape[0]
    vecs = np.eye(n, dtype=complex) if vectors is None else _as_columns(vectors)
    props = one_body_propagators(h, grid)
    left = np.einsum("ia,tij->taj", vecs.conj(), props)  # ⟨v_a| e^{−ish}
    right = np.conj(left)  # e^{is'h} |v_b⟩ 를 (t, b, j) 로: conj(⟨v_b|e^{−is'h}) = e^{is'h}|v_b⟩ 성분
    if species in PHASED_SPECIES:
        prop = np.einsum("taj,ubj->tuab", left, right)
        th = theta_matrix(grid)
        if species == "retarded":
            base = -1j * th[:, :, None, None] * prop
        else:
            base = 1j * th.T[:, :, None, None] * prop
    elif species in ("lesser", "greater"):
        if varrho is None:
            raise NumericalFailure("gf_free", f"{species} kernel needs a one-particle density")
        occ = np.asarray(varrho, dtype=complex)
        middle = occ if species == "lesser" else np.eye(n) - occ
        prop = np.einsum("taj,jk,ubk->tuab", left, middle, right)
        base = (1j if species == "lesser" else -1j) * prop
    else:
        raise ValueError(f"gf_free does not build {species!r} kernels")
    lab = _labels(vecs.shape[1], labels, "v")
    return GFKernel(species, grid, base, float(energy) if species in PHASED_SPECIES else 0.0, lab, lab)


def gf_decoupled(h_D: np.ndarray, varrho_R: np.ndarray, grid: TimeGrid, vectors=None, energy: float = 0.0) -> dict:
    """decoupled G_D^{<,>,R,A} (lead 블록은 h_R, ϱ_R 로 결정)."""
    out = {sp: gf_free(h_D, grid, energy, sp, vectors) for sp in PHASED_SPECIES}
    for sp in ("lesser", "greater"):
        out[sp] = gf_free(h_D, grid, 0.0, sp, vectors, varrho=varrho_R)
    return out


def one_body_lesser(h: np.ndarray, varrho: np.ndarray, grid: TimeGrid, vectors=None) -> GFKernel:
    """ξ = 0 오라클: ⟨f|e^{−ish} ϱ e^{is'h}|g⟩ · i."""
    return gf_free(h, grid, 0.0, "lesser", vectors, varrho=varrho)


# -----------------------------
# Spectral / Keldysh
# -----------------------------
def spectral_and_keldysh(less: GFKernel, great: GFKernel, ret: GFKernel, adv: GFKernel) -> Tuple[GFKernel, GFKernel]:
    """A = i(G^> − G^<),  G^K = G^< + G^>."""
    grid = require_same_grid(less.grid, great.grid, ret.grid, adv.grid)
    for k in (great, ret, adv):
        if k.base.shape != less.base.shape:
            raise GridError("[greens] kernels live on different blocks")
    spectral = 1j * (great.base - less.base)
    keldysh = less.base + great.base
    return (
        GFKernel("spectral", grid, spectral, 0.0, less.rows, less.cols),
        GFKernel("keldysh", grid, keldysh, 0.0, less.rows, less.cols),
    )


def spectral_form_residual(less: GFKernel, great: GFKernel, ret: GFKernel, adv: GFKernel) -> float:
    """‖i(G^>−G^<) − i(G^R−G^A)‖_grid (E = 0 기준값으로 비교)."""
    a1 = 1j * (great.base - less.base)
    a2 = 1j * (ret.base - adv.base)
    return float(np.max(np.abs(a1 - a2)))


def lesser_hermiticity_residual(kernel: GFKernel) -> float:
    """‖G(s,s')† + G(s',s)‖ (lesser/greater 는 반-에르미트 쌍)."""
    b = kernel.base
    return float(np.max(np.abs(np.conj(np.transpose(b, (1, 0, 3, 2))) + b)))


# -----------------------------
# Duhamel
# -----------------------------
def duhamel_residual(spec_K: Spectrum, spec_KD: Spectrum, h_t: np.ndarray, x, t: float, n_quad: int = 400) -> float:
    """
    ‖τ_K^t(X) − τ_{K_D}^t(X) − ∫_0^t τ_K^s(i[H_T, τ_{K_D}^{t−s}(X)]) ds‖ (trapezoid, n_quad 구간).
    """
    xm = x.toarray() if sparse.issparse(x) else np.asarray(x)
    s_pts = np.linspace(0.0, t, n_quad + 1)
    wts = np.full(n_quad + 1, t / n_quad)
    wts[0] = wts[-1] = 0.5 * t / n_quad
    acc = np.zeros_like(xm, dtype=complex)
    for s, w in zip(s_pts, wts):
        y = evolve_heisenberg(spec_KD, xm, t - s)
        acc += w * evolve_heisenberg(spec_K, 1j * (h_t @ y - y @ h_t), s)
    lhs = evolve_heisenberg(spec_K, xm, t) - evolve_heisenberg(spec_KD, xm, t)
    return float(np.max(np.abs(lhs - acc)))
