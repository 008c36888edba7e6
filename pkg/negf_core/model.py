# -*- coding: utf-8 -*-
"""
model.py
- 1체 설정: sample(유한 사이트) + 유한 lead 체인 + tunneling
- 모드 순서: sample 사이트 먼저, 그 다음 lead 1..m (fock 모듈과 공유, 고정)
- lead 저수지 밀도 ϱ_R, lead 스펙트럴 측도 ν_j (ED 로 얻는 원자 측도)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.special import expit

from .errors import ModelValidationError

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-12


# -----------------------------
# Domain types
# -----------------------------
@dataclass(frozen=True, eq=False)
class LeadSpec:
    """유한 lead j. psi 는 lead 공간, phi 는 sample 공간의 단위벡터."""

    h: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    d: float
    beta: float
    mu: float
    name: str = ""

    @property
    def n_sites(self) -> int:
        return int(self.h.shape[0])


@dataclass(frozen=True, eq=False)
class ModelSpec:
    sample_sites: Tuple[str, ...]
    h_S: np.ndarray
    leads: Tuple[LeadSpec, ...]
    w: np.ndarray
    xi: float = 0.0

    # ---- 파생 치수 ----
    @property
    def n_sample(self) -> int:
        return len(self.sample_sites)

    @property
    def n_modes(self) -> int:
        return self.n_sample + sum(lead.n_sites for lead in self.leads)

    def lead_slice(self, j: int) -> slice:
        start = self.n_sample + sum(lead.n_sites for lead in self.leads[:j])
        return slice(start, start + self.leads[j].n_sites)

    @property
    def sample_slice(self) -> slice:
        return slice(0, self.n_sample)

    def mode_labels(self) -> List[str]:
        labels = list(self.sample_sites)
        for j, lead in enumerate(self.leads):
            tag = lead.name or f"L{j + 1}"
            labels.extend(f"{tag}:{k}" for k in range(lead.n_sites))
        return labels

    # ---- 전체 1체 공간으로의 임베딩 ----
    def sample_vector(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_modes, dtype=complex)
        out[self.sample_slice] = v
        return out

    def lead_vector(self, j: int, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_modes, dtype=complex)
        out[self.lead_slice(j)] = v
        return out

    def site_vector(self, x: int) -> np.ndarray:
        out = np.zeros(self.n_modes, dtype=complex)
        out[x] = 1.0
        return out

    def sample_basis(self) -> np.ndarray:
        """sample 사이트 δ_x 를 열로 갖는 (N, |S|) 행렬."""
        return np.eye(self.n_modes, self.n_sample, dtype=complex)

    def with_xi(self, xi: float) -> "ModelSpec":
        return ModelSpec(self.sample_sites, self.h_S, self.leads, self.w, float(xi))

    def with_couplings(self, d: Sequence[float]) -> "ModelSpec":
        leads = tuple(
            LeadSpec(lead.h, lead.psi, lead.phi, float(dj), lead.beta, lead.mu, lead.name)
            for lead, dj in zip(self.leads, d)
        )
        return ModelSpec(self.sample_sites, self.h_S, leads, self.w, self.xi)


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """원자 측도 ν = Σ_k w_k δ_{E_k}."""

    energies: np.ndarray
    weights: np.ndarray

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.energies.tolist(), self.weights.tolist()))

    def moment(self, m: int) -> float:
        return float(np.sum(self.weights * self.energies**m))


class OneBody(NamedTuple):
    h_D: np.ndarray
    h_T: np.ndarray
    h: np.ndarray


# -----------------------------
# Validation
# -----------------------------
def _is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def validate_model(spec: ModelSpec) -> ModelSpec:
    """불변식 검사. 위반 시 ModelValidationError(field, ...)."""
    n_s = spec.n_sample
    h_S = np.asarray(spec.h_S)
    if h_S.shape != (n_s, n_s):
        raise ModelValidationError("h_S", f"shape {h_S.shape} does not match {n_s} sample sites")
    if not _is_hermitian(h_S):
        raise ModelValidationError("h_S", "must be Hermitian to 1e-12")

    w = np.asarray(spec.w)
    if w.shape != (n_s, n_s):
        raise ModelValidationError("w", f"shape {w.shape} does not match {n_s} sample sites")
    if np.any(np.abs(np.imag(w)) > 0):
        raise ModelValidationError("w", "must be real")
    if np.any(np.abs(np.diag(w)) > 0):
        raise ModelValidationError("w", "must have zero diagonal, w(x,x) = 0")
    if np.max(np.abs(w - w.T), initial=0.0) > 0:
        raise ModelValidationError("w", "must be symmetric, w(x,y) = w(y,x)")
    if np.max(np.abs(w), initial=0.0) > 1.0 + 1e-12:
        raise ModelValidationError("w", "must be normalized, sup|w| <= 1")
    if not np.isfinite(spec.xi):
        raise ModelValidationError("xi", "must be finite")

    for j, lead in enumerate(spec.leads):
        tag = f"leads[{j}]"
        if lead.h.ndim != 2 or lead.h.shape[0] != lead.h.shape[1]:
            raise ModelValidationError(f"{tag}.h", "must be a square matrix")
        if not _is_hermitian(np.asarray(lead.h)):
            raise ModelValidationError(f"{tag}.h", "must be Hermitian to 1e-12")
        if lead.psi.shape != (lead.n_sites,):
            raise ModelValidationError(f"{tag}.psi", f"dimension {lead.psi.shape} does not match lead size {lead.n_sites}")
        if lead.phi.shape != (n_s,):
            raise ModelValidationError(f"{tag}.phi", f"dimension {lead.phi.shape} does not match sample size {n_s}")
        if abs(np.linalg.norm(lead.psi) - 1.0) > NORM_TOL:
            raise ModelValidationError(f"{tag}.psi", "must be a unit vector")
        if abs(np.linalg.norm(lead.phi) - 1.0) > NORM_TOL:
            raise ModelValidationError(f"{tag}.phi", "must be a unit vector")
        if not (lead.beta > 0):
            raise ModelValidationError(f"{tag}.beta", "inverse temperature must be > 0")
        if not np.isfinite(lead.d):
            raise ModelValidationError(f"{tag}.d", "coupling must be finite")
    return spec


# -----------------------------
# Builders
# -----------------------------
def chain_hamiltonian(n_sites: int, hopping: float = 1.0, onsite: float = 0.0) -> np.ndarray:
    """균일 tight-binding 체인 (최근접 hopping 값 그대로 off-diagonal 에 둔다)."""
    h = np.diag(np.full(n_sites, onsite, dtype=complex))
    if n_sites > 1:
        off = np.full(n_sites - 1, hopping, dtype=complex)
        h += np.diag(off, 1) + np.diag(off, -1)
    return h


def chain_lead(
    n_sites: int,
    phi: np.ndarray,
    d: float,
    beta: float,
    mu: float,
    hopping: float = 1.0,
    onsite: float = 0.0,
    name: str = "",
) -> LeadSpec:
    """contact site(0번)를 ψ 로 갖는 체인 lead."""
    psi = np.zeros(n_sites, dtype=complex)
    psi[0] = 1.0
    return LeadSpec(
        h=chain_hamiltonian(n_sites, hopping, onsite),
        psi=psi,
        phi=np.asarray(phi, dtype=complex),
        d=float(d),
        beta=float(beta),
        mu=float(mu),
        name=name,
    )


def reference_instance(
    xi: float = 0.5,
    d: Tuple[float, float] = (0.7, 0.7),
    beta: Tuple[float, float] = (1.0, 2.0),
    mu: Tuple[float, float] = (0.4, -0.4),
    lead_sites: int = 3,
) -> ModelSpec:
    """2-site sample + 3-site 체인 lead 두 개 (w(1,2)=1). 번들 시나리오 interacting-small 과 같은 모델."""
    phis = (np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex))
    leads = tuple(
        chain_lead(lead_sites, phis[j], d[j], beta[j], mu[j], name=f"L{j + 1}") for j in range(2)
    )
    spec = ModelSpec(
        sample_sites=("s1", "s2"),
        h_S=chain_hamiltonian(2, 1.0),
        leads=leads,
        w=np.array([[0.0, 1.0], [1.0, 0.0]]),
        xi=float(xi),
    )
    return validate_model(spec)


def build_one_body(spec: ModelSpec) -> OneBody:
    """h_D = h_S ⊕ h_1 ⊕ … ⊕ h_m,  h_T = Σ_j d_j(|ψ_j⟩⟨φ_j| + |φ_j⟩⟨ψ_j|),  h = h_D + h_T."""
    validate_model(spec)
    n = spec.n_modes
    h_D = np.zeros((n, n), dtype=complex)
    h_D[spec.sample_slice, spec.sample_slice] = spec.h_S
    h_T = np.zeros((n, n), dtype=complex)
    for j, lead in enumerate(spec.leads):
        sl = spec.lead_slice(j)
        h_D[sl, sl] = lead.h
        psi = spec.lead_vector(j, lead.psi)
        phi = spec.sample_vector(lead.phi)
        h_T += lead.d * (np.outer(psi, phi.conj()) + np.outer(phi, psi.conj()))
    return OneBody(h_D=h_D, h_T=h_T, h=h_D + h_T)


def fermi_factor(energies: np.ndarray, beta: float, mu: float) -> np.ndarray:
    """(1 + e^{β(E−μ)})^{-1}. expit 로 큰 β 에서도 overflow 없음."""
    return expit(-beta * (np.asarray(energies, dtype=float) - mu))


def lead_density(lead: LeadSpec) -> np.ndarray:
    """lead 공간 위의 (I + e^{β(h_j−μ_j)})^{-1}."""
    if not _is_hermitian(np.asarray(lead.h)):
        raise ModelValidationError("leads.h", "must be Hermitian to 1e-12")
    energies, vecs = linalg.eigh(lead.h)
    occ = fermi_factor(energies, lead.beta, lead.mu)
    return (vecs * occ) @ vecs.conj().T


def fermi_reservoir_density(spec: ModelSpec) -> np.ndarray:
    """ϱ_R = ⊕_j (I + e^{β_j(h_j−μ_j)})^{-1}, sample 블록은 0."""
    n = spec.n_modes
    rho = np.zeros((n, n), dtype=complex)
    for j, lead in enumerate(spec.leads):
        sl = spec.lead_slice(j)
        rho[sl, sl] = lead_density(lead)
    return rho


def lead_spectral_measure(lead: LeadSpec) -> SpectralMeasure:
    """ψ_j 에 대한 h_j 의 스펙트럴 측도: 고유값 E_k, 가중치 |⟨e_k|ψ_j⟩|²."""
    energies, vecs = linalg.eigh(lead.h)
    weights = np.abs(vecs.conj().T @ lead.psi) ** 2
    total = float(weights.sum())
    if abs(total - 1.0) > 1e-10:
        raise ModelValidationError("leads.psi", f"spectral weights sum to {total:.3e}, expected 1")
    return SpectralMeasure(energies=np.asarray(energies, dtype=float), weights=weights / total)


def coupled_pairs(spec: ModelSpec, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """lead j 의 (φ_j, ψ_j) 를 전체 1체 공간 벡터로."""
    lead = spec.leads[j]
    return spec.sample_vector(lead.phi), spec.lead_vector(j, lead.psi)


def describe(spec: ModelSpec, extra: Optional[dict] = None) -> dict:
    info = {
        "sample_sites": list(spec.sample_sites),
        "n_modes": spec.n_modes,
        "leads": [
            {"n_sites": lead.n_sites, "d": lead.d, "beta": lead.beta, "mu": lead.mu}
            for lead in spec.leads
        ],
        "xi": spec.xi,
    }
    if extra:
        info.update(extra)
    return info
