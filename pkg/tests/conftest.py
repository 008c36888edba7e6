# -*- coding: utf-8 -*-
"""공용 fixture: 작은 모델 (2-site sample + 1-site lead 두 개, dim 16) 과 격자."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))

from negf_core.fock import build_fock_system  # noqa: E402
from negf_core.greens import Dynamics, TimeGrid  # noqa: E402
from negf_core.model import LeadSpec, ModelSpec, reference_instance, validate_model  # noqa: E402
from negf_core.states import initial_product_state  # noqa: E402


@pytest.fixture
def grid() -> TimeGrid:
    return TimeGrid(1.5, 0.025)


@pytest.fixture
def coarse_grid() -> TimeGrid:
    return TimeGrid(1.0, 0.05)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_spec() -> ModelSpec:
    """N = 4 모드. w(s1,s2) = 1, ξ = 0.5."""
    return reference_instance(xi=0.5, lead_sites=1)


@pytest.fixture
def free_spec(small_spec) -> ModelSpec:
    return small_spec.with_xi(0.0)


@pytest.fixture
def tiny_spec() -> ModelSpec:
    """1-site sample + 1-site lead. 상호작용 없음 (w 는 1x1 영행렬)."""
    lead = LeadSpec(
        h=np.array([[0.3]], dtype=complex),
        psi=np.array([1.0], dtype=complex),
        phi=np.array([1.0], dtype=complex),
        d=0.5,
        beta=1.5,
        mu=0.1,
        name="L1",
    )
    spec = ModelSpec(
        sample_sites=("s",),
        h_S=np.array([[-0.2]], dtype=complex),
        leads=(lead,),
        w=np.zeros((1, 1)),
        xi=0.0,
    )
    return validate_model(spec)


@pytest.fixture
def make_setup(grid):
    """(system, state, dyn) 팩토리."""

    def _make(spec: ModelSpec, sample_varrho=None, on_grid: TimeGrid = None):
        g = on_grid or grid
        system = build_fock_system(spec)
        state = initial_product_state(spec, system, sample_varrho)
        dyn = Dynamics(state, system.spectrum_K, g)
        return system, state, dyn

    return _make


@pytest.fixture
def scenario_dir() -> Path:
    return ROOT / "scenarios"
