# -*- coding: utf-8 -*-
"""
config.py
- 시나리오 JSON 한 개 = ScenarioConfig (model / grid / run 블록)
- 행렬은 행 우선 중첩 배열, 원소는 [re, im] 쌍 또는 실수
- 검증 실패는 ConfigError(field, message) 로 통일 (CLI 종료 코드 2)
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from negf_core.errors import ModelValidationError, NegfError
from negf_core.greens import TimeGrid
from negf_core.model import LeadSpec, ModelSpec, validate_model

Entry = Union[float, Tuple[float, float]]
Matrix = List[List[Entry]]
Vector = List[Entry]

PIPELINES = ("currents", "identity-audit", "selfenergy-audit")


class ConfigError(NegfError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"[config.{field}] {message}")


def _entry(v: Entry) -> complex:
    if isinstance(v, (tuple, list)):
        return complex(v[0], v[1])
    return complex(v)


def to_complex_matrix(m: Matrix) -> np.ndarray:
    return np.array([[_entry(v) for v in row] for row in m], dtype=complex)


def to_complex_vector(v: Vector) -> np.ndarray:
    return np.array([_entry(x) for x in v], dtype=complex)


def _square(m: Matrix, n: int) -> bool:
    return len(m) == n and all(len(row) == n for row in m)


# -----------------------------
# Blocks
# -----------------------------
class LeadBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = ""
    h: Matrix
    psi: Vector
    phi: Vector
    d: float
    beta: float = Field(gt=0)
    mu: float = 0.0

    @model_validator(mode="after")
    def _dims(self):
        n = len(self.h)
        if not _square(self.h, n):
            raise ValueError("h must be a square matrix")
        if len(self.psi) != n:
            raise ValueError(f"psi has {len(self.psi)} entries, lead has {n} sites")
        return self


class ModelBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sample_sites: List[str] = Field(min_length=1)
    h_S: Matrix
    leads: List[LeadBlock] = Field(default_factory=list)
    w: List[List[float]]
    xi: float = 0.0
    sample_varrho: Optional[Matrix] = None

    @field_validator("w")
    @classmethod
    def _zero_diagonal(cls, w: List[List[float]]):
        for i, row in enumerate(w):
            if i < len(row) and row[i] != 0:
                raise ValueError("w must have zero diagonal, w(x,x) = 0")
        return w

    @model_validator(mode="after")
    def _dims(self):
        n = len(self.sample_sites)
        if not _square(self.h_S, n):
            raise ValueError(f"h_S must be {n}x{n}")
        if not _square(self.w, n):
            raise ValueError(f"w must be {n}x{n}")
        if self.sample_varrho is not None and not _square(self.sample_varrho, n):
            raise ValueError(f"sample_varrho must be {n}x{n}")
        for j, lead in enumerate(self.leads):
            if len(lead.phi) != n:
                raise ValueError(f"leads[{j}].phi has {len(lead.phi)} entries, sample has {n} sites")
        return self


class GridBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: float = Field(ge=0)
    dt: float = Field(gt=0)

    @model_validator(mode="after")
    def _integral(self):
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"T/dt = {ratio:.12g} must be an integer")
        return self


class RunBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pipeline: Literal["currents", "identity-audit", "selfenergy-audit"] = "currents"
    probes: List[int] = Field(default_factory=list)
    xi_sweep: List[float] = Field(default_factory=list)
    energies: List[float] = Field(default_factory=lambda: [0.0])
    etas: List[float] = Field(default_factory=lambda: [0.0, 0.5, 2.0])
    out_dir: Optional[str] = None
    tolerances: Dict[str, float] = Field(default_factory=dict)
    order_check: bool = False
    seed: Optional[int] = None

    @field_validator("etas")
    @classmethod
    def _non_negative(cls, etas: List[float]):
        if any(e < 0 for e in etas):
            raise ValueError("eta values must be >= 0")
        return etas


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    model: ModelBlock
    grid: GridBlock
    run: RunBlock = Field(default_factory=RunBlock)

    @model_validator(mode="after")
    def _probes(self):
        n = len(self.model.leads)
        for j in self.run.probes:
            if not 0 <= j < n:
                raise ValueError(f"probe lead {j} does not exist ({n} leads)")
        return self

    def to_model_spec(self) -> ModelSpec:
        m = self.model
        leads = tuple(
            LeadSpec(
                h=to_complex_matrix(lb.h),
                psi=to_complex_vector(lb.psi),
                phi=to_complex_vector(lb.phi),
                d=float(lb.d),
                beta=float(lb.beta),
                mu=float(lb.mu),
                name=lb.name or f"L{j + 1}",
            )
            for j, lb in enumerate(m.leads)
        )
        spec = ModelSpec(
            sample_sites=tuple(m.sample_sites),
            h_S=to_complex_matrix(m.h_S),
            leads=leads,
            w=np.array(m.w, dtype=float),
            xi=float(m.xi),
        )
        try:
            return validate_model(spec)
        except ModelValidationError as e:
            raise ConfigError(f"model.{e.field}", str(e)) from e

    def sample_varrho(self) -> Optional[np.ndarray]:
        sv = self.model.sample_varrho
        return None if sv is None else to_complex_matrix(sv)

    def to_grid(self) -> TimeGrid:
        return TimeGrid(self.grid.T, self.grid.dt)


# -----------------------------
# Loading / overrides
# -----------------------------
def _from_validation_error(e: ValidationError) -> ConfigError:
    err = e.errors()[0]
    field = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
    msg = err.get("msg", str(e))
    if msg.startswith("Value error, "):
        msg = msg[len("Value error, ") :]
    return ConfigError(field, msg)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise _from_validation_error(e) from e


def load_config(path) -> Tuple[ScenarioConfig, str]:
    """(config, 원문 텍스트). 원문은 config hash 에 쓴다."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("<file>", f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<json>", f"{path}: {e}") from e
    return parse_config(data), text


def apply_overrides(
    cfg: ScenarioConfig,
    dt: Optional[float] = None,
    xi: Optional[float] = None,
    seed: Optional[int] = None,
    pipeline: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> ScenarioConfig:
    """CLI 덮어쓰기 후 재검증."""
    data = cfg.model_dump()
    if dt is not None:
        data["grid"]["dt"] = dt
    if xi is not None:
        data["model"]["xi"] = xi
    if seed is not None:
        data["run"]["seed"] = seed
    if pipeline is not None:
        data["run"]["pipeline"] = pipeline
    if out_dir is not None:
        data["run"]["out_dir"] = out_dir
    return parse_config(data)


def canonical_json(cfg: ScenarioConfig) -> str:
    """덮어쓰기까지 반영된 정규화 JSON (config hash 용)."""
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
