# -*- coding: utf-8 -*-
"""
errors.py
- negf_core 전역 예외 계층
- scenario_runner 가 종료 코드(2/3/4)로 매핑한다
"""
from __future__ import annotations

from typing import Optional


class NegfError(RuntimeError):
    """모든 negf_core 예외의 베이스."""


class ModelValidationError(NegfError):
    """ModelSpec 불변식 위반. field 에 문제 필드 이름을 담는다."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"[model.{field}] {message}")


class FockCapExceeded(NegfError):
    def __init__(self, n_modes: int, cap: int):
        self.n_modes = n_modes
        self.cap = cap
        super().__init__(f"[fock] {n_modes} modes exceed the configured cap of {cap} (dimension 2^{n_modes})")


class StateError(NegfError):
    """초기 상태가 연산의 전제(예: sample vacuum)를 만족하지 않음."""


class GridError(NegfError):
    """TimeGrid 불일치 / 지평선 밖의 시간 요청."""


class VolterraSolveError(NegfError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"[volterra] step {step}: {message}")


class NumericalFailure(NegfError):
    """수치 연산 실패. operation 에 실패한 연산 이름을 담는다."""

    def __init__(self, operation: str, message: str, cause: Optional[BaseException] = None):
        self.operation = operation
        self.cause = cause
        super().__init__(f"[{operation}] {message}")
