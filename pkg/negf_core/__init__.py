# -*- coding: utf-8 -*-
"""negf_core: 유한 sample + lead 계의 NEGF 수치 코어 (ED 오라클 포함)."""

__version__ = "0.3.0"
