# -*- coding: utf-8 -*-
"""
utils_common.py
- .env 로드 + 환경변수 헬퍼 (NEGF_FOCK_CAP, NEGF_OUT_DIR, NEGF_LOG_LEVEL, NEGF_VERSION_TAG)
- 콘솔 로깅 설정: "[ INFO ] name: message"
- with_retry: 일시적 OSError 에 지수 백오프 + 지터
- atomic_write_*: 임시파일 + rename
"""
from __future__ import annotations

import hashlib
import logging
import os
import random
import tempfile
import time
from pathlib import Path
from typing import Callable, Optional, Tuple, Type

from dotenv import load_dotenv

from negf_core import __version__

DEFAULT_FOCK_CAP = 14
DEFAULT_OUT_DIR = "negf_out"


class ArtifactWriteError(OSError):
    """산출물 쓰기 실패. path 에 대상 경로를 담는다."""

    def __init__(self, path: Path, cause: BaseException):
        self.path = Path(path)
        self.cause = cause
        super().__init__(f"[export] cannot write {self.path}: {cause}")


# -----------------------------
# ENV
# -----------------------------
def load_env() -> None:
    """여러 위치에서 .env 탐색하여 로드"""
    base = Path(__file__).resolve().parent
    for p in [base / ".env", base.parent / ".env", Path.cwd() / ".env"]:
        if p.exists():
            load_dotenv(p, override=False)
            return
    load_dotenv(override=False)


def get_env(name: str, default: str = "") -> str:
    return os.getenv(name, default).strip()


def get_bool_env(name: str, default: bool = False) -> bool:
    v = os.getenv(name, "").strip().lower()
    if v in ("1", "true", "yes", "y"):
        return True
    if v in ("0", "false", "no", "n"):
        return False
    return default


def get_float_env(name: str, default: float) -> float:
    v = os.getenv(name, "").strip()
    if not v:
        return default
    try:
        return float(v)
    except ValueError:
        logging.getLogger(__name__).warning("%s=%r is not a number, using %s", name, v, default)
        return default


def fock_cap() -> int:
    return int(get_float_env("NEGF_FOCK_CAP", DEFAULT_FOCK_CAP))


def out_dir_default() -> str:
    return get_env("NEGF_OUT_DIR", DEFAULT_OUT_DIR) or DEFAULT_OUT_DIR


def version_tag() -> str:
    return get_env("NEGF_VERSION_TAG", __version__) or __version__


# -----------------------------
# Logging
# -----------------------------
def setup_logging(level: Optional[str] = None) -> None:
    level = (level or get_env("NEGF_LOG_LEVEL", "INFO") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="[ %(levelname)s ] %(name)s: %(message)s",
        force=True,
    )


# -----------------------------
# Retry (일시적 IO 오류)
# -----------------------------
def with_retry(
    fn: Callable,
    retries: int = 5,
    base_delay: float = 0.1,
    backoff: float = 1.8,
    max_delay: float = 2.0,
    retry_on: Tuple[Type[BaseException], ...] = (OSError,),
):
    """
    rename / 쓰기 재시도 래퍼
    - retry_on 예외에서 지수 백오프 + 지터로 재시도
    - 그 외 에러는 즉시 전파
    """
    last_err = None
    delay = base_delay
    for attempt in range(1, retries + 1):
        try:
            return fn()
        except retry_on as e:
            last_err = e
            if attempt < retries:
                time.sleep(min(max_delay, delay + random.uniform(0, delay * 0.3)))
                delay = min(max_delay, delay * backoff)
                continue
            break
    raise last_err


# -----------------------------
# Atomic writes
# -----------------------------
def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    tmp_name = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False) as fh:
            fh.write(data)
            tmp_name = fh.name
        with_retry(lambda: os.replace(tmp_name, path))
    except OSError as e:
        if tmp_name and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise ArtifactWriteError(path, e) from e
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
