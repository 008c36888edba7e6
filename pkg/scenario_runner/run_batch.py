# -*- coding: utf-8 -*-
"""
run_batch.py - 시나리오 CLI

    python -m scenario_runner.run_batch run scenarios/interacting-small.json --out negf_out --dt 0.0125

종료 코드
  0  모든 잔차 통과
  1  잔차 실패 또는 산출물 쓰기 실패
  2  config / 모델 검증 실패 (필드 이름 포함)
  3  Fock cap 초과
  4  수치 실패 (연산 이름 포함)
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from negf_core.errors import FockCapExceeded, GridError, ModelValidationError, NegfError

from .config import PIPELINES, ConfigError, apply_overrides, load_config
from .export import emit_outputs
from .main_controller import ScenarioRunner
from .utils_common import ArtifactWriteError, load_env, out_dir_default, setup_logging

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_CONFIG = 2
EXIT_FOCK_CAP = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="negf-scenario", description="NEGF 항등식 검증 시나리오 실행기")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="시나리오 JSON 한 개 실행")
    run.add_argument("config", help="시나리오 JSON 경로")
    run.add_argument("--out", default=None, help="결과 폴더 (기본: run.out_dir → NEGF_OUT_DIR)")
    run.add_argument("--dt", type=float, default=None, help="시간 간격 덮어쓰기")
    run.add_argument("--xi", type=float, default=None, help="상호작용 세기 ξ 덮어쓰기")
    run.add_argument("--seed", type=int, default=None, help="무작위 검사용 seed")
    run.add_argument("--pipeline", choices=PIPELINES, default=None, help="실행할 pipeline")
    run.add_argument("--quiet", action="store_true", help="진행 막대 숨김")
    return parser


def run_scenario(args) -> int:
    # 실행 전 검증 (config / 모델 / 격자) → 2
    try:
        cfg, text = load_config(args.config)
        cfg = apply_overrides(cfg, dt=args.dt, xi=args.xi, seed=args.seed, pipeline=args.pipeline)
        runner = ScenarioRunner(cfg, text)
    except (ConfigError, ModelValidationError, GridError) as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    # 실행 중 실패는 격자 검사라도 수치 실패 → 4
    try:
        success, results = runner.run_all_steps(progress=not args.quiet)
    except FockCapExceeded as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_FOCK_CAP
    except NegfError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    out_dir = Path(args.out or cfg.run.out_dir or out_dir_default())
    try:
        written = emit_outputs(runner.bundle(), out_dir)
    except ArtifactWriteError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_RESIDUAL

    for line in results:
        print(line)
    failures = runner.report.failures()
    if failures:
        print(f"⚠️ 잔차 {len(failures)}개 실패:")
        for e in failures:
            print(f"   - {e.name}: {e.residual:.3e} > {e.tolerance:.1e}")
    else:
        print(f"✅ 완료! 항등식 {len(runner.report.entries)}개 모두 통과.")
    print(f"   - 결과 폴더: '{out_dir}' ({len(written)}개 파일)")
    return EXIT_OK if success else EXIT_RESIDUAL


def main(argv: Optional[List[str]] = None) -> int:
    load_env()
    setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_scenario(args)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
