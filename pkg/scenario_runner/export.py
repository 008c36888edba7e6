# -*- coding: utf-8 -*-
"""
export.py
- RunBundle → 디렉터리 (CSV 본문 + JSON sidecar), 모든 파일은 임시파일 + rename
- CSV 본문에는 타임스탬프가 없다 (같은 config → 같은 바이트). 시각/버전/hash 는 sidecar 에만
- load_bundle: 뷰어용 역방향 로더
"""
from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .main_controller import KernelExport, RunBundle
from .utils_common import atomic_write_text, sha256_text, version_tag

log = logging.getLogger(__name__)

REPORT_CSV = "residual_report.csv"
REPORT_JSON = "residual_report.json"
CURRENTS_CSV = "currents.csv"
KERNEL_DIR = "kernels"
FLOAT_FORMAT = "%.16e"


def _csv_text(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=str) + "\n"


def kernel_frame(k: KernelExport) -> pd.DataFrame:
    """행: (k, k', i, j) 사전식 순서. 열: k, kp, t, tp, row, col, re, im."""
    n = k.grid.n_points
    d_r, d_c = k.values.shape[2], k.values.shape[3]
    kk, kp, ii, jj = np.meshgrid(np.arange(n), np.arange(n), np.arange(d_r), np.arange(d_c), indexing="ij")
    t = k.grid.points
    vals = k.values.reshape(-1)
    return pd.DataFrame(
        {
            "k": kk.reshape(-1),
            "kp": kp.reshape(-1),
            "t": t[kk.reshape(-1)],
            "tp": t[kp.reshape(-1)],
            "row": np.asarray(k.rows, dtype=object)[ii.reshape(-1)] if k.rows else ii.reshape(-1),
            "col": np.asarray(k.cols, dtype=object)[jj.reshape(-1)] if k.cols else jj.reshape(-1),
            "re": vals.real,
            "im": vals.imag,
        }
    )


def _sidecar(bundle: RunBundle, extra: Optional[dict] = None) -> dict:
    grid = bundle.config.to_grid()
    info = {
        "config_hash": sha256_text(bundle.config_text),
        "scenario": bundle.config.name,
        "pipeline": bundle.config.run.pipeline,
        "grid": grid.describe(),
        "version": version_tag(),
        "written_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        info.update(extra)
    return info


def emit_outputs(bundle: RunBundle, out_dir) -> List[Path]:
    """번들을 out_dir 에 쓴다. probe 가 비었으면 report 파일만."""
    out = Path(out_dir)
    written: List[Path] = []

    report = bundle.report
    written.append(atomic_write_text(out / REPORT_CSV, _csv_text(report.to_frame())))
    written.append(
        atomic_write_text(
            out / REPORT_JSON,
            _json_text(_sidecar(bundle, {"passed": report.passed, "n_entries": len(report.entries), "steps": bundle.step_log})),
        )
    )

    if bundle.traces:
        frame = pd.concat([tr.to_frame() for tr in bundle.traces], ignore_index=True)
        written.append(atomic_write_text(out / CURRENTS_CSV, _csv_text(frame)))

    for k in bundle.kernels:
        base = out / KERNEL_DIR / k.name
        written.append(atomic_write_text(base.with_suffix(".csv"), _csv_text(kernel_frame(k))))
        meta = {"kind": k.kind, "energy": k.energy, "rows": list(k.rows), "cols": list(k.cols)}
        written.append(atomic_write_text(base.with_suffix(".json"), _json_text(_sidecar(bundle, meta))))

    log.info("wrote %d files to %s", len(written), out)
    return written


def load_bundle(out_dir) -> Dict[str, object]:
    """{report, sidecar, currents (없으면 None), kernels (이름 목록)}."""
    out = Path(out_dir)
    report_path = out / REPORT_CSV
    if not report_path.exists():
        raise FileNotFoundError(f"{report_path} not found")
    sidecar_path = out / REPORT_JSON
    currents_path = out / CURRENTS_CSV
    kernel_dir = out / KERNEL_DIR
    return {
        "report": pd.read_csv(report_path),
        "sidecar": json.loads(sidecar_path.read_text(encoding="utf-8")) if sidecar_path.exists() else {},
        "currents": pd.read_csv(currents_path) if currents_path.exists() else None,
        "kernels": sorted(p.stem for p in kernel_dir.glob("*.csv")) if kernel_dir.exists() else [],
    }
