# -*- coding: utf-8 -*-
"""Residual report viewer (읽기 전용: 실행/조정/플롯 없음)."""

from __future__ import annotations

from pathlib import Path

import streamlit as st

from .export import load_bundle
from .utils_common import load_env, out_dir_default


def run() -> None:
    """Bridge(멀티페이지) 환경에서 호출되는 진입점."""
    load_env()

    # ---- 세션 상태 초기화 ----
    defaults = {
        "bundle_dir": out_dir_default(),
        "only_failures": False,
    }
    for k, v in defaults.items():
        st.session_state.setdefault(k, v)

    st.title("📋 Residual Report")

    # ---- CSS ----
    st.markdown(
        """
<style>
html, body, [class*="st-"] { font-family: 'Inter','Noto Sans KR',sans-serif; }
div[data-testid="stAppViewContainer"] > .main .block-container {
  padding-top: 2rem; padding-bottom: 2rem; max-width: 1100px;
}
.log-container {
  background-color: #F9F9F9; border-radius: 8px; padding: 15px; margin-top: 15px;
  font-family: 'SF Mono','Menlo',monospace; font-size: 0.9em; max-height: 300px; overflow-y: auto; border: 1px solid #E0E0E0;
}
h1, h2, h3, h5 { font-weight: 700; }
</style>
""",
        unsafe_allow_html=True,
    )

    bundle_dir = st.text_input("결과 폴더", key="bundle_dir")
    if not bundle_dir or not Path(bundle_dir).exists():
        st.info("`python -m scenario_runner.run_batch run <config.json>` 로 만든 결과 폴더 경로를 입력하세요.")
        return

    try:
        bundle = load_bundle(bundle_dir)
    except FileNotFoundError as e:
        st.error(f"결과 폴더를 읽을 수 없습니다: {e}")
        return

    side = bundle["sidecar"]
    report = bundle["report"]
    n_fail = int((~report["passed"].astype(bool)).sum()) if len(report) else 0

    c1, c2, c3 = st.columns(3)
    c1.metric("시나리오", side.get("scenario", "-"))
    c2.metric("항등식", len(report))
    c3.metric("실패", n_fail)
    st.caption(
        f"pipeline `{side.get('pipeline', '-')}` · grid {side.get('grid', {})} · "
        f"version `{side.get('version', '-')}` · config `{str(side.get('config_hash', ''))[:12]}`"
    )

    st.subheader("잔차")
    st.checkbox("실패만 보기", key="only_failures")
    view = report[~report["passed"].astype(bool)] if st.session_state["only_failures"] else report
    st.dataframe(view, use_container_width=True, hide_index=True)

    steps = side.get("steps") or []
    if steps:
        st.markdown("<div class='log-container'>" + "<br>".join(steps) + "</div>", unsafe_allow_html=True)

    currents = bundle["currents"]
    if currents is not None:
        st.subheader("전류")
        leads = sorted(currents["lead"].unique().tolist())
        lead = st.selectbox("lead", leads)
        table = currents[currents["lead"] == lead].pivot_table(index="t", columns="method", values="I")
        st.dataframe(table, use_container_width=True)

    if bundle["kernels"]:
        st.subheader("커널 파일")
        st.write(", ".join(bundle["kernels"]))
