# Home.py
import streamlit as st

st.set_page_config(
    page_title="NEGF Workbench",
    page_icon="⚛️",
    layout="wide",
    initial_sidebar_state="expanded",
)

st.markdown("""
<style>
:root{
  --btn-bg: #2563EB;
  --btn-bg-hover: #1D4ED8;
  --btn-fg: #FFFFFF;
  --btn-radius: 14px;
  --btn-pad: 18px 24px;
  --btn-shadow: 0 8px 20px rgba(37,99,235,.20);
}
.stButton > button{
  background: var(--btn-bg) !important;
  color: var(--btn-fg) !important;
  border: 0 !important;
  border-radius: var(--btn-radius) !important;
  padding: var(--btn-pad) !important;
  font-weight: 700 !important;
  box-shadow: var(--btn-shadow);
  font-size: 22px !important;
}
.stButton > button:hover{ background: var(--btn-bg-hover) !important; }
</style>
""", unsafe_allow_html=True)

st.title("⚛️ NEGF Transport Workbench")
st.info(
    "시나리오 실행은 CLI 로 합니다: `python -m scenario_runner.run_batch run scenarios/interacting-small.json`\n\n"
    "Residual Report : 실행 결과 폴더의 잔차 보고서와 전류 표를 읽기 전용으로 봅니다."
)

st.divider()

if hasattr(st, "switch_page"):
    if st.button("Residual Report", use_container_width=True, key="btn_report"):
        st.switch_page("pages/1_Residual Report.py")
else:
    st.page_link("pages/1_Residual Report.py", label="Residual Report", use_container_width=True)
