import json
import sys
from pathlib import Path

import streamlit as st

from gsimpute.plotting import (
    find_seed_dirs,
    plot_eval,
    plot_gd_trace,
    plot_losses,
    read_rows,
    snapshot_mosaic,
)

# ---------------------------
# Page Setup
# ---------------------------
st.set_page_config(page_title="Graph Signal Imputation Results", page_icon="📈", layout="wide")

st.markdown("""
    <style>
      .header { text-align: center; color: #1F618D; font-weight: 700; }
      .subtitle { text-align:center; color: #34495E; margin-bottom: 20px; }
      .small { font-size: 0.9rem; color: #6C757D; }
    </style>
""", unsafe_allow_html=True)

st.markdown("<h1 class='header'>📈 Graph Signal Imputation Results</h1>", unsafe_allow_html=True)
st.markdown("<div class='subtitle'>Errors, learning curves and recovered signals of a run</div>", unsafe_allow_html=True)

# ---------------------------
# Helper Functions
# ---------------------------
def labels_with(seed_dir: Path, suffix: str) -> dict:
    return {p.name.removesuffix(suffix): p for p in sorted(seed_dir.glob(f"*{suffix}"))}


def default_out_dir() -> str:
    # streamlit run dashboard.py -- <out_dir>
    return sys.argv[1] if len(sys.argv) > 1 else "runs/desk_benchmark"


# ---------------------------
# Sidebar Controls
# ---------------------------
st.sidebar.title("Run")
out_dir = Path(st.sidebar.text_input("Output directory", default_out_dir()))

if not (out_dir / "summary.csv").exists():
    st.info("Enter the output directory of a finished run (it holds summary.csv).")
    st.stop()

seeds = find_seed_dirs(out_dir)
seed = st.sidebar.selectbox("Seed", list(seeds))

# ---------------------------
# Summary
# ---------------------------
col1, col2 = st.columns([2, 1])

with col1:
    st.markdown("### Mean error per method")
    st.dataframe(read_rows(out_dir / "summary.csv"), use_container_width=True)
    if (out_dir / "per_seed.csv").exists():
        with st.expander("Per seed"):
            st.dataframe(read_rows(out_dir / "per_seed.csv"), use_container_width=True)

with col2:
    st.markdown("### Configuration")
    resolved = out_dir / "resolved_config.json"
    if resolved.exists():
        st.json(json.loads(resolved.read_text(encoding="utf-8")), expanded=False)

# ---------------------------
# Curves and Snapshots
# ---------------------------
if seed is not None:
    seed_dir = seeds[seed]
    st.markdown("---")
    st.markdown(f"## Seed {seed}")

    losses = labels_with(seed_dir, "_losses.csv")
    chosen = st.multiselect("Methods", list(losses), default=list(losses))
    res_col1, res_col2 = st.columns(2)
    with res_col1:
        st.markdown("### Training losses")
        if chosen:
            st.pyplot(plot_losses({k: losses[k] for k in chosen}))
        else:
            st.info("No adversarial run in this seed.")
    with res_col2:
        st.markdown("### Error per epoch")
        evals = labels_with(seed_dir, "_eval.csv")
        picked = {k: v for k, v in evals.items() if k in chosen}
        if picked:
            st.pyplot(plot_eval(picked))

    if (seed_dir / "gd_trace.csv").exists():
        st.markdown("### Gradient-descent baseline")
        st.pyplot(plot_gd_trace(seed_dir / "gd_trace.csv"))

    for label, npz in labels_with(seed_dir, "_snapshots.npz").items():
        mosaic = snapshot_mosaic(npz)
        if mosaic is not None:
            st.markdown(f"### Recovered signals: {label}")
            st.image(mosaic, caption="observed signs, stored steps, ground truth")

st.markdown("---")
st.markdown("<div class='small'>Render the same figures to PNG with plot_results.py.</div>", unsafe_allow_html=True)
