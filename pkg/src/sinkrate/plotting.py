"""Optional rate-curve figures rendered next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _positive(t, v):
    v = np.asarray(v, dtype=float)
    keep = (t >= 1) & np.isfinite(v) & (v > 0)
    return t[keep], v[keep]


def render_rate_plots(out: Path, trace, curves) -> list[Path]:
    """Write ``rates.png`` (measured vs bound, log-log). Returns written paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = np.arange(trace.T + 1, dtype=float)
    panels = [
        ("H(pi*|pi_2t)", trace.H_pistar_pit[1:], [("theorem", curves["theorem"][1:])]),
        ("marginal entropy sum", trace.marginal_sum(),
         [("proposition", curves["marginal_prop"][1:]), ("corollary", curves["marginal_cor"][1:])]),
        ("dual gap", trace.dual_gap[1:],
         [("intermediate", curves["subopt_inter"][1:]), ("closed form", curves["subopt_cor_max"][1:])]),
    ]
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.4))
    for ax, (title, meas, refs) in zip(axes, panels):
        ax.loglog(*_positive(t, meas), "k.-", label="measured", lw=1, ms=3)
        for label, v in refs:
            tt, vv = _positive(t, v)
            if tt.size:
                ax.loglog(tt, vv, "--", label=label, lw=1)
        ax.set_title(title)
        ax.set_xlabel("t")
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(out) / "rates.png"
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return [path]
