"""Figures for a report bundle, written as PNG next to the CSV tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from sketchauth.evaluation import EvaluationResult  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# keeps PNG bytes independent of the matplotlib version
PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def operating_points(result: EvaluationResult, path: Path, names=None) -> Path:
    names = names or {}
    pooled, per_artist = result.metrics()
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        for a, m in per_artist.items():
            xerr = [[m.far - m.far_ci.lower], [m.far_ci.upper - m.far]]
            yerr = [[m.tar - m.tar_ci.lower], [m.tar_ci.upper - m.tar]]
            ax.errorbar(m.far, m.tar, xerr=xerr, yerr=yerr, fmt="o", ms=4, lw=0.6, capsize=2, alpha=0.8,
                        label=names.get(a, a))
        ax.plot(pooled.far, pooled.tar, marker="*", ms=12, color="k", ls="none",
                label=f"pooled ({pooled.far:.3f}, {pooled.tar:.3f})")
        ax.set_xlim(-0.02, max(0.5, max(m.far_ci.upper for m in per_artist.values()) + 0.02))
        ax.set_ylim(0.0, 1.02)
        ax.set_xlabel("False acceptance rate")
        ax.set_ylabel("True acceptance rate")
        ax.set_title(f"Operating points ({result.method})")
        ax.legend(loc="lower right", frameon=False, ncol=2)
        return _save(fig, path)


def pooled_confusion(result: EvaluationResult, path: Path) -> Path:
    c = result.pooled
    mat = np.array([[c.tp, c.fn], [c.fp, c.tn]])
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.6, 3.2))
        ax.imshow(mat, cmap="Blues")
        for (i, j), v in np.ndenumerate(mat):
            ax.text(j, i, str(v), ha="center", va="center", color="white" if v > mat.max() / 2 else "black")
        ax.set_xticks([0, 1], ["accepted", "rejected"])
        ax.set_yticks([0, 1], ["genuine", "impostor"])
        ax.set_title(f"Pooled decisions ({c.total})")
        return _save(fig, path)


def attribution_heatmap(result: EvaluationResult, path: Path, names=None) -> Path:
    names = names or {}
    att = result.attribution
    labels = [names.get(a, a) for a in att.artists]
    mat = att.counts.astype(float)
    np.fill_diagonal(mat, np.nan)
    with plt.rc_context(RC):
        size = 1.2 + 0.45 * len(labels)
        fig, ax = plt.subplots(figsize=(size, size))
        im = ax.imshow(mat, cmap="Reds", vmin=0)
        for (i, j), v in np.ndenumerate(att.counts):
            ax.text(j, i, "-" if i == j else str(v), ha="center", va="center", fontsize=7)
        ax.set_xticks(range(len(labels)), labels, rotation=60, ha="right")
        ax.set_yticks(range(len(labels)), labels)
        ax.set_xlabel("source artist")
        ax.set_ylabel("target verifier")
        fig.colorbar(im, ax=ax, shrink=0.7, label="false accepts")
        return _save(fig, path)


def sensitivity_plot(result: EvaluationResult, path: Path) -> Path:
    rows = result.sensitivity.rows
    qs = [r.q for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        ax.plot(qs, [r.tar for r in rows], "o-", label="TAR")
        ax.plot(qs, [r.far for r in rows], "s--", label="FAR")
        ax.set_xlabel("threshold quantile q")
        ax.set_ylabel("pooled rate")
        ax.set_ylim(0, 1.02)
        ax.legend(frameon=False)
        return _save(fig, path)


def render_figures(result: EvaluationResult, out_dir: str | Path, names=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        operating_points(result, out / "operating_points.png", names),
        pooled_confusion(result, out / "confusion_pooled.png"),
        attribution_heatmap(result, out / "pairwise_attribution.png", names),
    ]
    if result.sensitivity is not None:
        paths.append(sensitivity_plot(result, out / "sensitivity.png"))
    return paths
