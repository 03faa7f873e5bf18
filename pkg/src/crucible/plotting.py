"""PNG figures for study results (matplotlib, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .reports import cdf_series, headline_capability  # noqa: E402
from .study import cdf_points  # noqa: E402

# fixed metadata keeps PNG bytes identical across runs
_META = {"Software": None, "Creation Time": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_cdf(study: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in cdf_series(study).items():
        if not values:
            continue
        pts = cdf_points(values)
        ax.step([p[0] for p in pts], [p[1] for p in pts], where="post", label=name)
    ax.set_xlabel("per-case score")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    if ax.lines:
        ax.legend(fontsize=7)
    return _save(fig, Path(path))


def plot_potential(study: dict, path) -> Path:
    algs = [a for a, e in study["algorithms"].items()
            if e["cells"] and "report" in e["cells"][headline_capability(study, a)]]
    fig, ax = plt.subplots(figsize=(6, 4))
    if algs:
        reps = [study["algorithms"][a]["cells"][headline_capability(study, a)]["report"] for a in algs]
        x = np.arange(len(algs))
        ax.bar(x - 0.2, [r["improvement"] for r in reps], 0.4, yerr=[r["improvement_std"] for r in reps],
               label="mean gain", capsize=3)
        ax.bar(x + 0.2, [r["potential"] for r in reps], 0.4, yerr=[r["potential_std"] for r in reps],
               label="potential", capsize=3)
        ax.set_xticks(x)
        ax.set_xticklabels([f"{a}\n(ideal: {study['algorithms'][a]['ideal_env']})" for a in algs], fontsize=7)
        ax.legend()
    ax.axhline(0, color="black", lw=0.8)
    ax.set_ylabel("score gain")
    return _save(fig, Path(path))


def plot_improvement(study: dict, path) -> Path:
    """Mean improvement ratio over algorithms and environments, per (reflections, Bayes budget)."""
    cells = [c for e in study["algorithms"].values() for c in e["cells"].values()]
    reflects = sorted({c["n_reflect"] for c in cells})
    bayes = sorted({c["n_bayes"] for c in cells})
    grid = np.full((len(reflects), len(bayes)), np.nan)
    for i, r in enumerate(reflects):
        for j, b in enumerate(bayes):
            vals = [v for c in cells if c["n_reflect"] == r and c["n_bayes"] == b
                    for v in c["improvement_ratio"].values() if v is not None]
            if vals:
                grid[i, j] = float(np.mean(vals)) * 100
    fig, ax = plt.subplots(figsize=(5, 4))
    if cells:
        im = ax.imshow(grid, cmap="viridis", aspect="auto")
        fig.colorbar(im, ax=ax, label="mean improvement over BO only (%)")
        ax.set_xticks(range(len(bayes)))
        ax.set_xticklabels([str(b) for b in bayes])
        ax.set_yticks(range(len(reflects)))
        ax.set_yticklabels([str(r) for r in reflects])
        for i in range(len(reflects)):
            for j in range(len(bayes)):
                if np.isfinite(grid[i, j]):
                    ax.text(j, i, f"{grid[i, j]:.1f}", ha="center", va="center", color="white", fontsize=8)
    ax.set_xlabel("Bayesian optimization budget")
    ax.set_ylabel("reflection iterations")
    return _save(fig, Path(path))


def plot_all(study: dict, out_dir) -> List[Path]:
    out = Path(out_dir)
    return [plot_cdf(study, out / "cdf.png"), plot_potential(study, out / "potential.png"),
            plot_improvement(study, out / "improvement.png")]
