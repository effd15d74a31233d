"""PNG figures for the report commands. Needs the optional matplotlib extra."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ModuleNotFoundError as exc:
        raise RuntimeError("plotting needs matplotlib: pip install 'monodim[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_pressure_curve(rows: list[dict], outdir: Path, title: str = "") -> Path:
    plt = _pyplot()
    outdir.mkdir(parents=True, exist_ok=True)
    w = [r["w"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(w, [r["pressure"] for r in rows], "o-")
    ax1.set_xlabel("w")
    ax1.set_ylabel("pressure")
    ax2.plot(w, [r["dimer_density"] for r in rows], "o-", label="dimer")
    ax2.plot(w, [r["monomer_density"] for r in rows], "s-", label="monomer")
    ax2.set_xlabel("w")
    ax2.set_ylabel("density")
    ax2.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = outdir / "pressure_curve.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_study(study, outdir: Path) -> list[Path]:
    """Quenched gap against N and the replica spread against N (log-log)."""
    plt = _pyplot()
    outdir.mkdir(parents=True, exist_ok=True)
    rows = study.summary()
    n = np.array([r["N"] for r in rows], dtype=float)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(n, [r["gap"] for r in rows], yerr=[r["std"] / np.sqrt(study.replicas) for r in rows],
                fmt="o-", label="raw mean")
    ax.errorbar(n, [r["gap_cv"] for r in rows], yerr=[r["se_cv"] for r in rows], fmt="s-",
                label="control variate")
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("E[p_N] - p")
    ax.legend()
    fig.tight_layout()
    gap_path = outdir / "study_gap.png"
    fig.savefig(gap_path, dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    std = np.array([r["std"] for r in rows])
    ax.loglog(n, std, "o-", label="std of p_N")
    if std[0] > 0:
        ax.loglog(n, std[0] * np.sqrt(n[0] / n), "--", label="N^-1/2")
    ax.set_xlabel("N")
    ax.legend()
    fig.tight_layout()
    std_path = outdir / "study_std.png"
    fig.savefig(std_path, dpi=120)
    plt.close(fig)
    return [gap_path, std_path]


def plot_lln(study, outdir: Path) -> Path:
    plt = _pyplot()
    outdir.mkdir(parents=True, exist_ok=True)
    rows = study.summary()
    n = np.array([r["N"] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    med = np.array([r["median"] for r in rows])
    ax.fill_between(n, [r["q10"] for r in rows], [r["q90"] for r in rows], alpha=0.3, label="10-90%")
    ax.loglog(n, med, "o-", label="median")
    ax.loglog(n, med[0] * np.sqrt(n[0] / n), "--", label="N^-1/2")
    ax.set_xlabel("N")
    ax.set_ylabel("sup |phi_N - phi|")
    ax.legend()
    fig.tight_layout()
    path = outdir / "lln_sup_deviation.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
