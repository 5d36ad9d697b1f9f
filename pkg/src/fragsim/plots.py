"""Figure rendering for reports (file output only, Agg backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["figure.dpi"] = 130
plt.rcParams["savefig.bbox"] = "tight"
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def report_figures(report_dict: dict, figdir: str, prefix: str = "verify") -> list[str]:
    """One convergence panel per functional; returns the written paths."""
    os.makedirs(figdir, exist_ok=True)
    written = []
    for fi, func in enumerate(report_dict["functionals"]):
        rows = func["rows"]
        x = np.array([r["eta"] for r in rows])
        mean = np.array([r["mean"] for r in rows])
        se = np.array([r["se"] for r in rows])
        k = report_dict["config"]["tolerances"]["se_multiplier"]

        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        ax.errorbar(x, mean, yerr=k * se, fmt="o-", ms=3.5, lw=1.0,
                    capsize=2.5, label=f"sample mean ± {k:g} SE")
        if func.get("constant") is not None:
            ax.axhline(func["constant"], color="crimson", lw=1.0, ls="--",
                       label=f"theory {func['constant']:.4g}")
        if "ratio_median" in rows[0]:
            med = np.array([r["ratio_median"] for r in rows])
            iqr = np.array([r["ratio_iqr"] for r in rows])
            ax.fill_between(x, med - iqr / 2, med + iqr / 2, alpha=0.15,
                            color="gray", label="per-path ratio IQR")
        if func["kind"] != "m_mart":
            ax.set_xscale("log")
            ax.invert_xaxis()
            ax.set_xlabel(r"stopping threshold $\eta$")
        else:
            ax.set_xlabel("time t")
        ax.set_ylabel("normalised value")
        ax.set_title(func["name"], fontsize=9)
        ax.legend(fontsize=7)
        path = os.path.join(figdir, f"{prefix}_{fi:02d}.png")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


def renewal_figure(sol, figdir: str, constant: float | None = None,
                   name: str = "renewal") -> str:
    os.makedirs(figdir, exist_ok=True)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4))
    ax1.plot(sol.t, sol.g, lw=1.0, label="g(t)")
    ax1.fill_between(sol.t, sol.g - 3 * sol.g_se, sol.g + 3 * sol.g_se,
                     alpha=0.25, label="±3 bootstrap SE")
    if constant is not None:
        ax1.axhline(constant, color="crimson", ls="--", lw=1.0,
                    label=f"theory {constant:.4g}")
    ax1.set_xlabel("t = -ln(eta)")
    ax1.set_ylabel("normalised counted process mean")
    ax1.legend(fontsize=7)
    ax2.plot(sol.t, sol.rho, lw=0.8)
    ax2.set_xlabel("step -ln(size at unit time)")
    ax2.set_ylabel("tilted step mass per bin")
    ax2.set_xlim(0, min(sol.t[-1], 3.0))
    title = f"mu={sol.mu_tilted:.4f}±{sol.mu_tilted_se:.4f}"
    if sol.lattice:
        title += "  [lattice]"
    ax2.set_title(title, fontsize=9)
    path = os.path.join(figdir, f"{name}.png")
    fig.savefig(path)
    plt.close(fig)
    return path


def sweep_figure(sweep: dict, figdir: str, name: str = "sweep") -> str:
    os.makedirs(figdir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    by_func: dict[str, list] = {}
    for run in sweep["runs"]:
        for est in run["estimates"]:
            label = f"eps={run['eps']:g}"
            by_func.setdefault(label, []).append(est)
    for fi in range(len(next(iter(by_func.values()), []))):
        eps = [run["eps"] for run in sweep["runs"]]
        ratio = [run["estimates"][fi]["ratio"] for run in sweep["runs"]]
        rse = [run["estimates"][fi]["ratio_se"] for run in sweep["runs"]]
        ax.errorbar(eps, ratio, yerr=[2 * s for s in rse], fmt="o-",
                    capsize=3, label=f"functional {fi}")
    ax.axhline(1.0, color="crimson", ls="--", lw=1.0)
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("truncation eps")
    ax.set_ylabel("estimate / theory(eps)")
    ax.legend(fontsize=7)
    path = os.path.join(figdir, f"{name}.png")
    fig.savefig(path)
    plt.close(fig)
    return path
