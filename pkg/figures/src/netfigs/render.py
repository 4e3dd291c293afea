"""Figure rendering from exported data files."""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import read_field_csv, read_study, read_trajectory_csv

KINDS = ("profile", "convergence", "gap", "trajectory")

_MODE_COLORS = {-1: "tab:blue", 1: "tab:red", 2: "tab:green", 3: "tab:purple"}


@dataclass
class FigureSpec:
    """One figure: input files, kind, output path, and axis cosmetics."""

    kind: str  # "profile" | "convergence" | "gap" | "trajectory"
    inputs: list[str]
    output: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool | None = None  # None: kind default
    logy: bool | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r} (choose from {KINDS})")
        if not self.inputs:
            raise ValueError("FigureSpec needs at least one input file")


def _new_axes(spec, default_logx=False, default_logy=False):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    if spec.logx if spec.logx is not None else default_logx:
        ax.set_xscale("log")
    if spec.logy if spec.logy is not None else default_logy:
        ax.set_yscale("log")
    return fig, ax


def _finish(fig, ax, spec, default_title, default_xlabel, default_ylabel):
    ax.set_title(spec.title or default_title)
    ax.set_xlabel(spec.xlabel or default_xlabel)
    ax.set_ylabel(spec.ylabel or default_ylabel)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    # strip volatile metadata so identical inputs give identical bytes
    meta = {"Date": None} if spec.output.endswith(".svg") else {}
    fig.savefig(spec.output, metadata=meta)
    plt.close(fig)
    return spec.output


def _render_profile(spec):
    fig, ax = _new_axes(spec)
    for path in spec.inputs:
        branches = read_field_csv(path)
        for branch in sorted(branches):
            xs, vs = branches[branch]
            ax.plot(
                xs,
                vs,
                color=_MODE_COLORS.get(branch, "black"),
                label=f"branch {branch}",
            )
    ax.axvline(0.0, color="gray", linewidth=0.8, linestyle="--")
    ax.legend()
    return _finish(fig, ax, spec, "Value function profile", "x", "V(x)")


def fit_order(epsilons, errors):
    """Least-squares slope of log error against log epsilon."""
    eps = np.asarray(epsilons, dtype=float)
    err = np.maximum(np.asarray(errors, dtype=float), 1e-300)
    return float(np.polyfit(np.log(eps), np.log(err), 1)[0])


def _render_convergence(spec):
    study = read_study(spec.inputs[0], spec.inputs[1] if len(spec.inputs) > 1 else None)
    fig, ax = _new_axes(spec, default_logx=True, default_logy=True)
    eps = study["epsilon"]
    err = study["sup_error"]
    ax.plot(eps, err, "o-", color="tab:blue", label="sup error")
    slope = fit_order(eps, err)
    ref = err[0] * (eps / eps[0]) ** 1.0
    ax.plot(eps, ref, ":", color="gray", label="order 1 reference")
    ax.annotate(
        f"slope = {slope:.2f}",
        xy=(0.05, 0.9),
        xycoords="axes fraction",
        fontsize=11,
    )
    ax.legend()
    return _finish(
        fig, ax, spec, "Convergence of the thermostatic values", "epsilon", "sup error"
    )


def _render_gap(spec):
    study = read_study(spec.inputs[0])
    fig, ax = _new_axes(spec, default_logx=True, default_logy=True)
    ax.plot(
        study["epsilon"],
        np.maximum(study["junction_gap"], 1e-300),
        "s-",
        color="tab:orange",
        label="junction gap",
    )
    ax.legend()
    return _finish(
        fig, ax, spec, "Junction gap decay", "epsilon", "|V(0, i) - V(0, j)|"
    )


def _render_trajectory(spec):
    traj = read_trajectory_csv(spec.inputs[0])
    fig, ax = _new_axes(spec)
    t, x, mode = traj["t"], traj["x"], traj["mode"].astype(int)
    # one line segment per constant-mode piece, colored by mode
    breaks = np.nonzero(np.diff(mode) != 0)[0] + 1
    seen = set()
    for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, len(t)]):
        m = mode[lo]
        label = f"mode {m}" if m not in seen else None
        seen.add(m)
        ax.plot(t[lo:hi], x[lo:hi], color=_MODE_COLORS.get(m, "black"), label=label)
    switches = traj["switch"] > 0
    if np.any(switches):
        ax.plot(t[switches], x[switches], "kv", markersize=4, label="switch")
    for eps in spec.extra.get("thresholds", ()):
        ax.axhline(eps, color="gray", linewidth=0.8, linestyle="--")
        ax.axhline(-eps, color="gray", linewidth=0.8, linestyle="--")
    ax.legend()
    return _finish(fig, ax, spec, "Hybrid trajectory", "t", "x(t)")


_RENDERERS = {
    "profile": _render_profile,
    "convergence": _render_convergence,
    "gap": _render_gap,
    "trajectory": _render_trajectory,
}


def render(spec):
    """Render one figure and return the output path."""
    return _RENDERERS[spec.kind](spec)
