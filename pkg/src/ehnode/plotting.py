"""Figures rendered next to the CSV artifacts."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import StateSpace  # noqa: E402

RC = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "lines.markersize": 5,
}

# no timestamps, so reruns write identical bytes
_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def _column(rows: Sequence[Mapping[str, object]], key: str) -> np.ndarray:
    return np.array([float(r[key]) for r in rows])


def plot_weight_sweep(rows: Sequence[Mapping[str, object]], path: str | Path) -> Path:
    """Throughput (left) and delay (right) against the HP weight."""
    w = _column(rows, "w_hp")
    with plt.rc_context(RC):
        fig, (ax_t, ax_d) = plt.subplots(1, 2, figsize=(10, 4))
        ax_t.plot(w, _column(rows, "thr_lp"), "o-", label="LP")
        ax_t.plot(w, _column(rows, "thr_hp"), "s-", label="HP")
        ax_t.set_xlabel("weight of HP data")
        ax_t.set_ylabel("throughput (packets/slot)")
        ax_t.legend()
        ax_d.plot(w, _column(rows, "delay_lp"), "o-", label="LP")
        ax_d.plot(w, _column(rows, "delay_hp"), "s-", label="HP")
        ax_d.set_xlabel("weight of HP data")
        ax_d.set_ylabel("delay (slots)")
        ax_d.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_arrival_sweep(rows: Sequence[Mapping[str, object]], path: str | Path,
                       loss_limit_hp: float | None = None) -> Path:
    rate = _column(rows, "rate")
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(rate, _column(rows, "opt_loss_lp"), "o-", label="optimal, LP")
        ax.plot(rate, _column(rows, "opt_loss_hp"), "s-", label="optimal, HP")
        ax.plot(rate, _column(rows, "static_loss_lp"), "o--", label="static, LP")
        ax.plot(rate, _column(rows, "static_loss_hp"), "s--", label="static, HP")
        if loss_limit_hp is not None and np.isfinite(loss_limit_hp):
            ax.axhline(loss_limit_hp, color="k", lw=0.8, ls=":", label="HP requirement")
        ax.set_xlabel("packet arrival probability")
        ax.set_ylabel("packet loss probability")
        ax.legend()
        return _save(fig, path)


def plot_policy_heatmap(space: StateSpace, policy: np.ndarray, energy: int,
                        path: str | Path) -> Path:
    """One panel per action: probability over (LP queue, HP queue) at a fixed energy."""
    idx = [space.index((energy, ql, qh)) for ql in range(space.q_lp_max + 1)
           for qh in range(space.q_hp_max + 1)]
    grid = policy[idx].reshape(space.q_lp_max + 1, space.q_hp_max + 1, 3)
    titles = ("request RF energy", "transmit LP", "transmit HP")
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.8))
        for k, ax in enumerate(axes):
            im = ax.imshow(grid[:, :, k], origin="lower", vmin=0.0, vmax=1.0, cmap="viridis")
            ax.set_title(f"{titles[k]} (energy {energy})")
            ax.set_xlabel("HP queue (packets)")
            ax.set_ylabel("LP queue (packets)")
            ax.grid(False)
        fig.colorbar(im, ax=axes, shrink=0.8, label="probability")
        return _save(fig, path)
