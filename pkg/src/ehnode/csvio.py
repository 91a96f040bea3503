"""CSV artifacts: fixed column orders, 9 significant digits, and readers."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import N_ACTIONS, StateSpace

POLICY_COLUMNS = ("e", "q_lp", "q_hp", "p_harvest", "p_tx_lp", "p_tx_hp")
HEATMAP_COLUMNS = ("q_lp", "q_hp", "p_harvest", "p_tx_lp", "p_tx_hp")
REPORT_COLUMNS = ("status", "objective", "cost_lp", "cost_hp", "loss_limit_lp",
                  "loss_limit_hp", "iterations", "flow_residual", "n_states", "n_vars")
METRICS_COLUMNS = ("policy", "thr_lp", "thr_hp", "loss_lp", "loss_hp", "drop_lp",
                   "drop_hp", "delay_lp", "delay_hp", "objective")
SIM_COLUMNS = (("policy", "generator", "seed", "slots", "warmup_slots")
               + tuple(c for m in METRICS_COLUMNS[1:] for c in (m, f"{m}_se"))
               + ("arrived_lp", "dropped_lp", "arrived_hp", "dropped_hp"))
WEIGHT_SWEEP_COLUMNS = ("w_hp", "thr_lp", "thr_hp", "delay_lp", "delay_hp",
                        "loss_lp", "loss_hp", "objective", "status")
ARRIVAL_SWEEP_COLUMNS = ("rate", "status", "opt_loss_lp", "opt_loss_hp", "static_loss_lp",
                         "static_loss_hp", "opt_drop_lp", "opt_drop_hp", "static_drop_lp",
                         "static_drop_hp")

# metric field names by CSV column
METRIC_FIELDS = {
    "thr_lp": "throughput_lp", "thr_hp": "throughput_hp",
    "loss_lp": "loss_lp", "loss_hp": "loss_hp",
    "drop_lp": "drop_lp", "drop_hp": "drop_hp",
    "delay_lp": "delay_lp", "delay_hp": "delay_hp",
    "objective": "objective",
}


def fmt(value: object) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "undefined"
        if math.isinf(value):
            return "unbounded" if value > 0 else "-unbounded"
        return format(float(value), ".9g")
    return str(value)


def parse_value(text: str) -> object:
    if text == "undefined":
        return math.nan
    if text == "unbounded":
        return math.inf
    if text == "-unbounded":
        return -math.inf
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_rows(path: str | Path, columns: Sequence[str], rows: Iterable[Mapping[str, object]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])
    return path


def read_rows(path: str | Path) -> tuple[list[str], list[dict[str, object]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [dict(zip(header, (parse_value(v) for v in rec))) for rec in reader]
    return header, rows


def policy_rows(space: StateSpace, policy: np.ndarray) -> list[dict[str, object]]:
    return [{"e": s.e, "q_lp": s.q_lp, "q_hp": s.q_hp, "p_harvest": float(policy[i, 0]),
             "p_tx_lp": float(policy[i, 1]), "p_tx_hp": float(policy[i, 2])}
            for i, s in enumerate(space)]


def write_policy(path: str | Path, space: StateSpace, policy: np.ndarray) -> Path:
    return write_rows(path, POLICY_COLUMNS, policy_rows(space, policy))


def write_heatmap(path: str | Path, space: StateSpace, policy: np.ndarray, energy: int) -> Path:
    rows = [r for r in policy_rows(space, policy) if r["e"] == energy]
    return write_rows(path, HEATMAP_COLUMNS, rows)


class PolicyFileError(ValueError):
    pass


def read_policy(path: str | Path, space: StateSpace) -> np.ndarray:
    """Load a policy file; every state must appear exactly once.

    Rows are renormalised after the 9-digit rounding of the writer.
    """
    header, rows = read_rows(path)
    if tuple(header) != POLICY_COLUMNS:
        raise PolicyFileError(f"{path}: expected header {','.join(POLICY_COLUMNS)}")
    policy = np.full((len(space), N_ACTIONS), np.nan)
    for lineno, row in enumerate(rows, start=2):
        try:
            i = space.index((row["e"], row["q_lp"], row["q_hp"]))
        except (IndexError, TypeError):
            raise PolicyFileError(f"{path}: line {lineno}: state outside the model") from None
        if not np.isnan(policy[i, 0]):
            raise PolicyFileError(f"{path}: line {lineno}: duplicate state")
        probs = np.array([row["p_harvest"], row["p_tx_lp"], row["p_tx_hp"]], dtype=float)
        if np.any(~(probs >= 0.0)) or abs(probs.sum() - 1.0) > 1e-6:
            raise PolicyFileError(f"{path}: line {lineno}: not a probability distribution")
        policy[i] = probs / probs.sum()
    if np.isnan(policy).any():
        raise PolicyFileError(f"{path}: {int(np.isnan(policy[:, 0]).sum())} states missing")
    return policy
