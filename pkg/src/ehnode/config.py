"""Flat ``key = value`` experiment configuration files."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .model import ModelParams, ParamsError


class ConfigError(ValueError):
    pass


MODEL_KEYS = (
    "e_max", "q_lp_max", "q_hp_max", "k_tx", "mu", "harvest",
    "arrival_lp", "arrival_hp", "weight_lp", "weight_hp",
    "loss_limit_lp", "loss_limit_hp",
)

DEFAULT_WEIGHT_SWEEP = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_ARRIVAL_SWEEP = tuple(round(0.05 * i, 2) for i in range(1, 10))

RUN_DEFAULTS: dict[str, object] = {
    "slots": 1_010_000,
    "warmup_slots": 10_000,
    "seed": 20150701,
    "weight_sweep": DEFAULT_WEIGHT_SWEEP,
    "arrival_sweep": DEFAULT_ARRIVAL_SWEEP,
    "heatmap_energy": 5,
    "out_dir": "out",
}


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    slots: int = 1_010_000
    warmup_slots: int = 10_000
    seed: int = 20150701
    weight_sweep: tuple[float, ...] = DEFAULT_WEIGHT_SWEEP
    arrival_sweep: tuple[float, ...] = DEFAULT_ARRIVAL_SWEEP
    heatmap_energy: int = 5
    out_dir: str = "out"
    source: str = field(default="<string>", compare=False)


def _int(key: str, raw: str, lineno: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key}: expected an integer, got {raw!r}") from None


def _float(key: str, raw: str, lineno: int) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"line {lineno}: {key}: expected a finite number, got {raw!r}")
    return v


def _floats(key: str, raw: str, lineno: int) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",")]
    if not raw.strip() or any(not p for p in parts):
        raise ConfigError(f"line {lineno}: {key}: malformed list {raw!r}")
    return tuple(_float(key, p, lineno) for p in parts)


def _probability(key: str, v: float, lineno: int) -> float:
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"line {lineno}: {key}: {v!r} is outside [0, 1]")
    return v


def _limit(key: str, raw: str, lineno: int) -> float:
    if raw.strip().lower() == "unbounded":
        return math.inf
    return _probability(key, _float(key, raw, lineno), lineno)


def _harvest(key: str, raw: str, lineno: int) -> tuple[tuple[int, float], ...]:
    out = []
    for item in raw.split(","):
        w, sep, p = item.partition(":")
        if not sep:
            raise ConfigError(f"line {lineno}: {key}: expected 'units:probability' pairs, got {item.strip()!r}")
        out.append((_int(key, w.strip(), lineno),
                    _probability(key, _float(key, p.strip(), lineno), lineno)))
    return tuple(out)


def _probs(key: str, raw: str, lineno: int) -> tuple[float, ...]:
    return tuple(_probability(key, v, lineno) for v in _floats(key, raw, lineno))


_PARSERS = {
    "e_max": _int, "q_lp_max": _int, "q_hp_max": _int, "k_tx": _int,
    "mu": lambda k, r, n: _probability(k, _float(k, r, n), n),
    "harvest": _harvest,
    "arrival_lp": _probs, "arrival_hp": _probs,
    "weight_lp": _float, "weight_hp": _float,
    "loss_limit_lp": _limit, "loss_limit_hp": _limit,
    "slots": _int, "warmup_slots": _int, "seed": _int, "heatmap_energy": _int,
    "weight_sweep": _floats, "arrival_sweep": _floats,
    "out_dir": lambda k, r, n: r,
}


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        if not raw:
            raise ConfigError(f"line {lineno}: {key}: missing value")
        values[key] = _PARSERS[key](key, raw, lineno)
        lines[key] = lineno

    missing = [k for k in MODEL_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required keys: {', '.join(missing)}")

    model = {k: values.pop(k) for k in MODEL_KEYS}
    model["harvest_dist"] = model.pop("harvest")
    try:
        params = ModelParams(**model)
    except ParamsError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    run = {**RUN_DEFAULTS, **values}
    if not 0 <= run["warmup_slots"] < run["slots"]:
        raise ConfigError(f"{source}: warmup_slots must satisfy 0 <= warmup_slots < slots")
    for rate in run["arrival_sweep"]:
        _probability("arrival_sweep", rate, lines.get("arrival_sweep", 0))
    for w in run["weight_sweep"]:
        _probability("weight_sweep", w, lines.get("weight_sweep", 0))
    if not 0 <= run["heatmap_energy"] <= params.e_max:
        raise ConfigError(f"{source}: heatmap_energy must lie in [0, e_max]")
    return ExperimentConfig(params=params, source=source, **run)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))
