"""Experiment configuration: per-study defaults plus a flat ``key = value`` file.

Example file::

    # comments start with '#'
    domain_left = -10
    domain_right = 10
    n_points = 64
    tableau_list = RK(1,2), RK(2,3)
    eps_list = 1e-4, 1e-8
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

STUDIES = ("converge-eps", "converge-time", "converge-space", "gamma-study", "dynamics")
ALL_TABLEAUX = ("RK(1,2)", "RK(2,3)", "RK(6,4)", "RK(8,5)")


@dataclass
class ExperimentConfig:
    domain_left: float = -10.0
    domain_right: float = 10.0
    n_points: int = 64
    tau: float = 1e-2
    eps: float = 1e-6
    reg_order: int = 2
    lam: float = -1.0
    b: float = 1.0
    zeta: float = 0.0
    tableau: str = "RK(2,3)"
    final_time: float = 1.0
    final_time_mode: str = "adjust_last_step"
    relaxation: bool = True
    eps_list: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5])
    reg_order_list: list = field(default_factory=lambda: [2])
    tau_list: list = field(default_factory=lambda: [0.1 * 2.0**-j for j in range(1, 6)])
    tableau_list: list = field(default_factory=lambda: list(ALL_TABLEAUX))
    n_list: list = field(default_factory=lambda: [8 + 2 * (j + 1) for j in range(1, 6)])
    n_ref: int = 512
    tau_ref: float = 1e-4
    ref_tableau: str = ""  # empty: same tableau as the study
    order_floor: float = 0.0  # 0: measure from a 2*tau_ref reference
    snapshot_times: list = field(default_factory=lambda: [0.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0])
    cache_dir: str = ""
    threads: int = 1


STUDY_DEFAULTS = {
    "converge-eps": dict(
        n_points=512, eps_list=[1e-2, 1e-3, 1e-4, 1e-5], reg_order_list=[2, 10],
        n_ref=512, tau_ref=1e-4, tableau="RK(2,3)",
    ),
    "converge-time": dict(
        n_points=64, n_ref=64, eps_list=[1e-4, 1e-8], reg_order_list=[2, 4],
        tableau_list=list(ALL_TABLEAUX), ref_tableau="RK(8,5)", tau_ref=1e-4,
    ),
    "converge-space": dict(
        eps=1e-6, tau=1e-5, tau_ref=1e-5, n_ref=512, tableau="RK(2,3)",
    ),
    "gamma-study": dict(
        n_points=64, eps=1e-4, reg_order=2, tableau_list=list(ALL_TABLEAUX),
    ),
    "dynamics": dict(
        domain_left=-40.0, domain_right=40.0, n_points=256, tau=2e-3, final_time=20.0,
        tableau="RK(2,3)", eps=1e-6, reg_order=2,
    ),
}

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_LIST_TYPES = {
    "eps_list": float, "reg_order_list": int, "tau_list": float, "tableau_list": str,
    "n_list": int, "snapshot_times": float,
}
_ALIASES = {"lambda": "lam"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _split_list(text: str) -> list:
    # tableau names contain commas, e.g. "RK(2,3), RK(6,4)"
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        items.append("".join(cur).strip())
    return items


def coerce(key: str, text: str):
    key = _ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ConfigurationError(f"unknown configuration key {key!r}")
    try:
        if key in _LIST_TYPES:
            return key, [_LIST_TYPES[key](v) for v in _split_list(text)]
        default = _FIELDS[key].default
        if isinstance(default, bool):
            return key, _parse_bool(text)
        if isinstance(default, int):
            return key, int(text)
        if isinstance(default, float):
            return key, float(text)
        return key, text.strip()
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key!r}: {text!r} ({exc})") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        k, v = coerce(key, value)
        out[k] = v
    return out


def load_config(study: str, path=None, **overrides) -> ExperimentConfig:
    """Study defaults, then the config file, then keyword overrides."""
    if study not in STUDY_DEFAULTS:
        raise ConfigurationError(f"unknown study {study!r}; expected one of {STUDIES}")
    values = dict(STUDY_DEFAULTS[study])
    if path is not None:
        values.update(parse_config_text(Path(path).read_text("utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)
