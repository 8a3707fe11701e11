"""Run configuration files and CSV output.

A config is a flat list of ``key = value`` lines. ``#`` starts a comment,
blank lines are ignored, lists are comma separated::

    scenario = paraboloid
    rho = 1.0
    n = 1
    L = 2.0
    dx = 0.01
    t_end = 0.05
    diagnostics = nu_profile, harnack
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .exact import SCENARIOS
from .solver import BOUNDARY_POLICIES

__all__ = [
    "ConfigError",
    "RunConfig",
    "DIAGNOSTICS",
    "NU_EXPECTATIONS",
    "parse_config",
    "emit_config",
    "load_config",
    "format_float",
    "write_csv",
]

DIAGNOSTICS = (
    "steps",
    "fields",
    "nu_profile",
    "harnack",
    "c2_monitor",
    "velocity_floor",
    "disjointness",
    "dual_concavity",
    "nested_domains",
)
NU_EXPECTATIONS = ("none", "decay", "plateau", "preserve")


class ConfigError(ValueError):
    """All problems found in a config, each as ``(line, message)``."""

    def __init__(self, errors: Sequence[tuple[int, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in self.errors))


# -- value types ---------------------------------------------------------------


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _int(text: str) -> int:
    return int(text)


def _str(text: str) -> str:
    if not text:
        raise ValueError("empty value")
    return text


def _optional_float(text: str) -> float | None:
    return None if text.lower() == "none" else _float(text)


def _list(item: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        if not text.strip():
            return ()
        return tuple(item(part.strip()) for part in text.split(","))

    return parse


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def _emit(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, tuple):
        return ", ".join(_emit(v) for v in value)
    return str(value)


# -- the config ----------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything one ``run`` needs; see :data:`SCHEMA` for the key types."""

    scenario: str
    rho: float
    n: int
    L: float
    dx: float
    t_end: float
    a: float = 1.0
    mu: float = 0.05
    r0: float = 2.0
    cfl: float = 0.9
    dt: float | None = None
    boundary: str = "extrapolate"
    c_H: float | None = None
    convexity_floor: float = 1e-12
    snapshot_times: tuple[float, ...] = ()
    snapshot_every: int = 0
    diagnostics: tuple[str, ...] = ()
    plots: bool = False
    seed: int = 0
    out: str = "out"
    nu_radii: tuple[float, ...] = (2.0, 5.0, 10.0)
    nu_stride: int = 1
    nu_pair_distance: float = 1.0
    nu_expect: str = "none"
    harnack_p: tuple[float, ...] = ()
    harnack_t1: float = 0.01
    harnack_t2: float = 0.04
    c2_beta: float = 2.0
    c2_seed: tuple[float, ...] = ()
    c2_height: float = 0.01
    c2_G: float = 0.5
    floor_x: tuple[float, ...] = ()
    floor_t: float = 0.0
    disjoint_r: float = 0.5
    disjoint_R: float = 1.5
    disjoint_T: float = 0.0
    dual_rho: tuple[float, ...] = (0.5, 1.0, 2.0, 5.0)
    dual_samples: int = 1000
    nested_L: tuple[float, ...] = ()

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def scenario_params(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in SCENARIOS[self.scenario][1]}


_POS = (lambda v: v > 0, "must be > 0")
_NONNEG = (lambda v: v >= 0, "must be >= 0")

# key -> (parser, constraint or None)
SCHEMA: dict[str, tuple[Callable[[str], Any], tuple | None]] = {
    "scenario": (_str, (lambda v: v in SCENARIOS, f"must be one of {', '.join(sorted(SCENARIOS))}")),
    "rho": (_float, _POS),
    "n": (_int, (lambda v: v in (1, 2), "must be 1 or 2")),
    "L": (_float, _POS),
    "dx": (_float, _POS),
    "t_end": (_float, _NONNEG),
    "a": (_float, _POS),
    "mu": (_float, _POS),
    "r0": (_float, _POS),
    "cfl": (_float, (lambda v: 0 < v <= 1, "must be in (0, 1]")),
    "dt": (_optional_float, (lambda v: v is None or v > 0, "must be > 0 or none")),
    "boundary": (_str, (lambda v: v in BOUNDARY_POLICIES, f"must be one of {', '.join(BOUNDARY_POLICIES)}")),
    "c_H": (_optional_float, (lambda v: v is None or v > 0, "must be > 0 or none")),
    "convexity_floor": (_float, _NONNEG),
    "snapshot_times": (_list(_float), (lambda v: all(x > 0 for x in v), "entries must be > 0")),
    "snapshot_every": (_int, _NONNEG),
    "diagnostics": (_list(_str), (lambda v: set(v) <= set(DIAGNOSTICS), f"entries must be among {', '.join(DIAGNOSTICS)}")),
    "plots": (_bool, None),
    "seed": (_int, (lambda v: 0 <= v < 2**64, "must be in [0, 2^64)")),
    "out": (_str, None),
    "nu_radii": (_list(_float), (lambda v: len(v) > 0 and all(x >= 0 for x in v) and all(b > a for a, b in zip(v, v[1:])), "must be a nonempty increasing list of radii >= 0")),
    "nu_stride": (_int, _POS),
    "nu_pair_distance": (_float, _POS),
    "nu_expect": (_str, (lambda v: v in NU_EXPECTATIONS, f"must be one of {', '.join(NU_EXPECTATIONS)}")),
    "harnack_p": (_list(_float), (lambda v: len(v) == 0 or any(x != 0 for x in v), "must not be the zero vector")),
    "harnack_t1": (_float, _POS),
    "harnack_t2": (_float, _POS),
    "c2_beta": (_float, (lambda v: v > 1, "must be > 1")),
    "c2_seed": (_list(_float), None),
    "c2_height": (_float, _POS),
    "c2_G": (_float, _POS),
    "floor_x": (_list(_float), None),
    "floor_t": (_float, _NONNEG),
    "disjoint_r": (_float, _POS),
    "disjoint_R": (_float, _POS),
    "disjoint_T": (_float, _NONNEG),
    "dual_rho": (_list(_float), (lambda v: len(v) > 0 and all(x > 0 for x in v), "entries must be > 0")),
    "dual_samples": (_int, _POS),
    "nested_L": (_list(_float), (lambda v: all(x > 0 for x in v) and all(b > a for a, b in zip(v, v[1:])), "must be an increasing list of positive widths")),
}

REQUIRED = ("scenario", "rho", "n", "L", "dx", "t_end")


def _cross_checks(cfg: dict[str, Any], line_of: dict[str, int]) -> list[tuple[int, str]]:
    """Constraints between keys; reported at the line of the later key."""
    errs = []

    def err(key, msg):
        errs.append((line_of.get(key, 0), msg))

    L, dx, n = cfg["L"], cfg["dx"], cfg["n"]
    steps = L / dx
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
        err("dx", "L must be an integer multiple of dx")
    diags = cfg.get("diagnostics", ())
    if cfg.get("boundary") == "barrier" and cfg["scenario"] != "hemisphere":
        err("boundary", "barrier boundary needs the hemisphere scenario")
    if cfg["scenario"] == "hemisphere" and L >= cfg.get("r0", 2.0):
        err("L", "L must be < r0 for the hemisphere scenario")
    if any(t > cfg["t_end"] for t in cfg.get("snapshot_times", ())):
        err("snapshot_times", "snapshot times must not exceed t_end")
    if "harnack" in diags:
        p = cfg.get("harnack_p", ())
        if len(p) != n + 1:
            err("harnack_p", f"harnack_p needs {n + 1} components")
        t1, t2 = cfg.get("harnack_t1", 0.01), cfg.get("harnack_t2", 0.04)
        if not t1 <= t2 <= cfg["t_end"]:
            err("harnack_t2", "need harnack_t1 <= harnack_t2 <= t_end")
    if "c2_monitor" in diags and len(cfg.get("c2_seed", ())) != n:
        err("c2_seed", f"c2_seed needs {n} components")
    if "velocity_floor" in diags:
        if len(cfg.get("floor_x", ())) != n:
            err("floor_x", f"floor_x needs {n} components")
        if not 0 < cfg.get("floor_t", 0.0) <= cfg["t_end"]:
            err("floor_t", "floor_t must be in (0, t_end]")
    if "disjointness" in diags:
        r, R = cfg.get("disjoint_r", 0.5), cfg.get("disjoint_R", 1.5)
        if not r < R < L:
            err("disjoint_R", "need disjoint_r < disjoint_R < L")
    if "nested_domains" in diags and len(cfg.get("nested_L", ())) == 0:
        err("nested_L", "nested_domains needs nested_L")
    return errs


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config, raising :class:`ConfigError` with every problem."""
    errors: list[tuple[int, str]] = []
    values: dict[str, Any] = {}
    line_of: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append((lineno, f"expected 'key = value', got {line!r}"))
            continue
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in SCHEMA:
            errors.append((lineno, f"unknown key {key!r}"))
            continue
        if key in line_of:
            errors.append((lineno, f"{key} already set on line {line_of[key]}"))
            continue
        line_of[key] = lineno
        parser, constraint = SCHEMA[key]
        try:
            parsed = parser(val)
        except ValueError:
            errors.append((lineno, f"{key} has the wrong type: {val!r}"))
            continue
        if constraint is not None and not constraint[0](parsed):
            errors.append((lineno, f"{key} {constraint[1]}"))
            continue
        values[key] = parsed
    last = len(text.splitlines()) + 1
    for key in REQUIRED:
        if key not in line_of:
            errors.append((last, f"missing required key {key!r}"))
    if not errors:
        errors.extend(_cross_checks(values, line_of))
    if errors:
        raise ConfigError(sorted(errors))
    return RunConfig(**values)


def emit_config(cfg: RunConfig) -> str:
    """Text that :func:`parse_config` maps back to ``cfg`` exactly."""
    lines = [f"{f.name} = {_emit(getattr(cfg, f.name))}" for f in dataclasses.fields(cfg)]
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# -- CSV -----------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows) -> Path:
    """Comma separated, header row, LF endings, floats to 17 digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    path = Path(path)
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path
