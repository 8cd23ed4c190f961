"""Run configuration: an INI-style ``key = value`` file with sections.

Every key has a default (some depend on the problem kind).  Unknown keys,
malformed values and violated constraints are all collected and reported
with their line numbers before anything is allocated.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field

from . import problems as P

ENGINES = ("lowrank", "fulltensor", "both")

# key -> (type, default, help).  A default of None means "depends on the problem kind".
SCHEMA = {
    "problem": {
        "kind": (str, None, "one of " + ", ".join(P.PROBLEM_KINDS)),
        "mach": (float, 1.4, "upstream Mach number (normal_shock)"),
        "alpha": (float, 0.5, "steepness of the initial tanh blend (normal_shock)"),
        "T_low": (float, 1.0, "wall temperature at x1 = lower (fourier_flow)"),
        "T_high": (float, 1.2, "wall temperature at x1 = upper (fourier_flow)"),
        "lid_speed": (float, 1.0, "tangential speed of the top wall (lid_cavity)"),
        "T_cold": (float, 1.0, "side walls and ramp start temperature (thermal_cavity)"),
        "T_hot": (float, 1.2, "ramp end temperature (thermal_cavity)"),
        "ramp_start": (float, 0.0, "ramp break, fraction of the wall (thermal_cavity)"),
        "ramp_end": (float, 1.0, "ramp break, fraction of the wall (thermal_cavity)"),
    },
    "space": {
        "n_x": (int, None, "cells per spatial dimension"),
        "lower": (float, None, "domain lower bound (every dimension)"),
        "upper": (float, None, "domain upper bound (every dimension)"),
    },
    "velocity": {
        "L_v": (float, None, "velocity box half-width"),
        "N_v": (int, 32, "velocity nodes per dimension (even)"),
        "M": (int, 8, "number of collision directions on the half circle"),
        "kernel_constant": (float, 1.0 / (2.0 * math.pi), "constant collision kernel b"),
    },
    "solver": {
        "engine": (str, "lowrank", "lowrank, fulltensor or both"),
        "res_tol": (float, None, "steady-state residual tolerance"),
        "cfl": (float, 0.3, "dt = cfl * min(dx) / L_v"),
        "dt": (float, 0.0, "explicit time step; 0 means use cfl"),
        "t_end": (float, 0.0, "stop at this time instead of at res_tol; 0 disables"),
        "max_steps": (int, 100000, "step budget"),
        "seed": (int, 0, "seed for the random spatial padding columns"),
        "c": (float, 0.2, "drop tolerance factor"),
        "add_every": (int, 1, "boundary augmentation cadence in steps"),
        "drop_every": (int, 1, "truncation cadence in steps"),
        "init_rank": (int, 0, "initial rank; 0 means use init_tol"),
        "init_tol": (float, 1e-8, "relative singular-value cut for the initial rank"),
        "checkpoint_every": (int, 0, "write a checkpoint every this many steps; 0 writes only the final one"),
    },
    "output": {
        "dir": (str, "", "output directory; default runs/<config stem>"),
    },
}

KIND_DEFAULTS = {
    "normal_shock": {"n_x": 1000, "lower": -30.0, "upper": 30.0, "L_v": 13.11, "res_tol": 3e-7},
    "fourier_flow": {"n_x": 200, "lower": 0.0, "upper": 2.0, "L_v": 7.86, "res_tol": 2e-7},
    "lid_cavity": {"n_x": 100, "lower": 0.0, "upper": 0.5, "L_v": 7.86, "res_tol": 2e-7},
    "thermal_cavity": {"n_x": 100, "lower": 0.0, "upper": 2.0, "L_v": 6.55, "res_tol": 2e-7},
    "homogeneous_relaxation": {"n_x": 1, "lower": 0.0, "upper": 1.0, "L_v": 7.86, "res_tol": 0.0},
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class RunConfig:
    problem: P.ProblemConfig
    engine: str
    res_tol: float
    dt: float
    t_end: float
    max_steps: int
    seed: int
    c: float
    add_every: int
    drop_every: int
    init_rank: int
    init_tol: float
    checkpoint_every: int
    out_dir: str
    cfl: float
    path: str = ""
    config_hash: str = ""
    values: dict = field(default_factory=dict)

    @property
    def grid_x(self):
        return self.problem.grid_x

    @property
    def grid_v(self):
        return self.problem.grid_v


_KEY_LINE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` to its 1-based line number."""
    index = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_LINE.match(line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), n)
            continue
        m = _KEY_LINE.match(line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), n)
    return index


def _convert(typ, raw: str):
    raw = raw.strip()
    if typ is int:
        return int(raw)
    if typ is float:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("not finite")
        return v
    return raw


def parse_text(text: str, path: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        where = f"{path}:{lineno}" if lineno else path
        raise ConfigError([f"{where}: {exc.message.splitlines()[0] if hasattr(exc, 'message') else exc}"]) from None
    lines = _line_index(text)
    errors = []
    values = {}

    def where(section, key=None):
        n = lines.get((section, key.lower() if key else None))
        return f"{path}:{n}" if n else path

    lowered = {sec: {k.lower(): k for k in keys} for sec, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"{where(section)}: unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            canon = lowered[section].get(key)
            if canon is None:
                errors.append(f"{where(section, key)}: unknown key '{key}' in [{section}]")
                continue
            typ = SCHEMA[section][canon][0]
            try:
                values[(section, canon)] = _convert(typ, raw)
            except ValueError:
                errors.append(f"{where(section, key)}: {canon} must be {typ.__name__}, got {raw.strip()!r}")

    def get(section, key):
        if (section, key) in values:
            return values[(section, key)]
        default = SCHEMA[section][key][1]
        if default is None and kind in KIND_DEFAULTS:
            return KIND_DEFAULTS[kind].get(key)
        return default

    kind = values.get(("problem", "kind"))
    if kind is None:
        errors.append(f"{path}: [problem] kind is required")
    elif kind not in P.PROBLEM_KINDS:
        errors.append(f"{where('problem', 'kind')}: unknown problem kind {kind!r}")

    def check(cond, section, key, msg):
        if not cond:
            errors.append(f"{where(section, key)}: {msg}")

    N_v = get("velocity", "N_v")
    check(N_v % 2 == 0, "velocity", "N_v", "N_v must be even")
    check(N_v >= 4, "velocity", "N_v", "N_v must be at least 4")
    check(get("velocity", "M") >= 1, "velocity", "M", "M must be positive")
    check(get("velocity", "kernel_constant") > 0, "velocity", "kernel_constant", "kernel_constant must be positive")
    engine = get("solver", "engine")
    check(engine in ENGINES, "solver", "engine", f"engine must be one of {', '.join(ENGINES)}")
    check(get("solver", "cfl") > 0, "solver", "cfl", "cfl must be positive")
    check(get("solver", "dt") >= 0, "solver", "dt", "dt must be nonnegative")
    check(get("solver", "t_end") >= 0, "solver", "t_end", "t_end must be nonnegative")
    check(get("solver", "max_steps") >= 1, "solver", "max_steps", "max_steps must be positive")
    check(0 < get("solver", "c") < 1, "solver", "c", "c must lie in (0, 1)")
    check(get("solver", "add_every") >= 1, "solver", "add_every", "add_every must be positive")
    check(get("solver", "drop_every") >= 1, "solver", "drop_every", "drop_every must be positive")
    check(get("solver", "init_rank") >= 0, "solver", "init_rank", "init_rank must be nonnegative")
    check(get("solver", "init_tol") > 0, "solver", "init_tol", "init_tol must be positive")
    check(get("solver", "checkpoint_every") >= 0, "solver", "checkpoint_every", "checkpoint_every must be nonnegative")
    check(get("solver", "seed") >= 0, "solver", "seed", "seed must be nonnegative")
    check(get("problem", "mach") >= 1, "problem", "mach", "mach must be >= 1")
    check(0 <= get("problem", "ramp_start") < get("problem", "ramp_end") <= 1, "problem", "ramp_start",
          "need 0 <= ramp_start < ramp_end <= 1")
    for key in ("T_low", "T_high", "T_cold", "T_hot"):
        check(get("problem", key) > 0, "problem", key, f"{key} must be positive")
    if kind in KIND_DEFAULTS:
        check(get("space", "n_x") >= 1, "space", "n_x", "n_x must be positive")
        check(get("space", "upper") > get("space", "lower"), "space", "upper", "upper must exceed lower")
        check(get("velocity", "L_v") > 0, "velocity", "L_v", "L_v must be positive")
        res_tol = get("solver", "res_tol")
        check(res_tol >= 0, "solver", "res_tol", "res_tol must be nonnegative")
    if errors:
        raise ConfigError(errors)

    problem = _build_problem(kind, get)
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    out_dir = get("output", "dir") or ""
    return RunConfig(
        problem=problem, engine=engine, res_tol=get("solver", "res_tol"), dt=get("solver", "dt"),
        t_end=get("solver", "t_end"), max_steps=get("solver", "max_steps"), seed=get("solver", "seed"),
        c=get("solver", "c"), add_every=get("solver", "add_every"), drop_every=get("solver", "drop_every"),
        init_rank=get("solver", "init_rank"), init_tol=get("solver", "init_tol"),
        checkpoint_every=get("solver", "checkpoint_every"), out_dir=out_dir, cfl=get("solver", "cfl"),
        path=path, config_hash=digest, values={f"{s}.{k}": v for (s, k), v in sorted(values.items())},
    )


def _build_problem(kind, get) -> P.ProblemConfig:
    n_x, lower, upper = get("space", "n_x"), get("space", "lower"), get("space", "upper")
    L_v, N_v = get("velocity", "L_v"), get("velocity", "N_v")
    common = {"M": get("velocity", "M"), "kernel_constant": get("velocity", "kernel_constant")}
    res_tol = get("solver", "res_tol")
    if kind == "normal_shock":
        return P.normal_shock(get("problem", "mach"), n_x, (lower, upper), L_v, N_v, res_tol,
                              get("problem", "alpha"), **common)
    if kind == "fourier_flow":
        return P.fourier_flow(n_x, (lower, upper), L_v, N_v, get("problem", "T_low"), get("problem", "T_high"),
                              res_tol, **common)
    if kind == "lid_cavity":
        _square(lower)
        return P.lid_cavity(n_x, upper, L_v, N_v, get("problem", "lid_speed"), res_tol, **common)
    if kind == "thermal_cavity":
        _square(lower)
        return P.thermal_cavity(n_x, upper, L_v, N_v, get("problem", "T_cold"), get("problem", "T_hot"),
                                get("problem", "ramp_start"), get("problem", "ramp_end"), res_tol, **common)
    return P.homogeneous_relaxation(L_v, N_v, res_tol, **common)


def _square(lower):
    if lower != 0.0:
        raise ConfigError(["cavity problems live on [0, upper]^2; lower must be 0"])


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file; I/O problems raise ``OSError``."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_text(text, str(path))


def time_step(cfg: RunConfig) -> float:
    if cfg.dt > 0:
        return cfg.dt
    return cfg.cfl * min(cfg.grid_x.dx) / cfg.grid_v.L_v
