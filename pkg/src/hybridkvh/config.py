"""Line-oriented scenario configuration: ``[section]`` headers over
``key = value`` pairs, ``#`` comments, values parsed as int, float,
bool, or bare string.  Parsing validates against the known schema and
reports the first error with its line number; the serializer emits a
canonical form (defaults filled, fixed order) that re-parses to an
equal configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

TWO_PI = 2.0 * np.pi


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass
class GridSection:
    mode: str = "finite_dim"
    nq: int = 64
    np: int = 64
    nx: int = 0            # continuum quantum grid size
    n_levels: int = 0      # finite_dim level count
    lq: float = TWO_PI
    lp: float = 2 * TWO_PI
    lx: float = TWO_PI


@dataclass
class ModelSection:
    hbar: float = 1.0
    m: float = 1.0
    M: float = 1.0
    lam: float = 0.0
    potential: str = "pendulum_bilinear"


@dataclass
class InitialSection:
    type: str = "gaussian_product"
    q0: float = 0.0
    p0: float = 0.0
    kappa_q: float = 2.0
    sigma_p: float = 0.7
    mode_q: int = 0
    mode_p: int = 0
    mode_sigma: float = 2.0
    spinor: str = "1,0"
    kappa_x: float = 2.0
    x0: float = 0.0
    mode_x: int = 1
    bloch_amp: float = 0.4
    w_amp: float = 0.0


@dataclass
class RunSection:
    kind: str = "wave"
    dt: float = 1e-3
    steps: int = 0
    diag_every: int = 1
    snapshot_every: int = 0
    node_threshold: float = 1e-10
    boundary_mass_threshold: float = 1e-6
    pairing_residual: bool = False
    general: bool = False
    loops: bool = False
    loop_points: int = 256
    loop_center_q: float = 0.0
    loop_center_p: float = 0.0
    loop_center_x: float = 0.0
    loop_r_q: float = 0.4
    loop_r_p: float = 0.4
    loop_r_x: float = 0.4
    traj_dump_every: int = 500


@dataclass
class OutputSection:
    directory: str = "out"
    formats: str = "csv,snapshots"


@dataclass
class ScenarioConfig:
    grid: GridSection = field(default_factory=GridSection)
    model: ModelSection = field(default_factory=ModelSection)
    initial: InitialSection = field(default_factory=InitialSection)
    run: RunSection = field(default_factory=RunSection)
    output: OutputSection = field(default_factory=OutputSection)


_SECTIONS = {"grid": GridSection, "model": ModelSection, "initial": InitialSection,
             "run": RunSection, "output": OutputSection}

# config-file key -> dataclass attribute, where they differ
_KEY_ALIASES = {("model", "lambda"): "lam", ("grid", "np"): "np", ("model", "M"): "M"}

_POTENTIALS = ("uncoupled", "pendulum_bilinear", "analytic_alpha")
_INITIAL_TYPES = ("gaussian_product", "plane_wave_product", "positive_packet",
                  "closure_default")
_RUN_KINDS = ("wave", "closure")


def _parse_value(raw: str):
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _attr_name(section: str, key: str) -> str:
    return _KEY_ALIASES.get((section, key), key)


def parse_config(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    section = None
    seen_sections = set()
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {rawline.strip()!r}", lineno)
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            section = name
            seen_sections.add(name)
            continue
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {rawline.strip()!r}", lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        attr = _attr_name(section, key)
        target = getattr(cfg, section)
        valid = {f.name for f in dc_fields(target)}
        if attr not in valid:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        value = _parse_value(raw)
        current = getattr(target, attr)
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"key {key!r} expects a boolean, got {raw!r}", lineno)
        elif isinstance(current, int):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"key {key!r} expects an integer, got {raw!r}", lineno)
        elif isinstance(current, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"key {key!r} expects a number, got {raw!r}", lineno)
            value = float(value)
        else:
            value = str(raw)
        setattr(target, attr, value)
        _validate_key(section, key, value, lineno)
    _validate(cfg, seen_sections)
    return cfg


def _validate_key(section: str, key: str, value, lineno: int) -> None:
    if section == "grid" and key in ("nq", "np", "nx", "n_levels") and value < 0:
        raise ConfigError(f"key {key!r} must be nonnegative, got {value}", lineno)
    if section == "grid" and key in ("lq", "lp", "lx") and value <= 0:
        raise ConfigError(f"key {key!r} must be positive, got {value}", lineno)
    if section == "run" and key == "dt" and value <= 0:
        raise ConfigError(f"key 'dt' must be positive, got {value}", lineno)
    if section == "run" and key == "steps" and value < 0:
        raise ConfigError(f"key 'steps' must be nonnegative, got {value}", lineno)


def _validate(cfg: ScenarioConfig, seen: set) -> None:
    for required in ("grid", "model", "run"):
        if required not in seen:
            raise ConfigError(f"missing required section [{required}]")
    g = cfg.grid
    if g.mode not in ("continuum", "finite_dim"):
        raise ConfigError(f"grid mode must be continuum or finite_dim, got {g.mode!r}")
    for name in ("nq", "np"):
        v = getattr(g, name)
        if v < 4 or v % 2:
            raise ConfigError(f"grid {name}={v}: sizes must be even and >= 4")
    if g.mode == "continuum":
        if g.nx < 4 or g.nx % 2:
            raise ConfigError(f"grid nx={g.nx}: continuum mode needs even nx >= 4")
    else:
        if g.n_levels < 1:
            raise ConfigError(f"grid n_levels={g.n_levels}: finite_dim mode needs n_levels >= 1")
    if cfg.model.potential not in _POTENTIALS:
        raise ConfigError(f"unknown potential {cfg.model.potential!r}; "
                          f"choose from {', '.join(_POTENTIALS)}")
    if cfg.model.potential == "analytic_alpha" and g.mode != "finite_dim":
        raise ConfigError("analytic_alpha requires finite_dim mode")
    for name in ("hbar", "m", "M"):
        if not getattr(cfg.model, name) > 0:
            raise ConfigError(f"model {name} must be strictly positive")
    if cfg.initial.type not in _INITIAL_TYPES:
        raise ConfigError(f"unknown initial-state type {cfg.initial.type!r}; "
                          f"choose from {', '.join(_INITIAL_TYPES)}")
    if cfg.run.kind not in _RUN_KINDS:
        raise ConfigError(f"unknown run kind {cfg.run.kind!r}")
    if cfg.run.kind == "closure" and g.mode != "finite_dim":
        raise ConfigError("closure runs require finite_dim mode")
    if cfg.run.loops and g.mode != "continuum":
        raise ConfigError("loop diagnostics require continuum mode")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ScenarioConfig) -> str:
    lines = []
    reverse_alias = {(s, a): k for (s, k), a in _KEY_ALIASES.items()}
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        target = getattr(cfg, section)
        for f in dc_fields(target):
            key = reverse_alias.get((section, f.name), f.name)
            lines.append(f"{key} = {_fmt(getattr(target, f.name))}")
        lines.append("")
    return "\n".join(lines)
