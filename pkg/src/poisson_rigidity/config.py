"""INI configuration for the command-line runs.

Every section maps onto a dataclass; unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields

from .engine import EngineConfig
from .errors import ConfigError

SCENARIOS = ("sphere-so3", "sphere-so3-classical", "torus-abelian", "btorus")


@dataclass
class ScenarioConfig:
    name: str = "sphere-so3"
    N: int = 12
    padding: int = 2
    epsilon: float = 1e-2
    seed: int = 7
    perturbation_degree: int = 3

    @property
    def backend(self) -> str:
        return "torus2" if self.name.startswith(("torus", "btorus")) else "sphere2"


@dataclass
class ComplexConfig:
    differential_tol: float = 1e-8
    homotopy_tol: float = 1e-6
    casimir_tol: float = 1e-5
    samples: int = 200


@dataclass
class BtorusConfig:
    eta: float = 0.1
    tol: float = 1e-10
    density: str = "sin"


@dataclass
class QuadraticConfig:
    ks: tuple = (0, 1, 2)
    ratio_low: float = 3.5
    ratio_high: float = 4.5


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    complex: ComplexConfig = field(default_factory=ComplexConfig)
    btorus: BtorusConfig = field(default_factory=BtorusConfig)
    quadratic: QuadraticConfig = field(default_factory=QuadraticConfig)


_SECTIONS = {f.name: f for f in fields(RunConfig)}


def _convert(raw: str, default, key: str):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            if default is None and text.lower() in ("", "none", "off"):
                return None
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        if isinstance(default, tuple):
            return tuple(float(x) if "." in x else int(x) for x in text.replace(",", " ").split())
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def _apply(obj, section: str, items):
    known = {f.name for f in fields(obj)}
    for key, raw in items:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        setattr(obj, key, _convert(raw, getattr(obj, key), f"{section}.{key}"))


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        _apply(getattr(cfg, section), section, parser.items(section))
    try:
        cfg.engine.__post_init__()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def validate(cfg: RunConfig) -> None:
    s = cfg.scenario
    if s.name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {s.name!r}; expected one of {', '.join(SCENARIOS)}")
    if s.N < 1 or s.padding < 2:
        raise ConfigError("N must be >= 1 and padding >= 2")
    if s.epsilon < 0 or s.seed < 0 or s.perturbation_degree < 1:
        raise ConfigError("epsilon and seed must be nonnegative, perturbation_degree positive")
    e = cfg.engine
    for name in ("tol", "validate_tol", "max_near_norm", "max_far_norm", "divergence_factor"):
        if not getattr(e, name) > 0:
            raise ConfigError(f"engine.{name} must be positive")
    if e.steps_per_unit < 1:
        raise ConfigError("engine.steps_per_unit must be positive")
    if e.smoothing_t0 is not None and e.smoothing_t0 <= 1:
        raise ConfigError("engine.smoothing_t0 must exceed 1")
    if cfg.btorus.density not in ("sin", "cos"):
        raise ConfigError("btorus.density must be 'sin' or 'cos'")
    if not 0 < cfg.btorus.eta < 1:
        raise ConfigError("btorus.eta must lie in (0, 1)")
    for name in ("differential_tol", "homotopy_tol", "casimir_tol"):
        if not getattr(cfg.complex, name) > 0:
            raise ConfigError(f"complex.{name} must be positive")
    if cfg.complex.samples < 1:
        raise ConfigError("complex.samples must be positive")
