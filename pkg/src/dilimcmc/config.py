"""Plain-text experiment configuration.

The format is one ``key = value`` pair per line; blank lines and ``#``
comments are ignored.  Keys are validated against a fixed schema and unknown
keys raise, so typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

__all__ = ["ExperimentConfig", "parse_config", "load_config", "ConfigError"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Settings of one sampling experiment (defaults are sensible for the
    diffusion benchmark)."""

    problem: str = "diffusion"        # diffusion | elliptic
    grid: int = 20                    # elliptic mesh size (parameter dim grid^2)
    steps: int = 1000                 # diffusion time steps (parameter dim)
    snr: float = 10.0                 # elliptic noise level
    sigma: float = 0.1                # diffusion noise level
    sampler: str = "dili"             # dili | mwg | pcn | h-langevin
    proposal: str = "li-prior"        # li-prior | li-langevin
    iterations: int = 10000
    thin: int = 10
    seed: int = 0
    start: str = "map"                # map | zero
    dtau_lis: float = 0.1
    dtau_perp: float = 0.5
    pcn_a: float = 0.9
    dtau: float = 0.05                # h-langevin time step
    n_lag: int = 200
    n_b: int = 50
    n_max: int = 1000
    delta_lis: float = 1e-5
    rho_local: float = 0.1
    rho_global: float = 0.1
    rho_keep: float = 1e-4
    variance_floor: float = 1e-2
    burn_frac: float = 0.2
    output_dir: str = "results"

    def __post_init__(self):
        if self.problem not in ("diffusion", "elliptic"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.sampler not in ("dili", "mwg", "pcn", "h-langevin"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.proposal not in ("li-prior", "li-langevin"):
            raise ConfigError(f"unknown proposal {self.proposal!r}")
        if self.start not in ("map", "zero"):
            raise ConfigError(f"unknown start {self.start!r}")
        if self.iterations < 1 or self.thin < 1:
            raise ConfigError("iterations and thin must be positive")


_SCHEMA = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = _SCHEMA[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; unknown keys and malformed lines raise."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
