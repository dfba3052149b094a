"""Experiment configuration files: INI-style sections, strictly validated.

One file describes one reproducible experiment.  Sections and keys:

    [problem]  case, nu, T, grid
    [noise]    amplitude, K, modes, solenoidal
    [time]     tau | tau_ladder, lattice_refinement
    [scheme]   variant | variants, tol, max_iters, dealias
    [study]    samples, base_seed
    [output]   directory, formats, snapshot_every
    [check]    samples_iw, samples_iw2, samples_peano

Unknown sections or keys are errors.  Fractions like ``1/8`` are accepted
wherever a real number is expected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

__all__ = ["ConfigError", "RunSettings", "load_config", "parse_number"]


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


_SCHEMA = {
    "problem": {"case", "nu", "t", "grid"},
    "noise": {"amplitude", "k", "modes", "solenoidal"},
    "time": {"tau", "tau_ladder", "lattice_refinement"},
    "scheme": {"variant", "variants", "tol", "max_iters", "dealias"},
    "study": {"samples", "base_seed"},
    "output": {"directory", "formats", "snapshot_every"},
    "check": {"samples_iw", "samples_iw2", "samples_peano"},
}


def parse_number(text: str) -> float:
    """Parse a real number, allowing fraction syntax like ``1/8``."""
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse number {text!r}") from exc
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


def _parse_list(text: str) -> list:
    return [item.strip() for item in text.split(",") if item.strip()]


@dataclass
class RunSettings:
    """Validated contents of an experiment configuration file."""

    case: str = "taylor-green"
    nu: float | None = None
    horizon: float = 1.0
    grid: int = 32

    amplitude: float | None = None
    n_modes: int | None = None
    mode_names: list = field(default_factory=list)
    solenoidal: list = field(default_factory=list)

    tau: float | None = None
    tau_ladder: list = field(default_factory=list)
    lattice_refinement: int = 1

    variants: list = field(default_factory=lambda: ["cn_rpde"])
    tol: float = 1e-10
    max_iters: int = 100
    dealias: bool = True

    samples: int = 16
    base_seed: int = 0

    directory: str = "."
    formats: list = field(default_factory=lambda: ["csv"])
    snapshot_every: int = 0

    samples_iw: int = 10_000
    samples_iw2: int = 10_000
    samples_peano: int = 1_000


def load_config(path) -> RunSettings:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    for section in parser.sections():
        low = section.lower()
        if low not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key.lower() not in _SCHEMA[low]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    s = RunSettings()

    def get(section, key, default=None):
        if parser.has_section(section) and parser.has_option(section, key):
            return parser.get(section, key)
        return default

    if (v := get("problem", "case")) is not None:
        s.case = v.strip()
    if (v := get("problem", "nu")) is not None:
        s.nu = parse_number(v)
        if s.nu <= 0:
            raise ConfigError("nu must be positive")
    if (v := get("problem", "t")) is not None:
        s.horizon = parse_number(v)
        if s.horizon <= 0:
            raise ConfigError("T must be positive")
    if (v := get("problem", "grid")) is not None:
        s.grid = int(v)

    if (v := get("noise", "amplitude")) is not None:
        s.amplitude = parse_number(v)
    if (v := get("noise", "k")) is not None:
        s.n_modes = int(v)
        if s.n_modes < 1:
            raise ConfigError("noise K must be >= 1")
    if (v := get("noise", "modes")) is not None:
        s.mode_names = _parse_list(v)
    if (v := get("noise", "solenoidal")) is not None:
        s.solenoidal = [_parse_bool(x) for x in _parse_list(v)]

    if (v := get("time", "tau")) is not None:
        s.tau = parse_number(v)
    if (v := get("time", "tau_ladder")) is not None:
        s.tau_ladder = [parse_number(x) for x in _parse_list(v)]
    if (v := get("time", "lattice_refinement")) is not None:
        s.lattice_refinement = int(v)
        if s.lattice_refinement < 1:
            raise ConfigError("lattice_refinement must be >= 1")

    if (v := get("scheme", "variant")) is not None:
        s.variants = [v.strip()]
    if (v := get("scheme", "variants")) is not None:
        s.variants = _parse_list(v)
    if (v := get("scheme", "tol")) is not None:
        s.tol = parse_number(v)
    if (v := get("scheme", "max_iters")) is not None:
        s.max_iters = int(v)
    if (v := get("scheme", "dealias")) is not None:
        s.dealias = _parse_bool(v)

    if (v := get("study", "samples")) is not None:
        s.samples = int(v)
        if s.samples < 1:
            raise ConfigError("samples must be >= 1")
    if (v := get("study", "base_seed")) is not None:
        s.base_seed = int(v)

    if (v := get("output", "directory")) is not None:
        s.directory = v.strip()
    if (v := get("output", "formats")) is not None:
        s.formats = [x.lower() for x in _parse_list(v)]
        for fmt in s.formats:
            if fmt not in ("csv", "binary"):
                raise ConfigError(f"unknown output format {fmt!r}")
    if (v := get("output", "snapshot_every")) is not None:
        s.snapshot_every = int(v)

    for key in ("samples_iw", "samples_iw2", "samples_peano"):
        if (v := get("check", key)) is not None:
            setattr(s, key, int(v))

    return s
