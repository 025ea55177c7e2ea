"""Run configuration: flat ``key = value`` text with section headers.

Example::

    [experiment]
    kind = linear_cd
    name = linear_ls0_k13

    [grid]
    bounds = -1, 1
    coarsest = 9
    levels = 6

    [linear]
    splitting = Ls0
    kappa = 0.3333333333333333
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .limiters import KINDS, LimiterSpec
from .linear_cd import SplittingKind

EXPERIMENTS = ("linear_cd", "ehl", "lfa")
OUTPUT_ENV = "EHLTVD_OUTPUT_DIR"
CASES_DIR = Path(__file__).parent / "cases"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; the message names the key."""


@dataclass
class RunConfig:
    experiment: str
    name: str
    output_dir: Path
    seed: int = 0
    grid: dict = field(default_factory=dict)
    linear: dict = field(default_factory=dict)
    ehl: dict = field(default_factory=dict)
    lfa: dict = field(default_factory=dict)
    text: str = ""


_GRID = {"bounds": "floats", "coarsest": "int", "levels": "int"}
_LINEAR = {"a": "float", "eps": "float", "limiter": "limiter", "kappa": "float",
           "splitting": "splitting", "cycle": "cycle", "tol": "float", "fmg": "bool"}
_EHL = {"m": "float", "l": "float", "alpha": "float", "finest": "int", "coarsest": "int",
        "half_width": "float", "limiter": "limiter", "kappa": "float", "hybrid": "str",
        "cycle": "cycle", "tol": "float", "c_h00": "float", "omega_gs": "float",
        "omega_jac": "float", "mlmi_order": "int", "mlmi_m": "int",
        "switch_threshold": "float", "dump_fields": "bool"}
_LFA = {"eps": "float", "kappa": "float", "h": "float", "a": "float", "samples": "int",
        "splitting": "str", "surface": "bool"}
_SECTIONS = {"grid": _GRID, "linear": _LINEAR, "ehl": _EHL, "lfa": _LFA}


def _convert(section, key, raw, kind):
    where = f"[{section}] {key}"
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            v = int(raw)
            if v < 1:
                raise ValueError("must be >= 1")
            return v
        if kind == "floats":
            return tuple(float(t) for t in raw.split(","))
        if kind == "bool":
            t = raw.strip().lower()
            if t not in ("yes", "no", "true", "false", "1", "0", "on", "off"):
                raise ValueError("expected yes/no")
            return t in ("yes", "true", "1", "on")
        if kind == "limiter":
            t = raw.strip().lower()
            if t not in KINDS:
                raise ValueError(f"expected one of {KINDS}")
            return t
        if kind == "splitting":
            return SplittingKind.parse(raw).value
        if kind == "cycle":
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 4 or parts[2].upper() not in ("V", "W"):
                raise ValueError("expected nu1, nu2, V|W, count")
            return (int(parts[0]), int(parts[1]), parts[2].upper(), int(parts[3]))
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: invalid value {raw!r} ({exc})") from None


def parse_config(text: str, source="<config>") -> RunConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError("[experiment] section missing")
    exp = cp["experiment"]
    kind = exp.get("kind", "").strip()
    if kind not in EXPERIMENTS:
        raise ConfigError(f"[experiment] kind: {kind!r} is not one of {EXPERIMENTS}")
    for key in exp:
        if key not in ("kind", "name", "seed", "output_dir"):
            raise ConfigError(f"[experiment] {key}: unknown key")
    cfg = RunConfig(experiment=kind, name=exp.get("name", kind).strip(),
                    output_dir=Path(os.environ.get(OUTPUT_ENV) or exp.get("output_dir", "out")),
                    text=text)
    if "seed" in exp:
        try:
            cfg.seed = int(exp["seed"])
        except ValueError:
            raise ConfigError(f"[experiment] seed: invalid value {exp['seed']!r}") from None
    for section in cp.sections():
        if section == "experiment":
            continue
        schema = _SECTIONS.get(section)
        if schema is None:
            raise ConfigError(f"[{section}]: unknown section")
        out = getattr(cfg, section)
        for key, raw in cp[section].items():
            if key not in schema:
                raise ConfigError(f"[{section}] {key}: unknown key")
            out[key] = _convert(section, key, raw, schema[key])
    if kind == "ehl":
        for key in ("m", "l"):
            if key not in cfg.ehl:
                raise ConfigError(f"[ehl] {key}: required")
        if cfg.ehl.get("hybrid", "hs1") not in ("hs1", "hs2"):
            raise ConfigError(f"[ehl] hybrid: {cfg.ehl['hybrid']!r} is not hs1 or hs2")
    if kind == "lfa" and cfg.lfa.get("splitting", "Ls0") not in ("Ls0", "Ls1", "Ls2"):
        raise ConfigError(f"[lfa] splitting: {cfg.lfa['splitting']!r} is not Ls0, Ls1 or Ls2")
    if "bounds" in cfg.grid and len(cfg.grid["bounds"]) != 2:
        raise ConfigError("[grid] bounds: expected two numbers")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_config(text, path)


def case_path(name: str) -> Path:
    """Path of a bundled case file (``name`` without the ``.cfg`` suffix)."""
    p = CASES_DIR / f"{name}.cfg"
    if not p.is_file():
        known = sorted(q.stem for q in CASES_DIR.glob("*.cfg"))
        raise ConfigError(f"unknown case {name!r}; bundled cases: {known}")
    return p


def limiter_spec(section: dict, default_kind="kappa_fixed", default_kappa=1.0 / 3.0) -> LimiterSpec:
    kind = section.get("limiter", default_kind)
    kappa = section.get("kappa", default_kappa)
    return LimiterSpec(kind, kappa if kind == "kappa_fixed" else 1.0 / 3.0)
