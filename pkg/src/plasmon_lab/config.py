"""Run configuration: INI-style ``key = value`` files with ``[section]`` headers.

Recognised sections
-------------------
``[profile]``      kind, d and the constructor parameters of the equilibrium
                   (``beta``, ``amplitude``, ``chemical_potential``, ``fugacity``,
                   ``order``, ``energy_cutoff``; ``table`` = path of an ``e,mu`` CSV
                   for ``user_table``).
``[interaction]``  ``kind = coulomb`` (the only kind expressible in a text file).
``[run]``          ``output_dir``, ``threads``.

Every error raised while reading a file is a :class:`ConfigError` whose message
names the file and the offending line.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilibria
from .dielectric import InteractionSymbol, coulomb
from .errors import ConfigError, DomainError

PROFILE_KEYS = {
    "maxwell": {"beta": float, "amplitude": float},
    "fermi_dirac": {"beta": float, "chemical_potential": float},
    "bose_einstein": {"beta": float, "fugacity": float},
    "compact_poly": {"order": int, "energy_cutoff": float},
    "user_table": {"table": str},
}

BUILTIN_PROFILES = {
    "maxwell": lambda: equilibria.maxwell(1.0, 1.0, 3),
    "compact": lambda: equilibria.compact_poly(2, 1.0, 3),
    "compact_m10": lambda: equilibria.compact_poly(10, 1.0, 3),
    "fermi_dirac": lambda: equilibria.fermi_dirac(1.0, 1.0, 3),
}


@dataclass
class RunConfig:
    profile: equilibria.EquilibriumProfile
    interaction: InteractionSymbol = field(default_factory=coulomb)
    output_dir: Path = Path(".")
    threads: int = 1
    source: str = "<builtin>"


def _key_lines(path: Path):
    """Map (section, key) -> 1-based line number, for line-precise messages."""
    lines = {}
    section = None
    for no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
            lines[(section, None)] = no
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
        lines[(section, key)] = no
    return lines


def _parse_value(text, kind, where):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {text!r} as {kind.__name__}") from None


def _read_table(path: Path, where):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{where}: cannot read table {str(path)!r}: {exc}") from None
    if data.shape[1] != 2:
        raise ConfigError(f"{where}: table must have two columns e,mu")
    return data[:, 0], data[:, 1]


def load_config(path, output_dir=None, threads=None) -> RunConfig:
    """Parse a config file into a :class:`RunConfig`."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    lines = _key_lines(path)

    def where(section, key=None):
        no = lines.get((section, key), lines.get((section, None), 0))
        return f"{path}:{no}"

    if not parser.has_section("profile"):
        raise ConfigError(f"{path}:0: missing [profile] section")
    prof = parser["profile"]
    kind = prof.get("kind")
    if kind is None:
        raise ConfigError(f"{where('profile')}: [profile] needs a 'kind' key")
    if kind not in PROFILE_KEYS:
        raise ConfigError(f"{where('profile', 'kind')}: unknown profile kind {kind!r}; "
                          f"expected one of {sorted(PROFILE_KEYS)}")
    allowed = PROFILE_KEYS[kind]
    d = _parse_value(prof.get("d", "3"), int, where("profile", "d"))
    params = {}
    for key, text in prof.items():
        if key in ("kind", "d"):
            continue
        if key not in allowed:
            raise ConfigError(f"{where('profile', key)}: key {key!r} not valid for kind {kind!r}")
        params[key] = _parse_value(text, allowed[key], where("profile", key))
    try:
        if kind == "user_table":
            if "table" not in params:
                raise ConfigError(f"{where('profile')}: user_table needs a 'table' key")
            tpath = Path(params["table"])
            if not tpath.is_absolute():
                tpath = path.parent / tpath
            e, mu = _read_table(tpath, where("profile", "table"))
            profile = equilibria.user_table(e, mu, d)
        else:
            profile = getattr(equilibria, kind)(d=d, **params)
    except DomainError as exc:
        bad = next((k for k in params if k in str(exc)), "kind")
        raise ConfigError(f"{where('profile', bad)}: {exc}") from None

    interaction = coulomb()
    if parser.has_section("interaction"):
        ikind = parser["interaction"].get("kind", "coulomb")
        if ikind != "coulomb":
            raise ConfigError(f"{where('interaction', 'kind')}: only 'coulomb' interactions can be configured "
                              "from a file (use the library API for general symbols)")

    run = parser["run"] if parser.has_section("run") else {}
    out = Path(output_dir if output_dir is not None else run.get("output_dir", "."))
    nthreads = threads if threads is not None else _parse_value(run.get("threads", "0"), int,
                                                                where("run", "threads"))
    return RunConfig(profile, interaction, out, resolve_threads(nthreads), str(path))


def resolve_threads(requested=0) -> int:
    """Worker count: explicit request, else PLASMON_THREADS, else 1."""
    if requested and requested > 0:
        return int(requested)
    env = os.environ.get("PLASMON_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"PLASMON_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"PLASMON_THREADS must be a positive integer, got {env!r}")
        return n
    return 1


def resolve_profile(spec, output_dir=None, threads=None) -> RunConfig:
    """``spec`` is a builtin name (maxwell, compact, compact_m10, fermi_dirac) or a config path."""
    if spec in BUILTIN_PROFILES and not Path(spec).is_file():
        return RunConfig(BUILTIN_PROFILES[spec](), coulomb(), Path(output_dir or "."), resolve_threads(threads or 0),
                         spec)
    return load_config(spec, output_dir, threads)


def parse_grid(text, name="grid"):
    """'a:b:step' (inclusive of b up to rounding) or comma-separated values; must be strictly increasing."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            a, b, h = parts
            if not h > 0 or b < a:
                raise ConfigError(f"{name} {text!r}: need a <= b and step > 0")
            n = int(np.floor((b - a) / h + 1e-9)) + 1
            grid = a + h * np.arange(n)
        else:
            grid = np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError:
        raise ConfigError(f"{name} {text!r}: expected 'a:b:step' or a comma-separated list") from None
    if grid.size == 0:
        raise ConfigError(f"{name} {text!r} is empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError(f"{name} {text!r} must be strictly increasing")
    return grid
