"""INI config files describing systems, scenarios, and sweeps.

A config has a [scenario] section naming the kind, a [system] section
with model parameters, and optional [system2] or [pair] sections for
conjugacy work, [run] for knob overrides, and [sweep] for parameter
grids.  Every parse problem raises ConfigError naming the file, the
section, and the key.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .errors import ConfigError
from .model import CONFIG_KEYS, SystemSpec, system_from_dict
from .pipeline import PipelineKnobs

SCENARIOS = ("verify-asymptotics", "estimate-moduli", "conjugacy-pair", "sweep")

_KNOB_FIELDS = {f.name: f.type for f in dataclasses.fields(PipelineKnobs)}

_SWEEPABLE = CONFIG_KEYS


@dataclass(frozen=True)
class PairSpec:
    """Construction parameters for a conjugated partner system."""

    rho: float = 1.0
    omega: float = 0.0
    mu: float = 1.0
    mirror: bool = False


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    minimum: float
    maximum: float
    count: int


@dataclass(frozen=True)
class RunConfig:
    path: str
    scenario: str
    system: SystemSpec
    system2: SystemSpec | None
    pair: PairSpec | None
    knobs: PipelineKnobs
    epsilon: float
    sweep: SweepSpec | None


def _float(path: str, section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(
            f"{path}: [{section}] {key} = {raw!r} is not a number"
        ) from exc


def _int(path: str, section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(
            f"{path}: [{section}] {key} = {raw!r} is not an integer"
        ) from exc


def _bool(path: str, section: str, key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{path}: [{section}] {key} = {raw!r} is not a boolean")


def _system_from_section(path: str, parser: configparser.ConfigParser, section: str, label: str) -> SystemSpec:
    data: dict[str, float] = {}
    for key, raw in parser.items(section):
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}: [{section}] unknown key {key!r}")
        if key in ("n0", "u", "j", "m0"):
            data[key] = _int(path, section, key, raw)
        else:
            data[key] = _float(path, section, key, raw)
    return system_from_dict(data, label=label)


def _knobs_from_section(path: str, parser: configparser.ConfigParser) -> PipelineKnobs:
    if not parser.has_section("run"):
        return PipelineKnobs()
    overrides: dict = {}
    for key, raw in parser.items("run"):
        if key == "epsilon":
            continue
        if key not in _KNOB_FIELDS:
            raise ConfigError(f"{path}: [run] unknown key {key!r}")
        kind = _KNOB_FIELDS[key]
        if kind in (int, "int"):
            overrides[key] = _int(path, "run", key, raw)
        else:
            overrides[key] = _float(path, "run", key, raw)
    return dataclasses.replace(PipelineKnobs(), **overrides)


def _pair_from_section(path: str, parser: configparser.ConfigParser) -> PairSpec:
    values = {"rho": 1.0, "omega": 0.0, "mu": 1.0}
    mirror = False
    for key, raw in parser.items("pair"):
        if key == "mirror":
            mirror = _bool(path, "pair", key, raw)
        elif key in values:
            values[key] = _float(path, "pair", key, raw)
        else:
            raise ConfigError(f"{path}: [pair] unknown key {key!r}")
    return PairSpec(values["rho"], values["omega"], values["mu"], mirror)


def _sweep_from_section(path: str, parser: configparser.ConfigParser) -> SweepSpec:
    needed = {"parameter", "min", "max", "count"}
    present = {key for key, _ in parser.items("sweep")}
    missing = needed - present
    if missing:
        raise ConfigError(
            f"{path}: [sweep] missing keys: {', '.join(sorted(missing))}"
        )
    extra = present - needed
    if extra:
        raise ConfigError(f"{path}: [sweep] unknown key {sorted(extra)[0]!r}")
    parameter = parser.get("sweep", "parameter").strip()
    if parameter not in _SWEEPABLE:
        raise ConfigError(
            f"{path}: [sweep] parameter = {parameter!r} is not a system key"
        )
    minimum = _float(path, "sweep", "min", parser.get("sweep", "min"))
    maximum = _float(path, "sweep", "max", parser.get("sweep", "max"))
    count = _int(path, "sweep", "count", parser.get("sweep", "count"))
    if count < 0:
        raise ConfigError(f"{path}: [sweep] count must be non-negative")
    if count > 1 and not minimum <= maximum:
        raise ConfigError(f"{path}: [sweep] min must not exceed max")
    return SweepSpec(parameter, minimum, maximum, count)


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        where = f"{path}, line {line}" if line is not None else path
        raise ConfigError(f"{where}: {exc.message}") from exc
    if not read:
        raise ConfigError(f"{path}: cannot read config file")

    known_sections = {"scenario", "system", "system2", "pair", "run", "sweep"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"{path}: unknown section [{section}]")

    if not parser.has_section("scenario"):
        raise ConfigError(f"{path}: missing [scenario] section")
    scenario_keys = {key for key, _ in parser.items("scenario")}
    extra = scenario_keys - {"kind", "epsilon"}
    if extra:
        raise ConfigError(f"{path}: [scenario] unknown key {sorted(extra)[0]!r}")
    if "kind" not in scenario_keys:
        raise ConfigError(f"{path}: [scenario] missing key 'kind'")
    kind = parser.get("scenario", "kind").strip()
    if kind not in SCENARIOS:
        raise ConfigError(
            f"{path}: [scenario] kind = {kind!r}; expected one of {', '.join(SCENARIOS)}"
        )

    if not parser.has_section("system"):
        raise ConfigError(f"{path}: missing [system] section")
    system = _system_from_section(path, parser, "system", label="system")

    system2 = None
    if parser.has_section("system2"):
        system2 = _system_from_section(path, parser, "system2", label="system2")

    pair = None
    if parser.has_section("pair"):
        pair = _pair_from_section(path, parser)

    if kind == "conjugacy-pair" and system2 is None and pair is None:
        raise ConfigError(
            f"{path}: scenario 'conjugacy-pair' needs a [system2] or [pair] section"
        )

    sweep = None
    if parser.has_section("sweep"):
        sweep = _sweep_from_section(path, parser)
    if kind == "sweep" and sweep is None:
        raise ConfigError(f"{path}: scenario 'sweep' needs a [sweep] section")

    epsilon = 1e-6
    if parser.has_option("scenario", "epsilon"):
        epsilon = _float(path, "scenario", "epsilon", parser.get("scenario", "epsilon"))

    knobs = _knobs_from_section(path, parser)

    return RunConfig(
        path=str(path),
        scenario=kind,
        system=system,
        system2=system2,
        pair=pair,
        knobs=knobs,
        epsilon=epsilon,
        sweep=sweep,
    )
