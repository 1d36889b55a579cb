"""Experiment configuration: schema, validation, and grid expansion.

A run config is a mapping with a mandatory ``seed`` and a list of
``scenarios``.  Each scenario declares a measure or a Levy triplet, the
radius grid for the moment curve, the simulation grid (sum sizes or times),
optional extra checks, and a list of declarative expectations.  Expectations
live in the config, not in code: the exit status of a run is determined by
the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .regvar import LimitPoint

_EXPECT_OPS = ("equals", "below", "above", "within", "monotone")


def expand_grid(spec, field_name: str) -> np.ndarray:
    """A grid spec is an explicit list or {start, stop, per_decade | num}."""
    if isinstance(spec, (list, tuple)):
        arr = np.asarray(spec, dtype=float)
        if arr.size == 0:
            raise ConfigError(f"{field_name}: grid must be nonempty")
        return arr
    if isinstance(spec, dict):
        try:
            start, stop = float(spec["start"]), float(spec["stop"])
        except KeyError as exc:
            raise ConfigError(f"{field_name}: missing grid key {exc}") from exc
        if start <= 0 or stop <= start:
            raise ConfigError(f"{field_name}: need 0 < start < stop")
        if "num" in spec:
            num = int(spec["num"])
        elif "per_decade" in spec:
            decades = np.log10(stop / start)
            num = int(np.ceil(decades * float(spec["per_decade"]))) + 1
        else:
            raise ConfigError(f"{field_name}: grid needs 'num' or 'per_decade'")
        if num < 2:
            raise ConfigError(f"{field_name}: grid needs at least 2 points")
        return np.geomspace(start, stop, num)
    raise ConfigError(f"{field_name}: grid must be a list or a mapping")


@dataclass
class Scenario:
    """One validated scenario; fields mirror the config keys."""

    name: str
    limit_point: LimitPoint
    radii: np.ndarray
    measure: dict | None = None
    triplet: dict | None = None
    target_b: np.ndarray | None = None
    sum_sizes: list = field(default_factory=list)
    times: list = field(default_factory=list)
    replicates: int = 0
    gof: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    decay_check: dict | None = None
    stability_check: dict | None = None
    centering_check: dict | None = None
    expect: list = field(default_factory=list)
    description: str = ""

    @property
    def kind(self) -> str:
        return "clt" if self.measure is not None else "levy"


def _validate_expectation(e, where: str):
    if not isinstance(e, dict) or "field" not in e:
        raise ConfigError(f"{where}: each expectation needs a 'field' key")
    ops = [k for k in _EXPECT_OPS if k in e]
    if len(ops) != 1:
        raise ConfigError(
            f"{where}: expectation on {e['field']!r} needs exactly one of "
            f"{_EXPECT_OPS}"
        )
    if "within" in e and (not isinstance(e["within"], (list, tuple))
                          or len(e["within"]) != 2):
        raise ConfigError(f"{where}: 'within' takes [lo, hi]")
    if "monotone" in e and e["monotone"] not in ("nonincreasing",):
        raise ConfigError(f"{where}: unsupported monotone kind {e['monotone']!r}")


def parse_scenario(raw: dict, where: str) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: scenario must be a mapping")
    name = raw.get("name")
    if not name:
        raise ConfigError(f"{where}: missing field 'name'")
    where = f"scenario {name!r}"

    has_measure = "measure" in raw
    has_triplet = "triplet" in raw
    if has_measure == has_triplet:
        raise ConfigError(f"{where}: declare exactly one of 'measure' or 'triplet'")

    lp_raw = raw.get("limit_point", "infinity")
    try:
        limit_point = LimitPoint(lp_raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: limit_point must be 'zero' or 'infinity'") from exc

    if "radii" not in raw:
        raise ConfigError(f"{where}: missing field 'radii'")
    radii = expand_grid(raw["radii"], f"{where}.radii")

    target_b = raw.get("target_b")
    if target_b is not None:
        target_b = np.asarray(target_b, dtype=float)
        if target_b.ndim != 2 or target_b.shape[0] != target_b.shape[1]:
            raise ConfigError(f"{where}: target_b must be a square matrix")

    sum_sizes = [int(v) for v in raw.get("sum_sizes", [])]
    times = [float(v) for v in raw.get("times", [])]
    if has_measure and times:
        raise ConfigError(f"{where}: 'times' only applies to triplet scenarios")
    if has_triplet and sum_sizes:
        raise ConfigError(f"{where}: 'sum_sizes' only applies to measure scenarios")

    replicates = int(raw.get("replicates", 0))
    if (sum_sizes or times) and replicates < 1:
        raise ConfigError(f"{where}: missing field 'replicates'")

    for e in raw.get("expect", []):
        _validate_expectation(e, where)

    return Scenario(
        name=str(name),
        limit_point=limit_point,
        radii=radii,
        measure=raw.get("measure"),
        triplet=raw.get("triplet"),
        target_b=target_b,
        sum_sizes=sum_sizes,
        times=times,
        replicates=replicates,
        gof=dict(raw.get("gof", {})),
        sim=dict(raw.get("sim", {})),
        decay_check=raw.get("decay_check"),
        stability_check=raw.get("stability_check"),
        centering_check=raw.get("centering_check"),
        expect=list(raw.get("expect", [])),
        description=str(raw.get("description", "")),
    )


def parse_config(raw: dict) -> tuple[int, list[Scenario]]:
    """Validate a run config; returns (seed, scenarios).

    Scenario entries may be builtin names (strings) which are resolved from
    the catalog.
    """
    from . import scenarios as catalog

    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    if "seed" not in raw:
        raise ConfigError("config: missing field 'seed'")
    try:
        seed = int(raw["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError("config: field 'seed' must be an integer") from exc

    entries = raw.get("scenarios")
    if not entries:
        raise ConfigError("config: missing or empty field 'scenarios'")
    parsed = []
    seen = set()
    for i, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = catalog.builtin_config(entry)
        sc = parse_scenario(entry, f"scenarios[{i}]")
        if sc.name in seen:
            raise ConfigError(f"config: duplicate scenario name {sc.name!r}")
        seen.add(sc.name)
        parsed.append(sc)
    return seed, parsed
