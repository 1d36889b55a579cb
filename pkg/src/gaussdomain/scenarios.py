"""Measure factory and the built-in scenario catalog.

Measures and triplets are declared in configs by kind plus parameters; this
module turns declarations into objects and ships seven ready-made scenarios
covering the finite-variance, slowly-varying, degenerate, out-of-domain,
large-time, small-time, and shifted-measure cases.
"""

from __future__ import annotations

import copy

import numpy as np

from .errors import ConfigError
from .measures import (
    AtomicDirections,
    AtomicLevyMeasure,
    BoxMeasure,
    EmpiricalMeasure,
    GaussianMeasure,
    LevyTriplet,
    LinearImageMeasure,
    RadialLevyMeasure,
    RadialMeasure,
    ShiftedMeasure,
    UniformDirections,
    power_tail_radial,
)

E_MINUS_2 = float(np.exp(-2.0))


def _direction_from_config(decl, dimension: int):
    if decl is None or decl == "uniform":
        return UniformDirections(dimension)
    if decl == "symmetric":
        if dimension != 1:
            raise ConfigError("direction 'symmetric' is one-dimensional")
        return AtomicDirections.symmetric_1d()
    if isinstance(decl, dict):
        return AtomicDirections(decl["vectors"], decl["weights"])
    raise ConfigError(f"unknown direction declaration {decl!r}")


def measure_from_config(decl: dict):
    """Instantiate a probability measure from its config declaration."""
    if not isinstance(decl, dict) or "kind" not in decl:
        raise ConfigError("measure: declaration needs a 'kind' key")
    kind = decl["kind"]
    if kind == "uniform-box":
        return BoxMeasure(decl.get("dimension", 2), decl.get("half_width", 1.0))
    if kind == "gaussian":
        return GaussianMeasure(decl.get("dimension", 2), decl.get("sigma", 1.0))
    if kind == "radial-power":
        d = decl.get("dimension", 2)
        return power_tail_radial(
            d, decl["alpha"], decl.get("r_min", 1.0),
            direction=_direction_from_config(decl.get("direction"), d))
    if kind == "linear-image":
        base = measure_from_config(decl["base"])
        return LinearImageMeasure(np.asarray(decl["matrix"], dtype=float), base)
    if kind == "shifted":
        base = measure_from_config(decl["base"])
        return ShiftedMeasure(base, np.asarray(decl["shift"], dtype=float))
    if kind == "empirical-csv":
        return EmpiricalMeasure.from_csv(decl["path"], decl.get("dimension"))
    raise ConfigError(f"measure: unknown kind {kind!r}")


def levy_measure_from_config(decl: dict):
    """Instantiate a Levy measure from its config declaration."""
    if not isinstance(decl, dict) or "kind" not in decl:
        raise ConfigError("levy_measure: declaration needs a 'kind' key")
    kind = decl["kind"]
    if kind == "levy-power-tail":
        # radial tail mass(|x| > r) = mass * (r/r_min)^(-alpha)
        d = decl.get("dimension", 1)
        alpha, r_min = float(decl["alpha"]), float(decl.get("r_min", 1.0))
        mass = float(decl.get("mass", 1.0))
        density = lambda r: mass * (alpha / r_min) * (r / r_min) ** (-1.0 - alpha)
        return RadialLevyMeasure(
            d, density, r_min, np.inf,
            direction=_direction_from_config(decl.get("direction"), d))
    if kind == "levy-cubic-log":
        # one-dimensional symmetric marginal 2 r^-3 (log 1/r)^-2 on (0, r_max];
        # the truncated trace has the closed form 2 / log(1/t).  The density
        # value overflows float64 near 0, so a log form rides along for the
        # quadrature.
        r_max = float(decl.get("r_max", E_MINUS_2))
        if not 0.0 < r_max < 1.0:
            raise ConfigError("levy-cubic-log: r_max must lie in (0, 1)")
        density = lambda r: 2.0 * r ** -3.0 * np.log(1.0 / r) ** -2.0
        log_density = lambda lr: np.log(2.0) - 3.0 * lr - 2.0 * np.log(-lr)
        return RadialLevyMeasure(1, density, 0.0, r_max,
                                 direction=AtomicDirections.symmetric_1d(),
                                 log_radial_density=log_density)
    if kind == "levy-atoms":
        return AtomicLevyMeasure(np.asarray(decl["points"], dtype=float),
                                 np.asarray(decl["masses"], dtype=float))
    raise ConfigError(f"levy_measure: unknown kind {kind!r}")


def triplet_from_config(decl: dict) -> LevyTriplet:
    if not isinstance(decl, dict) or "levy_measure" not in decl:
        raise ConfigError("triplet: declaration needs a 'levy_measure' key")
    m = levy_measure_from_config(decl["levy_measure"])
    return LevyTriplet(levy_measure=m, drift=decl.get("drift"))


# ---------------------------------------------------------------------------
# built-in scenarios
# ---------------------------------------------------------------------------

_SQ2I = 0.7071067811865476

_BUILTINS: dict[str, dict] = {
    "finite-variance-box": {
        "name": "finite-variance-box",
        "description": "Uniform box on [-1,1]^2: classical finite-variance "
                       "limit with B = I/2 and a = sqrt(3/2)/sqrt(n).",
        "measure": {"kind": "uniform-box", "dimension": 2, "half_width": 1.0},
        "limit_point": "infinity",
        "target_b": [[0.5, 0.0], [0.0, 0.5]],
        "radii": {"start": 0.01, "stop": 100.0, "per_decade": 32},
        "sum_sizes": [4096],
        "replicates": 20000,
        "expect": [
            {"field": "is_mrv0", "equals": True},
            {"field": "gof.pass", "at": 4096, "equals": True},
            {"field": "gof.cov_frobenius_rel", "at": 4096, "below": 0.05},
            {"field": "gof.energy_pvalue", "at": 4096, "above": 0.01},
        ],
    },
    "infinite-variance-radial": {
        "name": "infinite-variance-radial",
        "description": "Isotropic Pareto-2 tails in the plane: infinite "
                       "variance, trace 2 log t, Gaussian limit up to "
                       "logarithmically slow moments.",
        "measure": {"kind": "radial-power", "dimension": 2, "alpha": 2.0,
                    "r_min": 1.0},
        "limit_point": "infinity",
        "target_b": [[0.5, 0.0], [0.0, 0.5]],
        "radii": {"start": 1.5, "stop": 1.0e9, "per_decade": 16},
        "sum_sizes": [1000, 10000, 100000],
        "replicates": 10000,
        "expect": [
            {"field": "is_mrv0", "equals": True},
            {"field": "b_hat_target_distance", "below": 0.02},
            {"field": "gof.cov_frobenius_rel", "at": 100000, "below": 0.15},
            {"field": "gof.cov_frobenius_rel", "monotone": "nonincreasing",
             "slack": 0.02},
        ],
    },
    "degenerate-pair": {
        "name": "degenerate-pair",
        "description": "The pair (Z, Z)/sqrt(2): a rank-one limit supported "
                       "on the diagonal line, exercising degenerate B.",
        "measure": {"kind": "linear-image", "matrix": [[_SQ2I], [_SQ2I]],
                    "base": {"kind": "gaussian", "dimension": 1, "sigma": 1.0}},
        "limit_point": "infinity",
        "target_b": [[0.5, 0.5], [0.5, 0.5]],
        "radii": {"start": 0.01, "stop": 100.0, "per_decade": 32},
        "sum_sizes": [10000],
        "replicates": 10000,
        "expect": [
            {"field": "is_mrv0", "equals": True},
            {"field": "b_hat_rank", "equals": 1},
            {"field": "b_hat_target_distance", "below": 1.0e-9},
            {"field": "gof.kernel_leak", "at": 10000, "below": 0.01},
            {"field": "gof.pass", "at": 10000, "equals": True},
        ],
    },
    "stable-negative-control": {
        "name": "stable-negative-control",
        "description": "Pareto-1.5 tails: trace index 1/2, outside every "
                       "Gaussian domain; the pipeline must refuse to scale.",
        "measure": {"kind": "radial-power", "dimension": 2, "alpha": 1.5,
                    "r_min": 1.0},
        "limit_point": "infinity",
        "radii": {"start": 1.5, "stop": 1.0e9, "per_decade": 16},
        "expect": [
            {"field": "is_mrv0", "equals": False},
            {"field": "scaling_skipped", "equals": True},
            {"field": "trace_index", "within": [0.4, 0.6]},
        ],
    },
    "levy-large-time": {
        "name": "levy-large-time",
        "description": "Symmetric Pareto-2 jump measure on |x| > 1: the "
                       "marginal is Gaussian at large time with 1/sqrt(h) "
                       "scaling; tail functionals decay logarithmically.",
        "triplet": {"levy_measure": {"kind": "levy-power-tail", "dimension": 1,
                                     "alpha": 2.0, "r_min": 1.0, "mass": 1.0,
                                     "direction": "symmetric"},
                    "drift": [0.0]},
        "limit_point": "infinity",
        "target_b": [[1.0]],
        "radii": {"start": 1.5, "stop": 1.0e102, "per_decade": 8},
        "times": [100.0, 1000.0, 10000.0],
        "replicates": 10000,
        "decay_check": {"etas": [0.0, 1.0], "radii": [0.5, 1.0, 2.0],
                        "t_grid": {"start": 10.0, "stop": 1.0e200, "num": 64}},
        "stability_check": {"radii": [0.5, 1.0, 2.0],
                            "t_grid": {"start": 1.0e4, "stop": 1.0e70,
                                       "num": 16}},
        "expect": [
            {"field": "is_mrv0", "equals": True},
            {"field": "gof.trace_ratio_err", "at": 10000.0, "below": 0.10},
            {"field": "gof.trace_ratio_err", "monotone": "nonincreasing",
             "slack": 0.02},
            {"field": "decay_final_max", "below": 0.01},
            {"field": "decay_monotone", "equals": True},
            {"field": "stability_rel", "below": 0.02},
        ],
    },
    "levy-small-time": {
        "name": "levy-small-time",
        "description": "Jump density with trace 2/log(1/t) near zero: the "
                       "marginal is Gaussian at small time.",
        "triplet": {"levy_measure": {"kind": "levy-cubic-log", "dimension": 1,
                                     "r_max": E_MINUS_2},
                    "drift": [0.0]},
        "limit_point": "zero",
        "target_b": [[1.0]],
        "radii": {"start": 1.0e-9, "stop": E_MINUS_2, "per_decade": 16},
        "times": [0.01, 0.001, 0.0001],
        "replicates": 10000,
        "expect": [
            {"field": "is_mrv0", "equals": True},
            {"field": "gof.trace_ratio_err", "at": 0.0001, "below": 0.15},
        ],
    },
    "shifted-heavy": {
        "name": "shifted-heavy",
        "description": "The Pareto-2 plane measure shifted by (1, 0): "
                       "centered and uncentered moment ratios coincide in "
                       "the limit, at the 1/(2 log t) rate.",
        "measure": {"kind": "shifted", "shift": [1.0, 0.0],
                    "base": {"kind": "radial-power", "dimension": 2,
                             "alpha": 2.0, "r_min": 1.0}},
        "limit_point": "infinity",
        "radii": {"start": 2.5, "stop": 1.0e9, "per_decade": 16},
        "centering_check": {"at": 1.0e6},
        "expect": [
            {"field": "is_mrv0", "equals": True},
            {"field": "centering_discrepancy", "below": 0.04},
        ],
    },
}


def builtin_names() -> list[str]:
    return list(_BUILTINS)


def builtin_config(name: str) -> dict:
    if name not in _BUILTINS:
        raise ConfigError(
            f"unknown builtin scenario {name!r}; available: {', '.join(_BUILTINS)}"
        )
    return copy.deepcopy(_BUILTINS[name])


def list_scenarios() -> list[tuple[str, str]]:
    """Names and one-line descriptions of the built-in scenarios."""
    return [(name, cfg["description"]) for name, cfg in _BUILTINS.items()]
