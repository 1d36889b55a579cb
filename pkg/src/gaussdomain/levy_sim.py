"""Simulation of Levy-process marginals and the rescaled-measure families.

A marginal X_t with triplet (0, M, b) is simulated as a deterministic drift
term plus a compound Poisson sum of the jumps above a cutoff radius, with
the small-jump remainder either replaced by a centered Gaussian carrying the
matching truncated second moment or discarded.  The drift term uses the same
compensator-to-truncation conversion as the normalizing shifts, so scaled
marginals center correctly.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._rng import derive_rng
from .errors import InfiniteIntensityError
from .measures import LevyMeasure, LevyTriplet
from .normalize import ScalingPlan

GAUSSIAN_SUBSTITUTE = "gaussian_substitute"
DISCARD = "discard"


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.

    ``jump_cutoff`` of None picks the radius where the expected number of
    compound-Poisson jumps per path over horizon t equals ``jump_budget``,
    keeping compute flat across t.  Gaussian substitution of the small jumps
    is gated on the substitute's standard deviation dominating the cutoff:
    sqrt(t U(eps)) / eps >= gate_ratio; when the gate fails the cutoff is
    lowered (with a warning) until it passes or no small jumps remain.
    """

    n_paths: int
    seed: int
    jump_cutoff: float | None = None
    small_jump_mode: str = GAUSSIAN_SUBSTITUTE
    jump_budget: float = 1000.0
    gate_ratio: float = 10.0

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.small_jump_mode not in (GAUSSIAN_SUBSTITUTE, DISCARD):
            raise ValueError(f"unknown small_jump_mode {self.small_jump_mode!r}")


@dataclass(frozen=True)
class CutoffResolution:
    """Resolved jump cutoff for one (measure, horizon, config) triple."""

    eps: float
    intensity: float           # jumps per unit time above eps
    small_cov: np.ndarray      # truncated second moment below eps, per unit time
    has_small_part: bool
    gate_value: float          # sqrt(t U(eps)) / eps, inf when no small part


def _solve_tail_radius(measure: LevyMeasure, target: float) -> float:
    """Radius where the tail intensity crosses ``target`` (tail is monotone)."""
    floor = measure.support_floor()
    lo = max(floor, 1e-300)
    if floor <= 0.0:
        lo = 1.0
        while measure.tail_mass_above(lo) < target:
            lo /= 10.0
            if lo < 1e-280:
                raise InfiniteIntensityError(
                    "cutoff would fall below the representable support floor"
                )
    hi = max(lo, 1.0)
    while measure.tail_mass_above(hi) > target:
        hi *= 10.0
        if hi > 1e280:
            raise InfiniteIntensityError("tail intensity never drops to target")
    if hi <= lo:
        return lo
    f = lambda logr: measure.tail_mass_above(np.exp(logr)) - target
    return float(np.exp(optimize.brentq(f, np.log(lo), np.log(hi), xtol=1e-12)))


def resolve_cutoff(measure: LevyMeasure, t: float, cfg: SimConfig) -> CutoffResolution:
    """Pick the jump cutoff and validate the small-jump substitution gate."""
    floor = measure.support_floor()
    if cfg.jump_cutoff is not None:
        eps = float(cfg.jump_cutoff)
        if eps <= 0:
            raise InfiniteIntensityError("jump cutoff must be positive")
    else:
        target = cfg.jump_budget / t
        total = measure.tail_mass_above(floor) if floor > 0 else np.inf
        if np.isfinite(total) and total <= target:
            eps = floor
        else:
            eps = _solve_tail_radius(measure, target)

    intensity = measure.tail_mass_above(eps)
    if not np.isfinite(intensity):
        raise InfiniteIntensityError(
            f"tail intensity above eps = {eps:g} is not finite"
        )

    def small_state(e):
        cov = measure.truncated_integrals(e).second_moment
        u = float(np.trace(cov))
        has = u > 0.0
        gate = np.sqrt(t * u) / e if has else np.inf
        return cov, has, gate

    cov, has_small, gate = small_state(eps)
    if cfg.small_jump_mode == GAUSSIAN_SUBSTITUTE and has_small:
        lowered = False
        while gate < cfg.gate_ratio and eps > floor * (1.0 + 1e-12) and eps > 1e-280:
            eps = max(eps / 2.0, floor)
            cov, has_small, gate = small_state(eps)
            lowered = True
        if lowered:
            warnings.warn(
                f"small-jump substitution gate forced the cutoff down to "
                f"{eps:g} (gate value {gate:.3g})", stacklevel=2)
            intensity = measure.tail_mass_above(eps)
    return CutoffResolution(eps=float(eps), intensity=float(intensity),
                            small_cov=cov, has_small_part=bool(has_small),
                            gate_value=float(gate))


def _cov_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def simulate_marginal(triplet: LevyTriplet, t: float, cfg: SimConfig) -> np.ndarray:
    """Draw cfg.n_paths samples of the marginal X_t.

    Each sample is drift + compound Poisson above the cutoff + (optionally)
    the Gaussian substitute for the small jumps.  Paths use derived random
    streams indexed by path number, so results do not depend on how paths
    are batched or ordered.
    """
    m = triplet.levy_measure
    d = m.dimension
    res = resolve_cutoff(m, t, cfg)
    drift_term = t * (triplet.drift + m.compensated_drift(res.eps))
    lam = t * res.intensity
    sampler = m.jump_sampler(res.eps) if res.intensity > 0 else None
    use_gauss = cfg.small_jump_mode == GAUSSIAN_SUBSTITUTE and res.has_small_part
    sqrt_cov = np.sqrt(t) * _cov_sqrt(res.small_cov) if use_gauss else None

    label = f"levy_sim.simulate_marginal:t={float(t):.17g}"
    out = np.empty((cfg.n_paths, d))
    for i in range(cfg.n_paths):
        rng = derive_rng(cfg.seed, label, i)
        x = drift_term.copy()
        if sampler is not None:
            n_jumps = int(rng.poisson(lam))
            if n_jumps > 0:
                x = x + sampler(n_jumps, rng).sum(axis=0)
        if use_gauss:
            x = x + sqrt_cov @ rng.standard_normal(d)
        out[i] = x
    return out


def scaled_marginal(triplet: LevyTriplet, plan: ScalingPlan, t: float,
                    cfg: SimConfig) -> np.ndarray:
    """Samples of a_t X_t - xi_t using the plan's scale and shift at t."""
    a, xi = plan.lookup(t)
    return a * simulate_marginal(triplet, t, cfg) - xi


def rescaled_measure(measure: LevyMeasure, t: float, a_t: float) -> LevyMeasure:
    """The Levy measure of the scaled marginal: D -> t M(D / a_t)."""
    return measure.rescale(t, a_t)


@dataclass(frozen=True)
class DecayCurve:
    abscissae: np.ndarray
    values: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(self.abscissae, self.values):
            buf.write(f"{t:.17g},{v:.17g}\n")
        return buf.getvalue()


def eta_moment_decay(measure: LevyMeasure, plan: ScalingPlan, eta: float,
                     s: float, t_grid=None) -> DecayCurve:
    """The eta-th absolute moment of the rescaled measures outside radius s.

    Returns t -> integral of |x|^eta over |x| > s against t M(. / a_t).
    For plans coming from a valid diagnosis this decreases to 0 toward the
    limit point.  The moment condition (finite eta-moment above radius 1)
    is verified numerically before evaluating.
    """
    if not 0.0 <= eta < 2.0:
        raise ValueError("eta must lie in [0, 2)")
    check = measure.moment_above(eta, 1.0)
    if not np.isfinite(check):
        raise ValueError(
            f"the measure has a divergent moment of order {eta:g} above radius 1"
        )
    if t_grid is None:
        t_grid = plan.abscissae
    t_grid = np.asarray(t_grid, dtype=float)
    values = np.zeros(len(t_grid))
    for i, t in enumerate(t_grid):
        a, _ = plan.lookup(float(t))
        values[i] = t * a ** eta * measure.moment_above(eta, s / a)
    return DecayCurve(abscissae=t_grid, values=values)
