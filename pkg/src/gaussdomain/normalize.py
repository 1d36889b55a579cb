"""Normalizing sequences and functions built from moment curves.

The scale per sample count (or time) comes from the function
h(t) = t^2 / U(t), with U the uncentered truncated trace of the underlying
measure.  Finite-variance inputs get the closed-form 1/sqrt(n) rate; all
other cases invert h asymptotically.  Scales carry variation index -1/2
toward the limit point.
"""

from __future__ import annotations

import enum
import io
import warnings
from dataclasses import dataclass

import numpy as np

from . import regvar
from .errors import NotInDomainError
from .measures import LevyMeasure, ProbMeasure
from .moment_matrix import MomentCurve, MRVReport, mrv_diagnose
from .regvar import LimitPoint, RVFunction

#: relative trace increment over the last decade below which the second
#: moment is treated as convergent (the finite/infinite split is not
#: observable from a finite grid; stabilization is the computable surrogate)
STABILIZATION_TOL = 1e-6


class ScalingBranch(enum.Enum):
    FINITE_VARIANCE = "finite_variance"
    INFINITE_VARIANCE = "infinite_variance"
    LEVY = "levy"


@dataclass(frozen=True)
class ScalingPlan:
    """Grid of (n or t) -> (scale a, shift xi).

    Scales are defined only up to asymptotic equivalence; ``branch`` records
    which formula produced them so runs replay bit-for-bit.
    """

    abscissae: np.ndarray
    a: np.ndarray
    xi: np.ndarray
    branch: ScalingBranch
    k_used: float
    limit_point: LimitPoint

    def __post_init__(self):
        if np.any(self.a <= 0):
            raise ValueError("scales must be strictly positive")

    def lookup(self, x: float) -> tuple[float, np.ndarray]:
        """Exact-match lookup of (a, xi) at an abscissa in the plan grid."""
        idx = np.nonzero(np.isclose(self.abscissae, x, rtol=1e-12))[0]
        if len(idx) == 0:
            raise KeyError(f"abscissa {x!r} is not in the plan grid")
        i = int(idx[0])
        return float(self.a[i]), self.xi[i]


def build_h(curve: MomentCurve) -> RVFunction:
    """The normalizing function h(t) = t^2 / U(t) from a moment curve.

    U is always the uncentered trace, even for centered curves.  Grid points
    with zero trace at the leading edge (away from the limit point) are
    dropped with a warning.
    """
    raw = curve.raw_traces
    positive = raw > 0
    if not positive.all():
        if not positive.any():
            raise ValueError("trace is identically zero; h is undefined")
        warnings.warn(
            f"dropping {int((~positive).sum())} zero-trace grid points before "
            "building h", stacklevel=2)
    grid = curve.radii[positive]
    values = grid ** 2 / raw[positive]
    return RVFunction(grid=grid, values=values, limit_point=curve.limit_point)


def _is_stabilized(curve: MomentCurve) -> bool:
    # trace increment over the last decade toward the limit point
    raw = curve.raw_traces
    radii = curve.radii
    if curve.limit_point is LimitPoint.INFINITY:
        ref = radii[-1] / 10.0
        i = int(np.searchsorted(radii, ref))
        lo, hi = raw[i], raw[-1]
    else:
        ref = radii[0] * 10.0
        i = int(np.searchsorted(radii, ref, side="right")) - 1
        lo, hi = raw[0], raw[i]
    return abs(hi - lo) <= STABILIZATION_TOL * abs(hi)


def _require_mrv0(curve, limit_point, report):
    if report is None:
        report = mrv_diagnose(curve, limit_point)
    if not report.is_mrv0:
        raise NotInDomainError(
            "the moment curve is not matrix regularly varying with index 0 "
            f"(trace index {report.trace_diagnosis.index_estimate:.3f}, "
            f"matrix residual {report.matrix_residual:.3f})"
        )
    return report


def clt_scaling(measure: ProbMeasure, curve: MomentCurve, k: float,
                n_grid, report: MRVReport | None = None) -> ScalingPlan:
    """Normalizing scale and shift for iid sums of ``measure``.

    With target trace convention k (= 1/tr B for a target limit B), the
    finite-variance branch uses a_n = k^{-1/2} V^{-1/2} n^{-1/2} with V the
    stabilized centered trace; otherwise a_n = k^{-1/2} / hinv(n) with hinv
    the asymptotic inverse of h.  The shift is xi_n = n a_n times the
    truncated mean of the measure at radius 1/a_n, which makes the
    accompanying law of the shifted sum have vanishing drift.
    """
    _require_mrv0(curve, LimitPoint.INFINITY, report)
    n_grid = np.asarray(n_grid, dtype=float)
    if _is_stabilized(curve):
        centered_trace = curve.raw_traces[-1] - float(
            curve.first_moments[-1] @ curve.first_moments[-1])
        a = k ** -0.5 * centered_trace ** -0.5 / np.sqrt(n_grid)
        branch = ScalingBranch.FINITE_VARIANCE
    else:
        h_inv = regvar.asymptotic_inverse(build_h(curve), 2.0)
        a = k ** -0.5 / h_inv(n_grid)
        branch = ScalingBranch.INFINITE_VARIANCE
    xi = np.zeros((len(n_grid), measure.dimension))
    for i, n in enumerate(n_grid):
        mean_trunc = measure.truncated_integrals(1.0 / a[i]).first_moment
        xi[i] = n * a[i] * mean_trunc
    return ScalingPlan(abscissae=n_grid, a=a, xi=xi, branch=branch, k_used=k,
                       limit_point=LimitPoint.INFINITY)


def levy_scaling(levy_measure: LevyMeasure, curve: MomentCurve, k: float,
                 t_grid, limit_point: LimitPoint, drift=None,
                 report: MRVReport | None = None) -> ScalingPlan:
    """Normalizing scale and shift for Levy marginals at large or small time.

    a_t = k^{-1/2} / hinv(t), with the asymptotic inverse taken at the
    matching limit point.  The shift converts the cumulant drift convention
    (compensator x/(1+|x|^2)) to truncation at radius 1/a_t:
    xi_t = a_t t (b + integral of x [1_{|x|<=1/a_t} - 1/(1+|x|^2)] M(dx)),
    which zeroes the mean of the limit.
    """
    _require_mrv0(curve, limit_point, report)
    t_grid = np.asarray(t_grid, dtype=float)
    h_inv = regvar.asymptotic_inverse(build_h(curve), 2.0)
    a = k ** -0.5 / h_inv(t_grid)
    d = levy_measure.dimension
    b = np.zeros(d) if drift is None else np.asarray(drift, dtype=float)
    xi = np.zeros((len(t_grid), d))
    for i, t in enumerate(t_grid):
        comp = levy_measure.compensated_drift(1.0 / a[i])
        xi[i] = a[i] * t * (b + comp)
    return ScalingPlan(abscissae=t_grid, a=a, xi=xi, branch=ScalingBranch.LEVY,
                       k_used=k, limit_point=limit_point)


def plan_to_csv(plan: ScalingPlan) -> str:
    d = plan.xi.shape[1]
    buf = io.StringIO()
    buf.write(",".join(["abscissa", "a", *[f"xi_{i}" for i in range(d)]]))
    buf.write("\n")
    for i, x in enumerate(plan.abscissae):
        row = [x, plan.a[i], *plan.xi[i]]
        buf.write(",".join(f"{v:.17g}" for v in row))
        buf.write("\n")
    return buf.getvalue()
