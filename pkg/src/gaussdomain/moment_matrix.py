"""Truncated second-moment matrix curves and matrix regular variation.

A matrix curve A_t is matrix regularly varying at c with index 0 and limiting
matrix B when its trace is slowly varying at c and A_t / tr A_t -> B.  The
curves built here come in two forms: the centered one for probability
measures (second moment minus the outer product of the truncated mean) and
the raw one for Levy measures.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass

import numpy as np

from . import regvar
from .errors import (
    FamilyTooShortError,
    FiniteSecondMomentError,
    VanishingTraceError,
)
from .measures import LevyMeasure, ProbMeasure
from .regvar import LimitPoint, RVDiagnosis, RVFunction

DEFAULT_TOL_MATRIX = 0.05
DEFAULT_RANK_TOL = 1e-6


class CurveForm(enum.Enum):
    CLT_CENTERED = "clt_centered"
    LEVY_RAW = "levy_raw"


@dataclass(frozen=True)
class MomentCurve:
    """Per-radius truncated moments of one measure.

    ``matrices[i]`` is A_t at ``radii[i]`` (centered or raw per ``form``);
    ``raw_traces`` always stores the uncentered trace, which is what the
    normalizing function t -> t^2 / U(t) uses even for centered curves.
    """

    radii: np.ndarray
    matrices: np.ndarray
    first_moments: np.ndarray
    tail_masses: np.ndarray
    raw_traces: np.ndarray
    form: CurveForm
    limit_point: LimitPoint

    @property
    def traces(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=1, axis2=2)

    @property
    def dimension(self) -> int:
        return self.matrices.shape[1]

    def trailing_slice(self, fraction: float = regvar.TRAIL_FRACTION) -> slice:
        """Indices of the quarter of the grid closest to the limit point."""
        n = len(self.radii)
        k = max(regvar.MIN_POINTS, int(np.ceil(n * fraction)))
        k = min(k, n)
        if self.limit_point is LimitPoint.INFINITY:
            return slice(n - k, n)
        return slice(0, k)


@dataclass(frozen=True)
class MRVReport:
    """Diagnosis of matrix regular variation with index 0."""

    is_mrv0: bool
    B_hat: np.ndarray
    trace_diagnosis: RVDiagnosis
    matrix_residual: float
    rank: int
    k_convention: float | None = None
    target_distance: float | None = None


def build_curve(measure, form: CurveForm, radii,
                limit_point: LimitPoint = LimitPoint.INFINITY) -> MomentCurve:
    """Evaluate truncated integrals of ``measure`` along a radius grid.

    ``form`` must match the measure: CLT_CENTERED for probability measures
    (stores the second moment minus the outer product of the truncated
    mean), LEVY_RAW for Levy measures.
    """
    radii = np.asarray(radii, dtype=float)
    if form is CurveForm.CLT_CENTERED and not isinstance(measure, ProbMeasure):
        raise TypeError("CLT_CENTERED curves need a ProbMeasure")
    if form is CurveForm.LEVY_RAW and not isinstance(measure, LevyMeasure):
        raise TypeError("LEVY_RAW curves need a LevyMeasure")
    d = measure.dimension
    n = len(radii)
    matrices = np.zeros((n, d, d))
    firsts = np.zeros((n, d))
    tails = np.zeros(n)
    raws = np.zeros(n)
    for i, t in enumerate(radii):
        ti = measure.truncated_integrals(float(t))
        raws[i] = float(np.trace(ti.second_moment))
        firsts[i] = ti.first_moment
        tails[i] = ti.tail_mass
        if form is CurveForm.CLT_CENTERED:
            matrices[i] = ti.second_moment - np.outer(ti.first_moment, ti.first_moment)
        else:
            matrices[i] = ti.second_moment
    return MomentCurve(radii=radii, matrices=matrices, first_moments=firsts,
                       tail_masses=tails, raw_traces=raws, form=form,
                       limit_point=limit_point)


def mrv_diagnose(curve: MomentCurve, limit_point: LimitPoint | None = None,
                 target_B=None, tol_matrix: float = DEFAULT_TOL_MATRIX,
                 rank_tol: float = DEFAULT_RANK_TOL) -> MRVReport:
    """Diagnose whether the curve is matrix regularly varying with index 0.

    The trace curve is handed to the scalar regular-variation estimator; the
    limiting matrix is the trailing-window average of A_t / tr A_t (a limit
    is estimated by averaging, not by a single endpoint, to damp quadrature
    and Monte Carlo noise).  When ``target_B`` is given, the report also
    carries 1/tr(target_B) and the Frobenius distance of the estimate to the
    trace-normalized target.
    """
    lp = limit_point or curve.limit_point
    traces = curve.traces
    radii = curve.radii

    # drop nonpositive trace entries on the side away from the limit point
    positive = traces > 0
    if lp is LimitPoint.INFINITY:
        first = int(np.argmax(positive))
        if not positive[first:].all():
            raise VanishingTraceError("trace vanishes inside the trailing grid")
        sel = slice(first, len(radii))
    else:
        last = len(positive) - int(np.argmax(positive[::-1]))
        if not positive[:last].any() or not positive[:last].all():
            raise VanishingTraceError("trace vanishes toward the limit point")
        sel = slice(0, last)
    sub = MomentCurve(radii=radii[sel], matrices=curve.matrices[sel],
                      first_moments=curve.first_moments[sel],
                      tail_masses=curve.tail_masses[sel],
                      raw_traces=curve.raw_traces[sel], form=curve.form,
                      limit_point=lp)
    traces = sub.traces

    window = sub.trailing_slice()
    u_max = float(traces.max())
    if float(traces[window].max()) <= 1e-12 * max(u_max, 1e-300):
        raise VanishingTraceError(
            "trace is numerically zero on the trailing grid; the measure is "
            "concentrated at a point"
        )

    u_fn = RVFunction(grid=sub.radii, values=traces, limit_point=lp)
    trace_diag = regvar.estimate_rv_index(u_fn)

    normalized = sub.matrices[window] / traces[window, None, None]
    b_hat = normalized.mean(axis=0)
    b_hat = 0.5 * (b_hat + b_hat.T)
    b_hat /= np.trace(b_hat)
    residual = float(np.linalg.norm(normalized - b_hat, axis=(1, 2)).max())

    eigvals = np.linalg.eigvalsh(b_hat)
    rank = int(np.sum(eigvals > rank_tol * eigvals.max()))

    k_conv = None
    target_dist = None
    if target_B is not None:
        target_B = np.asarray(target_B, dtype=float)
        tr = float(np.trace(target_B))
        k_conv = 1.0 / tr
        target_dist = float(np.linalg.norm(b_hat - target_B / tr))

    return MRVReport(
        is_mrv0=bool(trace_diag.is_slowly_varying and residual < tol_matrix),
        B_hat=b_hat,
        trace_diagnosis=trace_diag,
        matrix_residual=residual,
        rank=rank,
        k_convention=k_conv,
        target_distance=target_dist,
    )


@dataclass(frozen=True)
class RadiusStabilityResult:
    """Per-member truncation discrepancies of a rescaled measure family."""

    discrepancies: np.ndarray
    tail_masses: np.ndarray
    max_trailing: float


def radius_stability_check(family, radii) -> RadiusStabilityResult:
    """Frobenius gap between truncations at two radii along a measure family.

    For families whose tail masses vanish, the gap between the second-moment
    truncation at radius a and at radius b must go to 0; the returned
    ``max_trailing`` is the supremum over the trailing quarter of the family.
    """
    a, b = float(radii[0]), float(radii[1])
    members = list(family)
    if len(members) < 8:
        raise FamilyTooShortError(f"need >= 8 family members, got {len(members)}")
    disc = np.zeros(len(members))
    tails = np.zeros(len(members))
    for i, m in enumerate(members):
        s_a = m.truncated_integrals(a).second_moment
        s_b = m.truncated_integrals(b).second_moment
        disc[i] = float(np.linalg.norm(s_a - s_b))
        tails[i] = m.tail_mass_above(min(a, b))
    k = max(2, len(members) // 4)
    return RadiusStabilityResult(discrepancies=disc, tail_masses=tails,
                                 max_trailing=float(disc[-k:].max()))


@dataclass(frozen=True)
class CenteringComparison:
    """The three trace-normalized matrix curves whose limits coincide when
    the second moment is infinite but the first moment is finite."""

    radii: np.ndarray
    uncentered: np.ndarray
    centered_numerator: np.ndarray
    fully_centered: np.ndarray
    pairwise_max: np.ndarray
    max_discrepancy: float


def centered_uncentered_compare(measure: ProbMeasure, radii) -> CenteringComparison:
    """Compare centered and uncentered moment-ratio curves along a grid.

    Requires an infinite second moment and a finite first moment; with a
    finite second moment the three curves trivially differ in the limit and
    the comparison is refused rather than silently accepted.
    """
    if measure.has_finite_second_moment:
        raise FiniteSecondMomentError(
            "the equivalence of centered and uncentered ratios needs an "
            "infinite second moment"
        )
    if not measure.has_finite_first_moment:
        raise FiniteSecondMomentError(
            "the comparison needs a finite first moment"
        )
    radii = np.asarray(radii, dtype=float)
    n, d = len(radii), measure.dimension
    unc = np.zeros((n, d, d))
    ctr_num = np.zeros((n, d, d))
    ctr_full = np.zeros((n, d, d))
    for i, t in enumerate(radii):
        ti = measure.truncated_integrals(float(t))
        s = ti.second_moment
        m = ti.first_moment
        u = float(np.trace(s))
        centered = s - np.outer(m, m)
        unc[i] = s / u
        ctr_num[i] = centered / u
        ctr_full[i] = centered / (u - float(m @ m))
    d01 = np.linalg.norm(unc - ctr_num, axis=(1, 2))
    d02 = np.linalg.norm(unc - ctr_full, axis=(1, 2))
    d12 = np.linalg.norm(ctr_num - ctr_full, axis=(1, 2))
    pairwise = np.maximum(np.maximum(d01, d02), d12)
    k = max(2, n // 4)
    return CenteringComparison(radii=radii, uncentered=unc,
                               centered_numerator=ctr_num,
                               fully_centered=ctr_full, pairwise_max=pairwise,
                               max_discrepancy=float(pairwise[-k:].max()))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def curve_to_csv(curve: MomentCurve) -> str:
    """One row per radius: t, trace, raw trace, tail mass, flattened A, mean."""
    d = curve.dimension
    a_cols = [f"a_{i}{j}" for i in range(d) for j in range(d)]
    m_cols = [f"m_{i}" for i in range(d)]
    buf = io.StringIO()
    buf.write(",".join(["t", "trace", "raw_trace", "tail_mass", *a_cols, *m_cols]))
    buf.write("\n")
    traces = curve.traces
    for i, t in enumerate(curve.radii):
        row = [t, traces[i], curve.raw_traces[i], curve.tail_masses[i],
               *curve.matrices[i].ravel(), *curve.first_moments[i]]
        buf.write(",".join(f"{v:.17g}" for v in row))
        buf.write("\n")
    return buf.getvalue()


def curve_from_csv(text: str, form: CurveForm,
                   limit_point: LimitPoint) -> MomentCurve:
    rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    n_extra = rows.shape[1] - 4
    d = int(round((np.sqrt(4 * n_extra + 1) - 1) / 2))  # d^2 + d = n_extra
    mats = rows[:, 4:4 + d * d].reshape(-1, d, d)
    return MomentCurve(radii=rows[:, 0], matrices=mats,
                       first_moments=rows[:, 4 + d * d:],
                       tail_masses=rows[:, 3], raw_traces=rows[:, 2],
                       form=form, limit_point=limit_point)


def report_to_json(report: MRVReport) -> str:
    payload = {
        "is_mrv0": report.is_mrv0,
        "B_hat": report.B_hat.tolist(),
        "rank": report.rank,
        "matrix_residual": report.matrix_residual,
        "k_convention": report.k_convention,
        "target_distance": report.target_distance,
        "trace_index": report.trace_diagnosis.index_estimate,
        "trace_index_stderr": report.trace_diagnosis.index_stderr,
        "trace_is_slowly_varying": report.trace_diagnosis.is_slowly_varying,
        "trace_ratio_curve": report.trace_diagnosis.ratio_curve,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
