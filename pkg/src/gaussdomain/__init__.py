"""Numerical toolkit for multivariate Gaussian limits.

The criterion at the heart of the library: normalized iid sums (or Levy
marginals) converge to a centered Gaussian with matrix B, possibly of
deficient rank, exactly when their truncated second-moment matrix curve is
matrix regularly varying with index 0 and limiting matrix B / tr B.  The
modules provide the scalar regular-variation machinery, measure
representations with truncated-moment quadrature, moment-curve diagnosis,
normalizing sequences through asymptotic inverses, Levy marginal
simulation, degeneracy-aware goodness of fit, and a batch scenario runner.
"""

__version__ = "0.1.0"

from .errors import GaussDomainError
from .regvar import (
    LimitPoint,
    RVDiagnosis,
    RVFunction,
    asymptotic_inverse,
    estimate_rv_index,
    reciprocal_transform,
)
from .measures import (
    AtomicDirections,
    AtomicLevyMeasure,
    BoxMeasure,
    EmpiricalMeasure,
    GaussianMeasure,
    LevyMeasure,
    LevyTriplet,
    LinearImageMeasure,
    ProbMeasure,
    RadialLevyMeasure,
    RadialMeasure,
    ShiftedMeasure,
    TruncatedIntegrals,
    UniformDirections,
    power_tail_radial,
    sample,
    truncated_integrals,
)
from .moment_matrix import (
    CurveForm,
    MomentCurve,
    MRVReport,
    build_curve,
    centered_uncentered_compare,
    mrv_diagnose,
    radius_stability_check,
)
from .normalize import (
    ScalingBranch,
    ScalingPlan,
    build_h,
    clt_scaling,
    levy_scaling,
)
from .levy_sim import (
    DISCARD,
    GAUSSIAN_SUBSTITUTE,
    DecayCurve,
    SimConfig,
    eta_moment_decay,
    rescaled_measure,
    resolve_cutoff,
    scaled_marginal,
    simulate_marginal,
)
from .gof import (
    GofReport,
    GofThresholds,
    energy_statistic,
    energy_test,
    gaussian_gof,
    range_split,
)
