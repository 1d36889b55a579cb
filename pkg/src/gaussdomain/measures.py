"""Probability and Levy measures on R^d with sampling and truncated moments.

All analytic kinds factor into a radial part (a density for the radius) and
a directional part (uniform on the sphere, or atoms).  Radius and direction
separate: truncated second moments reduce to one-dimensional radial
quadrature times an exact directional second-moment matrix, so no
d-dimensional quadrature is ever needed.

Truncation is the closed ball |x| <= t throughout; boundary atoms count
inside.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from ._rng import derive_rng
from .errors import (
    MeasureDefinitionError,
    QuadratureError,
    UnsupportedOperationError,
)

MASS_TOL = 1e-9
QUAD_RTOL = 1e-8


@dataclass(frozen=True)
class TruncatedIntegrals:
    """Moments of a measure restricted to the closed ball of radius t.

    ``second_moment`` is the d x d matrix of x x^T integrated over |x| <= t,
    ``first_moment`` the vector integral, ``tail_mass`` the mass of |x| > t.
    For Levy measures, ``first_moment`` entries and ``tail_mass`` may be
    +/-inf when the defining integral diverges.
    """

    second_moment: np.ndarray
    first_moment: np.ndarray
    tail_mass: float


# ---------------------------------------------------------------------------
# directional distributions on the unit sphere
# ---------------------------------------------------------------------------


class UniformDirections:
    """Uniform distribution on the unit sphere in R^d."""

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    def mean(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def second_moment(self) -> np.ndarray:
        return np.eye(self.dimension) / self.dimension

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.dimension == 1:
            return rng.choice([-1.0, 1.0], size=(n, 1))
        z = rng.standard_normal((n, self.dimension))
        return z / np.linalg.norm(z, axis=1, keepdims=True)


class AtomicDirections:
    """Finitely many unit vectors with probability weights."""

    def __init__(self, vectors, weights):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        weights = np.asarray(weights, dtype=float)
        norms = np.linalg.norm(vectors, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-12):
            raise MeasureDefinitionError("direction atoms must be unit vectors")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > MASS_TOL:
            raise MeasureDefinitionError("direction weights must be >= 0 and sum to 1")
        self.vectors = vectors
        self.weights = weights
        self.dimension = vectors.shape[1]

    @classmethod
    def symmetric_1d(cls) -> "AtomicDirections":
        return cls([[1.0], [-1.0]], [0.5, 0.5])

    def mean(self) -> np.ndarray:
        return self.weights @ self.vectors

    def second_moment(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", self.weights, self.vectors, self.vectors)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        return self.vectors[idx]


# ---------------------------------------------------------------------------
# radial quadrature helpers
# ---------------------------------------------------------------------------


def _quad_log(func, lo: float, hi: float) -> tuple[float, float]:
    """Integrate func(r) dr over (lo, hi) in log-radius coordinates.

    The caller judges the returned error estimate; scipy's IntegrationWarning
    is suppressed because it fires even when the estimate is honest.
    Non-finite integrand values (overflow far beyond any support) count as 0.
    """
    if hi <= lo:
        return 0.0, 0.0

    def integrand(u):
        if u > 709.0:  # exp overflow; any convergent radial tail is 0 here
            return 0.0
        r = np.exp(u)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            v = func(r) * r  # dr = r du
        return v if np.isfinite(v) else 0.0

    a = np.log(lo) if lo > 0 else -np.inf
    b = np.log(hi) if np.isfinite(hi) else np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, a, b, limit=400,
                                  epsabs=1e-13, epsrel=1e-11)
    return val, err


def _quad_log_density(log_density, power: float, lo: float, hi: float):
    """Integrate r^power * g(r) dr with g given as log g of LOG-radius.

    The exponent log g + (power + 1) log r is assembled entirely in log
    space before exponentiating, so densities whose value (or radius)
    leaves the float64 range still integrate correctly as long as the
    product r^power * g(r) is representable.
    """
    if hi <= lo:
        return 0.0, 0.0

    def integrand(u):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            expo = log_density(u) + (power + 1.0) * u
        if not np.isfinite(expo) or expo < -745.0:
            return 0.0
        return np.exp(expo) if expo < 709.0 else np.inf

    a = np.log(lo) if lo > 0 else -np.inf
    b = np.log(hi) if np.isfinite(hi) else np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, a, b, limit=400,
                                  epsabs=1e-13, epsrel=1e-11)
    return val, err


def _radial_moment(density, power: float, lo: float, hi: float,
                   log_density=None) -> float:
    """Integral of r^power * density(r) dr over (lo, hi), with accuracy check."""
    if log_density is not None:
        val, err = _quad_log_density(log_density, power, lo, hi)
    else:
        val, err = _quad_log(lambda r: r ** power * density(r), lo, hi)
    if err > max(QUAD_RTOL * abs(val), 1e-12):
        raise QuadratureError(
            f"estimated quadrature error {err:.2e} exceeds {QUAD_RTOL:g} relative "
            f"(value {val:.6e})"
        )
    return val


def _tail_is_divergent(density, power: float, scale: float) -> bool:
    """Probe whether the tail integral of r^power * density diverges at infinity.

    Dyadic slices of a convergent tail integral decay geometrically; a slice
    ratio near 1 signals (at most slowly varying) divergence.
    """
    lo = 100.0 * scale
    slices = []
    for _ in range(6):
        hi = lo * 4.0
        val, _ = _quad_log(lambda r: r ** power * density(r), lo, hi)
        slices.append(val)
        lo = hi
    if slices[-1] <= 1e-14 * max(slices[0], 1e-300):
        return False
    return slices[-1] > 0.9 * slices[-2]


def _head_is_divergent(density, power: float, scale: float) -> bool:
    """Probe whether r^power * density(r) dr diverges as r -> 0."""
    vals = []
    for k in (3, 6, 9):
        lo = scale * 10.0 ** (-k)
        val, _ = _quad_log(lambda r: r ** power * density(r), lo, scale)
        vals.append(val)
    d1 = vals[1] - vals[0]
    d2 = vals[2] - vals[1]
    if d2 <= max(1e-10 * vals[2], 1e-300):
        return False
    return d2 > 0.5 * d1


class _CumulativeRadial:
    """Cumulative integrals R -> integral of r^power * density over (lo, R].

    Knots are laid on a log grid with per-interval adaptive quadrature, then
    queried by monotone interpolation; accurate to ~1e-9 relative for smooth
    densities and far cheaper than a fresh quad per query.
    """

    def __init__(self, density, power: float, lo: float, hi: float,
                 points_per_decade: int = 128):
        lo_eff = lo if lo > 0 else hi * 1e-13
        n = max(16, int(np.ceil(np.log10(hi / lo_eff) * points_per_decade)) + 1)
        knots = np.geomspace(lo_eff, hi, n)
        pieces = np.zeros(n)
        if lo == 0.0:
            pieces[0], _ = _quad_log(lambda r: r ** power * density(r), 0.0, knots[0])
        for i in range(1, n):
            pieces[i], _ = _quad_log(lambda r: r ** power * density(r),
                                     knots[i - 1], knots[i])
        self._knots = knots
        self._cum = np.cumsum(pieces)
        self._lo = lo

    def __call__(self, radius) -> np.ndarray:
        r = np.asarray(radius, dtype=float)
        out = np.interp(np.log(np.clip(r, self._knots[0], self._knots[-1])),
                        np.log(self._knots), self._cum)
        return np.where(r <= self._lo, 0.0, out)


class _RadialInverseCdf:
    """Numeric inverse CDF for a radial density restricted to (lo, hi]."""

    def __init__(self, density, lo: float, hi: float, total: float,
                 points_per_decade: int = 128):
        if not np.isfinite(hi):
            # extend until the remaining tail is negligible
            hi = max(lo, 1.0) * 10.0
            while _radial_moment(density, 0.0, hi, np.inf) > 1e-12 * total:
                hi *= 10.0
                if hi > 1e300:
                    raise MeasureDefinitionError("radial tail does not decay")
        cum = _CumulativeRadial(density, 0.0, lo, hi, points_per_decade)
        knots = cum._knots
        cdf = cum._cum / cum._cum[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self._cdf = cdf[keep]
        self._log_r = np.log(knots[keep])

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.exp(np.interp(u, self._cdf, self._log_r))


# ---------------------------------------------------------------------------
# probability measures
# ---------------------------------------------------------------------------


class ProbMeasure:
    """Base class: a probability measure on R^d.

    Subclasses implement ``sample`` and ``truncated_integrals`` and expose
    ``has_finite_second_moment`` / ``has_finite_first_moment`` flags used by
    downstream preconditions.
    """

    dimension: int
    kind: str

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def truncated_integrals(self, t: float) -> TruncatedIntegrals:
        raise NotImplementedError

    @property
    def has_finite_second_moment(self) -> bool:
        raise NotImplementedError

    @property
    def has_finite_first_moment(self) -> bool:
        raise NotImplementedError


class EmpiricalMeasure(ProbMeasure):
    """Point set with weights; truncated moments are exact weighted sums.

    Points are kept sorted by radius with blockwise cumulative sums, so a
    truncated-moment query costs one partial block instead of a pass over
    all points (matters for multi-million-point samples).
    """

    kind = "empirical"
    _BLOCK = 1024

    def __init__(self, points, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = len(points)
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > MASS_TOL:
            raise MeasureDefinitionError("weights must be >= 0 and sum to 1")
        self.dimension = points.shape[1]
        radii = np.linalg.norm(points, axis=1)
        order = np.argsort(radii, kind="stable")
        self._points = points[order]
        self._weights = weights[order]
        self._radii = radii[order]
        d, nb = self.dimension, (n + self._BLOCK - 1) // self._BLOCK
        self._blk_w = np.zeros(nb)
        self._blk_x = np.zeros((nb, d))
        self._blk_xx = np.zeros((nb, d, d))
        for b in range(nb):
            sl = slice(b * self._BLOCK, min((b + 1) * self._BLOCK, n))
            w, p = self._weights[sl], self._points[sl]
            self._blk_w[b] = w.sum()
            self._blk_x[b] = w @ p
            self._blk_xx[b] = np.einsum("k,ki,kj->ij", w, p, p)
        np.cumsum(self._blk_w, axis=0, out=self._blk_w)
        np.cumsum(self._blk_x, axis=0, out=self._blk_x)
        np.cumsum(self._blk_xx, axis=0, out=self._blk_xx)

    @classmethod
    def from_csv(cls, path, dimension: int | None = None) -> "EmpiricalMeasure":
        """Load one point per row; a trailing extra column is read as weights."""
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        if dimension is None:
            dimension = data.shape[1]
        if data.shape[1] == dimension:
            return cls(data)
        if data.shape[1] == dimension + 1:
            w = data[:, -1]
            return cls(data[:, :-1], w / w.sum())
        raise MeasureDefinitionError(
            f"CSV has {data.shape[1]} columns, expected {dimension} or {dimension + 1}"
        )

    def sample(self, n, rng):
        idx = rng.choice(len(self._points), size=n, p=self._weights)
        return self._points[idx]

    def truncated_integrals(self, t):
        k = int(np.searchsorted(self._radii, t, side="right"))
        d = self.dimension
        if k == 0:
            return TruncatedIntegrals(np.zeros((d, d)), np.zeros(d), 1.0)
        b = k // self._BLOCK
        if b > 0:
            mass = self._blk_w[b - 1]
            first = self._blk_x[b - 1].copy()
            second = self._blk_xx[b - 1].copy()
        else:
            mass, first, second = 0.0, np.zeros(d), np.zeros((d, d))
        sl = slice(b * self._BLOCK, k)
        if sl.start < k:
            w, p = self._weights[sl], self._points[sl]
            mass = mass + w.sum()
            first = first + w @ p
            second = second + np.einsum("k,ki,kj->ij", w, p, p)
        return TruncatedIntegrals(second, first, float(1.0 - mass))

    @property
    def has_finite_second_moment(self):
        return True

    @property
    def has_finite_first_moment(self):
        return True


def _sphere_area(d: int) -> float:
    from scipy.special import gamma

    return 2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0)


class RadialMeasure(ProbMeasure):
    """Radial density for the radius times a directional distribution.

    Parameters
    ----------
    dimension : int
    radial_density : callable
        Density of the radius |X| (the radial marginal), supported on
        (r_min, r_max]; must integrate to 1.
    r_min, r_max : float
        Support bounds for the radius; ``r_max`` may be ``np.inf``.
    direction : UniformDirections or AtomicDirections, optional
        Defaults to uniform on the sphere.
    radial_ppf : callable, optional
        Exact quantile function of the radius; when absent an interpolated
        numeric inverse CDF is built.
    """

    kind = "radial_analytic"

    def __init__(self, dimension, radial_density, r_min, r_max,
                 direction=None, radial_ppf=None,
                 finite_second_moment: bool | None = None):
        self.dimension = int(dimension)
        self.radial_density = radial_density
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        self.direction = direction or UniformDirections(self.dimension)
        if self.direction.dimension != self.dimension:
            raise MeasureDefinitionError("direction dimension mismatch")
        self._radial_ppf = radial_ppf
        self._declared_m2 = finite_second_moment
        total = _radial_moment(radial_density, 0.0, self.r_min, self.r_max)
        if abs(total - 1.0) > MASS_TOL:
            raise MeasureDefinitionError(
                f"radial marginal integrates to {total:.12f}, expected 1"
            )

    @classmethod
    def from_ambient_density(cls, dimension, density, r_min, r_max, **kwargs):
        """Build from an ambient density rho(|x|) on R^d with uniform direction.

        The radial marginal is rho(r) * r^(d-1) * (sphere area).
        """
        area = _sphere_area(dimension)
        marginal = lambda r: density(r) * r ** (dimension - 1) * area
        return cls(dimension, marginal, r_min, r_max, **kwargs)

    @functools.cached_property
    def _sampler(self):
        if self._radial_ppf is not None:
            return self._radial_ppf
        return _RadialInverseCdf(self.radial_density, self.r_min, self.r_max, 1.0)

    def sample(self, n, rng):
        radii = np.asarray(self._sampler(rng.random(n)), dtype=float)
        dirs = self.direction.sample(n, rng)
        return radii[:, None] * dirs

    def truncated_integrals(self, t):
        hi = min(t, self.r_max)
        if hi <= self.r_min:
            d = self.dimension
            return TruncatedIntegrals(np.zeros((d, d)), np.zeros(d), 1.0)
        m2 = _radial_moment(self.radial_density, 2.0, self.r_min, hi)
        u_mean = self.direction.mean()
        if np.allclose(u_mean, 0.0):
            m1_vec = np.zeros(self.dimension)
        else:
            m1 = _radial_moment(self.radial_density, 1.0, self.r_min, hi)
            m1_vec = m1 * u_mean
        tail = _radial_moment(self.radial_density, 0.0, hi, self.r_max)
        return TruncatedIntegrals(
            second_moment=m2 * self.direction.second_moment(),
            first_moment=m1_vec,
            tail_mass=float(tail),
        )

    @property
    def has_finite_second_moment(self):
        if self._declared_m2 is not None:
            return self._declared_m2
        if np.isfinite(self.r_max):
            return True
        return not _tail_is_divergent(self.radial_density, 2.0,
                                      max(self.r_min, 1.0))

    @property
    def has_finite_first_moment(self):
        if np.isfinite(self.r_max):
            return True
        return not _tail_is_divergent(self.radial_density, 1.0,
                                      max(self.r_min, 1.0))


def power_tail_radial(dimension, alpha, r_min=1.0, direction=None):
    """Radial measure with Pareto radius: P(|X| > r) = (r/r_min)^(-alpha).

    In d dimensions with uniform direction this is the ambient density
    proportional to |x|^(-d-alpha); alpha = 2, d = 2, r_min = 1 gives the
    density (1/pi) |x|^(-4) on |x| >= 1.
    """
    a, r0 = float(alpha), float(r_min)
    density = lambda r: (a / r0) * (r / r0) ** (-1.0 - a)
    ppf = lambda u: r0 * (1.0 - u) ** (-1.0 / a)
    return RadialMeasure(dimension, density, r0, np.inf, direction=direction,
                         radial_ppf=ppf, finite_second_moment=bool(alpha > 2))


class GaussianMeasure(ProbMeasure):
    """Isotropic centered Gaussian N(0, sigma^2 I_d)."""

    kind = "finite_variance_analytic"

    def __init__(self, dimension, sigma=1.0):
        self.dimension = int(dimension)
        self.sigma = float(sigma)
        if self.sigma <= 0:
            raise MeasureDefinitionError("sigma must be positive")

    def sample(self, n, rng):
        return self.sigma * rng.standard_normal((n, self.dimension))

    def truncated_integrals(self, t):
        d, s2 = self.dimension, self.sigma ** 2
        q = (t / self.sigma) ** 2
        # E[x_i^2 ; |x| <= t] = sigma^2 F_{chi2,d+2}(q)
        per_comp = s2 * stats.chi2.cdf(q, d + 2)
        tail = float(stats.chi2.sf(q, d))
        return TruncatedIntegrals(per_comp * np.eye(d), np.zeros(d), tail)

    @property
    def has_finite_second_moment(self):
        return True

    @property
    def has_finite_first_moment(self):
        return True


class BoxMeasure(ProbMeasure):
    """Uniform distribution on the box [-a, a]^d."""

    kind = "finite_variance_analytic"

    def __init__(self, dimension, half_width=1.0):
        self.dimension = int(dimension)
        self.half_width = float(half_width)
        if self.half_width <= 0:
            raise MeasureDefinitionError("half_width must be positive")

    def sample(self, n, rng):
        a = self.half_width
        return rng.uniform(-a, a, size=(n, self.dimension))

    def _angle_inside(self, r):
        # total angle of the circle of radius r lying inside the square (d = 2)
        a = self.half_width
        if r <= a:
            return 2.0 * np.pi
        return 2.0 * np.pi - 8.0 * np.arccos(a / r)

    def truncated_integrals(self, t):
        d, a = self.dimension, self.half_width
        if t * t >= d * a * a:
            return TruncatedIntegrals((a * a / 3.0) * np.eye(d), np.zeros(d), 0.0)
        if d != 2:
            raise UnsupportedOperationError(
                "truncation radius cuts the box; only implemented for d = 2"
            )
        # by square symmetry E[x x^T | |x| = r] = (r^2/2) I, so a radial
        # reduction with marginal r * angle(r) / (2a)^2 is exact
        marginal = lambda r: r * self._angle_inside(r) / (4.0 * a * a)
        hi = min(t, a * np.sqrt(2.0))
        m2 = _radial_moment(marginal, 2.0, 0.0, min(hi, a))
        if hi > a:
            m2 += _radial_moment(marginal, 2.0, a, hi)
            inside = (_radial_moment(marginal, 0.0, 0.0, a)
                      + _radial_moment(marginal, 0.0, a, hi))
        else:
            inside = _radial_moment(marginal, 0.0, 0.0, hi)
        return TruncatedIntegrals((m2 / 2.0) * np.eye(2), np.zeros(2),
                                  float(1.0 - inside))

    @property
    def has_finite_second_moment(self):
        return True

    @property
    def has_finite_first_moment(self):
        return True


class LinearImageMeasure(ProbMeasure):
    """Image of a base measure under a fixed matrix L (x = L z).

    Sampling works for any L.  Truncated integrals are available when the
    radius survives the map, i.e. when L is a scalar multiple of an
    orthogonal matrix or the base measure is one-dimensional.
    """

    kind = "linear_image"

    def __init__(self, matrix, base: ProbMeasure):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[1] != base.dimension:
            raise MeasureDefinitionError(
                f"matrix has {matrix.shape[1]} columns, base dimension is {base.dimension}"
            )
        self.matrix = matrix
        self.base = base
        self.dimension = matrix.shape[0]
        gram = matrix.T @ matrix
        c2 = gram[0, 0]
        self._orth_scale = None
        if np.allclose(gram, c2 * np.eye(base.dimension), atol=1e-12 * max(c2, 1.0)):
            self._orth_scale = float(np.sqrt(c2))

    def sample(self, n, rng):
        return self.base.sample(n, rng) @ self.matrix.T

    def truncated_integrals(self, t):
        L = self.matrix
        if self._orth_scale is not None:
            base_ti = self.base.truncated_integrals(t / self._orth_scale)
        elif self.base.dimension == 1:
            col_norm = float(np.linalg.norm(L[:, 0]))
            base_ti = self.base.truncated_integrals(t / col_norm)
        else:
            raise UnsupportedOperationError(
                "truncated integrals only available for scalar-orthogonal maps "
                "or one-dimensional base measures"
            )
        return TruncatedIntegrals(
            second_moment=L @ base_ti.second_moment @ L.T,
            first_moment=L @ base_ti.first_moment,
            tail_mass=base_ti.tail_mass,
        )

    @property
    def has_finite_second_moment(self):
        return self.base.has_finite_second_moment

    @property
    def has_finite_first_moment(self):
        return self.base.has_finite_first_moment


class ShiftedMeasure(ProbMeasure):
    """A radial measure translated by a fixed vector (d = 2 only).

    The truncation ball is off-center in base coordinates; moments reduce to
    an angular quadrature of cumulative radial integrals, which keeps the
    computation one-dimensional.
    """

    kind = "shifted_radial"

    def __init__(self, base: RadialMeasure, shift, angular_nodes: int = 512):
        if not isinstance(base, RadialMeasure) or base.dimension != 2:
            raise UnsupportedOperationError("shifted measures need a radial base with d = 2")
        if not isinstance(base.direction, UniformDirections):
            raise UnsupportedOperationError("shifted measures need a uniform direction")
        self.base = base
        self.shift = np.asarray(shift, dtype=float)
        self.dimension = 2
        self._nodes, self._weights = np.polynomial.legendre.leggauss(angular_nodes)

    def sample(self, n, rng):
        return self.base.sample(n, rng) + self.shift

    def _cumulatives(self, need: float) -> dict:
        # cumulative radial integrals valid on [r_min, need]; grown in large
        # steps so ascending query sweeps do not rebuild per query
        cached = getattr(self, "_cum_cache", None)
        if cached is not None and cached[0] >= need:
            return cached[1]
        g = self.base.radial_density
        lo = self.base.r_min
        cap = min(self.base.r_max, max(need * 1e4, 1e10 * max(lo, 1.0)))
        cums = {p: _CumulativeRadial(g, p, lo, cap, points_per_decade=64)
                for p in (0.0, 1.0, 2.0)}
        self._cum_cache = (cap, cums)
        return cums

    def truncated_integrals(self, t):
        v = self.shift
        vnorm = float(np.linalg.norm(v))
        if t <= vnorm:
            raise UnsupportedOperationError(
                "truncation radius must exceed the shift length"
            )
        phi = np.pi * (self._nodes + 1.0)  # angles in (0, 2 pi)
        w = self._weights * np.pi / (2.0 * np.pi)  # includes the 1/(2 pi) density
        u = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        c = u @ v
        r_star = -c + np.sqrt(t * t - vnorm * vnorm + c * c)
        cum = self._cumulatives(float(r_star.max()))
        m0, m1, m2 = cum[0.0](r_star), cum[1.0](r_star), cum[2.0](r_star)

        uu = np.einsum("k,ki,kj->ij", w * m2, u, u)
        uv = np.einsum("k,ki,j->ij", w * m1, u, v)
        vv = np.outer(v, v) * float(w @ m0)
        second = uu + uv + uv.T + vv
        first = (w * m1) @ u + v * float(w @ m0)
        tail = 1.0 - float(w @ m0)
        return TruncatedIntegrals(second, first, tail)

    @property
    def has_finite_second_moment(self):
        return self.base.has_finite_second_moment

    @property
    def has_finite_first_moment(self):
        return self.base.has_finite_first_moment


# ---------------------------------------------------------------------------
# Levy measures
# ---------------------------------------------------------------------------


class LevyMeasure:
    """Base class: a Levy measure on R^d (no atom at 0, integrates |x|^2 ^ 1).

    Total mass may be infinite; it is never materialized.  Subclasses provide
    truncated moments, tail intensities, jump sampling above a cutoff, the
    compensated drift integral, and rescaling x -> a x with mass factor t.
    """

    dimension: int
    kind: str

    def truncated_integrals(self, t: float) -> TruncatedIntegrals:
        raise NotImplementedError

    def tail_mass_above(self, s: float) -> float:
        """Mass of |x| > s; finite for every s > 0."""
        raise NotImplementedError

    def jump_sampler(self, eps: float):
        """A reusable callable (n, rng) -> points from the normalized
        restriction to |x| > eps; built once and cached per cutoff."""
        cache = getattr(self, "_jump_samplers", None)
        if cache is None:
            cache = {}
            setattr(self, "_jump_samplers", cache)
        key = float(eps)
        if key not in cache:
            cache[key] = self._build_jump_sampler(key)
        return cache[key]

    def _build_jump_sampler(self, eps: float):
        raise NotImplementedError

    def sample_jumps(self, n: int, eps: float, rng: np.random.Generator) -> np.ndarray:
        """Draw n points from the normalized restriction to |x| > eps."""
        return self.jump_sampler(eps)(n, rng)

    def moment_above(self, power: float, s: float) -> float:
        """Integral of |x|^power over |x| > s; may be +inf."""
        raise NotImplementedError

    def compensated_drift(self, s: float) -> np.ndarray:
        """Integral of x [1_{|x|<=s} - 1/(1+|x|^2)] against the measure."""
        raise NotImplementedError

    def rescale(self, t: float, a: float) -> "LevyMeasure":
        """The measure D -> t * M(D / a): radii scale by a, mass by t."""
        raise NotImplementedError

    def support_floor(self) -> float:
        """Infimum of |x| over the support (0 when jumps accumulate at 0)."""
        raise NotImplementedError


class RadialLevyMeasure(LevyMeasure):
    """Radial-marginal density times a directional distribution.

    ``radial_density`` is the marginal of the jump radius and carries the
    total mass (which may be infinite as r_min -> 0).
    """

    kind = "radial_analytic"

    def __init__(self, dimension, radial_density, r_min, r_max, direction=None,
                 log_radial_density=None):
        # log_radial_density, when given, maps LOG-radius to log g(r) and is
        # used for quadrature so that singular densities near 0 never leave
        # log space
        self.dimension = int(dimension)
        self.radial_density = radial_density
        self.log_radial_density = log_radial_density
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        if self.r_min < 0:
            raise MeasureDefinitionError("r_min must be >= 0")
        self.direction = direction or UniformDirections(self.dimension)
        if self.direction.dimension != self.dimension:
            raise MeasureDefinitionError("direction dimension mismatch")
        self._check_levy_integrability()

    def _moment(self, power, lo, hi):
        return _radial_moment(self.radial_density, power, lo, hi,
                              log_density=self.log_radial_density)

    def _check_levy_integrability(self):
        mid = min(1.0, self.r_max)
        try:
            small = self._moment(2.0, self.r_min, mid)
            big = self._moment(0.0, mid, self.r_max) if self.r_max > mid else 0.0
        except QuadratureError as exc:
            raise MeasureDefinitionError(
                f"integral of |x|^2 ^ 1 does not converge: {exc}"
            ) from exc
        if not np.isfinite(small + big):
            raise MeasureDefinitionError("integral of |x|^2 ^ 1 is infinite")

    def truncated_integrals(self, t):
        hi = min(t, self.r_max)
        d = self.dimension
        if hi <= self.r_min:
            return TruncatedIntegrals(np.zeros((d, d)), np.zeros(d),
                                      self.tail_mass_above(t))
        m2 = self._moment(2.0, self.r_min, hi)
        u_mean = self.direction.mean()
        if np.allclose(u_mean, 0.0):
            m1_vec = np.zeros(d)
        elif self.r_min == 0.0 and _head_is_divergent(self.radial_density, 1.0, hi):
            m1_vec = np.where(u_mean > 0, np.inf, np.where(u_mean < 0, -np.inf, 0.0))
        else:
            m1_vec = self._moment(1.0, self.r_min, hi) * u_mean
        return TruncatedIntegrals(m2 * self.direction.second_moment(), m1_vec,
                                  self.tail_mass_above(t))

    def tail_mass_above(self, s):
        lo = max(s, self.r_min)
        if lo >= self.r_max:
            return 0.0
        if lo <= 0.0:
            return np.inf if _head_is_divergent(self.radial_density, 0.0,
                                                min(1.0, self.r_max)) else \
                self._moment(0.0, 0.0, self.r_max)
        return self._moment(0.0, lo, self.r_max)

    def _build_jump_sampler(self, eps):
        lo = max(eps, self.r_min)
        total = self.tail_mass_above(lo)
        if total <= 0:
            raise MeasureDefinitionError(f"no mass above radius {eps:g}")
        radial = _RadialInverseCdf(self.radial_density, lo, self.r_max, total)

        def draw(n, rng):
            radii = radial(rng.random(n))
            dirs = self.direction.sample(n, rng)
            return radii[:, None] * dirs

        return draw

    def moment_above(self, power, s):
        lo = max(s, self.r_min)
        if lo >= self.r_max:
            return 0.0
        if not np.isfinite(self.r_max) and \
                _tail_is_divergent(self.radial_density, power, max(lo, 1e-6)):
            return np.inf
        return self._moment(power, lo, self.r_max)

    def compensated_drift(self, s):
        u_mean = self.direction.mean()
        if np.allclose(u_mean, 0.0):
            return np.zeros(self.dimension)
        g = self.radial_density
        log_g = self.log_radial_density
        # r^3/(1+r^2) below s (integrable at 0), -r/(1+r^2) above s
        below_hi = min(s, self.r_max)
        below = _radial_moment(
            lambda r: g(r) * r * r / (1.0 + r * r), 1.0, self.r_min, below_hi,
            log_density=None if log_g is None else
            lambda lr: log_g(lr) + 2.0 * lr - np.log1p(np.exp(2.0 * lr)),
        ) if below_hi > self.r_min else 0.0
        above = _radial_moment(
            lambda r: g(r) / (1.0 + r * r), 1.0, max(s, self.r_min), self.r_max,
        ) if self.r_max > max(s, self.r_min) else 0.0
        return (below - above) * u_mean

    def rescale(self, t, a):
        if a <= 0:
            raise MeasureDefinitionError("scale factor must be positive")
        g = self.radial_density
        log_g = self.log_radial_density
        density = lambda r: t * g(r / a) / a
        log_density = None if log_g is None else \
            (lambda lr: np.log(t) + log_g(lr - np.log(a)) - np.log(a))
        return RadialLevyMeasure(self.dimension, density,
                                 self.r_min * a, self.r_max * a,
                                 direction=self.direction,
                                 log_radial_density=log_density)

    def support_floor(self):
        return self.r_min


class AtomicLevyMeasure(LevyMeasure):
    """Finitely many jump atoms with masses."""

    kind = "atomic"

    def __init__(self, points, masses):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        masses = np.atleast_1d(np.asarray(masses, dtype=float))
        if len(points) != len(masses):
            raise MeasureDefinitionError("points and masses must have equal length")
        if np.any(masses <= 0):
            raise MeasureDefinitionError("masses must be positive")
        radii = np.linalg.norm(points, axis=1)
        if np.any(radii == 0):
            raise MeasureDefinitionError("a Levy measure has no atom at the origin")
        self.points = points
        self.masses = masses
        self.dimension = points.shape[1]
        self._radii = radii

    def truncated_integrals(self, t):
        inside = self._radii <= t
        pts, m = self.points[inside], self.masses[inside]
        second = np.einsum("k,ki,kj->ij", m, pts, pts)
        first = m @ pts
        return TruncatedIntegrals(second, first, float(self.masses[~inside].sum()))

    def tail_mass_above(self, s):
        return float(self.masses[self._radii > s].sum())

    def _build_jump_sampler(self, eps):
        sel = self._radii > eps
        if not np.any(sel):
            raise MeasureDefinitionError(f"no atoms above radius {eps:g}")
        pts = self.points[sel]
        w = self.masses[sel] / self.masses[sel].sum()

        def draw(n, rng):
            return pts[rng.choice(len(w), size=n, p=w)]

        return draw

    def moment_above(self, power, s):
        sel = self._radii > s
        return float((self.masses[sel] * self._radii[sel] ** power).sum())

    def compensated_drift(self, s):
        r2 = self._radii ** 2
        coef = np.where(self._radii <= s, 1.0, 0.0) - 1.0 / (1.0 + r2)
        return (self.masses * coef) @ self.points

    def rescale(self, t, a):
        return AtomicLevyMeasure(self.points * a, self.masses * t)

    def support_floor(self):
        return float(self._radii.min())


@dataclass(frozen=True)
class LevyTriplet:
    """Levy triplet (0, M, b): zero Gaussian part, jump measure, drift.

    The drift ``b`` follows the cumulant convention with the x/(1+|x|^2)
    compensator.  A nonzero Gaussian part is out of scope and rejected.
    """

    levy_measure: LevyMeasure
    drift: np.ndarray = None
    gaussian_part: np.ndarray = None

    def __post_init__(self):
        d = self.levy_measure.dimension
        drift = np.zeros(d) if self.drift is None else np.asarray(self.drift, float)
        if drift.shape != (d,):
            raise MeasureDefinitionError(f"drift must have shape ({d},)")
        object.__setattr__(self, "drift", drift)
        gp = self.gaussian_part
        if gp is not None and not np.allclose(np.asarray(gp, float), 0.0):
            raise MeasureDefinitionError("Gaussian part must be identically zero")
        object.__setattr__(self, "gaussian_part", np.zeros((d, d)))

    @property
    def dimension(self):
        return self.levy_measure.dimension


# ---------------------------------------------------------------------------
# module-level operation entry points
# ---------------------------------------------------------------------------


def sample(measure: ProbMeasure, n: int, seed: int) -> np.ndarray:
    """Draw n iid points; identical (seed, n) gives bit-identical output."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = derive_rng(seed, f"measures.sample:{measure.kind}")
    return measure.sample(n, rng)


def truncated_integrals(measure, t: float) -> TruncatedIntegrals:
    """Truncated second moment matrix, first moment, and tail mass at radius t."""
    if t <= 0:
        raise ValueError("t must be positive")
    return measure.truncated_integrals(t)
