"""Analytic test likelihoods with known evidences.

Every problem lives on a box prior and is sampled through the unit
hypercube: ``theta = lower + u * (upper - lower)``.  Likelihood functions are
vectorised over a leading axis, so ``theta`` may be ``(d,)`` or ``(n, d)``.

The log-gamma factors of the mixture problem use location 10 (or -10), scale
1 and shape 1, i.e. ``f(t) = exp((t - loc) - exp(t - loc))``.  This is a
normalised density, so the mixture evidence is fixed by the prior volume.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special, stats

from .errors import ContractError, UnsupportedProblemError

KINDS = ("gaussian", "rosenbrock", "shells", "mixture", "plateau")

_DEFAULT_PARAMS = {
    "gaussian": {"mu": 0.5, "sigma": 0.001},
    "rosenbrock": {},
    "shells": {"c": 3.5, "r": 2.0, "w": 0.1},
    "mixture": {},
    "plateau": {"mu": 0.5, "sigma": 1.0},
}

_DEFAULT_BOUNDS = {
    "gaussian": (0.0, 1.0),
    "rosenbrock": (-5.0, 5.0),
    "shells": (-6.0, 6.0),
    "mixture": (-30.0, 30.0),
    "plateau": (-3.0, 3.0),
}

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ToyProblem:
    """Descriptor of one analytic test likelihood.

    Use :func:`make_problem` rather than constructing this directly; it
    fills in the standard constants and validates the dimension.
    """

    kind: str
    dimension: int
    params: dict = field(default_factory=dict)
    prior_bounds: tuple = (0.0, 1.0)

    @property
    def lower(self):
        return np.full(self.dimension, self.prior_bounds[0], dtype=float)

    @property
    def upper(self):
        return np.full(self.dimension, self.prior_bounds[1], dtype=float)

    @property
    def width(self):
        return self.prior_bounds[1] - self.prior_bounds[0]

    def log_like_unit(self, unit):
        """Log-likelihood evaluated at unit-hypercube coordinates."""
        return log_likelihood(prior_transform(unit, self), self)

    def describe(self):
        """Flat ``key -> str`` mapping used by config and run files."""
        out = {"problem.kind": self.kind, "problem.d": str(self.dimension)}
        for key, value in sorted(self.params.items()):
            out[f"problem.{key}"] = repr(float(value))
        return out


def make_problem(kind, dimension=None, **params):
    """Build a :class:`ToyProblem` with the standard constants.

    ``dimension`` defaults to 2 for rosenbrock and 1 for plateau, the only
    values those kinds accept.  Keyword arguments override the default
    constants (``mu``, ``sigma`` for gaussian/plateau; ``c``, ``r``, ``w``
    for shells, where ``c`` is the first coordinate of the shell centre).
    """
    if kind not in KINDS:
        raise ContractError(f"unknown problem kind {kind!r}; expected one of {KINDS}")
    if dimension is None:
        dimension = {"rosenbrock": 2, "plateau": 1}.get(kind)
        if dimension is None:
            raise ContractError(f"problem kind {kind!r} needs an explicit dimension")
    dimension = int(dimension)
    if dimension < 1:
        raise ContractError("dimension must be positive")
    if kind == "rosenbrock" and dimension != 2:
        raise ContractError("rosenbrock is only defined for d=2")
    if kind == "plateau" and dimension != 1:
        raise ContractError("plateau is only defined for d=1")
    if kind == "mixture" and dimension % 2:
        raise ContractError("mixture requires an even dimension")

    merged = dict(_DEFAULT_PARAMS[kind])
    unknown = set(params) - set(merged)
    if unknown:
        raise ContractError(f"unknown parameters for {kind}: {sorted(unknown)}")
    merged.update({k: float(v) for k, v in params.items()})
    if "sigma" in merged and merged["sigma"] <= 0:
        raise ContractError("sigma must be positive")
    if kind == "shells" and (merged["w"] <= 0 or merged["r"] <= 0):
        raise ContractError("shell radius and width must be positive")
    lo, hi = _DEFAULT_BOUNDS[kind]
    return ToyProblem(kind, dimension, merged, (lo, hi))


def _as_points(x, dimension):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dimension,) or x.ndim > 2:
        raise ContractError(
            f"expected {dimension} coordinates per point, got shape {x.shape}")
    return x


def prior_transform(unit, problem):
    """Map unit-hypercube coordinates affinely onto the prior box."""
    unit = _as_points(unit, problem.dimension)
    lo, hi = problem.prior_bounds
    return lo + unit * (hi - lo)


def inverse_prior_transform(theta, problem):
    theta = _as_points(theta, problem.dimension)
    lo, hi = problem.prior_bounds
    return (theta - lo) / (hi - lo)


def log_likelihood(theta, problem):
    """ln L(theta); zero-likelihood regions return ``-inf``."""
    theta = _as_points(theta, problem.dimension)
    return _LOG_LIKES[problem.kind](theta, problem)


def _gaussian(theta, problem):
    mu, sigma = problem.params["mu"], problem.params["sigma"]
    z = (theta - mu) / sigma
    d = problem.dimension
    return -0.5 * np.sum(z * z, axis=-1) - d * (_LOG_SQRT_2PI + math.log(sigma))


def _rosenbrock(theta, problem):
    x, y = theta[..., 0], theta[..., 1]
    return -((1.0 - x) ** 2) - 100.0 * (y - x * x) ** 2


def _log_shell(theta, centre, r, w):
    dist = np.sqrt(np.sum((theta - centre) ** 2, axis=-1))
    return -((dist - r) ** 2) / (2.0 * w * w) - _LOG_SQRT_2PI - math.log(w)


def _shells(theta, problem):
    c, r, w = problem.params["c"], problem.params["r"], problem.params["w"]
    centre = np.zeros(problem.dimension)
    centre[0] = c
    return np.logaddexp(_log_shell(theta, centre, r, w),
                        _log_shell(theta, -centre, r, w))


def _log_loggamma(t, loc):
    y = t - loc
    return y - np.exp(y)


def _log_normal(t, loc):
    return -0.5 * (t - loc) ** 2 - _LOG_SQRT_2PI


def _mixture(theta, problem):
    d = problem.dimension
    half = math.log(0.5)
    total = np.logaddexp(_log_loggamma(theta[..., 0], 10.0),
                         _log_loggamma(theta[..., 0], -10.0)) + half
    total = total + np.logaddexp(_log_normal(theta[..., 1], 10.0),
                                 _log_normal(theta[..., 1], -10.0)) + half
    # 1-based factor i in [3, (d+2)/2] is log-gamma, the rest are normal
    n_loggamma = (d + 2) // 2 - 2
    if n_loggamma > 0:
        total = total + np.sum(_log_loggamma(theta[..., 2:2 + n_loggamma], 10.0), axis=-1)
    if d > 2 + n_loggamma:
        total = total + np.sum(_log_normal(theta[..., 2 + n_loggamma:], 10.0), axis=-1)
    return total


def _plateau(theta, problem):
    mu, sigma = problem.params["mu"], problem.params["sigma"]
    z = (theta[..., 0] - mu) / sigma
    inside = z * z <= 1.0
    with np.errstate(divide="ignore"):
        out = np.where(inside, -0.5 * z * z - _LOG_SQRT_2PI - math.log(sigma), -np.inf)
    return out


_LOG_LIKES = {
    "gaussian": _gaussian,
    "rosenbrock": _rosenbrock,
    "shells": _shells,
    "mixture": _mixture,
    "plateau": _plateau,
}


def analytic_log_evidence(problem):
    """Reference log-evidence of a toy problem.

    Raises
    ------
    UnsupportedProblemError
        For the plateau problem, which has no analytic reference; use
        :func:`quadrature_log_evidence` there.
    """
    kind = problem.kind
    if kind == "gaussian":
        return 0.0
    if kind == "rosenbrock":
        return rosenbrock_log_evidence()
    if kind == "shells":
        p = problem.params
        return shells_log_evidence(problem.dimension, p["r"], p["w"], problem.width)
    if kind == "mixture":
        return -problem.dimension * math.log(problem.width)
    raise UnsupportedProblemError(f"no analytic evidence for {kind!r}")


@lru_cache(maxsize=None)
def rosenbrock_log_evidence():
    """Semi-analytic evidence: y integrated in closed form, x by quadrature."""
    def integrand(x):
        return (special.erf(10.0 * (5.0 - x * x)) + special.erf(10.0 * (5.0 + x * x))) \
            * math.exp(-((1.0 - x) ** 2))

    value, _ = integrate.quad(integrand, -5.0, 5.0, epsabs=1e-8, limit=200)
    return round(math.log(math.sqrt(math.pi) / 2000.0 * value), 4)


@lru_cache(maxsize=None)
def shells_log_evidence(dimension, r=2.0, w=0.1, width=12.0):
    """Two shells, ignoring truncation by the prior box."""
    n = dimension - 1
    pdf = stats.norm(r, w).pdf
    lo, hi = min(0.0, r - 40 * w), r + 40 * w
    moment, _ = integrate.quad(lambda x: abs(x) ** n * pdf(x), lo, hi,
                               points=[0.0, r] if lo < 0 else [r], limit=200)
    log_area = math.log(2.0) + 0.5 * dimension * math.log(math.pi) \
        - special.gammaln(0.5 * dimension)
    return math.log(2.0 * moment) + log_area - dimension * math.log(width)


def quadrature_log_evidence(problem):
    """One-dimensional quadrature of L * prior over the box (d=1 only)."""
    if problem.dimension != 1:
        raise UnsupportedProblemError("quadrature evidence implemented for d=1 only")
    lo, hi = problem.prior_bounds
    points = []
    if problem.kind in ("gaussian", "plateau"):
        mu, sigma = problem.params["mu"], problem.params["sigma"]
        points = [p for p in (mu - sigma, mu, mu + sigma) if lo < p < hi]

    def f(x):
        return math.exp(float(log_likelihood([x], problem)))

    value, _ = integrate.quad(f, lo, hi, points=points or None, limit=500, epsabs=1e-13)
    return math.log(value / (hi - lo))


def reference_log_evidence(problem):
    """Analytic value where one exists, quadrature for the plateau."""
    if problem.kind == "plateau":
        return quadrature_log_evidence(problem)
    return analytic_log_evidence(problem)


def contour_box(problem, log_l_star):
    """Unit-cube box guaranteed to contain ``{L > L*}``, or ``None``.

    Uniform draws from this box followed by the ``L > L*`` test are still
    exact constrained-prior draws; the box only raises the acceptance rate.
    Returns ``(lo, hi)`` arrays; ``lo == hi`` in some axis means the region
    is empty.
    """
    d = problem.dimension
    kind, p = problem.kind, problem.params
    if log_l_star == -np.inf and kind != "plateau":
        return None
    if kind in ("gaussian", "plateau"):
        mu, sigma = p["mu"], p["sigma"]
        peak = -d * (_LOG_SQRT_2PI + math.log(sigma))
        if np.isfinite(log_l_star):
            slack = 2.0 * (peak - log_l_star)
            radius = sigma * math.sqrt(slack) if slack > 0 else 0.0
        else:
            radius = np.inf
        if kind == "plateau":
            radius = min(radius, sigma)
        lo = np.full(d, mu - radius)
        hi = np.full(d, mu + radius)
    elif kind == "shells":
        c, r, w = p["c"], p["r"], p["w"]
        # L > L* needs one shell above exp(L*)/2
        slack = 2.0 * (math.log(2.0) - _LOG_SQRT_2PI - math.log(w) - log_l_star)
        if slack <= 0:
            lo = hi = np.zeros(d)
        else:
            reach = r + w * math.sqrt(slack)
            lo = np.full(d, -reach)
            hi = np.full(d, reach)
            lo[0], hi[0] = -c - reach, c + reach
    else:
        return None
    unit_lo = np.clip(inverse_prior_transform(lo, problem), 0.0, 1.0)
    unit_hi = np.clip(inverse_prior_transform(hi, problem), 0.0, 1.0)
    return unit_lo, np.maximum(unit_hi, unit_lo)
