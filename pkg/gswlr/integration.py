"""
Recursive numerical integration for the joint law of a sequence of score
statistics with independent increments.

The score at look k is ``U_k ~ N(mu_k, v_k)`` with ``Cov(U_l, U_k) = v_min(l,k)``.
Boundaries are given on the z-scale: look k continues while
``Z_k = U_k / sqrt(v_k) > c_k``. The density of ``U_k`` restricted to the
continuation region is carried on a uniform grid and pushed through the
Gaussian increment of the next look.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import norm

from gswlr.default_values import DEFAULT_ARGUMENTS as DEFARGS
from gswlr.errors import DomainError, NumericalError

logger = logging.getLogger(__name__)

SD_RANGE = 8.0
BRACKET = (-10.0, 0.0)
_ROW_CHUNK = 512
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class GridSettings(NamedTuple):
    points: int = DEFARGS["GRID_POINTS"]
    max_points: int = DEFARGS["GRID_MAX_POINTS"]
    tol: float = DEFARGS["PROB_TOL"]
    refine: bool = True


def _odd(n):
    return n if n % 2 else n + 1


def _simpson_weights(n, h):
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


class _Masses(NamedTuple):
    """Quadrature masses of the sub-density of U at the last retained look."""

    x: np.ndarray
    m: np.ndarray
    v: float
    mu: float


class _Look(NamedTuple):
    v: float
    mu: float
    b: float


def _tail(src: Optional[_Masses], v, mu, b):
    """P(continue through the looks behind ``src`` and U > b) for a new look."""
    if src is None:
        return float(norm.sf((b - mu) / math.sqrt(v)))
    if len(src.x) == 0:
        return 0.0
    s = math.sqrt(v - src.v)
    return float(src.m @ ndtr((src.x + (mu - src.mu) - b) / s))


def _advance(src: Optional[_Masses], look: _Look, n_min, n_max, next_var=None) -> _Masses:
    sd = math.sqrt(look.v)
    lo = max(look.b, look.mu - SD_RANGE * sd)
    hi = look.mu + SD_RANGE * sd
    if lo >= hi:
        return _Masses(np.empty(0), np.empty(0), look.v, look.mu)

    scales = [sd if src is None else math.sqrt(look.v - src.v)]
    if next_var is not None and next_var > look.v:
        scales.append(math.sqrt(next_var - look.v))
    h_max = min(scales) / 4.0
    n = _odd(max(n_min, int(math.ceil((hi - lo) / h_max)) + 1))
    if n > n_max:
        logger.debug("Grid capped at %d points (wanted %d)", n_max, n)
        n = _odd(n_max)

    x = np.linspace(lo, hi, n)
    w = _simpson_weights(n, (hi - lo) / (n - 1))

    if src is None:
        f = norm.pdf(x, loc=look.mu, scale=sd)
    else:
        s = math.sqrt(look.v - src.v)
        shift = src.x + (look.mu - src.mu)
        f = np.empty(n)
        for start in range(0, n, _ROW_CHUNK):
            z = (x[start:start + _ROW_CHUNK, None] - shift[None, :]) / s
            f[start:start + _ROW_CHUNK] = np.exp(-0.5 * z * z) @ src.m
        f *= _INV_SQRT_2PI / s
    return _Masses(x, w * f, look.v, look.mu)


class _Recursion:
    """Walks looks in order at a fixed minimum grid size."""

    def __init__(self, n_min, n_max):
        self.n_min = n_min
        self.n_max = n_max
        self.last: Optional[_Look] = None
        self.before: Optional[_Masses] = None  # masses at the look before ``last``
        self.src: Optional[_Masses] = None  # masses at ``last``
        self.p = 1.0

    def _merged_bound(self, c):
        return max(self.last.b, c * math.sqrt(self.last.v))

    def is_merge(self, v):
        return self.last is not None and v <= self.last.v

    def step_probability(self, v, mu, c):
        """Continuation probability if the next look has boundary ``c``."""
        if c == -np.inf:
            return self.p
        if self.is_merge(v):
            return _tail(self.before, self.last.v, self.last.mu, self._merged_bound(c))
        return _tail(self.src, v, mu, c * math.sqrt(v))

    def feed(self, v, mu, c, next_var=None, keep_going=True):
        if c == -np.inf:
            return self.p
        if self.is_merge(v):
            # correlation with the previous retained look is capped at 1
            look = self.last._replace(b=self._merged_bound(c))
            self.p = _tail(self.before, look.v, look.mu, look.b)
            self.last = look
            if keep_going:
                self.src = _advance(self.before, look, self.n_min, self.n_max, next_var)
            return self.p

        look = _Look(v, mu, c * math.sqrt(v))
        self.p = _tail(self.src, v, mu, look.b)
        self.before = self.src
        self.last = look
        if keep_going:
            self.src = _advance(self.before, look, self.n_min, self.n_max, next_var)
        return self.p


def _check_inputs(variances, criticals, means):
    variances = np.asarray(variances, dtype=float)
    criticals = np.asarray(criticals, dtype=float)
    if means is None:
        means = np.zeros_like(variances)
    means = np.asarray(means, dtype=float)
    if not (variances.shape == criticals.shape == means.shape) or variances.ndim != 1:
        raise DomainError("Variances, criticals and means must have equal length")
    if np.any(variances <= 0):
        raise DomainError("Variances must be > 0")
    if np.any(np.isnan(criticals)):
        raise DomainError("Critical values must not be NaN")
    return variances, criticals, means


def _walk(variances, criticals, means, n_min, n_max) -> np.ndarray:
    rec = _Recursion(n_min, n_max)
    probs = np.empty(len(variances))
    k_last = len(variances) - 1
    for k, (v, c, mu) in enumerate(zip(variances, criticals, means)):
        next_var = variances[k + 1] if k < k_last else None
        probs[k] = rec.feed(v, mu, c, next_var, keep_going=k < k_last)
    return probs


def continuation_probabilities(
    variances: Sequence[float],
    criticals: Sequence[float],
    means: Optional[Sequence[float]] = None,
    grid: GridSettings = GridSettings(),
) -> np.ndarray:
    """P(Z_1 > c_1, ..., Z_k > c_k) for every k.

    Looks with ``c_k = -inf`` impose no constraint. A look whose variance does
    not exceed the previous constrained look is treated as perfectly
    correlated with it.
    """
    variances, criticals, means = _check_inputs(variances, criticals, means)

    n = _odd(grid.points)
    probs = _walk(variances, criticals, means, n, grid.max_points)
    while grid.refine and n < grid.max_points:
        n = min(2 * n - 1, _odd(grid.max_points))
        refined = _walk(variances, criticals, means, n, grid.max_points)
        diff = float(np.max(np.abs(refined - probs)))
        probs = refined
        if diff < grid.tol:
            break
    else:
        if grid.refine:
            logger.warning("Grid refinement stopped at %d points before reaching tolerance", n)
    return np.clip(probs, 0.0, 1.0)


def rejection_probability(variances, criticals, means=None, grid: GridSettings = GridSettings()):
    """P(Z_k <= c_k for some k)."""
    return 1.0 - float(continuation_probabilities(variances, criticals, means, grid)[-1])


def _prior_recursion(variances, criticals, n, n_max):
    rec = _Recursion(n, n_max)
    k_last = len(criticals)
    for k in range(k_last):
        rec.feed(variances[k], 0.0, criticals[k], variances[k + 1])
    return rec


def _solve_last(variances, criticals, target, n, n_max):
    rec = _prior_recursion(variances, criticals, n, n_max)
    v_k = variances[-1]

    def excess(c):
        return rec.step_probability(v_k, 0.0, c) - target

    lo, hi = BRACKET
    if excess(lo) < 0:
        return -np.inf, rec
    if excess(hi) > 0:
        raise NumericalError("No boundary in [%g, %g] spends the requested alpha" % BRACKET)
    return brentq(excess, lo, hi, xtol=1e-12, rtol=1e-14), rec


def solve_boundary(
    variances: Sequence[float],
    prior_criticals: Sequence[float],
    cum_alpha: float,
    prev_cum_alpha: float = 0.0,
    grid: GridSettings = GridSettings(),
) -> float:
    """Critical value c_k giving P(continue through look k) = 1 - cum_alpha under the null."""
    variances = np.asarray(variances, dtype=float)
    prior = np.asarray(prior_criticals, dtype=float)
    if len(variances) != len(prior) + 1:
        raise DomainError("Need one more variance than prior critical values")
    if not 0 <= cum_alpha < 1:
        raise DomainError("Cumulative alpha must lie in [0, 1)")
    if np.any(variances <= 0):
        raise DomainError("Variances must be > 0")

    if cum_alpha <= prev_cum_alpha:
        return -np.inf
    if len(prior) == 0 or np.all(prior == -np.inf):
        return float(norm.ppf(cum_alpha))

    target = 1.0 - cum_alpha
    n = _odd(grid.points)
    c, _ = _solve_last(variances, prior, target, n, grid.max_points)
    while grid.refine and np.isfinite(c) and n < grid.max_points:
        n = min(2 * n - 1, _odd(grid.max_points))
        check = _prior_recursion(variances, prior, n, grid.max_points)
        err = abs(check.step_probability(variances[-1], 0.0, c) - target)
        if err < grid.tol:
            break
        logger.debug("Boundary off by %.2e in probability, refining to %d points", err, n)
        c, _ = _solve_last(variances, prior, target, n, grid.max_points)

    if c == -np.inf:
        logger.info("No alpha left to spend at look %d; boundary set to -inf", len(variances))
    return float(c)


def boundary_sequence(
    variances: Sequence[float],
    cum_alphas: Sequence[float],
    grid: GridSettings = GridSettings(),
) -> List[float]:
    """Critical values for a whole schedule of looks."""
    if len(variances) != len(cum_alphas):
        raise DomainError("Need one cumulative alpha per look")
    criticals: List[float] = []
    prev = 0.0
    for k, alpha_k in enumerate(cum_alphas):
        criticals.append(solve_boundary(variances[:k + 1], criticals, alpha_k, prev, grid))
        prev = alpha_k
    return criticals
