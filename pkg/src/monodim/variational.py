"""Thermodynamic limit of the mean-field model with random monomer weights.

The limiting pressure is the maximum over ``xi >= 0`` of

    phi(xi) = -xi**2 / (2 w) + E[log(xi + x)]

which is strictly concave, so the maximiser ``xi*`` is the unique positive
root of ``g(xi) = xi - w E[1/(xi + x)]``. Dimer density is ``xi*^2 / (2w)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import ActivityDistribution, DivergenceError

log = logging.getLogger(__name__)

QUANTILE_GRID = np.linspace(0.01, 0.99, 64)


class SolverError(ArithmeticError):
    """Fixed-point iteration failed; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: "VariationalSolution | None" = None, w: float | None = None):
        super().__init__(message)
        self.best = best
        self.w = w


@dataclass(frozen=True)
class ModelParams:
    w: float
    fp_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not (math.isfinite(self.w) and self.w > 0):
            raise ValueError(f"dimer coupling w must be positive, got {self.w!r}")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class VariationalSolution:
    w: float
    xi_star: float
    pressure: float
    dimer_density: float
    monomer_density: float
    lower_bound: float
    upper_bound: float
    iterations: int
    residual: float
    diagnostics: tuple[str, ...] = field(default=())

    FIELDS = (
        "w", "xi_star", "pressure", "dimer_density", "monomer_density",
        "lower", "upper", "residual", "iterations",
    )

    def row(self) -> dict:
        """Flat record in the column order used for CSV/JSON output."""
        return {
            "w": self.w,
            "xi_star": self.xi_star,
            "pressure": self.pressure,
            "dimer_density": self.dimer_density,
            "monomer_density": self.monomer_density,
            "lower": self.lower_bound,
            "upper": self.upper_bound,
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _params(params) -> ModelParams:
    return params if isinstance(params, ModelParams) else ModelParams(float(params))


def phi(xi: float, params, dist: ActivityDistribution) -> float:
    """Variational functional; ``params`` may be a bare ``w``."""
    if xi < 0:
        raise ValueError("phi is defined for xi >= 0")
    w = _params(params).w
    if xi == 0.0:
        return dist.log_mean()
    return -xi * xi / (2.0 * w) + dist.expect(lambda x: np.log(xi + x))


def phi_prime(xi: float, params, dist: ActivityDistribution) -> float:
    if xi <= 0:
        raise ValueError("phi_prime requires xi > 0")
    w = _params(params).w
    return -xi / w + dist.expect(lambda x: 1.0 / (xi + x))


def phi_double_prime(xi: float, params, dist: ActivityDistribution) -> float:
    if xi <= 0:
        raise ValueError("phi_double_prime requires xi > 0")
    w = _params(params).w
    return -1.0 / w - dist.expect(lambda x: 1.0 / (xi + x) ** 2)


def _quadratic_root(t: float, c: float) -> float:
    """Positive root of ``z**2 + t z - c``, written to avoid cancellation."""
    if c <= 0:
        return 0.0
    return 2.0 * c / (t + math.sqrt(t * t + 4.0 * c))


def xi_star_bounds(params, dist: ActivityDistribution) -> tuple[float, float]:
    """Rigorous bracket ``lower <= xi* <= upper``.

    The lower bound is the larger of the Jensen bound and the best of
    ``(-t + sqrt(t^2 + 4 w P(x <= t))) / 2`` over ``t`` at the 1%..99%
    quantiles; every ``t`` gives a valid bound. The upper bound is
    ``min(sqrt(w), w E[1/x])``, falling back to ``sqrt(w)`` when
    ``E[1/x]`` is infinite.
    """
    w = _params(params).w
    lower = _quadratic_root(dist.mean(), w)
    ts = np.unique(np.atleast_1d(dist.ppf(QUANTILE_GRID)))
    ts = ts[ts > 0]
    if ts.size:
        probs = np.atleast_1d(dist.cdf(ts))
        lower = max(lower, max(_quadratic_root(t, w * p) for t, p in zip(ts, probs)))
    upper = math.sqrt(w)
    try:
        upper = min(upper, w * dist.inv_mean())
    except DivergenceError:
        pass
    return lower, upper


def _g(xi: float, w: float, dist: ActivityDistribution) -> tuple[float, float]:
    """Residual ``xi - w E[1/(xi+x)]`` and its derivative."""
    if dist.is_atomic:
        v, p = dist._atoms()
        s = xi + v
        return xi - w * float(np.dot(p, 1.0 / s)), 1.0 + w * float(np.dot(p, 1.0 / (s * s)))
    m1 = dist.expect(lambda x: 1.0 / (xi + x))
    m2 = dist.expect(lambda x: 1.0 / (xi + x) ** 2)
    return xi - w * m1, 1.0 + w * m2


def solve_fixed_point(params, dist: ActivityDistribution) -> VariationalSolution:
    """Safeguarded Newton iteration for ``xi* = w E[1/(xi* + x)]``.

    Starts at the midpoint of :func:`xi_star_bounds`; ``g`` is strictly
    increasing, so any Newton step leaving the current bracket is replaced
    by a bisection step.
    """
    params = _params(params)
    w = params.w
    lower, upper = xi_star_bounds(params, dist)
    lo, hi = lower, upper
    if lo > hi:
        # both ends are rigorous; only roundoff can invert them
        lo, hi = hi, lo

    best_xi, best_res = lo, math.inf
    # the rigorous endpoints are candidates too (the point-mass Jensen
    # bound is exact)
    for end in (lower, upper):
        if end > 0:
            g_end = abs(_g(end, w, dist)[0])
            if g_end < best_res:
                best_xi, best_res = end, g_end
    iterations = 0
    converged = best_res <= params.fp_tol
    xi = 0.5 * (lo + hi)
    for iterations in range(1, 0 if converged else params.max_iter + 1):
        g, dg = _g(xi, w, dist)
        if abs(g) < best_res:
            best_xi, best_res = xi, abs(g)
        if abs(g) <= params.fp_tol:
            converged = True
            break
        if g > 0:
            hi = xi
        else:
            lo = xi
        step = xi - g / dg
        if lo < step < hi:
            xi_new = step
        else:
            xi_new = 0.5 * (lo + hi)
        if xi_new == xi:
            break
        xi = xi_new

    xi, res = best_xi, best_res

    sol = _solution(params, dist, xi, res, iterations, lower, upper)
    if res > params.fp_tol:
        raise SolverError(
            f"fixed point not reached for w={w:g}: residual {res:.3g} > {params.fp_tol:g} "
            f"after {iterations} iterations",
            best=sol,
            w=w,
        )
    if not converged:
        log.debug("w=%g: stopped on bracket collapse with residual %.3g", w, res)
    return sol


def _solution(params, dist, xi, res, iterations, lower, upper) -> VariationalSolution:
    w = params.w
    notes = []
    if xi <= 0:
        notes.append("xi* is not positive")
    for name, end in (("lower", lower), ("upper", upper)):
        if xi == end:
            notes.append(f"xi* sits on the {name} bracket endpoint")
    for note in notes:
        log.debug("w=%g: %s", w, note)
    d = xi * xi / (2.0 * w)
    return VariationalSolution(
        w=w,
        xi_star=xi,
        pressure=phi(xi, params, dist),
        dimer_density=d,
        monomer_density=1.0 - 2.0 * d,
        lower_bound=lower,
        upper_bound=upper,
        iterations=iterations,
        residual=res,
        diagnostics=tuple(notes),
    )


def pressure_curve(dist: ActivityDistribution, w_grid, fp_tol: float = 1e-12, max_iter: int = 200,
                   threads: int = 1) -> list[VariationalSolution]:
    """Solve at every ``w`` of a strictly increasing grid."""
    w_grid = [float(w) for w in w_grid]
    if any(b <= a for a, b in zip(w_grid, w_grid[1:])):
        raise ValueError("w_grid must be strictly increasing")

    def one(w):
        try:
            return solve_fixed_point(ModelParams(w, fp_tol, max_iter), dist)
        except SolverError as exc:
            exc.w = w
            raise
        except (ArithmeticError, ValueError) as exc:
            raise SolverError(f"w={w:g}: {exc}", w=w) from exc

    if threads > 1 and len(w_grid) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, w_grid))
    return [one(w) for w in w_grid]


def laplace_correction(params, dist: ActivityDistribution, xi_star: float | None = None) -> float:
    """Order-one term ``c`` in ``log Z_N ~ N phi(xi*) + c``.

    Laplace's method on the one-dimensional Gaussian integral gives
    ``Z_N ~ exp(N phi(xi*)) / sqrt(-w phi''(xi*))``; the ``sqrt(N / 2 pi w)``
    normalisation cancels the ``sqrt(2 pi / N |phi''|)`` width. Exact for a
    point-mass law, where the finite-N functional equals ``phi``.
    """
    params = _params(params)
    if xi_star is None:
        xi_star = solve_fixed_point(params, dist).xi_star
    return -0.5 * math.log(-params.w * phi_double_prime(xi_star, params, dist))
