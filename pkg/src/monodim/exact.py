"""Exact finite-size partition functions of monomer-dimer models.

Three independent routes to the same number:

* :func:`hl_partition` -- Heilmann-Lieb vertex deletion on a general
  weighted graph, memoised over vertex subsets.
* :func:`wick_partition` -- brute-force Gaussian moment expansion: a sum
  over vertex subsets and their pair partitions.
* :func:`symmetric_log_partition` -- complete graph with per-edge weight
  ``w/N``, where matchings grouped by their monomer set collapse to
  elementary symmetric polynomials of the activities.

:func:`hermite_log_partition` evaluates the complete-graph model as the
one-dimensional Gaussian expectation ``E[prod_i (xi + x_i)]``,
``xi ~ N(0, w/N)``, with Gauss-Hermite nodes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import gammaln, logsumexp

HL_MAX_VERTICES = 24
WICK_MAX_VERTICES = 10
SYMMETRIC_MAX_N = 20_000
# natural-log digits of half a double mantissa
HALF_MANTISSA = 0.5 * 53 * math.log(2.0)


class SizeError(ValueError):
    """Instance exceeds the engine's enumeration budget."""


class PrecisionWarning(RuntimeWarning):
    """Cancellation consumed more than half of the floating-point mantissa."""


def _check_activities(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("activities must be a non-empty vector")
    bad = np.flatnonzero(~(np.isfinite(x) & (x > 0)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"activity #{i} is {x[i]!r}; activities must be positive")
    return x


@dataclass
class WeightedGraph:
    """Monomer weights ``x_i`` on vertices, dimer weights ``w_ij`` on edges.

    ``edge_weights`` maps unordered pairs to nonnegative weights; pairs not
    listed have weight zero.
    """

    activities: np.ndarray
    edge_weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        self.activities = _check_activities(self.activities)
        n = self.n
        clean = {}
        for (i, j), wij in dict(self.edge_weights).items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-edge at vertex {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) outside 0..{n - 1}")
            wij = float(wij)
            if not (math.isfinite(wij) and wij >= 0):
                raise ValueError(f"edge ({i}, {j}) has weight {wij!r}; weights must be >= 0")
            key = (min(i, j), max(i, j))
            if key in clean and clean[key] != wij:
                raise ValueError(f"edge {key} given twice with different weights")
            clean[key] = wij
        self.edge_weights = clean

    @property
    def n(self) -> int:
        return int(self.activities.size)

    @classmethod
    def from_matrix(cls, activities, weights) -> "WeightedGraph":
        """Graph from a symmetric weight matrix; the diagonal is ignored."""
        weights = np.asarray(weights, dtype=float)
        n = len(activities)
        if weights.shape != (n, n):
            raise ValueError(f"weight matrix must be {n}x{n}")
        if not np.allclose(weights, weights.T, rtol=0, atol=0):
            raise ValueError("weight matrix must be symmetric")
        edges = {(i, j): weights[i, j] for i in range(n) for j in range(i + 1, n) if weights[i, j] != 0}
        return cls(activities, edges)

    def weight(self, i: int, j: int) -> float:
        return self.edge_weights.get((min(i, j), max(i, j)), 0.0)

    def matrix(self, diagonal: float = 0.0) -> np.ndarray:
        W = np.full((self.n, self.n), 0.0)
        for (i, j), wij in self.edge_weights.items():
            W[i, j] = W[j, i] = wij
        np.fill_diagonal(W, diagonal)
        return W


@dataclass
class CompleteModelInstance:
    """Complete graph on ``N`` vertices with uniform per-edge weight ``w/N``."""

    activities: np.ndarray
    w: float

    def __post_init__(self):
        self.activities = _check_activities(self.activities)
        self.w = float(self.w)
        if not (math.isfinite(self.w) and self.w > 0):
            raise ValueError(f"w must be positive, got {self.w!r}")

    @property
    def n(self) -> int:
        return int(self.activities.size)

    @property
    def edge_weight(self) -> float:
        return self.w / self.n

    def graph(self) -> WeightedGraph:
        n, c = self.n, self.edge_weight
        return WeightedGraph(self.activities, {(i, j): c for i in range(n) for j in range(i + 1, n)})

    def covariance(self) -> np.ndarray:
        return np.full((self.n, self.n), self.edge_weight)


class GibbsObservables(NamedTuple):
    log_z: float
    mean_dimers: float
    dimer_density: float


class AnnealedBound(NamedTuple):
    exact_log_mean_z: float
    bound_log: float

    @property
    def slack(self) -> float:
        return self.bound_log - self.exact_log_mean_z


# -- Heilmann-Lieb recursion --------------------------------------------------


def _pivot_rule(pivot):
    if pivot == "lowest":
        return lambda mask: (mask & -mask).bit_length() - 1
    if pivot == "highest":
        return lambda mask: mask.bit_length() - 1
    if isinstance(pivot, np.random.Generator):
        rng = pivot

        def choose(mask):
            bits = [i for i in range(mask.bit_length()) if mask >> i & 1]
            return bits[int(rng.integers(len(bits)))]

        return choose
    raise ValueError(f"pivot must be 'lowest', 'highest' or a numpy Generator, got {pivot!r}")


def _hl(graph: WeightedGraph, pivot, max_vertices: int, logdomain: bool) -> float:
    n = graph.n
    if n > max_vertices:
        raise SizeError(f"Heilmann-Lieb recursion limited to {max_vertices} vertices, got {n}")
    choose = _pivot_rule(pivot)
    nbrs = [[] for _ in range(n)]
    for (i, j), wij in graph.edge_weights.items():
        if wij > 0:
            wij = math.log(wij) if logdomain else wij
            nbrs[i].append((j, wij))
            nbrs[j].append((i, wij))
    x = [math.log(v) if logdomain else v for v in graph.activities]
    memo = {0: 0.0 if logdomain else 1.0}

    def z(mask):
        hit = memo.get(mask)
        if hit is not None:
            return hit
        i = choose(mask)
        rest = mask & ~(1 << i)
        if logdomain:
            terms = [x[i] + z(rest)]
            terms += [wij + z(rest & ~(1 << j)) for j, wij in nbrs[i] if rest >> j & 1]
            m = max(terms)
            total = m + math.log(math.fsum(math.exp(t - m) for t in terms))
        else:
            total = x[i] * z(rest)
            for j, wij in nbrs[i]:
                if rest >> j & 1:
                    total += wij * z(rest & ~(1 << j))
        memo[mask] = total
        return total

    return z((1 << n) - 1)


def hl_partition(graph: WeightedGraph, pivot="lowest", max_vertices: int = HL_MAX_VERTICES) -> float:
    """Partition function by ``Z_G = x_i Z_{G-i} + sum_j w_ij Z_{G-i-j}``.

    ``pivot`` picks the deleted vertex in each subgraph: ``"lowest"``,
    ``"highest"``, or a numpy Generator for a random choice. Any rule gives
    the same value.
    """
    return _hl(graph, pivot, max_vertices, logdomain=False)


def hl_log_partition(graph: WeightedGraph, pivot="lowest", max_vertices: int = HL_MAX_VERTICES) -> float:
    """``log Z_G`` with the recursion carried in the log domain."""
    return _hl(graph, pivot, max_vertices, logdomain=True)


# -- Wick expansion -----------------------------------------------------------


def _pairings_sum(elems: tuple[int, ...], W: np.ndarray) -> float:
    # match the lowest remaining element with each partner in turn
    if not elems:
        return 1.0
    first, rest = elems[0], elems[1:]
    total = 0.0
    for k, j in enumerate(rest):
        c = W[first, j]
        if c != 0.0:
            total += c * _pairings_sum(rest[:k] + rest[k + 1:], W)
    return total


def wick_partition(covariance, activities, max_vertices: int = WICK_MAX_VERTICES) -> float:
    """``E[prod_i (xi_i + x_i)]`` for ``xi ~ N(0, covariance)``, by Wick's rule.

    Expands the product over subsets ``A`` of factors taking ``xi_i`` and
    sums the pair partitions of each ``A``. Only off-diagonal covariances
    appear, so this equals the monomer-dimer partition function with
    ``w_ij = covariance[i, j]`` whatever the diagonal is.
    """
    x = _check_activities(activities)
    W = np.asarray(covariance, dtype=float)
    n = x.size
    if W.shape != (n, n):
        raise ValueError(f"covariance must be {n}x{n}")
    if n > max_vertices:
        raise SizeError(f"Wick enumeration limited to {max_vertices} vertices, got {n}")
    total = 0.0
    for mask in range(1 << n):
        inside = tuple(i for i in range(n) if mask >> i & 1)
        if len(inside) % 2:
            continue
        pair_sum = _pairings_sum(inside, W)
        if pair_sum == 0.0:
            continue
        mono = 1.0
        for i in range(n):
            if not mask >> i & 1:
                mono *= x[i]
        total += pair_sum * mono
    return total


# -- complete graph, symmetric closed form ------------------------------------


def log_elementary_symmetric(x) -> np.ndarray:
    """``log e_k(x)`` for ``k = 0..N`` by the one-variable-at-a-time DP."""
    lx = np.log(_check_activities(x))
    n = lx.size
    le = np.full(n + 1, -np.inf)
    le[0] = 0.0
    for i in range(n):
        # e_k <- e_k + x_i e_{k-1}; numpy buffers the overlapping operands
        np.logaddexp(le[1:i + 2], lx[i] + le[:i + 1], out=le[1:i + 2])
    return le


def log_double_factorials(max_pairs: int) -> np.ndarray:
    """``log((2k - 1)!!)`` for ``k = 0..max_pairs``."""
    out = np.zeros(max_pairs + 1)
    out[1:] = np.cumsum(np.log(np.arange(1, 2 * max_pairs, 2, dtype=float)))
    return out


def _symmetric_terms(instance: CompleteModelInstance, max_n: int) -> tuple[np.ndarray, np.ndarray]:
    n = instance.n
    if n > max_n:
        raise SizeError(f"symmetric engine limited to N <= {max_n}, got {n}")
    le = log_elementary_symmetric(instance.activities)
    pairs = np.arange(n // 2 + 1)
    terms = pairs * math.log(instance.edge_weight) + log_double_factorials(n // 2) + le[n - 2 * pairs]
    return pairs, terms


def symmetric_log_partition(instance: CompleteModelInstance, max_n: int = SYMMETRIC_MAX_N) -> float:
    """Exact ``log Z_N`` on the complete graph.

    A matching with ``k`` dimers covers ``2k`` vertices; each ``2k``-set has
    ``(2k-1)!!`` pairings and the monomer products over all ``2k``-sets sum
    to ``e_{N-2k}(x)``. Hence
    ``Z_N = sum_k (w/N)^k (2k-1)!! e_{N-2k}(x)``, summed in the log domain.
    """
    _, terms = _symmetric_terms(instance, max_n)
    return float(logsumexp(terms))


def gibbs_observables(instance: CompleteModelInstance, max_n: int = SYMMETRIC_MAX_N) -> GibbsObservables:
    """Exact Gibbs mean of the number of dimers."""
    pairs, terms = _symmetric_terms(instance, max_n)
    log_z = float(logsumexp(terms))
    mean = float(np.dot(pairs, np.exp(terms - log_z)))
    return GibbsObservables(log_z, mean, mean / instance.n)


# -- Gauss-Hermite ------------------------------------------------------------


def hermite_nodes_required(n: int) -> int:
    return (n + 2) // 2


def hermite_log_partition(instance: CompleteModelInstance, nodes: int | None = None,
                          with_condition: bool = False):
    """``log Z_N`` from ``E[prod_i (xi + x_i)]``, ``xi ~ N(0, w/N)``.

    The integrand is a degree-N polynomial against a Gaussian, so
    ``ceil((N+1)/2)`` nodes (the default) integrate it exactly. Nodes with
    ``xi < -x_i`` contribute negative terms; the result carries a condition
    estimate ``log sum|terms| - log |sum terms|`` and a
    :class:`PrecisionWarning` is issued when it exceeds half the mantissa.
    Returns ``log_z`` or ``(log_z, condition)``.
    """
    n = instance.n
    nodes = hermite_nodes_required(n) if nodes is None else int(nodes)
    if nodes < 1:
        raise ValueError("nodes must be >= 1")
    t, wt = hermgauss(nodes)
    xi = math.sqrt(2.0 * instance.w / n) * t
    shifted = xi[:, None] + instance.activities[None, :]
    with np.errstate(divide="ignore"):
        log_mag = np.log(np.abs(shifted)).sum(axis=1) + np.log(wt) - 0.5 * math.log(math.pi)
    sign = np.prod(np.sign(shifted), axis=1)
    keep = sign != 0
    log_mag, sign = log_mag[keep], sign[keep]
    top = log_mag.max()
    scaled = np.exp(log_mag - top)
    s = math.fsum(sign * scaled)
    if s <= 0:
        raise ArithmeticError("Gauss-Hermite sum is not positive; cancellation destroyed the result")
    log_z = top + math.log(s)
    cond = math.log(math.fsum(scaled)) - math.log(s)
    if cond > HALF_MANTISSA:
        warnings.warn(
            f"Gauss-Hermite cancellation: condition estimate {cond:.2f} exceeds {HALF_MANTISSA:.2f}",
            PrecisionWarning,
            stacklevel=2,
        )
    return (log_z, cond) if with_condition else log_z


# -- finite-N functionals ------------------------------------------------------


def phi_n(xi, instance: CompleteModelInstance):
    """Empirical functional ``-xi^2/(2w) + mean_i log|xi + x_i|``.

    Defined on the whole real line; ``-inf`` exactly at ``xi = -x_i``.
    """
    xi_arr = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.log(np.abs(xi_arr[..., None] + instance.activities)).mean(axis=-1)
    out = -xi_arr ** 2 / (2.0 * instance.w) + s
    return float(out) if out.ndim == 0 else out


def phi_envelope(xi, mean_x: float, w: float):
    """Deterministic upper envelope ``-xi^2/(2w) + log xi + (E[x] + 1)/xi``."""
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr <= 0):
        raise ValueError("phi_envelope requires xi > 0")
    out = -xi_arr ** 2 / (2.0 * w) + np.log(xi_arr) + (mean_x + 1.0) / xi_arr
    return float(out) if out.ndim == 0 else out


def mean_partition_bound(n: int, w: float, mean_x: float) -> AnnealedBound:
    """Annealed ``log E[Z_N]`` and its upper bound ``N log E[x] + (N-1) w / (2 E[x]^2)``.

    With i.i.d. activities ``E[Z_N]`` is the deterministic partition
    function at activity ``E[x]``:
    ``sum_k (w/N)^k (2k-1)!! C(N, 2k) E[x]^(N-2k)``.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    if not (w > 0 and mean_x > 0):
        raise ValueError("w and mean_x must be positive")
    pairs = np.arange(n // 2 + 1)
    m = 2 * pairs
    log_binom = gammaln(n + 1) - gammaln(m + 1) - gammaln(n - m + 1)
    terms = (pairs * math.log(w / n) + log_double_factorials(n // 2) + log_binom
             + (n - m) * math.log(mean_x))
    exact = float(logsumexp(terms))
    bound = n * math.log(mean_x) + 0.5 * (n - 1) * w / mean_x ** 2
    return AnnealedBound(exact, bound)


def engine_log_partition(engine: str, instance: CompleteModelInstance) -> float:
    """Dispatch ``log Z_N`` of a complete-graph instance to a named engine."""
    if engine == "symmetric":
        return symmetric_log_partition(instance)
    if engine == "hermite":
        return hermite_log_partition(instance)
    if engine == "hl":
        return hl_log_partition(instance.graph())
    if engine == "wick":
        return math.log(wick_partition(instance.covariance(), instance.activities))
    raise ValueError(f"unknown engine {engine!r}")


ENGINES = ("symmetric", "hermite", "hl", "wick")
ENGINE_LIMITS: Mapping[str, int] = {
    "symmetric": SYMMETRIC_MAX_N,
    "hermite": SYMMETRIC_MAX_N,
    "hl": HL_MAX_VERTICES,
    "wick": WICK_MAX_VERTICES,
}
