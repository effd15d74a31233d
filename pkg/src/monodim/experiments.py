"""Disorder-replica studies for the random-activity model.

Every replica ``r`` of size ``N`` draws its activities from the stream keyed
by ``(base_seed, N, r)``, so results do not depend on evaluation order or on
the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .distributions import ActivityDistribution, derived_seed
from .exact import CompleteModelInstance, gibbs_observables, mean_partition_bound, phi_envelope, phi_n
from .variational import ModelParams, phi, solve_fixed_point, xi_star_bounds


class StudyError(RuntimeError):
    def __init__(self, message: str, n: int | None = None, replica: int | None = None):
        super().__init__(message)
        self.n = n
        self.replica = replica


def replica_activities(dist: ActivityDistribution, n: int, replica: int, base_seed: int) -> tuple[np.ndarray, int]:
    """Disorder sample of replica ``replica`` at size ``n`` and its seed."""
    seed = derived_seed(base_seed, n, replica)
    return dist.sample(n, np.random.default_rng(seed)), seed


def _map(fn, tasks, threads: int):
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# -- pressure study -------------------------------------------------------------


@dataclass
class ReplicaStudy:
    dist: ActivityDistribution
    w: float
    n_values: tuple[int, ...]
    replicas: int
    base_seed: int
    pressures: np.ndarray          # (len(n_values), replicas), p_N = log Z_N / N
    dimer_densities: np.ndarray    # same shape, <|D|>_N / N
    seeds: np.ndarray              # same shape, uint64 replica seeds
    target_pressure: float
    target_dimer_density: float
    annealed_pressure: np.ndarray = field(default=None)  # (1/N) log E[Z_N]
    # mean_i log(xi* + x_i) - E[log(xi* + x)]: exactly mean-zero, and carries
    # the leading O(N^-1/2) fluctuation of p_N
    control: np.ndarray = field(default=None)

    def summary(self) -> list[dict]:
        rows = []
        for k, n in enumerate(self.n_values):
            p = self.pressures[k]
            std = float(p.std(ddof=1)) if p.size > 1 else float("nan")
            mean = float(p.mean())
            adjusted = p - self.control[k]
            rows.append({
                "N": n,
                "mean": mean,
                "std": std,
                "min": float(p.min()),
                "max": float(p.max()),
                "gap": mean - self.target_pressure,
                "mean_cv": float(adjusted.mean()),
                "gap_cv": float(adjusted.mean()) - self.target_pressure,
                "se_cv": float(adjusted.std(ddof=1) / math.sqrt(p.size)),
                "mean_dimer_density": float(self.dimer_densities[k].mean()),
                "annealed_pressure": float(self.annealed_pressure[k]),
            })
        return rows

    def long_rows(self, study: str = "pressure"):
        """One record per replica, in (N, replica) order."""
        kind = self.dist.kind
        for k, n in enumerate(self.n_values):
            for r in range(self.replicas):
                yield {
                    "study": study,
                    "kind": kind,
                    "w": self.w,
                    "N": n,
                    "replica": r,
                    "seed": int(self.seeds[k, r]),
                    "p_N": float(self.pressures[k, r]),
                }


def replica_pressure(dist: ActivityDistribution, w: float, n: int, replica: int,
                     base_seed: int) -> tuple[float, float, int]:
    """``(p_N, dimer density, seed)`` for one disorder replica."""
    x, seed = replica_activities(dist, n, replica, base_seed)
    obs = gibbs_observables(CompleteModelInstance(x, w))
    return obs.log_z / n, obs.dimer_density, seed


def run_pressure_study(dist: ActivityDistribution, w: float, n_values: Sequence[int], replicas: int,
                       base_seed: int, threads: int = 1) -> ReplicaStudy:
    n_values = tuple(int(n) for n in n_values)
    if replicas < 2:
        raise ValueError("a study needs at least 2 replicas")
    if not n_values or min(n_values) < 1:
        raise ValueError("n_values must be positive sizes")
    params = ModelParams(w)
    sol = solve_fixed_point(params, dist)

    shape = (len(n_values), replicas)
    pressures = np.empty(shape)
    densities = np.empty(shape)
    seeds = np.empty(shape, dtype=np.uint64)
    control = np.empty(shape)
    mean_log = sol.pressure + sol.xi_star ** 2 / (2.0 * w)
    tasks = [(k, n, r) for k, n in enumerate(n_values) for r in range(replicas)]

    def run(task):
        k, n, r = task
        try:
            x, seed = replica_activities(dist, n, r, base_seed)
            obs = gibbs_observables(CompleteModelInstance(x, w))
        except Exception as exc:
            raise StudyError(f"N={n}, replica={r}: {exc}", n=n, replica=r) from exc
        p = obs.log_z / n
        if not math.isfinite(p):
            raise StudyError(f"N={n}, replica={r}: non-finite pressure {p!r}", n=n, replica=r)
        pressures[k, r], densities[k, r], seeds[k, r] = p, obs.dimer_density, seed
        control[k, r] = float(np.log(sol.xi_star + x).mean()) - mean_log

    _map(run, tasks, threads)
    annealed = np.array([mean_partition_bound(n, w, dist.mean()).exact_log_mean_z / n for n in n_values])
    return ReplicaStudy(
        dist=dist,
        w=float(w),
        n_values=n_values,
        replicas=replicas,
        base_seed=int(base_seed),
        pressures=pressures,
        dimer_densities=densities,
        seeds=seeds,
        target_pressure=sol.pressure,
        target_dimer_density=sol.dimer_density,
        annealed_pressure=annealed,
        control=control,
    )


class DecayRow(NamedTuple):
    n: int
    std: float
    std_ratio: float | None
    status: str  # "ok", "slow", "degenerate" or "first"


def self_averaging_decay(study: ReplicaStudy) -> list[DecayRow]:
    """Per-size spread of ``p_N`` and the ratio to the previous size.

    Under ``1/sqrt(N)`` scaling a size step ``N -> kN`` should shrink the
    standard deviation by ``1/sqrt(k)``; the step is flagged ``slow`` when
    the observed ratio exceeds 1.5 times that (0.75 for a 4x step).
    Point-mass laws have zero spread and are reported as ``degenerate``.
    """
    if len(study.n_values) < 2:
        raise ValueError("decay needs at least two sizes")
    stds = [float(p.std(ddof=1)) for p in study.pressures]
    rows = []
    for k, (n, s) in enumerate(zip(study.n_values, stds)):
        if k == 0:
            rows.append(DecayRow(n, s, None, "degenerate" if s == 0 else "first"))
            continue
        prev_n, prev_s = study.n_values[k - 1], stds[k - 1]
        if prev_s == 0 or s == 0:
            rows.append(DecayRow(n, s, None, "degenerate"))
            continue
        ratio = s / prev_s
        limit = 1.5 * math.sqrt(prev_n / n)
        rows.append(DecayRow(n, s, ratio, "slow" if ratio > limit else "ok"))
    return rows


def quenched_annealed_check(study: ReplicaStudy) -> list[dict]:
    """Jensen: ``E[p_N] <= log E[Z_N] / N``, allowing three standard errors."""
    out = []
    for k, n in enumerate(study.n_values):
        p = study.pressures[k]
        allowance = 3.0 * p.std(ddof=1) / math.sqrt(p.size)
        out.append({
            "N": n,
            "quenched": float(p.mean()),
            "annealed": float(study.annealed_pressure[k]),
            "ok": bool(p.mean() <= study.annealed_pressure[k] + allowance),
        })
    return out


# -- concentration bound ----------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationBoundInputs:
    t: float
    n: int
    q: float
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.n < 2:
            raise ValueError("N must be >= 2 (log N appears in a denominator)")
        if not self.q >= 1:
            raise ValueError("q must be >= 1")
        if min(self.c1, self.c2, self.c3) < 0:
            raise ValueError("C1, C2, C3 must be nonnegative")


def azuma_bound(inputs: ConcentrationBoundInputs) -> float:
    """Tail bound on ``P(|p_N - E p_N| >= t)``.

    ``2 exp(-t^2 N / (4 q^2 log^2 N)) + (a + b N) N^(1-q)`` with
    ``a = 4 + 2 C2 C3`` and ``b = 2 C1 C3^2``. Values above 1 are returned
    unchanged.
    """
    t, n, q = inputs.t, inputs.n, inputs.q
    a = 4.0 + 2.0 * inputs.c2 * inputs.c3
    b = 2.0 * inputs.c1 * inputs.c3 ** 2
    ln = math.log(n)
    return 2.0 * math.exp(-t * t * n / (4.0 * q * q * ln * ln)) + (a + b * n) * n ** (1.0 - q)


def distribution_constants(dist: ActivityDistribution, w: float) -> tuple[float, float, float]:
    """``(C1, C2, C3)`` for the complete graph with per-edge weight ``w/N``.

    ``C1 = sup_N w/N = w`` (attained at ``N = 1``), ``C2 = E[x]``,
    ``C3 = E[1/x]``.
    """
    return float(w), dist.mean(), dist.inv_mean()


# -- uniform law of large numbers ---------------------------------------------------


@dataclass
class LLNStudy:
    n_values: tuple[int, ...]
    replicas: int
    base_seed: int
    window: float
    grid: np.ndarray
    sup_deviation: np.ndarray      # (len(n_values), replicas)
    reflection_ok: np.ndarray      # bool, same shape
    envelope_ok: np.ndarray        # bool, same shape; True where not applicable
    envelope_applicable: np.ndarray
    seeds: np.ndarray

    def summary(self) -> list[dict]:
        rows = []
        for k, n in enumerate(self.n_values):
            d = self.sup_deviation[k]
            q10, q50, q90 = np.quantile(d, [0.1, 0.5, 0.9])
            rows.append({
                "N": n,
                "median": float(q50),
                "q10": float(q10),
                "q90": float(q90),
                "max": float(d.max()),
                "reflection_ok": bool(self.reflection_ok[k].all()),
                "envelope_ok": bool(self.envelope_ok[k].all()),
                "envelope_checked": int(self.envelope_applicable[k].sum()),
            })
        return rows

    def long_rows(self, study: str = "lln"):
        for k, n in enumerate(self.n_values):
            for r in range(self.replicas):
                yield {
                    "study": study,
                    "N": n,
                    "replica": r,
                    "seed": int(self.seeds[k, r]),
                    "sup_deviation": float(self.sup_deviation[k, r]),
                    "reflection_ok": bool(self.reflection_ok[k, r]),
                    "envelope_ok": bool(self.envelope_ok[k, r]),
                }


def uniform_lln_study(dist: ActivityDistribution, w: float, n_values: Sequence[int], replicas: int,
                      base_seed: int, window: float | None = None, grid_points: int = 512,
                      threads: int = 1) -> LLNStudy:
    """Sup-deviation of the empirical functional from its mean on ``[0, M]``.

    For each replica records ``max_grid |phi_N - phi|`` on a uniform grid of
    ``[0, M]``, whether ``phi_N(-xi) < phi_N(xi)`` at every positive grid
    point, and, when the sample mean of ``x`` is below ``E[x] + 1``, whether
    ``phi_N`` stays under the deterministic envelope. ``M`` defaults to
    three times the upper bound on ``xi*``.
    """
    n_values = tuple(int(n) for n in n_values)
    params = ModelParams(w)
    xi_star = solve_fixed_point(params, dist).xi_star
    if window is None:
        window = 3.0 * xi_star_bounds(params, dist)[1]
    if not window > xi_star:
        raise ValueError(f"window M={window:g} must exceed xi*={xi_star:g}")
    grid = np.linspace(0.0, window, grid_points)
    target = np.array([phi(float(g), params, dist) for g in grid])
    pos = grid[grid > 0]
    mean_x = dist.mean()
    envelope = phi_envelope(pos, mean_x, w)

    shape = (len(n_values), replicas)
    sup_dev = np.empty(shape)
    refl = np.empty(shape, dtype=bool)
    env_ok = np.ones(shape, dtype=bool)
    env_app = np.zeros(shape, dtype=bool)
    seeds = np.empty(shape, dtype=np.uint64)

    def run(task):
        k, n, r = task
        x, seed = replica_activities(dist, n, r, base_seed)
        inst = CompleteModelInstance(x, w)
        emp = phi_n(grid, inst)
        sup_dev[k, r] = float(np.max(np.abs(emp - target)))
        emp_pos = phi_n(pos, inst)
        refl[k, r] = bool(np.all(phi_n(-pos, inst) < emp_pos))
        if x.mean() < mean_x + 1.0:
            env_app[k, r] = True
            env_ok[k, r] = bool(np.all(emp_pos < envelope))
        seeds[k, r] = seed

    _map(run, [(k, n, r) for k, n in enumerate(n_values) for r in range(replicas)], threads)
    return LLNStudy(n_values, replicas, int(base_seed), float(window), grid, sup_dev, refl, env_ok,
                    env_app, seeds)


# -- annealed bound -------------------------------------------------------------------


def mean_z_inequality_check(dist: ActivityDistribution, w: float, n_values: Sequence[int]) -> list[dict]:
    """Exact annealed ``log E[Z_N]`` against its closed-form upper bound."""
    mean_x = dist.mean()
    rows = []
    for n in n_values:
        b = mean_partition_bound(int(n), w, mean_x)
        rows.append({"N": int(n), "exact_log_mean_z": b.exact_log_mean_z, "bound_log": b.bound_log,
                     "slack": b.slack})
    return rows
