"""Laws of the i.i.d. monomer activities.

An :class:`ActivityDistribution` is an immutable description of a positive
random variable together with the expectations the variational formulas
need: closed-form moments where the family has them, and adaptive
Gauss-Kronrod quadrature for a generic ``E[f(x)]``.

Disorder samples are drawn from numpy generators keyed by integer tuples
(see :func:`replica_stream`), so replica ``r`` of size ``N`` always sees the
same activities regardless of evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, special, stats

KINDS = ("dirac", "uniform", "lognormal", "gamma", "exponential", "discrete")

DEFAULT_QUADRATURE_TOL = 1e-10
MAX_PANELS = 10_000

_EULER_GAMMA = float(np.euler_gamma)


class DistributionError(ValueError):
    """Invalid distribution parameters."""


class DivergenceError(ArithmeticError):
    """A requested moment is infinite for this law."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class ActivityDistribution:
    """Law of a single monomer activity ``x > 0``.

    Use the named constructors (:meth:`dirac`, :meth:`uniform`, ...) rather
    than building instances by hand; ``params`` is kind-specific:

    ============  ==========================
    dirac         ``(point,)``
    uniform       ``(a, b)``
    lognormal     ``(mu, sigma)``
    gamma         ``(shape, scale)``
    exponential   ``(rate,)``
    discrete      ``(values, probs)`` tuples
    ============  ==========================
    """

    kind: str
    params: tuple
    quadrature_tol: float = DEFAULT_QUADRATURE_TOL
    _frozen: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DistributionError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not self.quadrature_tol > 0:
            raise DistributionError("quadrature_tol must be positive")
        _validate(self.kind, self.params)
        object.__setattr__(self, "_frozen", _scipy_law(self.kind, self.params))

    # -- constructors -----------------------------------------------------

    @classmethod
    def dirac(cls, point: float, **kw) -> "ActivityDistribution":
        return cls("dirac", (float(point),), **kw)

    @classmethod
    def uniform(cls, a: float, b: float, **kw) -> "ActivityDistribution":
        return cls("uniform", (float(a), float(b)), **kw)

    @classmethod
    def lognormal(cls, mu: float, sigma: float, **kw) -> "ActivityDistribution":
        return cls("lognormal", (float(mu), float(sigma)), **kw)

    @classmethod
    def gamma(cls, shape: float, scale: float, **kw) -> "ActivityDistribution":
        return cls("gamma", (float(shape), float(scale)), **kw)

    @classmethod
    def exponential(cls, rate: float, **kw) -> "ActivityDistribution":
        return cls("exponential", (float(rate),), **kw)

    @classmethod
    def discrete(cls, atoms: Sequence[tuple[float, float]], **kw) -> "ActivityDistribution":
        values = tuple(float(v) for v, _ in atoms)
        probs = tuple(float(p) for _, p in atoms)
        return cls("discrete", (values, probs), **kw)

    # -- point-mass helpers -----------------------------------------------

    @property
    def is_atomic(self) -> bool:
        return self.kind in ("dirac", "discrete")

    @property
    def is_degenerate(self) -> bool:
        """True when the law is a single point mass (no disorder)."""
        if self.kind == "dirac":
            return True
        return self.kind == "discrete" and len(set(self.params[0])) == 1

    def _atoms(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "dirac":
            return np.array(self.params), np.array([1.0])
        values, probs = self.params
        return np.asarray(values), np.asarray(probs)

    # -- moments ----------------------------------------------------------

    def mean(self) -> float:
        k, p = self.kind, self.params
        if self.is_atomic:
            v, w = self._atoms()
            return float(np.dot(w, v))
        if k == "uniform":
            return 0.5 * (p[0] + p[1])
        if k == "lognormal":
            return math.exp(p[0] + 0.5 * p[1] ** 2)
        if k == "gamma":
            return p[0] * p[1]
        return 1.0 / p[0]

    @property
    def has_finite_inv_mean(self) -> bool:
        if self.kind == "exponential":
            return False
        if self.kind == "gamma":
            return self.params[0] > 1.0
        return True

    def inv_mean(self) -> float:
        """``E[1/x]``; raises :class:`DivergenceError` when infinite."""
        k, p = self.kind, self.params
        if not self.has_finite_inv_mean:
            raise DivergenceError(f"E[1/x] is infinite for {self.describe()}")
        if self.is_atomic:
            v, w = self._atoms()
            return float(np.dot(w, 1.0 / v))
        if k == "uniform":
            a, b = p
            return math.log(b / a) / (b - a)
        if k == "lognormal":
            return math.exp(-p[0] + 0.5 * p[1] ** 2)
        return 1.0 / (p[1] * (p[0] - 1.0))

    def log_mean(self) -> float:
        k, p = self.kind, self.params
        if self.is_atomic:
            v, w = self._atoms()
            return float(np.dot(w, np.log(v)))
        if k == "uniform":
            a, b = p
            return ((b * math.log(b) - b) - (a * math.log(a) - a)) / (b - a)
        if k == "lognormal":
            return p[0]
        if k == "gamma":
            return float(special.digamma(p[0])) + math.log(p[1])
        return -_EULER_GAMMA - math.log(p[0])

    def log_sq_mean(self) -> float:
        k, p = self.kind, self.params
        if self.is_atomic:
            v, w = self._atoms()
            return float(np.dot(w, np.log(v) ** 2))
        if k == "uniform":
            a, b = p

            def antideriv(x):
                lx = math.log(x)
                return x * lx * lx - 2.0 * x * lx + 2.0 * x

            return (antideriv(b) - antideriv(a)) / (b - a)
        if k == "lognormal":
            return p[0] ** 2 + p[1] ** 2
        if k == "gamma":
            m = float(special.digamma(p[0])) + math.log(p[1])
            return float(special.polygamma(1, p[0])) + m * m
        m = -_EULER_GAMMA - math.log(p[0])
        return math.pi ** 2 / 6.0 + m * m

    # -- distribution functions -------------------------------------------

    def cdf(self, t):
        """``P(x <= t)``; accepts scalars or arrays."""
        if self.is_atomic:
            v, w = self._atoms()
            t_arr = np.asarray(t, dtype=float)
            out = (w * (v <= t_arr[..., None])).sum(axis=-1)
            return float(out) if out.ndim == 0 else out
        out = self._frozen.cdf(t)
        return float(out) if np.ndim(out) == 0 else out

    def ppf(self, q):
        """Lower quantile ``inf{t : cdf(t) >= q}``."""
        if self.is_atomic:
            v, w = self._atoms()
            order = np.argsort(v)
            v, c = v[order], np.cumsum(w[order])
            idx = np.searchsorted(c, np.asarray(q, dtype=float) - 1e-15, side="left")
            out = v[np.minimum(idx, len(v) - 1)]
            return float(out) if out.ndim == 0 else out
        out = self._frozen.ppf(q)
        return float(out) if np.ndim(out) == 0 else out

    def pdf(self, x):
        if self.is_atomic:
            raise DistributionError("atomic laws have no density")
        return self._frozen.pdf(x)

    def mode(self) -> float:
        k, p = self.kind, self.params
        if k == "dirac":
            return p[0]
        if k == "discrete":
            v, w = self._atoms()
            return float(v[np.argmax(w)])
        if k == "uniform":
            return 0.5 * (p[0] + p[1])
        if k == "lognormal":
            return math.exp(p[0] - p[1] ** 2)
        if k == "gamma":
            return max(p[0] - 1.0, 0.0) * p[1]
        return 0.0

    # -- expectations -----------------------------------------------------

    def expect(self, f: Callable[[np.ndarray], np.ndarray], tol: float | None = None) -> float:
        """``E[f(x)]``.

        Atomic laws are summed exactly. Continuous laws are integrated
        against their density with QUADPACK's adaptive Gauss-Kronrod rule,
        on pieces split at the mode (and at a far quantile for unbounded
        support). ``f`` must accept numpy arrays for atomic laws and floats
        otherwise.
        """
        tol = self.quadrature_tol if tol is None else tol
        if self.is_atomic:
            v, w = self._atoms()
            return float(np.dot(w, f(v)))
        total = 0.0
        for lo, hi in self._panels():
            total += _adaptive_quad(lambda x: f(x) * self._frozen.pdf(x), lo, hi, tol)
        return total

    def _panels(self) -> list[tuple[float, float]]:
        if self.kind == "uniform":
            a, b = self.params
            return [(a, b)]
        m = self.mode()
        far = float(self._frozen.ppf(1.0 - 1e-9))
        cuts = [0.0]
        if m > 0.0:
            cuts.append(m)
        if far > cuts[-1]:
            cuts.append(far)
        cuts.append(math.inf)
        return list(zip(cuts[:-1], cuts[1:]))

    # -- sampling ---------------------------------------------------------

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        k, p = self.kind, self.params
        if k == "dirac":
            return np.full(n, p[0])
        if k == "uniform":
            x = rng.uniform(p[0], p[1], n)
        elif k == "lognormal":
            x = rng.lognormal(p[0], p[1], n)
        elif k == "gamma":
            x = rng.gamma(p[0], p[1], n)
        elif k == "exponential":
            x = rng.exponential(1.0 / p[0], n)
        else:
            v, w = self._atoms()
            x = rng.choice(v, size=n, p=w)
        # small gamma shapes can underflow to exactly 0
        return np.maximum(x, np.finfo(float).tiny)

    # -- presentation -----------------------------------------------------

    def describe(self) -> str:
        if self.kind == "discrete":
            atoms = ",".join(f"{v:g}@{p:g}" for v, p in zip(*self.params))
            return f"discrete:{atoms}"
        return f"{self.kind}:" + ",".join(f"{v:g}" for v in self.params)

    def to_dict(self) -> dict:
        names = _PARAM_NAMES[self.kind]
        if self.kind == "discrete":
            return {"kind": "discrete", "atoms": [list(a) for a in zip(*self.params)]}
        return {"kind": self.kind, **dict(zip(names, self.params))}


_PARAM_NAMES = {
    "dirac": ("point",),
    "uniform": ("a", "b"),
    "lognormal": ("mu", "sigma"),
    "gamma": ("shape", "scale"),
    "exponential": ("rate",),
    "discrete": ("atoms",),
}


def _validate(kind: str, p: tuple) -> None:
    def positive(name, v):
        if not (math.isfinite(v) and v > 0):
            raise DistributionError(f"{kind}: {name} must be a positive finite number, got {v!r}")

    expected = {"dirac": 1, "uniform": 2, "lognormal": 2, "gamma": 2, "exponential": 1, "discrete": 2}
    if len(p) != expected[kind]:
        raise DistributionError(f"{kind}: expected {expected[kind]} parameters, got {len(p)}")
    if kind == "dirac":
        positive("point", p[0])
    elif kind == "uniform":
        positive("a", p[0])
        positive("b", p[1])
        if not p[0] < p[1]:
            raise DistributionError(f"uniform: need a < b, got a={p[0]}, b={p[1]}")
    elif kind == "lognormal":
        if not math.isfinite(p[0]):
            raise DistributionError("lognormal: mu must be finite")
        positive("sigma", p[1])
    elif kind == "gamma":
        positive("shape", p[0])
        positive("scale", p[1])
    elif kind == "exponential":
        positive("rate", p[0])
    else:
        values, probs = p
        if len(values) == 0 or len(values) != len(probs):
            raise DistributionError("discrete: need a non-empty list of (value, prob) atoms")
        for v in values:
            positive("atom value", v)
        for q in probs:
            positive("atom probability", q)
        if abs(sum(probs) - 1.0) > 1e-12:
            raise DistributionError(f"discrete: probabilities sum to {sum(probs)!r}, not 1")


def _scipy_law(kind: str, p: tuple):
    if kind == "uniform":
        return stats.uniform(loc=p[0], scale=p[1] - p[0])
    if kind == "lognormal":
        return stats.lognorm(s=p[1], scale=math.exp(p[0]))
    if kind == "gamma":
        return stats.gamma(a=p[0], scale=p[1])
    if kind == "exponential":
        return stats.expon(scale=1.0 / p[0])
    return None


def _adaptive_quad(g: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    val, err, info = integrate.quad(
        g, lo, hi, epsabs=1e-15, epsrel=tol, limit=MAX_PANELS, full_output=1
    )[:3]
    if err > 10.0 * max(1e-15, tol * abs(val)):
        raise QuadratureError(
            f"quadrature on [{lo:g}, {hi:g}] stalled at error {err:.3g} "
            f"(value {val:.17g}, {info['last']} panels)"
        )
    return float(val)


# -- random streams -----------------------------------------------------------


def derived_seed(base_seed: int, *key: int) -> int:
    """64-bit seed for the stream keyed by ``(base_seed, *key)``."""
    ss = np.random.SeedSequence([int(base_seed), *map(int, key)])
    return int(ss.generate_state(1, np.uint64)[0])


def replica_stream(base_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one replica; keyed, not sequential."""
    return np.random.default_rng(derived_seed(base_seed, *key))


# -- parsing ------------------------------------------------------------------


def parse_dist(text: str, **kw) -> ActivityDistribution:
    """Parse the command-line form ``kind:p1,p2``.

    Discrete atoms are written ``value@prob``, e.g. ``discrete:1@0.5,3@0.5``.
    """
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in KINDS:
        raise DistributionError(f"unknown distribution kind {kind!r} in {text!r}")
    parts = [s.strip() for s in rest.split(",") if s.strip()]
    try:
        if kind == "discrete":
            atoms = []
            for s in parts:
                v, _, q = s.partition("@")
                atoms.append((float(v), float(q)))
            return ActivityDistribution.discrete(atoms, **kw)
        return ActivityDistribution(kind, tuple(float(s) for s in parts), **kw)
    except ValueError as exc:
        if isinstance(exc, DistributionError):
            raise
        raise DistributionError(f"cannot parse distribution {text!r}: {exc}") from None


def dist_from_mapping(table: Mapping, **kw) -> ActivityDistribution:
    """Build a distribution from a config table ``{kind = ..., <params>}``."""
    table = dict(table)
    kind = str(table.pop("kind", "")).lower()
    if kind not in KINDS:
        raise DistributionError(f"unknown distribution kind {kind!r}")
    if "quadrature_tol" in table:
        kw.setdefault("quadrature_tol", float(table.pop("quadrature_tol")))
    if kind == "discrete":
        atoms = table.pop("atoms", None)
        if atoms is None:
            raise DistributionError("discrete: missing 'atoms'")
        return ActivityDistribution.discrete([tuple(a) for a in atoms], **kw)
    names = _PARAM_NAMES[kind]
    missing = [n for n in names if n not in table]
    if missing:
        raise DistributionError(f"{kind}: missing parameter(s) {missing}")
    extra = set(table) - set(names)
    if extra:
        raise DistributionError(f"{kind}: unexpected parameter(s) {sorted(extra)}")
    return ActivityDistribution(kind, tuple(float(table[n]) for n in names), **kw)
