"""Command-line front end.

    monodim solve --dist dirac:1 --w 1
    monodim curve --dist uniform:0.5,1.5 --w-grid 0.25,0.5,1,2,4
    monodim exact --dist uniform:0.5,1.5 --n 64 --w 1 --seed 3
    monodim oracle-check --seed 1
    monodim study --dist uniform:0.5,1.5 --w 1 --seed 1 --out study.csv
    monodim lln --dist uniform:0.5,1.5 --w 1 --seed 1 --out lln.csv
    monodim bounds --dist uniform:0.5,1.5 --w 1 --t 0.1 --n 100 --q 4

Any flag may instead come from a TOML file given with ``--config``; flags
win over the file. Exit status: 0 success, 1 numeric failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import exact, experiments, variational
from .distributions import ActivityDistribution, DistributionError, dist_from_mapping, parse_dist

log = logging.getLogger("monodim")

COMMANDS = ("solve", "curve", "exact", "oracle-check", "study", "lln", "bounds")
STOCHASTIC = ("oracle-check", "study", "lln")
ORACLE_TOL = 1e-9

DEFAULTS = {
    "tol": 1e-12,
    "max_iter": 200,
    "format": "csv",
    "threads": None,
    "n_values": [256, 1024, 4096],
    "replicas": 200,
    "instances": 50,
    "grid_points": 512,
    "q": 4.0,
    "quadrature_tol": 1e-10,
}


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


# -- formatting ---------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def to_csv(rows: list[dict], columns=None) -> str:
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# -- config -------------------------------------------------------------------------


def load_config(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config {path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in data.items()}


def _float_list(text, name):
    if isinstance(text, (list, tuple)):
        items = text
    else:
        items = [s for s in str(text).split(",") if s.strip()]
    try:
        return [float(s) for s in items]
    except (TypeError, ValueError):
        raise UsageError(f"{name}: expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text, name):
    vals = _float_list(text, name)
    if any(v != int(v) or v < 1 for v in vals):
        raise UsageError(f"{name}: expected positive integers, got {text!r}")
    return [int(v) for v in vals]


class Settings:
    """Flag values layered over the config file over built-in defaults."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, key, default=None):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.config:
            return self.config[key]
        return DEFAULTS.get(key, default)

    def require(self, key, flag=None):
        v = self.get(key)
        if v is None:
            raise UsageError(f"missing required option --{(flag or key).replace('_', '-')}")
        return v

    def number(self, key, flag=None, required=True, cast=float):
        v = self.require(key, flag) if required else self.get(key)
        if v is None:
            return None
        try:
            return cast(v)
        except (TypeError, ValueError):
            raise UsageError(f"--{(flag or key).replace('_', '-')}: not a number: {v!r}") from None

    def dist(self) -> ActivityDistribution:
        value = self.require("dist")
        qtol = float(self.get("quadrature_tol"))
        try:
            if isinstance(value, dict):
                return dist_from_mapping(value, quadrature_tol=qtol)
            return parse_dist(str(value), quadrature_tol=qtol)
        except DistributionError as exc:
            raise UsageError(f"dist: {exc}") from None

    def w(self) -> float:
        w = self.number("w")
        if not (math.isfinite(w) and w > 0):
            raise UsageError(f"--w must be positive, got {w!r}")
        return w

    def seed(self) -> int:
        seed = self.get("seed")
        if seed is None:
            raise UsageError(f"{self.args.command} draws random numbers and needs an explicit --seed")
        try:
            return int(seed)
        except (TypeError, ValueError):
            raise UsageError(f"--seed must be an integer, got {seed!r}") from None

    def threads(self) -> int:
        t = self.get("threads")
        if t is None:
            t = os.environ.get("MONODIM_THREADS", 1)
        try:
            t = int(t)
        except (TypeError, ValueError):
            raise UsageError(f"--threads must be an integer, got {t!r}") from None
        return max(1, t)

    def format(self) -> str:
        f = str(self.get("format"))
        if f not in ("csv", "json"):
            raise UsageError(f"--format must be csv or json, got {f!r}")
        return f


# -- commands -----------------------------------------------------------------------


def _params(s: Settings, w: float) -> variational.ModelParams:
    return variational.ModelParams(w, fp_tol=s.number("tol"), max_iter=int(s.get("max_iter")))


def cmd_solve(s: Settings) -> int:
    dist, w = s.dist(), s.w()
    try:
        sol = variational.solve_fixed_point(_params(s, w), dist)
    except variational.SolverError as exc:
        if exc.best is not None:
            sys.stderr.write(to_json({"error": str(exc), "best": exc.best.row()}))
        raise NumericFailure(str(exc)) from None
    row = sol.row()
    if s.format() == "json":
        emit(to_json({"dist": dist.to_dict(), **row, "diagnostics": list(sol.diagnostics)}), s.get("out"))
    else:
        emit(to_csv([row], variational.VariationalSolution.FIELDS), s.get("out"))
    return 0


def cmd_curve(s: Settings) -> int:
    dist = s.dist()
    grid = _float_list(s.require("w_grid"), "--w-grid")
    try:
        sols = variational.pressure_curve(dist, grid, fp_tol=s.number("tol"), max_iter=int(s.get("max_iter")),
                                          threads=s.threads())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except variational.SolverError as exc:
        raise NumericFailure(f"w={exc.w}: {exc}") from None
    rows = [x.row() for x in sols]
    if s.format() == "json":
        emit(to_json({"dist": dist.to_dict(), "rows": rows}), s.get("out"))
    else:
        emit(to_csv(rows, variational.VariationalSolution.FIELDS), s.get("out"))
    if s.get("plot"):
        from . import plotting

        path = plotting.plot_pressure_curve(rows, Path(s.get("plot")), title=dist.describe())
        log.info("wrote %s", path)
    return 0


def read_activities(path: str) -> np.ndarray:
    """One positive activity per line; blank lines and ``#`` comments skipped."""
    values = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read activities file {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip().rstrip(",")
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise UsageError(f"{path}: row {lineno}: not a number: {text!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise UsageError(f"{path}: row {lineno}: activity must be positive, got {text!r}")
        values.append(v)
    if not values:
        raise UsageError(f"{path}: no activities found")
    return np.array(values)


def _instance(s: Settings) -> exact.CompleteModelInstance:
    w = s.w()
    if s.get("activities"):
        x = read_activities(s.get("activities"))
    else:
        dist = s.dist()
        n = s.number("n", cast=int)
        if n < 1:
            raise UsageError("--n must be >= 1")
        x = dist.sample(n, np.random.default_rng(s.seed()))
    return exact.CompleteModelInstance(x, w)


def cmd_exact(s: Settings) -> int:
    inst = _instance(s)
    engines = s.get("engine") or "auto"
    if engines == "auto":
        engines = [e for e in exact.ENGINES if inst.n <= exact.ENGINE_LIMITS[e]]
    else:
        engines = [e.strip() for e in str(engines).split(",")]
        unknown = [e for e in engines if e not in exact.ENGINES]
        if unknown:
            raise UsageError(f"unknown engine(s) {unknown}; choose from {exact.ENGINES}")
    records = []
    for engine in engines:
        rec = {"engine": engine, "n": inst.n, "w": inst.w, "log_z": None, "mean_dimers": None,
               "cond_estimate": None}
        try:
            if engine == "symmetric":
                obs = exact.gibbs_observables(inst)
                rec["log_z"], rec["mean_dimers"] = obs.log_z, obs.mean_dimers
            elif engine == "hermite":
                rec["log_z"], rec["cond_estimate"] = exact.hermite_log_partition(
                    inst, s.number("nodes", required=False, cast=int), with_condition=True)
            else:
                rec["log_z"] = exact.engine_log_partition(engine, inst)
        except exact.SizeError as exc:
            sys.stderr.write(f"notice: {engine} skipped: {exc}\n")
            continue
        records.append(rec)
    # exact records default to JSON
    fmt_ = s.args.format or s.config.get("format") or "json"
    if fmt_ == "csv":
        emit(to_csv(records, ["engine", "n", "w", "log_z", "mean_dimers", "cond_estimate"]), s.get("out"))
    else:
        emit(to_json(records), s.get("out"))
    return 0


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def oracle_check(instances: int, seed: int, n: int | None = None, activities: np.ndarray | None = None,
                 w: float = 1.0) -> dict:
    """Cross-check the exact engines on seeded random instances.

    General leg: Wick expansion against Heilmann-Lieb on a random symmetric
    nonnegative weight matrix. Uniform leg: per-edge ``w/N`` compared across
    Heilmann-Lieb, Wick, the symmetric closed form and Gauss-Hermite.
    Returns the maximum relative discrepancy per comparison.
    """
    rng = np.random.default_rng(seed)
    worst = {"wick_vs_hl": 0.0, "hl_vs_symmetric": 0.0, "wick_vs_symmetric": 0.0, "hermite_vs_symmetric": 0.0}
    skipped = set()
    runs = 1 if activities is not None else instances
    for _ in range(runs):
        if activities is not None:
            x = np.asarray(activities, dtype=float)
        else:
            size = n if n is not None else int(rng.integers(2, 11))
            x = rng.uniform(0.1, 3.0, size)
        size = x.size
        wick_ok = size <= exact.WICK_MAX_VERTICES
        hl_ok = size <= exact.HL_MAX_VERTICES
        if not wick_ok:
            skipped.add("wick")
        if not hl_ok:
            skipped.add("hl")
        A = rng.uniform(0.0, 1.0, (size, size))
        W = np.triu(A, 1)
        W = W + W.T
        if wick_ok and hl_ok:
            worst["wick_vs_hl"] = max(worst["wick_vs_hl"], _rel(
                exact.wick_partition(W, x), exact.hl_partition(exact.WeightedGraph.from_matrix(x, W))))
        inst = exact.CompleteModelInstance(x, w)
        z_sym = math.exp(exact.symmetric_log_partition(inst))
        if hl_ok:
            worst["hl_vs_symmetric"] = max(worst["hl_vs_symmetric"], _rel(exact.hl_partition(inst.graph()), z_sym))
        if wick_ok:
            worst["wick_vs_symmetric"] = max(worst["wick_vs_symmetric"],
                                             _rel(exact.wick_partition(inst.covariance(), x), z_sym))
        worst["hermite_vs_symmetric"] = max(worst["hermite_vs_symmetric"],
                                            _rel(math.exp(exact.hermite_log_partition(inst)), z_sym))
    for key in list(worst):
        if set(key.split("_vs_")) & skipped:
            worst[key] = None
    finite = [v for v in worst.values() if v is not None]
    return {
        "instances": runs,
        "seed": seed,
        "skipped": sorted(skipped),
        "max_discrepancy": worst,
        "overall": max(finite) if finite else 0.0,
    }


def cmd_oracle_check(s: Settings) -> int:
    seed = s.seed()
    n = s.number("n", required=False, cast=int)
    acts = read_activities(s.get("activities")) if s.get("activities") else None
    w = s.number("w", required=False) or 1.0
    if n is not None and n > exact.WICK_MAX_VERTICES:
        sys.stderr.write(f"notice: Wick leg skipped: n={n} exceeds {exact.WICK_MAX_VERTICES}\n")
    report = oracle_check(int(s.get("instances")), seed, n=n, activities=acts, w=w)
    report["tolerance"] = ORACLE_TOL
    report["pass"] = report["overall"] <= ORACLE_TOL
    emit(to_json(report), s.get("out"))
    if not report["pass"]:
        raise NumericFailure(f"engine discrepancy {report['overall']:.3g} exceeds {ORACLE_TOL:g}")
    return 0


def _companion(out: str | None, default: str, suffix: str) -> Path:
    base = Path(out) if out else Path(default)
    return base.with_suffix(suffix)


def _write_artifacts(csv_rows, columns, summary, out, default):
    csv_path = _companion(out, default, ".csv")
    json_path = _companion(out, default, ".json")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(to_csv(csv_rows, columns))
    json_path.write_text(to_json(summary))
    return csv_path, json_path


STUDY_COLUMNS = ["study", "kind", "w", "N", "replica", "seed", "p_N"]


def cmd_study(s: Settings) -> int:
    dist, w, seed = s.dist(), s.w(), s.seed()
    n_values = _int_list(s.get("n_values"), "--n-values")
    replicas = s.number("replicas", cast=int)
    threads = s.threads()
    partial = []
    rows = []
    failure = None
    for n in n_values:
        try:
            st = experiments.run_pressure_study(dist, w, [n], replicas, seed, threads=threads)
        except experiments.StudyError as exc:
            failure = exc
            break
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        partial.append(st)
        rows.extend(st.long_rows())
    if failure is not None or len(partial) < 2:
        summary = {"dist": dist.to_dict(), "w": w, "base_seed": seed, "replicas": replicas,
                   "per_N": [r for st in partial for r in st.summary()],
                   "error": str(failure) if failure else None}
        _write_artifacts(rows, STUDY_COLUMNS, summary, s.get("out"), "study")
        if failure is not None:
            raise NumericFailure(f"study stopped: {failure} (partial results written)")
        sys.stdout.write(_digest(summary["per_N"], partial[0].target_pressure if partial else float("nan")))
        return 0

    study = _merge(partial)
    summary = study_summary(study)
    csv_path, json_path = _write_artifacts(rows, STUDY_COLUMNS, summary, s.get("out"), "study")
    sys.stdout.write(_digest(summary["per_N"], study.target_pressure))
    sys.stdout.write(f"wrote {csv_path} and {json_path}\n")
    if s.get("plot"):
        from . import plotting

        for path in plotting.plot_study(study, Path(s.get("plot"))):
            sys.stdout.write(f"wrote {path}\n")
    return 0


def _merge(parts: list[experiments.ReplicaStudy]) -> experiments.ReplicaStudy:
    first = parts[0]
    return experiments.ReplicaStudy(
        dist=first.dist,
        w=first.w,
        n_values=tuple(n for p in parts for n in p.n_values),
        replicas=first.replicas,
        base_seed=first.base_seed,
        pressures=np.vstack([p.pressures for p in parts]),
        dimer_densities=np.vstack([p.dimer_densities for p in parts]),
        seeds=np.vstack([p.seeds for p in parts]),
        target_pressure=first.target_pressure,
        target_dimer_density=first.target_dimer_density,
        annealed_pressure=np.concatenate([p.annealed_pressure for p in parts]),
        control=np.vstack([p.control for p in parts]),
    )


def study_summary(study: experiments.ReplicaStudy) -> dict:
    decay = experiments.self_averaging_decay(study)
    bounds = {}
    if study.dist.has_finite_inv_mean:
        c1, c2, c3 = experiments.distribution_constants(study.dist, study.w)
        for n in study.n_values:
            if n >= 2:
                inputs = experiments.ConcentrationBoundInputs(t=0.1, n=n, q=DEFAULTS["q"], c1=c1, c2=c2, c3=c3)
                bounds[str(n)] = experiments.azuma_bound(inputs)
    return {
        "dist": study.dist.to_dict(),
        "w": study.w,
        "base_seed": study.base_seed,
        "replicas": study.replicas,
        "target_pressure": study.target_pressure,
        "target_dimer_density": study.target_dimer_density,
        "per_N": study.summary(),
        "decay": [d._asdict() for d in decay],
        "quenched_vs_annealed": experiments.quenched_annealed_check(study),
        "azuma_bound_t0.1_q4": bounds,
    }


def _digest(per_n: list[dict], target: float) -> str:
    lines = [f"target pressure {target:.10f}"]
    for r in per_n:
        lines.append(f"N={r['N']:>6d}  mean={r['mean']:.10f} ± {r['std']:.3e}  gap={r['gap']:+.3e}")
    return "\n".join(lines) + "\n"


LLN_COLUMNS = ["study", "N", "replica", "seed", "sup_deviation", "reflection_ok", "envelope_ok"]


def cmd_lln(s: Settings) -> int:
    dist, w, seed = s.dist(), s.w(), s.seed()
    n_values = _int_list(s.get("n_values"), "--n-values")
    try:
        st = experiments.uniform_lln_study(
            dist, w, n_values, s.number("replicas", cast=int), seed,
            window=s.number("window", required=False), grid_points=int(s.get("grid_points")),
            threads=s.threads())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    summary = {"dist": dist.to_dict(), "w": w, "base_seed": seed, "window": st.window, "per_N": st.summary()}
    csv_path, json_path = _write_artifacts(list(st.long_rows()), LLN_COLUMNS, summary, s.get("out"), "lln")
    for r in summary["per_N"]:
        sys.stdout.write(f"N={r['N']:>6d}  median sup|phi_N - phi|={r['median']:.4e}  "
                         f"reflection={'ok' if r['reflection_ok'] else 'FAIL'}  "
                         f"envelope={'ok' if r['envelope_ok'] else 'FAIL'}\n")
    sys.stdout.write(f"wrote {csv_path} and {json_path}\n")
    if s.get("plot"):
        from . import plotting

        sys.stdout.write(f"wrote {plotting.plot_lln(st, Path(s.get('plot')))}\n")
    failed = [r["N"] for r in summary["per_N"] if not (r["reflection_ok"] and r["envelope_ok"])]
    if failed:
        raise NumericFailure(f"reflection/envelope inequality violated at N={failed}")
    return 0


def cmd_bounds(s: Settings) -> int:
    dist, w = s.dist(), s.w()
    lower, upper = variational.xi_star_bounds(w, dist)
    record = {"dist": dist.describe(), "w": w, "lower": lower, "upper": upper}
    t = s.number("t", required=False)
    if t is not None:
        n = s.number("n", cast=int)
        if dist.has_finite_inv_mean:
            c1, c2, c3 = experiments.distribution_constants(dist, w)
        else:
            c1 = c2 = c3 = None
        c1 = s.number("c1", required=False) if s.get("c1") is not None else c1
        c2 = s.number("c2", required=False) if s.get("c2") is not None else c2
        c3 = s.number("c3", required=False) if s.get("c3") is not None else c3
        if None in (c1, c2, c3):
            raise UsageError("E[1/x] is infinite for this law; pass --c1 --c2 --c3 explicitly")
        try:
            inputs = experiments.ConcentrationBoundInputs(t=t, n=n, q=s.number("q"), c1=c1, c2=c2, c3=c3)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        record.update({"t": t, "N": n, "q": inputs.q, "C1": c1, "C2": c2, "C3": c3,
                       "azuma_bound": experiments.azuma_bound(inputs)})
    if s.format() == "json":
        emit(to_json(record), s.get("out"))
    else:
        emit(to_csv([record]), s.get("out"))
    return 0


HANDLERS = {
    "solve": cmd_solve,
    "curve": cmd_curve,
    "exact": cmd_exact,
    "oracle-check": cmd_oracle_check,
    "study": cmd_study,
    "lln": cmd_lln,
    "bounds": cmd_bounds,
}


# -- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="TOML file with default option values")
    g.add_argument("--dist", help="activity law, e.g. dirac:1, uniform:0.5,1.5, lognormal:0,1, "
                                  "gamma:2,1, exponential:1, discrete:1@0.5,3@0.5")
    g.add_argument("--w", type=float, help="dimer coupling")
    g.add_argument("--w-grid", dest="w_grid", help="comma-separated increasing couplings")
    g.add_argument("--n", type=int, help="system size")
    g.add_argument("--n-values", dest="n_values", help="comma-separated system sizes")
    g.add_argument("--replicas", type=int, help="disorder replicas per size")
    g.add_argument("--seed", type=int, help="base seed (required by stochastic commands)")
    g.add_argument("--tol", type=float, help="fixed-point residual tolerance")
    g.add_argument("--out", help="output file (stochastic commands also write a .json summary)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--threads", type=int, help="worker threads (default $MONODIM_THREADS or 1)")
    g.add_argument("--plot", metavar="DIR", help="also render PNG figures into DIR (needs matplotlib)")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="monodim", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.add_parser("solve", parents=[common], help="solve the variational problem at one w")
    sub.add_parser("curve", parents=[common], help="pressure and densities along a w grid")
    p = sub.add_parser("exact", parents=[common], help="finite-N partition function of one instance")
    p.add_argument("--activities", help="file with one activity per line")
    p.add_argument("--engine", help="comma-separated engines: " + ",".join(exact.ENGINES))
    p.add_argument("--nodes", type=int, help="Gauss-Hermite nodes (default ceil((N+1)/2))")
    p = sub.add_parser("oracle-check", parents=[common], help="cross-check the exact engines")
    p.add_argument("--instances", type=int, help="number of random instances (default 50)")
    p.add_argument("--activities", help="check a single instance read from file")
    sub.add_parser("study", parents=[common], help="replica study of the quenched pressure")
    p = sub.add_parser("lln", parents=[common], help="uniform law of large numbers study")
    p.add_argument("--window", type=float, help="right end M of the xi window [0, M]")
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p = sub.add_parser("bounds", parents=[common], help="xi* bracket and concentration bound")
    p.add_argument("--t", type=float, help="deviation t for the concentration bound")
    p.add_argument("--q", type=float, help="exponent q >= 1 (default 4)")
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--c3", type=float)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    # a config file may name the command
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config = {}
    try:
        if known.config:
            config = load_config(known.config)
    except UsageError as exc:
        sys.stderr.write(f"monodim: error: {exc}\n")
        return 2
    if not any(a in COMMANDS for a in argv) and "command" in config:
        argv = [str(config["command"])] + argv

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("monodim: error: a command is required\n")
        return 2
    if "command" in config and config["command"] != args.command:
        sys.stderr.write(f"monodim: error: config names command {config['command']!r} "
                         f"but {args.command!r} was requested\n")
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    settings = Settings(args, config)
    try:
        return HANDLERS[args.command](settings)
    except UsageError as exc:
        sys.stderr.write(f"monodim {args.command}: error: {exc}\n")
        return 2
    except NumericFailure as exc:
        sys.stderr.write(f"monodim {args.command}: numeric failure: {exc}\n")
        return 1
    except (ArithmeticError, exact.SizeError) as exc:
        sys.stderr.write(f"monodim {args.command}: numeric failure: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
