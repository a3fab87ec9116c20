"""Configuration-driven experiment runner.

Usage:
    fraclap run --config cfg.json --out outdir [--threads N] [--seed S]
    fraclap validate --config cfg.json

A config names a space (inline matrices or a fixture descriptor), one or more
exponent values, and a list of experiments.  Running writes `report.json`
plus per-experiment CSV tables under the output directory and exits 0 iff
every assertive experiment passed.  Reports are reproducible byte-for-byte
for a fixed config and seed once the `metadata` field (timestamps and wall
times) is dropped; all numeric work is single-threaded per experiment, so
`--threads` only changes scheduling, never results.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .dirichlet import (
    DirichletProblem,
    harnack_quotient,
    maximum_principle_check,
    solve_extension,
    solve_spectral,
    strong_maximum_check,
)
from .energy import comparability_report, stiffness_matrix
from .errors import ConfigParseError, FraclapError
from .extension import (
    build_grid,
    codim_ball_check,
    default_ymax,
    dtn_apply,
    dtn_constant,
    extension_energy_constant,
    mode_energy_quadrature,
    poisson_extend,
    vertical_modulus,
)
from .space import Space, build_space, fixture
from .spectral import (
    decompose,
    frac_apply,
    heat_kernel,
    heat_kernel_series,
    subordination_check,
)

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "heat_properties",
    "energy_comparability",
    "dtn_convergence",
    "energy_identity",
    "dirichlet_routes",
    "max_principle_batch",
    "harnack_scan",
    "modulus_check",
    "codim_check",
)


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    return normalize_config(raw, origin=path)


def normalize_config(raw: dict, origin: str = "<config>") -> dict:
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{origin}: top level must be an object")

    space_spec = raw.get("space")
    if space_spec is None:
        raise ConfigParseError(f"{origin}: missing required field 'space'")
    _validate_space_spec(space_spec, origin)

    theta = raw.get("theta", 0.5)
    thetas = [theta] if isinstance(theta, (int, float)) else list(theta)
    for th in thetas:
        if not isinstance(th, (int, float)) or not 0 < th < 1:
            raise ConfigParseError(f"{origin}: theta values must lie in (0, 1), got {th}")

    experiments = raw.get("experiments", [])
    if not isinstance(experiments, list):
        raise ConfigParseError(f"{origin}: 'experiments' must be a list")
    normalized_experiments = []
    for i, exp in enumerate(experiments):
        if not isinstance(exp, dict) or "kind" not in exp:
            raise ConfigParseError(f"{origin}: experiments[{i}] needs a 'kind' field")
        kind = exp["kind"]
        if kind not in EXPERIMENT_KINDS:
            raise ConfigParseError(
                f"{origin}: experiments[{i}]: unknown kind {kind!r}; "
                f"valid kinds: {list(EXPERIMENT_KINDS)}"
            )
        params = exp.get("params", {})
        if not isinstance(params, dict):
            raise ConfigParseError(f"{origin}: experiments[{i}].params must be an object")
        normalized_experiments.append({"kind": kind, "params": params})

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigParseError(f"{origin}: 'seed' must be an integer")

    return {
        "schema_version": SCHEMA_VERSION,
        "space": space_spec,
        "theta": [float(t) for t in thetas],
        "experiments": normalized_experiments,
        "seed": seed,
        "output": raw.get("output"),
    }


def _validate_space_spec(spec, origin):
    if not isinstance(spec, dict):
        raise ConfigParseError(f"{origin}: 'space' must be an object")
    if "fixture" in spec:
        fx = spec["fixture"]
        kind = fx.get("kind")
        valid = ("path", "grid2d", "dumbbell", "random_geometric")
        if kind not in valid:
            raise ConfigParseError(
                f"{origin}: space.fixture.kind must be one of {list(valid)}, got {kind!r}"
            )
        params = fx.get("params", {})
        if kind == "random_geometric" and "seed" not in params:
            raise ConfigParseError(
                f"{origin}: space.fixture.params is missing required field 'seed' "
                "for the random_geometric fixture"
            )
    elif not {"dist", "mu", "cond"} <= set(spec):
        raise ConfigParseError(
            f"{origin}: inline space needs fields 'dist', 'mu', 'cond' "
            "(or use a 'fixture' descriptor)"
        )


def make_space(spec: dict) -> Space:
    if "fixture" in spec:
        fx = spec["fixture"]
        return fixture(fx["kind"], **fx.get("params", {}))
    return build_space(spec["dist"], spec["mu"], spec["cond"])


def interior_mask(space: Space, spec: dict) -> np.ndarray:
    """Deterministic 'interior' domain: for fixtures, peel off the geometric
    boundary (path endpoints, lattice rim, bridge-adjacent clique vertices);
    otherwise take the max-degree core."""
    kind = spec.get("fixture", {}).get("kind")
    n = space.n
    mask = np.zeros(n, dtype=bool)
    if kind == "path":
        mask[1 : n - 1] = True
    elif kind == "grid2d":
        degrees = (space.cond > 0).sum(axis=1)
        mask[degrees == 4] = True
    elif kind == "dumbbell":
        params = spec["fixture"].get("params", {})
        clique = params.get("clique", 2)
        mask[: clique - 1] = True
    else:
        degrees = (space.cond > 0).sum(axis=1)
        mask[degrees == degrees.max()] = True
    if not mask.any() or mask.all():
        half = max(1, n // 2)
        mask = np.zeros(n, dtype=bool)
        mask[:half] = True
    return mask


# ---------------------------------------------------------------------------
# experiments: each returns (metrics, passed, tables) where passed is None
# for purely diagnostic experiments and tables maps csv basenames to rows


def _exp_heat_properties(ctx, params):
    space, dec = ctx["space"], ctx["dec"]
    ts = params.get("ts", [0.01, 0.1, 1.0, 10.0])
    markov = symmetry = semigroup = 0.0
    min_entry = float("inf")
    min_series = float("inf")
    rows = [("t", "markov_err", "semigroup_err", "min_entry")]
    tables = {}
    for t in ts:
        k = heat_kernel(dec, t)
        m_err = float(np.max(np.abs(k.row_mu_sums(space) - 1.0)))
        s_err = float(np.max(np.abs(k.entries - k.entries.T)))
        k2 = heat_kernel(dec, t / 2.0).entries
        comp = (k2 * space.mu[None, :]) @ k2.T
        g_err = float(np.max(np.abs(comp - k.entries)))
        series_min = float(heat_kernel_series(space, t).min())
        markov, symmetry, semigroup = max(markov, m_err), max(symmetry, s_err), max(semigroup, g_err)
        min_entry = min(min_entry, float(k.entries.min()))
        min_series = min(min_series, series_min)
        rows.append((t, m_err, g_err, float(k.entries.min())))
        if params.get("export_kernels"):
            tables[f"heat_kernel_t{t}.csv"] = [("x", "z", "p_t")] + [
                (x, z, float(k.entries[x, z]))
                for x in range(space.n)
                for z in range(space.n)
            ]
    passed = markov <= 1e-10 and symmetry == 0.0 and semigroup <= 1e-10 and min_series > 0.0
    metrics = {
        "markov_max_err": markov,
        "symmetry_max_err": symmetry,
        "semigroup_max_err": semigroup,
        "min_entry_spectral": min_entry,
        "min_entry_series": min_series,
        "subordination_err": float(
            max(subordination_check(dec, t) for t in params.get("subordination_ts", [0.1, 1.0]))
        ),
    }
    passed = passed and metrics["subordination_err"] <= 1e-6
    tables["heat_properties.csv"] = rows
    return metrics, passed, tables


def _exp_energy_comparability(ctx, params):
    space, dec, theta = ctx["space"], ctx["dec"], ctx["theta"]
    size = params.get("family_size", 100)
    rng = np.random.default_rng([ctx["seed"], ctx["index"]])
    family = [rng.standard_normal(space.n) for _ in range(size)]
    rep = comparability_report(space, dec, theta, family)
    ok = (
        np.isfinite(rep["ratio_min"])
        and np.isfinite(rep["ratio_max"])
        and rep["ratio_min"] > 0
    )
    return rep, bool(ok), {}


def _exp_dtn_convergence(ctx, params):
    space, dec, theta = ctx["space"], ctx["dec"], ctx["theta"]
    ms = params.get("ms", [8, 10, 12, 14, 16])
    ymax = params.get("ymax") or default_ymax(dec)
    rng = np.random.default_rng([ctx["seed"], ctx["index"]])
    f = rng.standard_normal(space.n)
    target = frac_apply(dec, theta, f)
    scale = float(np.max(np.abs(target)))
    rows = [("m", "y1", "max_err")]
    y1s, errs = [], []
    for m in ms:
        grid = build_grid(theta, ymax, m)
        u = poisson_extend(dec, theta, f, grid)
        err = float(np.max(np.abs(dtn_apply(u) - target)))
        y1s.append(grid.ys[1])
        errs.append(err)
        rows.append((m, grid.ys[1], err))
    slope = float(np.polyfit(np.log(y1s), np.log(errs), 1)[0])
    rel = errs[-1] / scale
    metrics = {"slope": slope, "final_rel_err": rel, "ymax": ymax, "ms": list(ms)}
    return metrics, bool(slope >= 0.9 and rel <= 1e-2), {"dtn_convergence.csv": rows}


def _exp_energy_identity(ctx, params):
    theta = ctx["theta"]
    lams = params.get("lams", [0.5, 1.0, 2.0])
    tol = params.get("tol", 1e-4)
    worst = 0.0
    rows = [("lam", "quadrature", "expected", "err")]
    const = extension_energy_constant(theta)
    for lam in lams:
        q = mode_energy_quadrature(lam, theta)
        expected = const * lam**theta
        err = abs(q - expected)
        worst = max(worst, err)
        rows.append((lam, q, expected, err))
    metrics = {"max_err": worst, "constant": const, "dtn_constant": dtn_constant(theta)}
    return metrics, bool(worst <= tol), {"energy_identity.csv": rows}


def _exp_dirichlet_routes(ctx, params):
    space, dec, theta = ctx["space"], ctx["dec"], ctx["theta"]
    m = params.get("m", 32)
    omega = (
        np.asarray(params["omega_mask"], dtype=bool)
        if "omega_mask" in params
        else interior_mask(space, ctx["space_spec"])
    )
    rng = np.random.default_rng([ctx["seed"], ctx["index"]])
    f = rng.standard_normal(space.n)
    problem = DirichletProblem(space=space, theta=theta, omega=omega, f=f)
    spectral = solve_spectral(problem, dec=dec)
    grid = build_grid(theta, default_ymax(dec), m)
    ext = solve_extension(problem, grid, dec=dec)
    gap = float(np.max(np.abs(spectral.u - ext.u)))
    osc = problem.data_oscillation
    rows = [("index", "u_spectral", "u_extension")]
    rows += [(i, a, b) for i, (a, b) in enumerate(zip(spectral.u, ext.u))]
    metrics = {
        "gap": gap,
        "gap_over_osc": gap / osc,
        "energy_spectral": spectral.energy,
        "energy_extension": ext.energy,
        "m": m,
    }
    return metrics, bool(gap <= 1e-2 * osc), {"dirichlet_routes.csv": rows}


def _exp_max_principle_batch(ctx, params):
    space, dec, theta = ctx["space"], ctx["dec"], ctx["theta"]
    n_seeds = params.get("n_seeds", 100)
    omega = (
        np.asarray(params["omega_mask"], dtype=bool)
        if "omega_mask" in params
        else interior_mask(space, ctx["space_spec"])
    )
    form = stiffness_matrix(dec, theta)
    failures = 0
    strong_failures = 0
    for s in range(n_seeds):
        rng = np.random.default_rng([ctx["seed"], ctx["index"], s])
        f = rng.standard_normal(space.n)
        problem = DirichletProblem(space=space, theta=theta, omega=omega, f=f)
        sol = solve_spectral(problem, dec=dec, form=form)
        if not maximum_principle_check(sol, problem)["passed"]:
            failures += 1
        if not strong_maximum_check([problem])[0]["passed"]:
            strong_failures += 1
    metrics = {"n_seeds": n_seeds, "failures": failures, "strong_failures": strong_failures}
    return metrics, bool(failures == 0 and strong_failures == 0), {}


def _exp_harnack_scan(ctx, params):
    space, dec, theta = ctx["space"], ctx["dec"], ctx["theta"]
    omega = (
        np.asarray(params["omega_mask"], dtype=bool)
        if "omega_mask" in params
        else interior_mask(space, ctx["space_spec"])
    )
    radius = params.get("radius", 1.0)
    rng = np.random.default_rng([ctx["seed"], ctx["index"]])
    f = np.abs(rng.standard_normal(space.n))
    problem = DirichletProblem(space=space, theta=theta, omega=omega, f=f)
    sol = solve_spectral(problem, dec=dec)
    rows = [("center", "radius", "quotient")]
    quotients = []
    for x in np.where(omega)[0]:
        if omega[space.dist[x] <= 2.0 * radius].all():
            q = harnack_quotient(sol, problem, int(x), radius)
            quotients.append(q)
            rows.append((int(x), radius, q))
    metrics = {
        "n_balls": len(quotients),
        "max_quotient": max(quotients) if quotients else None,
    }
    return metrics, None, {"harnack_scan.csv": rows}


def _exp_modulus_check(ctx, params):
    space, theta = ctx["space"], ctx["theta"]
    hs = params.get("hs", [0.5, 1.0, 2.0])
    ms = params.get("ms", [2048, 4096, 8192, 16384])
    tol = params.get("tol", 1e-6)
    a = 1.0 - 2.0 * theta
    worst = 0.0
    bracket_ok = True
    rows = [("h", "extrapolated", "exact", "err")]
    subset = np.ones(space.n, dtype=bool)
    for h in hs:
        vals = []
        for m in ms:
            grid = build_grid(theta, h, m, layout="uniform")
            out = vertical_modulus(space, subset, h, theta, grid)
            vals.append(out["numeric"])
            lo = out["exact"]
            hi = space.total_mass / ((1.0 + a) * h ** (1.0 - a))
            if not (lo - 1e-12 <= out["numeric"] <= hi + 1e-12):
                bracket_ok = False
        exact = out["exact"]
        limit = _richardson(vals, [1.0 - a, min(2.0, 2.0 - 2.0 * a)])
        err = abs(limit - exact)
        worst = max(worst, err)
        rows.append((h, limit, exact, err))
    metrics = {"max_err": worst, "bracket_ok": bracket_ok, "a": a}
    return metrics, bool(worst <= tol and bracket_ok), {"modulus_check.csv": rows}


def _richardson(values, exponents):
    """Eliminate known error orders from a sequence on grids refined by 2."""
    vals = list(map(float, values))
    for p in exponents:
        if len(vals) < 2:
            break
        r = 2.0**p
        if abs(r - 1.0) < 1e-12:
            continue
        vals = [(r * b - a) / (r - 1.0) for a, b in zip(vals[:-1], vals[1:])]
    return vals[-1]


def _exp_codim_check(ctx, params):
    space, theta = ctx["space"], ctx["theta"]
    rs = params.get("rs", [0.25, 0.5, 1.0])
    tol = params.get("tol", 1e-12)
    grid = build_grid(theta, max(rs), params.get("m", 64))
    worst = 0.0
    rows = [("x", "r", "lhs", "rhs")]
    for x in range(space.n):
        for r in rs:
            out = codim_ball_check(space, grid, x, r)
            scale = max(1.0, abs(out["rhs"]))
            worst = max(worst, abs(out["lhs"] - out["rhs"]) / scale)
            rows.append((x, r, out["lhs"], out["rhs"]))
    metrics = {"max_rel_err": worst}
    return metrics, bool(worst <= tol), {"codim_check.csv": rows}


_THETA_FREE = {"heat_properties"}

_RUNNERS = {
    "heat_properties": _exp_heat_properties,
    "energy_comparability": _exp_energy_comparability,
    "dtn_convergence": _exp_dtn_convergence,
    "energy_identity": _exp_energy_identity,
    "dirichlet_routes": _exp_dirichlet_routes,
    "max_principle_batch": _exp_max_principle_batch,
    "harnack_scan": _exp_harnack_scan,
    "modulus_check": _exp_modulus_check,
    "codim_check": _exp_codim_check,
}


# ---------------------------------------------------------------------------
# runner


def run(config: dict, out_dir: str, threads: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    space = make_space(config["space"])
    dec = decompose(space)

    jobs = []
    index = 0
    for exp in config["experiments"]:
        thetas = [None] if exp["kind"] in _THETA_FREE else config["theta"]
        for theta in thetas:
            ctx = {
                "space": space,
                "dec": dec,
                "theta": theta,
                "seed": config["seed"],
                "index": index,
                "space_spec": config["space"],
            }
            jobs.append((index, exp["kind"], exp["params"], ctx))
            index += 1

    def execute(job):
        idx, kind, params, ctx = job
        start = time.perf_counter()
        metrics, passed, tables = _RUNNERS[kind](ctx, params)
        wall = time.perf_counter() - start
        return idx, kind, ctx["theta"], params, metrics, passed, tables, wall

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(execute, jobs))
    else:
        outcomes = [execute(job) for job in jobs]
    outcomes.sort(key=lambda o: o[0])

    records, wall_times = [], {}
    for idx, kind, theta, params, metrics, passed, tables, wall in outcomes:
        records.append(
            {
                "kind": kind,
                "theta": theta,
                "params": params,
                "metrics": _jsonable(metrics),
                "passed": passed,
            }
        )
        wall_times[f"{idx:02d}_{kind}"] = round(wall, 6)
        for name, rows in tables.items():
            _write_csv(os.path.join(out_dir, f"{idx:02d}_{name}"), rows)

    assertive = [r for r in records if r["passed"] is not None]
    failed = [r for r in records if r["passed"] is False]
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": {k: v for k, v in config.items() if k != "output"},
        "experiments": records,
        "summary": {
            "n_experiments": len(records),
            "n_assertive": len(assertive),
            "n_failed": len(failed),
        },
        "metadata": {
            "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "wall_time_s": wall_times,
            "version": __version__,
        },
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fraclap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiments in a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)

    p_val = sub.add_parser("validate", help="check a config without executing")
    p_val.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print("OK")
        print(json.dumps(config, indent=2, sort_keys=True))
        return 0

    if args.seed is not None:
        config["seed"] = args.seed
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("FRACLAP_THREADS", "1"))

    try:
        report = run(config, args.out, threads=threads)
    except FraclapError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2
    failed = report["summary"]["n_failed"]
    for rec in report["experiments"]:
        tag = {True: "pass", False: "FAIL", None: "info"}[rec["passed"]]
        theta = "" if rec["theta"] is None else f" theta={rec['theta']}"
        print(f"[{tag}] {rec['kind']}{theta}")
    if failed:
        print(f"{failed} assertive experiment(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
