"""Command-line entry point: ``hwsir <command> --scenario FILE ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import analysis
from .analysis import Curve, StructureHistogram, align_by_threshold, ensemble_mean, sup_distance
from .ebcm import EBCM
from .ensemble import EnsembleSpec, run_ensemble, streams
from .errors import DegenerateState, EmptySelection, StepSizeUnderflow
from .integrator import find_threshold_time
from .population import build, empirical_size_dist
from .reduced import ReducedModel
from .scenario import ConfigError, Scenario, load_scenario, round_down_to_five, shipped_scenarios, \
    shipped_scenario

THRESHOLD = 0.01
AUTO_HORIZON = 2000.0


class NumericalFailure(ArithmeticError):
    pass


# --- helpers ------------------------------------------------------------------------

def resolve_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    try:
        return shipped_scenario(ref)
    except KeyError:
        raise ConfigError(f"no scenario file or shipped scenario named {ref!r}") from None


def threshold_time(scenario: Scenario, eps: float | None = None) -> float:
    """Post-peak time at which the reduced model's infected share drops below 1%."""
    model = ReducedModel(scenario.reduced_params)
    y0 = model.initial_condition(scenario.eps if eps is None else eps)
    sol = model.solve(y0, AUTO_HORIZON, grid=[0.0, AUTO_HORIZON], with_r=False)
    t_star = find_threshold_time(sol.dense, 1, THRESHOLD)
    if t_star is None:
        raise NumericalFailure("infected proportion never falls below 1% after a peak; "
                               "set T explicitly")
    return t_star


def horizon(scenario: Scenario) -> float:
    if scenario.T is not None:
        return scenario.T
    return round_down_to_five(threshold_time(scenario))


def time_grid(T: float, dt: float = 0.5) -> np.ndarray:
    return np.linspace(0.0, T, int(round(T / dt)) + 1)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def _ci95(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return [float(x.mean()), float(x.mean())] if x.size else [0.0, 0.0]
    half = 1.96 * x.std(ddof=1) / np.sqrt(x.size)
    return [float(x.mean() - half), float(x.mean() + half)]


def _ensemble_spec(sc: Scenario, T: float, record_structures=False) -> EnsembleSpec:
    return EnsembleSpec(sc.K, sc.pi_H, sc.pi_W, sc.epidemic_params, T,
                        None if sc.single_seed else sc.eps, n_grid=len(time_grid(T)),
                        record_structures=record_structures)


# --- commands -------------------------------------------------------------------------

def cmd_simulate(sc: Scenario, out_dir, svg=False, align_threshold=None, n_jobs=1) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    T = horizon(sc)
    trajs = run_ensemble(_ensemble_spec(sc, T), sc.replicates, sc.seed, n_jobs)
    for k, tr in enumerate(trajs):
        tr.to_csv(out / f"replicate_{k:03d}.csv")
    props = np.array([analysis.layer_proportions(tr) for tr in trajs])
    final = np.array([tr.R[-1] + tr.I[-1] for tr in trajs]) / sc.K
    peaks = np.array([tr.i.max() for tr in trajs])
    peak_t = np.array([tr.t[np.argmax(tr.I)] for tr in trajs])
    curves = [Curve.of(tr) for tr in trajs]
    grid = time_grid(T)
    if align_threshold is not None:
        curves = align_by_threshold(curves, align_threshold)
        grid = np.linspace(min(c.t[0] for c in curves), T, len(grid))
    summary = {
        "scenario": sc.name, "T": T, "replicates": len(trajs), "retained": len(curves),
        "layer_proportions": {"mean": props.mean(axis=0).tolist(),
                              "ci95": [_ci95(props[:, k]) for k in range(3)]},
        "final_size": {"mean": float(final.mean()), "ci95": _ci95(final)},
        "peak_i": {"mean": float(peaks.mean()), "ci95": _ci95(peaks)},
        "peak_time": {"mean": float(peak_t.mean()), "ci95": _ci95(peak_t)},
    }
    if len(curves) >= 2:
        mi = ensemble_mean(curves, grid, "i")
        ms = ensemble_mean(curves, grid, "s")
        summary["mean"] = {"t": grid.tolist(), "s": ms.mean.tolist(), "i": mi.mean.tolist(),
                           "stderr_s": ms.stderr.tolist(), "stderr_i": mi.stderr.tolist()}
    _write_json(out / "summary.json", summary)
    if svg:
        from .plotting import plot_sir
        plot_sir(out / "simulate.svg", [], [(c.t, c["s"], c["i"]) for c in curves], sc.name)
    return summary


def cmd_reduce(sc: Scenario, out_dir, svg=False, ic_from=None, full=False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = ReducedModel(sc.reduced_params)
    summary = {"scenario": sc.name, "dimension": model.dim}
    if sc.T is None:
        t_star = threshold_time(sc)
        summary["T_star"] = t_star
        T = round_down_to_five(t_star)
    else:
        T = sc.T
    summary["T"] = T
    if ic_from is not None:
        y0 = model.initial_condition_from_counts(StructureHistogram.from_json(ic_from))
        summary["initial_condition"] = str(ic_from)
    else:
        y0 = model.initial_condition(sc.eps)
        summary["initial_condition"] = f"uniform seeding, eps={sc.eps}"
    sol = model.solve(y0, T, grid=time_grid(T))
    worst = {}
    ok = True
    for k in range(sol.t.size):
        rep = model.check_V(sol.state(k), 1e-8)
        ok &= rep.ok
        for name, v in rep.violation.items():
            worst[name] = max(worst.get(name, -np.inf), v)
    summary["V_check"] = {"pass": bool(ok), "tol": 1e-8, "max_violation": worst}
    summary["peak_i"] = float(sol.i.max())
    summary["final_s"] = float(sol.s[-1])
    sol.to_csv(out / "reduced.csv", full=full)
    _write_json(out / "summary.json", summary)
    if svg:
        from .plotting import plot_sir
        plot_sir(out / "reduced.svg", [("ODE", sol.t, sol.s, sol.i, "-")], title=sc.name)
    return summary


def cmd_ebcm(sc: Scenario, out_dir, svg=False, full=False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    T = horizon(sc)
    model = EBCM(sc.reduced_params)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        y0 = model.initial_condition(sc.eps)
    sol = model.solve(y0, T, grid=time_grid(T))
    sol.to_csv(out / "ebcm.csv", full=full)
    summary = {"scenario": sc.name, "T": T, "dimension": model.dim,
               "peak_i": float(sol.i.max()), "final_s": float(sol.s[-1]),
               "warnings": [str(w.message) for w in caught]}
    _write_json(out / "summary.json", summary)
    if svg:
        from .plotting import plot_sir
        plot_sir(out / "ebcm.svg", [("EBCM", sol.t, sol.s, sol.i, "--")], title=sc.name)
    return summary


def model_curves(sc: Scenario, models, T, align_threshold=None, n_jobs=1) -> dict:
    """Curves ``{model: Curve}`` with components ``s`` and ``i``."""
    grid = time_grid(T)
    out = {}
    for m in models:
        if m == "ssa":
            trajs = run_ensemble(_ensemble_spec(sc, T), max(sc.replicates, 2), sc.seed, n_jobs)
            curves = [Curve.of(tr) for tr in trajs]
            if align_threshold is not None:
                curves = align_by_threshold(curves, align_threshold)
            out[m] = Curve(grid, {c: ensemble_mean(curves, grid, c).mean for c in ("s", "i")})
        elif m == "ode":
            model = ReducedModel(sc.reduced_params)
            sol = model.solve(model.initial_condition(sc.eps), T, grid=grid)
            out[m] = Curve(grid, {"s": sol.s, "i": sol.i})
        elif m == "ebcm":
            model = EBCM(sc.reduced_params)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                y0 = model.initial_condition(sc.eps)
            sol = model.solve(y0, T, grid=grid)
            out[m] = Curve(grid, {"s": sol.s, "i": sol.i})
        else:
            raise ConfigError(f"unknown model {m!r}; choose from ssa, ode, ebcm")
        if align_threshold is not None and m != "ssa":
            out[m] = align_by_threshold([out[m]], align_threshold)[0]
    return out


def cmd_compare(sc: Scenario, out_dir, models=("ode", "ebcm"), svg=False, align_threshold=None,
                n_jobs=1) -> dict:
    models = list(models)
    if len(models) < 2:
        raise ConfigError("compare needs at least two models")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    T = horizon(sc)
    kinds = models
    # a model may be listed twice (self-comparison); later copies get a suffix
    models = [m if m not in models[:k] else f"{m}_{models[:k].count(m) + 1}"
              for k, m in enumerate(models)]
    base = model_curves(sc, list(dict.fromkeys(kinds)), T, align_threshold, n_jobs)
    curves = {name: base[kind] for name, kind in zip(models, kinds)}
    dist = {c: {a: {b: sup_distance(curves[a], curves[b], c) for b in models} for a in models}
            for c in ("s", "i")}
    summary = {"scenario": sc.name, "T": T, "models": models, "align_threshold": align_threshold,
               "sup_distance": dist}
    _write_json(out / "comparison.json", summary)
    grid = time_grid(T)
    if align_threshold is not None:
        grid = np.linspace(max(c.t[0] for c in curves.values()),
                           min(c.t[-1] for c in curves.values()), len(grid))
    cols = ["t"] + [f"{c}_{m}" for m in models for c in ("s", "i")]
    data = [grid] + [curves[m].at(grid, c) for m in models for c in ("s", "i")]
    with open(out / "comparison.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in np.column_stack(data):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if svg:
        from .plotting import plot_sir
        styles = {"ssa": ":", "ode": "-", "ebcm": "--"}
        plot_sir(out / "compare.svg",
                 [(m, grid, curves[m].at(grid, "s"), curves[m].at(grid, "i"), styles[k])
                  for m, k in zip(models, kinds)], title=sc.name)
    return summary


def reference_loop(n: int) -> int:
    """Sum of ``1..n`` with a plain loop; the returned value keeps the work observable."""
    total = 0
    for k in range(1, n + 1):
        total += k
    return total


def normalized_runtime(fn, loop_bound: int) -> float:
    """Runtime of ``fn()`` divided by the runtime of the reference loop."""
    t0 = time.perf_counter()
    fn()
    t_fn = time.perf_counter() - t0
    t0 = time.perf_counter()
    value = reference_loop(loop_bound)
    t_ref = time.perf_counter() - t0
    if value != loop_bound * (loop_bound + 1) // 2:
        raise NumericalFailure("reference loop returned a wrong sum")
    return t_fn / t_ref


def cmd_bench(scenarios, out_dir, runs=3, loop_bound=10 ** 9, svg=False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for sc in scenarios:
        T = horizon(sc)
        spec = _ensemble_spec(sc, T)
        model = ReducedModel(sc.reduced_params)
        pairs = streams(sc.seed, runs)

        def ssa(k):
            from .ensemble import run_replicate
            return lambda: run_replicate(spec, *pairs[k])

        def ode():
            model.solve(model.initial_condition(sc.eps), T, grid=time_grid(T))

        ssa_norm = [normalized_runtime(ssa(k), loop_bound) for k in range(runs)]
        ode_norm = [normalized_runtime(ode, loop_bound) for _ in range(runs)]
        rows.append({"scenario": sc.name, "R0": sc.labels.get("R0", ""),
                     "pG_pH_pW": sc.labels.get("pG_pH_pW", ""), "T": T,
                     "ssa_normalized": float(np.mean(ssa_norm)),
                     "ode_normalized": float(np.mean(ode_norm)),
                     "ratio": float(np.mean(ode_norm) / np.mean(ssa_norm))})
    ref = reference_loop(loop_bound)
    summary = {"runs": runs, "loop_bound": loop_bound, "reference_value": ref,
               "reference_expected": loop_bound * (loop_bound + 1) // 2, "rows": rows}
    _write_json(out / "bench.json", summary)
    with open(out / "bench.csv", "w") as fh:
        keys = ["scenario", "R0", "pG_pH_pW", "T", "ssa_normalized", "ode_normalized", "ratio"]
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(f'"{r[k]}"' if k == "pG_pH_pW" else str(r[k]) for k in keys) + "\n")
    if svg:
        from .plotting import plot_bench
        plot_bench(out / "bench.svg", rows)
    return summary


def cmd_infer_ic(sc: Scenario, out_dir, stop_level=0.01) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = analysis.infer_initial_condition(
        lambda rng: build(sc.K, sc.pi_H, sc.pi_W, rng), sc.epidemic_params, stop_level,
        sc.replicates, sc.seed)
    res.histogram.to_json(out / "histogram.json")
    summary = {"scenario": sc.name, "stop_level": stop_level, "retained": res.retained,
               "attempted": res.attempted, "mean_time_to_level": res.histogram.t}
    _write_json(out / "summary.json", summary)
    return summary


def cmd_graph(sc: Scenario, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = build(sc.K, sc.pi_H, sc.pi_W, np.random.default_rng(sc.seed))
    g.to_csv(out / "graph.csv")
    summary = {"K": g.K, "K_H": g.K_H, "K_W": g.K_W,
               "household_sizes": empirical_size_dist(g, "H").to_mapping(),
               "workplace_sizes": empirical_size_dist(g, "W").to_mapping()}
    _write_json(out / "summary.json", summary)
    return summary


# --- argument parsing ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hwsir", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_required=True):
        sp.add_argument("--scenario", required=scenario_required,
                        help="scenario TOML file or shipped scenario name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--svg", action="store_true", help="also write a figure")
        sp.add_argument("--align-threshold", type=float)
        sp.add_argument("--jobs", type=int, default=1)

    for name in ("simulate", "reduce", "ebcm", "compare", "infer-ic", "graph"):
        sp = sub.add_parser(name)
        common(sp)
        if name in ("reduce", "ebcm"):
            sp.add_argument("--full", action="store_true", help="write every state coordinate")
        if name == "reduce":
            sp.add_argument("--ic-from", help="histogram JSON written by infer-ic")
        if name == "compare":
            sp.add_argument("--models", default="ode,ebcm")
        if name == "infer-ic":
            sp.add_argument("--stop-level", type=float, default=0.01)
    sp = sub.add_parser("bench")
    common(sp, scenario_required=False)
    sp.add_argument("--runs", type=int, default=3)
    sp.add_argument("--loop-bound", type=int, default=10 ** 9)
    return p


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "bench":
            scs = [resolve_scenario(args.scenario)] if args.scenario else shipped_scenarios()
            if args.seed is not None:
                scs = [s.with_(seed=args.seed) for s in scs]
            cmd_bench(scs, args.out_dir, args.runs, args.loop_bound, args.svg)
            return 0
        sc = resolve_scenario(args.scenario)
        if args.seed is not None:
            sc = sc.with_(seed=args.seed)
        if args.replicates is not None:
            sc = sc.with_(replicates=args.replicates)
        if args.command == "simulate":
            cmd_simulate(sc, args.out_dir, args.svg, args.align_threshold, args.jobs)
        elif args.command == "reduce":
            cmd_reduce(sc, args.out_dir, args.svg, args.ic_from, args.full)
        elif args.command == "ebcm":
            cmd_ebcm(sc, args.out_dir, args.svg, args.full)
        elif args.command == "compare":
            cmd_compare(sc, args.out_dir, args.models.split(","), args.svg, args.align_threshold,
                        args.jobs)
        elif args.command == "infer-ic":
            cmd_infer_ic(sc, args.out_dir, args.stop_level)
        elif args.command == "graph":
            cmd_graph(sc, args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, DegenerateState, StepSizeUnderflow, EmptySelection) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
