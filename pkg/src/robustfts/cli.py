"""Command-line entry point: ``robustfts [--seed N] [--threads N] {simulate,forecast,compare,synth-ozone}``."""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .io import (ConfigError, DataError, Manifest, load_manifest, ingest, write_hourly, write_json, write_losses,
                 write_plot_data, write_summary, write_table)
from .mcs import SUMMARY_ROWS, mcs, summary_statistics
from .pipeline import EvaluationPlan, FunctionalForecaster, MethodSpec, evaluate_methods, run_simulation_study, tune
from .simulate import ozone_like

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("robustfts")


class NumericalFailure(RuntimeError):
    pass


def resolve_seed(cli_seed: Optional[int], manifest: Optional[Manifest]) -> int:
    """Command line wins, then the manifest; otherwise draw one and announce it."""
    if cli_seed is not None:
        return cli_seed
    if manifest is not None and manifest.seed is not None:
        return manifest.seed
    seed = int(np.random.SeedSequence().generate_state(1)[0])
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _report_header(command: str, seed: int, threads: int, manifest: Optional[Manifest]) -> dict:
    return {
        "command": command,
        "seed": seed,
        "threads": threads,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "manifest": manifest.model_dump(mode="json") if manifest is not None else None,
    }


def _mcs_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


# simulate ----------------------------------------------------------------------------------------


def cmd_simulate(manifest: Manifest, out: Path, seed: int, threads: int) -> dict:
    config = manifest.simulation_config(seed, threads)
    methods = manifest.method_specs()
    names = [m.name for m in methods]
    t0 = time.perf_counter()
    study = run_simulation_study(config, methods)
    elapsed = time.perf_counter() - t0
    rows = study["rows"]
    if not rows:
        raise NumericalFailure("every replication failed")

    param_cols = sorted({k for r in rows for k in r if k.startswith("param_")})
    cols = ["replication", "contamination", "method", "msfe_contaminated", "msfe_clean", "order",
            "flagged_curves", "n_outliers", *param_cols]
    write_table(out / "losses.csv", rows, cols)

    summary_rows = []
    for rate in config.contamination:
        for target in ("contaminated", "clean"):
            per = {s["method"]: s for s in study["summary"] if s["contamination"] == rate and s["target"] == target}
            for stat in SUMMARY_ROWS:
                summary_rows.append({"contamination": rate, "target": target, "statistic": stat,
                                     **{n: per[n][stat] for n in names if n in per}})
    write_table(out / "summary.csv", summary_rows, ["contamination", "target", "statistic", *names])

    # model confidence sets per replication on the per-curve losses
    mcs_out = {"level": manifest.mcs.level, "n_boot": manifest.mcs.n_boot, "rates": []}
    for ri, rate in enumerate(config.contamination):
        counts = {stat: dict.fromkeys(names, 0) for stat in manifest.mcs.statistics}
        n_used = 0
        for rep in range(config.replications):
            got = {r["method"]: r["step_losses"] for r in rows
                   if r["replication"] == rep and r["contamination"] == rate}
            if len(got) != len(names) or len(names) < 2:
                continue
            n_used += 1
            L = np.column_stack([got[n] for n in names])
            for stat in manifest.mcs.statistics:
                res = mcs(L, manifest.mcs.level, stat, manifest.mcs.n_boot, manifest.mcs.block_length,
                          _mcs_seed(seed, ri, rep), names)
                for n in res.survivors:
                    counts[stat][n] += 1
        mcs_out["rates"].append({"contamination": rate, "replications": n_used, "superior_set_counts": counts})
    write_json(out / "mcs.json", mcs_out)

    plot = []
    for r in rows:
        for target in ("contaminated", "clean"):
            plot.append((f"{r['method']}/{target}/{r['contamination']}", r["replication"], r[f"msfe_{target}"]))
    write_plot_data(out / "plot-data.csv", plot)

    report = _report_header("simulate", seed, threads, manifest)
    report["replications"] = [{k: v for k, v in r.items() if k != "step_losses"} for r in rows]
    report["timings"] = {
        "total_seconds": elapsed,
        "mean_seconds_per_fit": {n: float(np.mean([r["seconds"] for r in rows if r["method"] == n] or [np.nan]))
                                 for n in names},
    }
    write_json(out / "run-report.json", report)
    return report


# data-driven commands ----------------------------------------------------------------------------


def _load_data(manifest: Manifest):
    if manifest.ingest is None:
        raise ConfigError("ingest: section is required for this command")
    return ingest(manifest.ingest)


def _plan(manifest: Manifest, n: int) -> EvaluationPlan:
    if manifest.plan is not None:
        plan = manifest.plan.build()
    elif n >= 60:
        plan = EvaluationPlan.ozone(n)
    else:
        raise ConfigError(f"plan: required when fewer than 60 curves are available (have {n})")
    if plan.n_total > n:
        raise ConfigError(f"plan: needs {plan.n_total} curves but the data has {n}")
    return plan


def _fit_kwargs(manifest: Manifest, seed: int) -> dict:
    f = manifest.fit
    return {"max_order": f.max_order, "kernel": f.kernel, "bandwidth": f.bandwidth, "n_starts": f.n_starts,
            "random_state": seed}


def cmd_forecast(manifest: Manifest, out: Path, seed: int, threads: int) -> dict:
    data = _load_data(manifest)
    spec = manifest.method.build() if manifest.method is not None else MethodSpec("RMLTS", "robust-dynamic", "rmlts")
    kw = _fit_kwargs(manifest, seed)
    params = spec.params()
    tuned = None
    if manifest.fit.tune and manifest.plan is not None:
        plan = _plan(manifest, data.n_curves)
        tuned = tune(spec, data[: plan.n_train], data[plan.n_train : plan.test_start],
                     max_evals=manifest.fit.max_evals, mode="expanding", seed=seed, **kw)
        if tuned.params is not None:
            params = tuned.params
    est = FunctionalForecaster(fpca=spec.fpca, estimator=spec.estimator, grid=data.grid.points, **kw)
    est.set_params(**{k: params[k] for k in spec.tunables})
    t0 = time.perf_counter()
    est.fit(data.values)
    preds = est.predict(manifest.forecast.horizon)
    if not np.all(np.isfinite(preds)):
        raise NumericalFailure("forecast contains non-finite values")
    points = [(f"h{h + 1}", x, y) for h, curve in enumerate(preds) for x, y in zip(data.grid.points, curve)]
    write_plot_data(out / "forecasts.csv", points)
    report = _report_header("forecast", seed, threads, manifest)
    report.update({
        "method": spec.name,
        "params": params,
        "tuning": None if tuned is None else {"objective": tuned.objective, "n_evaluations": tuned.n_evaluations,
                                              "budget_exhausted": tuned.budget_exhausted},
        "order": est.order_,
        "flagged_curves": est.model_.n_flagged_curves,
        "n_curves": data.n_curves,
        "horizon": manifest.forecast.horizon,
        "fit_seconds": time.perf_counter() - t0,
    })
    write_json(out / "run-report.json", report)
    return report


def cmd_compare(manifest: Manifest, out: Path, seed: int, threads: int) -> dict:
    data = _load_data(manifest)
    plan = _plan(manifest, data.n_curves)
    methods = manifest.method_specs()
    names = [m.name for m in methods]
    kw = _fit_kwargs(manifest, seed)
    results = evaluate_methods(data, plan, methods, max_evals=manifest.fit.max_evals, tune_mode="expanding",
                               seed=seed, tune_params=manifest.fit.tune, threads=threads, **kw)
    L = np.column_stack([results[n]["window"].losses for n in names])
    dead = [n for n in names if not np.any(np.isfinite(results[n]["window"].losses))]
    if dead:
        diag = "; ".join(results[dead[0]]["window"].diagnostics[:1])
        raise NumericalFailure(f"no successful forecast for {', '.join(dead)} ({diag})")
    write_losses(out / "losses.csv", L, names)
    write_summary(out / "summary.csv", {n: summary_statistics(results[n]["window"].losses) for n in names})

    complete = np.all(np.isfinite(L), axis=1)
    mcs_out = {"level": manifest.mcs.level, "n_eval": int(complete.sum()),
               "dropped_steps": [int(i) for i in np.flatnonzero(~complete)], "tests": {}}
    if len(names) >= 2 and complete.sum() >= 2:
        for k, stat in enumerate(manifest.mcs.statistics):
            res = mcs(L[complete], manifest.mcs.level, stat, manifest.mcs.n_boot, manifest.mcs.block_length,
                      _mcs_seed(seed, k), names)
            mcs_out["tests"][stat] = {**res.to_dict(), "membership": {n: res.includes(n) for n in names}}
    write_json(out / "mcs.json", mcs_out)

    points = []
    test_rows = range(plan.test_start, plan.n_total)
    for j, i in enumerate(test_rows):
        label = data.labels[i]
        points += [(f"actual/{label}", x, y) for x, y in zip(data.grid.points, data.values[i])]
        for n in names:
            points += [(f"{n}/{label}", x, y) for x, y in zip(data.grid.points, results[n]["window"].forecasts[j])]
    write_plot_data(out / "plot-data.csv", points)

    report = _report_header("compare", seed, threads, manifest)
    report["plan"] = {"n_train": plan.n_train, "n_validation": plan.n_validation, "n_test": plan.n_test}
    report["methods"] = {}
    for n in names:
        r = results[n]
        t = r["tuned"]
        report["methods"][n] = {
            "params": r["params"],
            "tuning": None if t is None else {"objective": t.objective, "n_evaluations": t.n_evaluations,
                                              "budget_exhausted": t.budget_exhausted},
            "orders": r["window"].orders,
            "flagged_curves": r["window"].n_flagged,
            "diagnostics": r["window"].diagnostics,
            "seconds": r["seconds"],
        }
    write_json(out / "run-report.json", report)
    return report


def cmd_synth_ozone(args, seed: int) -> None:
    values, outliers = ozone_like(n_days=args.days, n_outliers=args.outliers, missing=args.missing,
                                  random_state=seed)
    start = np.datetime64("2010-06-01T00")
    stamps = [str(start + np.timedelta64(h, "h")) for h in range(values.size)]
    path = Path(args.output)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    write_hourly(path, values, "ozone", stamps, "timestamp")
    print(f"wrote {values.size} hourly values to {path}; outlying days: {', '.join(str(d + 1) for d in outliers)}")


# entry point -------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="master seed (default: manifest value, else drawn and printed)")
    common.add_argument("--threads", type=int, help="worker threads for replications and methods (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="robustfts", parents=[common],
                                description="Robust forecasting of curve time series.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "run the FAR(1) simulation study"),
                       ("forecast", "fit one method on ingested data and forecast ahead"),
                       ("compare", "expanding-window comparison of methods with model confidence sets")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("manifest", help="YAML run manifest")
        s.add_argument("-o", "--out", default="results", help="output directory (default: results)")
    s = sub.add_parser("synth-ozone", parents=[common], help="write a synthetic hourly ozone-like CSV")
    s.add_argument("output", help="CSV path to write")
    s.add_argument("--days", type=int, default=82)
    s.add_argument("--outliers", type=int, default=5)
    s.add_argument("--missing", type=int, default=9)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = getattr(args, "threads", 1)
    try:
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "synth-ozone":
            cmd_synth_ozone(args, resolve_seed(getattr(args, "seed", None), None))
            return EXIT_OK
        manifest = load_manifest(args.manifest)
        if "threads" not in vars(args):
            threads = manifest.threads
        seed = resolve_seed(getattr(args, "seed", None), manifest)
        out = _out_dir(args.out)
        {"simulate": cmd_simulate, "forecast": cmd_forecast, "compare": cmd_compare}[args.command](
            manifest, out, seed, threads)
        print(f"results written to {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
