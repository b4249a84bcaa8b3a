"""Batch command-line entry point.

Three subcommands cover the workflow: ``benchmark`` runs the multi-trial
method comparison and writes its CSV artifacts, ``replay`` refits recorded
logs in both input-handling modes, and ``selftest`` runs a fast invariant
suite. All numeric output uses 17 significant digits so artifacts are
byte-reproducible under one config and seed, and every generated directory
contains the effective configuration that produced it.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    default_config,
    build_methods,
    build_setup,
    dump_config,
    load_config,
    model_hyper,
)
from .driver import stored_input, wrmse
from .gp import (
    Dataset,
    GaussianInput,
    Hyperparams,
    fit_posterior,
    kernel_se,
    kernel_uise,
    predict,
    predict_many,
)
from .replay import (
    ReplayDataError,
    read_observations,
    read_validation,
    run_replay,
)
from . import driver

FLOAT_FMT = ".17g"


def _f(value) -> str:
    return format(float(value), FLOAT_FMT)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _apply_overrides(cfg, args):
    updates = {}
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    return replace(cfg, **updates) if updates else cfg


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    return _apply_overrides(cfg, args)


def write_benchmark_artifacts(result, setup, cfg, out: Path) -> None:
    """All benchmark CSVs plus the effective config, under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    _write_csv(
        out / "summary.csv",
        ("method", "rmse_mean", "rmse_sd", "wrmse_mean", "wrmse_sd",
         "distance_mean", "distance_sd", "relvib_mean", "relvib_sd", "failures"),
        [(s.name, _f(s.rmse_mean), _f(s.rmse_sd), _f(s.wrmse_mean),
          _f(s.wrmse_sd), _f(s.distance_mean), _f(s.distance_sd),
          _f(s.relvib_mean), _f(s.relvib_sd), s.failures)
         for s in result.summaries])
    for trial, records in enumerate(result.records):
        for name, record in records.items():
            rows = []
            for i, log in enumerate(record.iterations, start=1):
                stored = stored_input(record.method, log.est_input)
                rows.append((
                    i, _f(log.target[0]), _f(log.target[1]),
                    _f(log.true_loc[0]), _f(log.true_loc[1]),
                    _f(log.est_input.mean[0]), _f(log.est_input.mean[1]),
                    _f(stored.cov[0, 0]), _f(log.observation),
                    _f(log.path_length), _f(log.path_vibration)))
            _write_csv(
                out / "trials" / str(trial) / f"{name}.csv",
                ("iteration", "target_x", "target_y", "true_x", "true_y",
                 "est_x", "est_y", "est_cov", "observation", "path_length",
                 "path_vibration"),
                rows)
    _write_csv(out / "starts.csv", ("trial", "x", "y"),
               [(t, _f(s[0]), _f(s[1])) for t, s in enumerate(result.starts)])
    grid = setup.region.grid(setup.eval_grid)
    for trial, terrain in enumerate(result.terrains):
        values = terrain.evaluate(grid)
        _write_csv(out / "terrain" / f"{trial}.csv", ("x", "y", "value"),
                   [(_f(x), _f(y), _f(v)) for (x, y), v in zip(grid, values)])
    curve_rows = []
    for spec in result.methods:
        if spec.name not in result.curves:
            continue
        mean, sd = result.curves[spec.name]
        for i, (m, s) in enumerate(zip(mean, sd), start=1):
            curve_rows.append((spec.name, i, _f(m), _f(s)))
    _write_csv(out / "curves.csv",
               ("method", "iteration", "mean_vibration", "sd_vibration"),
               curve_rows)


def cmd_benchmark(args) -> int:
    cfg = _load(args)
    if args.jobs > 1:
        print("note: trials run serially in this build; --jobs > 1 has no "
              "effect", file=sys.stderr)
    setup = build_setup(cfg)
    methods = build_methods(cfg)
    result = driver.run_benchmark(cfg.trials, methods, setup, cfg.seed)
    out = Path(cfg.out_dir)
    write_benchmark_artifacts(result, setup, cfg, out)
    width = max(len(s.name) for s in result.summaries)
    for s in result.summaries:
        print(f"{s.name:<{width}}  rmse={s.rmse_mean:.4f}  "
              f"wrmse={s.wrmse_mean:.4f}  distance={s.distance_mean:.2f}  "
              f"relvib={s.relvib_mean:.4f}  failures={s.failures}")
    print(f"artifacts written to {out}")
    return 0


def write_replay_artifacts(result, grid_low, grid_high, grid_n, out: Path) -> None:
    """Hyperparameter, posterior-grid, and validation CSVs under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "hyperparams.csv",
               ("mode", "signal_var", "length_scale_x", "length_scale_y",
                "noise_var", "mean_const", "lml"),
               [(fit.mode, _f(fit.hyper.signal_var),
                 _f(fit.hyper.length_scales[0]), _f(fit.hyper.length_scales[1]),
                 _f(fit.hyper.noise_var), _f(fit.hyper.mean_const), _f(fit.lml))
                for fit in result.fits()])
    axes = [np.linspace(lo, hi, grid_n) for lo, hi in zip(grid_low, grid_high)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=-1)
    for fit in result.fits():
        mu, var = predict_many(fit.posterior, grid)
        sd = np.sqrt(np.maximum(var, 0.0))
        _write_csv(out / f"posterior_{fit.mode}.csv",
                   ("x", "y", "mean", "sd"),
                   [(_f(x), _f(y), _f(m), _f(s))
                    for (x, y), m, s in zip(grid, mu, sd)])
    _write_csv(out / "validation.csv",
               ("mode", "rmse", "wrmse", "n_observations", "n_validation"),
               [(fit.mode, _f(fit.rmse), _f(fit.wrmse),
                 result.n_observations, result.n_validation)
                for fit in result.fits()])


def cmd_replay(args) -> int:
    cfg = _load(args)
    result = run_replay(args.observations, args.validation, model_hyper(cfg),
                        opt_budget=args.opt_budget)
    means, _, _ = read_observations(args.observations)
    locations, _ = read_validation(args.validation)
    points = np.vstack([means, locations])
    low, high = points.min(axis=0), points.max(axis=0)
    pad = 0.05 * np.maximum(high - low, 1e-9)
    out = Path(cfg.out_dir)
    write_replay_artifacts(result, low - pad, high + pad, cfg.eval_grid, out)
    for fit in result.fits():
        print(f"{fit.mode:<13}  rmse={fit.rmse:.4f}  wrmse={fit.wrmse:.4f}  "
              f"lml={fit.lml:.2f}")
    print(f"artifacts written to {out}")
    return 0


def _check_kernel_reduction(perturbed: bool) -> bool:
    rng = np.random.default_rng(0)
    hyper = Hyperparams(1.7, np.array([0.8, 1.4]), 0.1, 0.3)
    worst = 0.0
    points = rng.uniform(-5.0, 5.0, size=(2000, 2, 2))
    for a, b in points:
        reference = kernel_se(a, b, hyper)
        if perturbed:
            reference *= 1.0 + 1e-9
        got = kernel_uise(GaussianInput.at(a), GaussianInput.at(b), False, hyper)
        worst = max(worst, abs(got - reference))
    return worst <= 1e-12


def _check_posterior_oracle(perturbed: bool) -> bool:
    rng = np.random.default_rng(1)
    hyper = Hyperparams(1.2, np.array([0.9, 1.1]), 0.05, 0.4)
    for _ in range(10):
        n = rng.integers(2, 13)
        data = Dataset()
        for _ in range(n):
            mean = rng.uniform(-3.0, 3.0, 2)
            cov = np.diag(rng.uniform(0.0, 0.4, 2))
            data.append(GaussianInput(mean, cov), float(rng.normal()))
        gram = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                gram[i, j] = kernel_uise(data[i][0], data[j][0], i == j, hyper)
                if i == j:
                    gram[i, j] += hyper.noise_var
        inv = np.linalg.inv(gram)
        resid = data.values() - hyper.mean_const
        post = fit_posterior(data, hyper)
        query = GaussianInput(rng.uniform(-3.0, 3.0, 2),
                              np.diag(rng.uniform(0.0, 0.4, 2)))
        kvec = np.array([kernel_uise(query, data[i][0], False, hyper)
                         for i in range(n)])
        want_mean = hyper.mean_const + kvec @ inv @ resid
        want_var = kernel_uise(query, query, True, hyper) - kvec @ inv @ kvec
        if perturbed:
            want_mean += 1e-6
        got_mean, got_var = predict(post, query)
        scale_m = max(1.0, abs(want_mean))
        scale_v = max(1.0, abs(want_var))
        if abs(got_mean - want_mean) > 1e-8 * scale_m:
            return False
        if abs(got_var - want_var) > 1e-8 * scale_v:
            return False
    return True


def _check_wrmse_hand_case(perturbed: bool) -> bool:
    expected = 0.577350269 + (1e-6 if perturbed else 0.0)
    return abs(wrmse([1.0, 1.0, 1.0], [0.0, 1.0, 2.0]) - expected) <= 1e-9


SELFTEST_CHECKS = (
    ("kernel-reduction", _check_kernel_reduction),
    ("posterior-oracle", _check_posterior_oracle),
    ("wrmse-hand-case", _check_wrmse_hand_case),
)


def cmd_selftest(args) -> int:
    all_ok = True
    for name, check in SELFTEST_CHECKS:
        ok = check(args.perturb == name)
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uibo",
        description="Terrain-roughness exploration benchmarks with "
                    "uncertainty-aware Gaussian-process planners.")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("benchmark", help="run the multi-trial method "
                                             "comparison and write CSVs")
    bench.add_argument("--config", help="INI run configuration (defaults "
                                        "to the shipped benchmark)")
    bench.add_argument("--out", help="output directory (overrides config)")
    bench.add_argument("--seed", type=int, help="base seed (overrides config)")
    bench.add_argument("--trials", type=int, help="trial count (overrides config)")
    bench.add_argument("--jobs", type=int, default=1,
                       help="worker count accepted for compatibility")
    bench.set_defaults(func=cmd_benchmark)

    rep = sub.add_parser("replay", help="refit a recorded observation log "
                                        "and score it on validation points")
    rep.add_argument("observations", help="CSV with x_mean,y_mean,cov_xx,"
                                          "cov_xy,cov_yy,vibration rows")
    rep.add_argument("validation", help="CSV with x,y,vibration rows")
    rep.add_argument("--config", help="INI run configuration (initial "
                                      "hyperparameters, grid, output dir)")
    rep.add_argument("--out", help="output directory (overrides config)")
    rep.add_argument("--opt-budget", type=int, default=150,
                     help="likelihood evaluations per hyperparameter refit")
    rep.set_defaults(func=cmd_replay)

    self_p = sub.add_parser("selftest", help="run the fast invariant suite")
    self_p.add_argument("--perturb", help=argparse.SUPPRESS, default=None)
    self_p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    if getattr(args, "trials", None) is not None and args.trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return 2
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, ReplayDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
