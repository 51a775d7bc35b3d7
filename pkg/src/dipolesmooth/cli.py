"""Batch driver: simulate, infer, aggregate error curves, oracle checks.

Configuration is a flat plain-text file of ``key=value`` lines (``#``
starts a comment); every model, geometry, sampler and simulation constant
can be set there, and ``--seed``/``--out``/``--jobs`` can be overridden on
the command line.  Outputs are CSV files with a mandatory header row and
'.' as the decimal separator.

Exit codes: 0 success, 2 configuration error, 3 degenerate inference,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np
from numpy.random import SeedSequence

from . import checks, estimator, simgen
from .estimator import PointEstimate, localization_error, modal_tag, point_estimate
from .geometry import (
    GeometryError,
    LeadfieldFileError,
    build_grid,
    build_sensor_cap,
    load_leadfield,
    load_sensors,
    sarvas_leadfield,
)
from .model import DipoleModel, ModelParams, isotropic_noise_cov
from .simgen import SimulationSpec, generate, snr
from .smc import FilterDegenerateError
from .smoother import SmootherDegenerateError, run_double_smoother

EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # geometry
    sphere_radius: float = 0.09
    grid_spacing: float = 0.015
    grid_margin: float = 0.01
    num_sensors: int = 60
    sensor_radius: float = 0.12
    leadfield_file: str = ""
    sensor_file: str = ""
    # model
    n_max: int = 5
    poisson_rate: float = 0.5
    p_birth: float = 0.01
    p_single_death: float = 1.0 / 30.0
    rho: float = 0.005
    moment_walk_factor: float = 0.2
    q_min: float = 1e-9
    q_max: float = 1e-7
    noise_std: float = simgen.DEFAULT_NOISE_STD
    q_birth: float = 1.0 / 3.0
    q_death: float = 1.0 / 3.0
    # sampler
    alpha: int = 1000
    subsample_size: int = 100
    resampling: str = "multinomial"
    # simulation
    group: int = 1
    horizon: int = 30
    walk_radius: float = 0.01
    bell_center: int = 15
    bell_width: float = 4.0
    strength: float = simgen.DEFAULT_STRENGTH
    # driver
    runs: int = 20
    seed: int = 0
    jobs: int = 1
    min_separation: float = 0.0  # 0 means twice the grid spacing
    out_dir: str = "out"


def parse_config_file(path):
    """Read key=value lines into a RunConfig, with field-level messages."""
    cfg = RunConfig()
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(RunConfig)}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
        try:
            setattr(cfg, key, types[key](value))
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: key {key!r} expects {types[key].__name__}, got {value!r}"
            ) from exc
    return cfg


def validate_config(cfg):
    checks_ = [
        (cfg.sphere_radius > 0, "sphere_radius must be positive"),
        (cfg.grid_spacing > 0, "grid_spacing must be positive"),
        (cfg.grid_margin >= 0, "grid_margin must be nonnegative"),
        (cfg.num_sensors >= 1, "num_sensors must be at least 1"),
        (cfg.sensor_radius > cfg.sphere_radius,
         "sensor_radius must exceed sphere_radius"),
        (cfg.n_max >= 0, "n_max must be nonnegative"),
        (cfg.poisson_rate >= 0, "poisson_rate must be nonnegative"),
        (0 < cfg.p_birth < 1, "p_birth must be in (0, 1)"),
        (0 < cfg.p_single_death < 1, "p_single_death must be in (0, 1)"),
        (0 < cfg.q_birth < 1, "q_birth must be in (0, 1)"),
        (0 < cfg.q_death < 1, "q_death must be in (0, 1)"),
        (cfg.q_birth + cfg.q_death < 1, "q_birth + q_death must stay below 1"),
        (cfg.rho > 0, "rho must be positive"),
        (cfg.moment_walk_factor > 0, "moment_walk_factor must be positive"),
        (0 < cfg.q_min < cfg.q_max, "need 0 < q_min < q_max"),
        (cfg.noise_std > 0, "noise_std must be positive"),
        (cfg.alpha >= 2, "alpha must be at least 2"),
        (cfg.subsample_size >= 1, "subsample_size must be at least 1"),
        (cfg.resampling in ("multinomial", "systematic"),
         "resampling must be multinomial or systematic"),
        (cfg.group in range(1, 9), "group must be in 1..8"),
        (cfg.horizon >= 3, "horizon must be at least 3"),
        (cfg.walk_radius > 0, "walk_radius must be positive"),
        (cfg.bell_width > 0, "bell_width must be positive"),
        (cfg.strength > 0, "strength must be positive"),
        (cfg.runs >= 1, "runs must be at least 1"),
        (cfg.jobs >= 1, "jobs must be at least 1"),
        (cfg.min_separation >= 0, "min_separation must be nonnegative"),
    ]
    problems = [msg for ok, msg in checks_ if not ok]
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def build_workspace(cfg):
    """Construct grid, sensors, leadfield, params and bundle from a config."""
    grid = build_grid(cfg.sphere_radius, cfg.grid_spacing, cfg.grid_margin)
    if cfg.sensor_file:
        sensors = load_sensors(cfg.sensor_file)
    else:
        sensors = build_sensor_cap(cfg.num_sensors, cfg.sensor_radius)
    if cfg.leadfield_file:
        leadfield = load_leadfield(cfg.leadfield_file, grid, len(sensors))
    else:
        leadfield = sarvas_leadfield(grid, sensors)
    params = ModelParams(
        noise_cov=isotropic_noise_cov(len(sensors), cfg.noise_std),
        n_max=cfg.n_max,
        poisson_rate=cfg.poisson_rate,
        p_birth=cfg.p_birth,
        p_single_death=cfg.p_single_death,
        rho=cfg.rho,
        moment_walk_factor=cfg.moment_walk_factor,
        strength_bounds=(cfg.q_min, cfg.q_max),
        q_birth=cfg.q_birth,
        q_death=cfg.q_death,
    )
    return grid, sensors, leadfield, params


def run_seeds(cfg, run_index):
    """Deterministic (simulation, inference) seeds for one run."""
    state = SeedSequence((cfg.seed, cfg.group, run_index)).generate_state(
        2, dtype=np.uint64
    )
    return int(state[0]), int(state[1])


def min_separation_value(cfg):
    return cfg.min_separation if cfg.min_separation > 0 else 2.0 * cfg.grid_spacing


def write_config_echo(path, cfg):
    with open(path, "w") as fh:
        for f in fields(RunConfig):
            fh.write(f"{f.name}={getattr(cfg, f.name)}\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg):
    grid, _, leadfield, _ = build_workspace(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_config_echo(os.path.join(cfg.out_dir, "config_used.cfg"), cfg)
    manifest_rows = []
    for run in range(cfg.runs):
        sim_seed, infer_seed = run_seeds(cfg, run)
        spec = SimulationSpec(
            group=cfg.group,
            horizon=cfg.horizon,
            noise_std=cfg.noise_std,
            walk_radius=cfg.walk_radius,
            bell_center=cfg.bell_center,
            bell_width=cfg.bell_width,
            strength=cfg.strength,
            seed=sim_seed,
        )
        truth = generate(spec, grid, leadfield)
        truth_file = f"truth_{run:03d}.csv"
        data_file = f"data_{run:03d}.csv"
        simgen.write_truth_csv(os.path.join(cfg.out_dir, truth_file), truth)
        simgen.write_data_csv(os.path.join(cfg.out_dir, data_file), truth.noisy_data)
        manifest_rows.append(
            [run, sim_seed, infer_seed, repr(snr(truth)), truth_file, data_file]
        )
    with open(os.path.join(cfg.out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "sim_seed", "infer_seed", "snr", "truth_file", "data_file"])
        writer.writerows(manifest_rows)
    print(f"wrote {cfg.runs} simulation(s) to {cfg.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------


def _write_estimates_csv(path, estimates, grid):
    max_n = max((len(e.locations) for e in estimates), default=0)
    header = ["t", "n_hat"]
    for i in range(max_n):
        header += [
            f"d{i}_grid", f"d{i}_x", f"d{i}_y", f"d{i}_z",
            f"d{i}_qx", f"d{i}_qy", f"d{i}_qz",
        ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, est in enumerate(estimates, start=1):
            row = [t, est.n_hat]
            for g, q in zip(est.locations, est.moments):
                p = grid.points[g]
                row += [g] + [repr(float(v)) for v in (*p, *q)]
            row += [""] * (7 * (max_n - len(est.locations)))
            writer.writerow(row)


def read_estimates_csv(path):
    """Read back per-time point estimates (grid indices and moments)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            n_hat = int(row[1])
            locs, moments = [], []
            for i in range(2, len(row), 7):
                if row[i] == "":
                    break
                locs.append(int(row[i]))
                moments.append([float(v) for v in row[i + 4:i + 7]])
            out.append(
                PointEstimate(
                    n_hat, tuple(locs), np.array(moments).reshape(len(locs), 3)
                )
            )
    return out


def _write_diagnostics_csv(path, smoothing_run):
    run = smoothing_run
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "log_lf", "log_lb", "tag", "ess_fwd", "ess_bwd",
             "weight_evals_p1", "weight_evals_p2"]
        )
        for t in range(run.horizon):
            writer.writerow(
                [
                    t + 1,
                    repr(float(run.log_lf[t])),
                    repr(float(run.log_lb[t])),
                    run.tags[t],
                    repr(float(run.forward_run.ess[t])),
                    repr(float(run.backward_run.ess[t])),
                    int(run.weight_evals_p1[t]),
                    int(run.weight_evals_p2[t]),
                ]
            )


def _infer_one(cfg, run_index, data_path, out_dir):
    grid, _, leadfield, params = build_workspace(cfg)
    bundle = DipoleModel(params, grid, leadfield)
    data = simgen.read_data_csv(data_path)
    if data.shape[1] != params.num_sensors:
        raise ConfigError(
            f"{data_path}: {data.shape[1]} sensor columns, expected {params.num_sensors}"
        )
    _, infer_seed = run_seeds(cfg, run_index)
    run = run_double_smoother(
        data, bundle, alpha=cfg.alpha, m=cfg.subsample_size, seed=infer_seed,
        resampling=cfg.resampling,
    )
    sep = min_separation_value(cfg)
    filter_est = [point_estimate(c, grid, sep) for c in run.forward_run.clouds]
    smoother_est = [point_estimate(c, grid, sep) for c in run.clouds]
    _write_estimates_csv(
        os.path.join(out_dir, f"filter_estimates_{run_index:03d}.csv"), filter_est, grid
    )
    _write_estimates_csv(
        os.path.join(out_dir, f"smoother_estimates_{run_index:03d}.csv"), smoother_est, grid
    )
    _write_diagnostics_csv(
        os.path.join(out_dir, f"diagnostics_{run_index:03d}.csv"), run
    )
    return run_index


def _infer_worker(args):
    cfg, run_index, data_path, out_dir = args
    try:
        return _infer_one(cfg, run_index, data_path, out_dir), None
    except (FilterDegenerateError, SmootherDegenerateError) as exc:
        return run_index, f"run {run_index}: {exc}"


def cmd_infer(cfg, data_dir=None):
    data_dir = data_dir or cfg.out_dir
    manifest = os.path.join(data_dir, "manifest.csv")
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"no manifest.csv in {data_dir}; run simulate first")
    with open(manifest, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    os.makedirs(cfg.out_dir, exist_ok=True)
    jobs = [
        (cfg, int(row[0]), os.path.join(data_dir, row[5]), cfg.out_dir) for row in rows
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_infer_worker, jobs))
    else:
        results = [_infer_worker(j) for j in jobs]
    failures = [msg for _, msg in results if msg]
    for msg in failures:
        print(msg, file=sys.stderr)
    if failures:
        return EXIT_DEGENERATE
    print(f"inferred {len(jobs)} run(s) into {cfg.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def cmd_curves(cfg, truth_dir, results_dir):
    grid, _, _, _ = build_workspace(cfg)
    manifest = os.path.join(truth_dir, "manifest.csv")
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"no manifest.csv in {truth_dir}")
    with open(manifest, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    filter_errors, smoother_errors, tag_lists = [], [], []
    for row in rows:
        run_index = int(row[0])
        truth_path = os.path.join(truth_dir, row[4])
        f_path = os.path.join(results_dir, f"filter_estimates_{run_index:03d}.csv")
        s_path = os.path.join(results_dir, f"smoother_estimates_{run_index:03d}.csv")
        d_path = os.path.join(results_dir, f"diagnostics_{run_index:03d}.csv")
        if not os.path.exists(truth_path):
            raise FileNotFoundError(f"missing truth file for run {run_index}: {truth_path}")
        if not (os.path.exists(f_path) and os.path.exists(s_path)):
            raise FileNotFoundError(f"missing estimates for run {run_index} in {results_dir}")
        states = simgen.read_truth_states(truth_path)
        f_est = read_estimates_csv(f_path)
        s_est = read_estimates_csv(s_path)
        filter_errors.append(
            [localization_error(st, e, grid) for st, e in zip(states, f_est)]
        )
        smoother_errors.append(
            [localization_error(st, e, grid) for st, e in zip(states, s_est)]
        )
        with open(d_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            tag_lists.append([r[3] for r in reader])

    def aggregate(errors_per_run):
        T = len(errors_per_run[0])
        mean = np.full(T, np.nan)
        bar = np.full(T, np.nan)
        count = np.zeros(T, dtype=int)
        for t in range(T):
            errs = [e[t] for e in errors_per_run if e[t] is not None]
            count[t] = len(errs)
            if errs:
                mean[t] = float(np.mean(errs))
                bar[t] = float(np.std(errs)) / len(errs)
        return mean, bar, count

    f_curve = aggregate(filter_errors)
    s_curve = aggregate(smoother_errors)
    tags = [modal_tag(tag_lists, t) for t in range(len(tag_lists[0]))]
    os.makedirs(cfg.out_dir, exist_ok=True)
    out_path = os.path.join(cfg.out_dir, f"curves_group{cfg.group}.csv")
    estimator.write_curves_csv(out_path, f_curve, s_curve, tags)
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# oracle-check
# ---------------------------------------------------------------------------


def cmd_oracle_check(jobs=1, quick=False):
    exact = checks.check_hmm_exact(num_models=5 if quick else 20)
    print(
        f"[{'PASS' if exact.passed else 'FAIL'}] exact smoothing identities on "
        f"{exact.num_models} random HMMs: brute-force {exact.max_err_brute:.2e}, "
        f"backward-supported {exact.max_err_p1:.2e}, "
        f"forward-supported {exact.max_err_p2:.2e}"
    )
    mc = checks.check_lg_monte_carlo(
        trials=5 if quick else 20,
        alpha=2000 if quick else 5000,
        m=200 if quick else 500,
        jobs=jobs,
    )
    print(
        f"[{'PASS' if mc.passed else 'FAIL'}] Kalman/RTS Monte Carlo agreement: "
        f"{mc.passes}/{mc.trials} trials, {mc.wall_seconds:.1f} s"
    )
    return 0 if exact.passed and mc.passed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--config", help="path to key=value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--jobs", type=int, help="parallel runs bound")


def _load_config(args):
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    return validate_config(cfg)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dipolesmooth",
        description="Simulate multi-dipole sensor data and run the "
        "trans-dimensional particle filter and double two-filter smoother.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate ground truth and noisy data")
    _add_common(p_sim)

    p_inf = sub.add_parser("infer", help="run filter and smoother on simulated data")
    _add_common(p_inf)
    p_inf.add_argument("--data", help="directory with manifest.csv and data files "
                                      "(default: the output directory)")

    p_cur = sub.add_parser("curves", help="aggregate localization-error curves")
    _add_common(p_cur)
    p_cur.add_argument("--truth", required=True, help="directory with truth files")
    p_cur.add_argument("--results", required=True, help="directory with estimates")

    p_orc = sub.add_parser("oracle-check", help="run the exact-oracle check suite")
    p_orc.add_argument("--jobs", type=int, default=1)
    p_orc.add_argument("--quick", action="store_true", help="reduced settings")

    args = parser.parse_args(argv)
    try:
        if args.command == "oracle-check":
            return cmd_oracle_check(jobs=args.jobs or 1, quick=args.quick)
        cfg = _load_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "infer":
            return cmd_infer(cfg, args.data)
        if args.command == "curves":
            return cmd_curves(cfg, args.truth, args.results)
    except (ConfigError, GeometryError, LeadfieldFileError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FilterDegenerateError, SmootherDegenerateError) as exc:
        print(f"inference degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, FileNotFoundError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
