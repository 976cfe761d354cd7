"""Batch entry point: run scenarios, sweep parameters, benchmark estimation.

Modes
-----
run           Load a scenario file, simulate it, and write artifacts to the
              output directory: ``log.csv`` (per-control-cycle trace, columns
              in :data:`wbcsim.simulator.LOG_COLUMNS`), ``metrics.txt`` and
              ``metrics.json`` (summary), and for sloped terrains
              ``psi_trace.csv`` (estimated vs true incline angle over time).
bench-normals Monte-Carlo accuracy table for the ground-normal estimator:
              noiseless inclined planes, noisy planes, the full synthetic
              lidar ramp pipeline, and an adaptive-neighborhood cross-check.
sweep         Fan a scenario out over several values of one override key
              (``--sweep KEY=V1,V2,...``), one isolated run per value, in
              parallel processes; writes each run's artifacts to its own
              subdirectory plus a combined ``sweep.csv``.

The metrics summary keys form a closed set (see
:class:`wbcsim.simulator.MetricsSummary`): name, fell, failed, failure,
max_abs_beta, max_abs_r_x, settle_time, height_mean, height_sd, roll_mean,
roll_sd, psi_hat_mean, psi_err_mean, com_dev_max, energy_residual_frac.

Exit status: 0 on success, 1 when the scenario falls or the solver fails
(the metrics files are still written), 2 on configuration errors.

The output directory may also be set with the ``WBCSIM_OUT`` environment
variable; an explicit ``--out`` wins.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from .model import RobotModel
from .simulator import (
    MetricsSummary,
    Scenario,
    ScenarioError,
    SensorConfig,
    run_scenario,
    synth_pointcloud,
    write_log_csv,
)
from .terrain import SlopeTerrain
from .terrain_estimation import (
    NormalMap,
    estimate_normal,
    eigenvalue_entropy,
    incline_angle,
    optimal_neighborhood,
)

DEFAULT_SEED = 0
OUT_ENV_VAR = "WBCSIM_OUT"


@dataclass
class RunConfig:
    scenario: str | None
    out_dir: str
    seed: int = DEFAULT_SEED
    verbosity: int = 0
    mode: str = "run"
    params: dict = field(default_factory=dict)
    sweep_key: str | None = None
    sweep_values: list = field(default_factory=list)
    jobs: int | None = None


# -- configuration plumbing --------------------------------------------------

def parse_param(text: str) -> tuple[str, object]:
    """Split ``KEY=VALUE``; the value is YAML-typed (numbers, bools, lists)."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ScenarioError(f"override '{text}' is not of the form KEY=VALUE")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"override '{text}': unparsable value: {exc}") from exc
    return key.strip(), value


def apply_override(cfg: dict, key: str, value) -> None:
    """Set a possibly dotted key (``terrain.angle_deg=20``) in a config dict."""
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ScenarioError(f"override '{key}': '{p}' is not a section")
        node = nxt
    node[parts[-1]] = value


def load_scenario(path: str, params: dict) -> Scenario:
    with open(path) as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse scenario file: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ScenarioError("scenario file must contain a mapping")
    for key, value in params.items():
        apply_override(cfg, key, value)
    return Scenario.from_dict(cfg)


# -- run mode ----------------------------------------------------------------

def write_artifacts(out_dir: str, records: list, metrics: MetricsSummary,
                    slope_terrain: bool) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_log_csv(records, os.path.join(out_dir, "log.csv"))
    with open(os.path.join(out_dir, "metrics.txt"), "w") as fh:
        fh.write(metrics.to_text())
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if slope_terrain:
        with open(os.path.join(out_dir, "psi_trace.csv"), "w") as fh:
            fh.write("t,psi_hat,psi_true\n")
            for r in records:
                fh.write(f"{r.t:.9g},{r.psi_hat:.9g},{r.psi_true:.9g}\n")


def do_run(cfg: RunConfig) -> int:
    if cfg.scenario is None:
        print("error: --scenario is required for mode 'run'", file=sys.stderr)
        return 2
    scenario = load_scenario(cfg.scenario, cfg.params)
    model = RobotModel()
    records, metrics = run_scenario(model, scenario, seed=cfg.seed)
    slope = not np.allclose(
        [scenario.terrain.grad(x, 0.0) for x in np.linspace(-3, 3, 13)], 0.0)
    write_artifacts(cfg.out_dir, records, metrics, slope)
    if cfg.verbosity > 0 or metrics.failed or metrics.fell:
        print(metrics.to_text(), end="")
    print(f"artifacts written to {cfg.out_dir}")
    if metrics.failed:
        print(f"error: solver failure: {metrics.failure}", file=sys.stderr)
        return 1
    if metrics.fell:
        print("error: robot fell", file=sys.stderr)
        return 1
    return 0


# -- sweep mode --------------------------------------------------------------

def _sweep_one(args: tuple) -> dict:
    scenario_path, params, key, value, seed, out_dir = args
    params = dict(params)
    params[key] = value
    scenario = load_scenario(scenario_path, params)
    records, metrics = run_scenario(RobotModel(), scenario, seed=seed)
    slope = not np.allclose(
        [scenario.terrain.grad(x, 0.0) for x in np.linspace(-3, 3, 13)], 0.0)
    write_artifacts(out_dir, records, metrics, slope)
    row = {"sweep_value": value}
    row.update(metrics.to_dict())
    return row


def do_sweep(cfg: RunConfig) -> int:
    if cfg.scenario is None:
        print("error: --scenario is required for mode 'sweep'", file=sys.stderr)
        return 2
    if not cfg.sweep_key:
        print("error: mode 'sweep' needs --sweep KEY=V1,V2,...", file=sys.stderr)
        return 2
    load_scenario(cfg.scenario, cfg.params)   # validate before forking
    jobs = []
    for value in cfg.sweep_values:
        tag = str(value).replace("/", "_").replace(" ", "")
        sub = os.path.join(cfg.out_dir,
                           f"{cfg.sweep_key.replace('.', '_')}_{tag}")
        jobs.append((cfg.scenario, cfg.params, cfg.sweep_key, value,
                     cfg.seed, sub))
    workers = cfg.jobs or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]

    os.makedirs(cfg.out_dir, exist_ok=True)
    cols = list(rows[0].keys())
    with open(os.path.join(cfg.out_dir, "sweep.csv"), "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
    bad = [r for r in rows if r["failed"] or r["fell"]]
    for r in bad:
        print(f"error: {cfg.sweep_key}={r['sweep_value']}: "
              f"{'solver failure: ' + r['failure'] if r['failed'] else 'robot fell'}",
              file=sys.stderr)
    print(f"sweep artifacts written to {cfg.out_dir}")
    return 1 if bad else 0


# -- bench-normals mode ------------------------------------------------------

def _plane_cloud(rng, angle_deg, n, noise):
    ang = np.radians(angle_deg)
    normal = np.array([np.sin(ang), 0.0, np.cos(ang)])
    t1 = np.array([np.cos(ang), 0.0, -np.sin(ang)])
    t2 = np.array([0.0, 1.0, 0.0])
    c = rng.uniform(-1.0, 1.0, (n, 2))
    pts = c[:, :1] * t1 + c[:, 1:] * t2
    if noise > 0.0:
        pts = pts + rng.normal(scale=noise, size=pts.shape)
    from .terrain_estimation import PointCloud
    return PointCloud(points=pts), normal


def bench_normals(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    ok = True

    # noiseless inclined planes: estimator is exact up to round-off
    for angle in (0.0, 15.0, 25.0, 45.0):
        cloud, n_true = _plane_cloud(rng, angle, n=400, noise=0.0)
        errs = []
        for _ in range(20):
            q = cloud.points[rng.integers(len(cloud))]
            est = estimate_normal(cloud, q, 30)
            errs.append(np.degrees(np.arccos(np.clip(est.normal @ n_true,
                                                     -1.0, 1.0))))
        rows.append((f"plane {angle:4.0f} deg, noiseless",
                     np.mean(errs), np.max(errs), 0.01))

    # noisy 15 deg plane, Monte Carlo
    trials = 1000
    _, n_true = _plane_cloud(rng, 15.0, n=1, noise=0.0)
    errs = []
    for _ in range(trials):
        cloud, _ = _plane_cloud(rng, 15.0, n=120, noise=0.01)
        est = estimate_normal(cloud, np.zeros(3), 30)
        errs.append(np.degrees(np.arccos(np.clip(est.normal @ n_true,
                                                 -1.0, 1.0))))
    rows.append((f"plane   15 deg, sigma=0.01, {trials} trials",
                 np.mean(errs), np.max(errs), 2.0))

    # full pipeline: noisy synthetic lidar over a ramp -> map -> incline
    # at sigma = 0.05 m the neighborhood must span enough of the slope for
    # the planar signal to dominate the noise, hence the larger k range
    terrain = SlopeTerrain(angle_deg=15.0, start=0.5, blend=0.5)
    nmap = NormalMap(k_min=30, k_max=200)
    sensor = SensorConfig(radius=2.0, points=5000, noise=0.05)
    for cx in np.arange(-1.0, 4.5, 0.5):
        nmap.update(synth_pointcloud(terrain, (cx, 0.0), sensor, rng))
    errs = []
    for x in np.linspace(1.2, 3.8, 27):
        n = nmap.lookup(x, 0.0)
        if n is not None:
            errs.append(abs(incline_angle(n) - 15.0))
    rows.append(("ramp pipeline, sigma=0.05, 15 deg incline",
                 np.mean(errs), np.max(errs), 3.0))

    # adaptive neighborhood equals a brute-force entropy scan
    agree = total = 0
    for _ in range(10):
        angle = rng.uniform(0.0, 40.0)
        cloud, _ = _plane_cloud(rng, angle, n=150, noise=0.02)
        q = cloud.points[rng.integers(len(cloud))]
        k_adaptive = optimal_neighborhood(cloud, q, 10, 60)
        ents = []
        for k in range(10, min(60, len(cloud)) + 1):
            _, idx = cloud.tree.query(q, k=k)
            lam = np.linalg.eigvalsh(np.cov(cloud.points[idx].T, bias=True))
            ents.append(eigenvalue_entropy(lam))
        k_brute = 10 + int(np.argmin(ents))
        agree += int(k_adaptive == k_brute)
        total += 1

    print(f"{'suite':44s} {'mean err':>9s} {'max err':>9s} {'bound':>7s}")
    for label, mean_e, max_e, bound in rows:
        status = "ok" if mean_e < bound else "FAIL"
        ok = ok and mean_e < bound
        print(f"{label:44s} {mean_e:8.4f}  {max_e:8.4f}  {bound:6.2f}  {status}")
    print(f"{'adaptive k == brute-force entropy scan':44s} "
          f"{agree}/{total} agree{'' if agree == total else '  FAIL'}")
    ok = ok and agree == total
    return 0 if ok else 1


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wbcsim",
        description="Run whole-body-control scenarios and estimation benchmarks.")
    ap.add_argument("--scenario", metavar="PATH",
                    help="scenario file (.scn, YAML mapping)")
    ap.add_argument("--out", metavar="DIR",
                    default=os.environ.get(OUT_ENV_VAR, "wbcsim_out"),
                    help="output directory (default: $%s or ./wbcsim_out)"
                         % OUT_ENV_VAR)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED, metavar="N",
                    help="RNG seed (default %(default)s)")
    ap.add_argument("--mode", choices=("run", "bench-normals", "sweep"),
                    default="run")
    ap.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                    help="scenario override, dotted keys allowed "
                         "(e.g. terrain.angle_deg=20); repeatable")
    ap.add_argument("--sweep", metavar="KEY=V1,V2,...",
                    help="sweep one override key over comma-separated values "
                         "(mode 'sweep')")
    ap.add_argument("--jobs", type=int, metavar="N",
                    help="parallel workers for mode 'sweep' (default: #values "
                         "capped at CPU count)")
    ap.add_argument("-v", "--verbose", action="count", default=0,
                    help="print the metrics summary after a run")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = dict(parse_param(p) for p in args.param)
        sweep_key, sweep_values = None, []
        if args.sweep:
            sweep_key, raw = parse_param(args.sweep)
            sweep_values = raw if isinstance(raw, list) else [
                yaml.safe_load(v) for v in str(raw).split(",")]
        cfg = RunConfig(scenario=args.scenario, out_dir=args.out,
                        seed=args.seed, verbosity=args.verbose,
                        mode=args.mode, params=params,
                        sweep_key=sweep_key, sweep_values=sweep_values,
                        jobs=args.jobs)
        if cfg.mode == "bench-normals":
            return bench_normals(cfg)
        if cfg.mode == "sweep":
            return do_sweep(cfg)
        return do_run(cfg)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
