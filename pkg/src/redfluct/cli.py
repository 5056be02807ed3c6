"""Command-line studies: single points, scaling series, phase diagrams,
visibility cuts and shot-sampling runs.

Every study writes a canonical CSV of result rows (plus a JSON mirror) and
study-specific plot-ready files. Parameter points run on a process pool
but rows are always emitted in config order, so output is byte-stable.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import STUDY_KINDS, StudyConfig, defaults_text, load_config
from .errors import ConfigError, ConvergenceError
from .exact import ground_state_lanczos
from .fluctuations import (
    correlator_decay,
    fluctuation_report,
    imbalance,
    reduced_fluctuation,
    string_correlator_avg,
    view_of,
)
from .model import Bipartition, ChainSpec, ParitySector, SpinAxis, XYZParams, critical_line_distance
from .mps import build_xyz_mpo, dmrg_ground_state, schmidt_entropy
from .results import ResultRow, fmt, read_rows_csv, validate_rows_file, write_rows_csv, write_rows_json
from .sampler import estimate_reduced_fluctuation, read_shots_csv, sample_shots, write_shots_csv
from .scaling import ScalingSeries, classify_scaling, correlation_length, fit_form, read_series_csv, write_series_csv

log = logging.getLogger("redfluct")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4
CROSS_CHECK_MAX_L = 14
CROSS_ENERGY_TOL = 1e-8
CROSS_ENTROPY_TOL = 1e-6
BAD_FLAGS = ("nonconverged", "rejected", "failed")


# ------------------------------------------------------------ point solver


@dataclass(frozen=True)
class PointJob:
    L: int
    params: XYZParams
    axes: tuple
    cut: int
    backend: str
    cross_check: bool
    sector: ParitySector
    chi_max: int
    sweeps: int
    variance_target: float
    variance_accept: float
    lanczos_tol: float
    seed: int


@dataclass
class PointOutcome:
    job: PointJob
    rows: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(f.split(":")[0] in BAD_FLAGS for f in self.flags)


def _jobs(cfg: StudyConfig) -> list[PointJob]:
    out = []
    for L in cfg.lengths:
        backend = cfg.backend_for(L)
        cross = cfg.backend == "auto" and L <= CROSS_CHECK_MAX_L
        for p in cfg.param_points():
            out.append(PointJob(
                L, p, cfg.axes, cfg.cut_for(L), backend, cross, cfg.sector, cfg.chi_max, cfg.sweeps,
                cfg.variance_target, cfg.variance_accept, cfg.lanczos_tol, cfg.seed,
            ))
    return out


def _solve_ed(job: PointJob):
    gs = ground_state_lanczos(ChainSpec(job.L), job.params, job.sector, job.lanczos_tol, seed=job.seed)
    return gs.energy, gs.state, gs.residual_norm, gs.notes


def _solve_dmrg(job: PointJob):
    mpo = build_xyz_mpo(ChainSpec(job.L), job.params)
    res = dmrg_ground_state(
        mpo, job.chi_max, job.sweeps, job.variance_target, sector=job.sector, seed=job.seed
    )
    flags = []
    if res.report.energy_variance > job.variance_accept:
        flags.append(f"nonconverged: dmrg variance {res.report.energy_variance:.3e}")
    if res.report.sector_mixing:
        flags.append(f"sector_mixing: parity {res.report.parity:.4f}")
    return res.energy, res.state, res.report.energy_variance, flags


def _xi(view, axis) -> float | None:
    decay = [(r, c) for r, c in correlator_decay(view, axis) if r >= 2]
    try:
        return correlation_length(decay).xi
    except ValueError:
        return None


def evaluate_point(job: PointJob) -> PointOutcome:
    """Solve one parameter point and build one row per axis."""
    out = PointOutcome(job)
    p = job.params
    base = dict(L=job.L, J=p.J, gamma=p.gamma, Jz=p.Jz, cut=job.cut)
    label = job.backend
    try:
        if job.backend == "ed":
            energy, state, quality, notes = _solve_ed(job)
            out.flags += [f"note: {n}" for n in notes]
        else:
            energy, state, quality, flags = _solve_dmrg(job)
            out.flags += flags
    except ConvergenceError as e:
        out.flags.append(f"nonconverged: {e}")
        out.rows = [ResultRow(axis=a.value, backend=label, **base) for a in job.axes]
        return out
    except Exception as e:  # noqa: BLE001 - a failing point must not stop a sweep
        out.flags.append(f"failed: {type(e).__name__}: {e}")
        out.rows = [ResultRow(axis=a.value, backend=label, **base) for a in job.axes]
        return out

    omega = Bipartition(job.cut, job.L)
    view = view_of(state)
    entropy = view.entropy(omega)

    if job.cross_check and job.backend == "ed":
        label = "ed+dmrg"
        try:
            e2, st2, _, flags2 = _solve_dmrg(job)
            s2 = schmidt_entropy(st2, omega)
            out.flags += [f.replace("nonconverged", "note") for f in flags2]
            if abs(e2 - energy) > CROSS_ENERGY_TOL or abs(s2 - entropy) > CROSS_ENTROPY_TOL:
                out.flags.append(
                    f"rejected: backend mismatch dE={abs(e2 - energy):.2e} dS={abs(s2 - entropy):.2e}"
                )
        except Exception as e:  # noqa: BLE001
            out.flags.append(f"rejected: dmrg cross-check failed: {type(e).__name__}: {e}")
    if any(f.startswith("rejected") for f in out.flags):
        out.rows = [ResultRow(axis=a.value, backend=label, **base) for a in job.axes]
        return out

    imb = imbalance(view)
    g_r = string_correlator_avg(view, max(1, job.L // 4))
    for axis in job.axes:
        rep = fluctuation_report(view, axis, omega, with_entropy=False)
        out.rows.append(ResultRow(
            axis=axis.value,
            backend=label,
            energy=float(energy),
            energy_residual_or_variance=float(quality),
            S_vN=float(entropy),
            var_omega=rep.var_omega,
            var_complement=rep.var_complement,
            var_total=rep.var_total,
            reduced=rep.reduced,
            beta=rep.visibility,
            imbalance=imb,
            G_r=g_r,
            xi=_xi(view, axis),
            **base,
        ))
    return out


def _limit_threads():
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def run_points(jobs, workers: int = 1) -> list[PointOutcome]:
    """Evaluate jobs; results come back in job order whatever the pool does."""
    if workers <= 1 or len(jobs) <= 1:
        return [evaluate_point(j) for j in jobs]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_limit_threads) as ex:
        return list(ex.map(evaluate_point, jobs))


# ------------------------------------------------------------------ studies


@dataclass
class StudyResult:
    rows: list
    outcomes: list
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def status(self) -> int:
        return EXIT_OK if all(o.ok for o in self.outcomes) else EXIT_SOLVER


def _outdir(cfg: StudyConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_rows(cfg: StudyConfig, stem: str, outcomes) -> tuple[list, list]:
    out = _outdir(cfg)
    rows = [r for o in outcomes for r in o.rows]
    for o in outcomes:
        for r in o.rows:
            r.flags = list(o.flags)
        for f in o.flags:
            if f.split(":")[0] in BAD_FLAGS:
                log.warning("L=%d %s: %s", o.job.L, o.job.params, f)
    write_rows_csv(out / f"{stem}.csv", rows)
    write_rows_json(out / f"{stem}.json", rows)
    return rows, [out / f"{stem}.csv", out / f"{stem}.json"]


def _write_csv(path: Path, header, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([fmt(v) for v in rec])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=str)
        fh.write("\n")


def run_ground(cfg: StudyConfig) -> StudyResult:
    outcomes = run_points(_jobs(cfg), 1)
    rows, files = _write_rows(cfg, "ground", outcomes)
    return StudyResult(rows, outcomes, files)


def _classify(series: ScalingSeries, min_L: int) -> dict:
    s = series.restrict(min_L)
    try:
        return classify_scaling(s).to_dict()
    except ValueError as e:
        return {"label": series.label, "class": None, "error": str(e)}


RATIO_STABILITY = 0.1


def log_coefficient_ratio(entropy: ScalingSeries, other: ScalingSeries, min_L: int) -> dict:
    """Ratio of ln L coefficients over all lengths and over the upper half (at least 3 points).

    The two are called stable when they differ by less than ``RATIO_STABILITY``
    in relative terms.
    """
    e, o = entropy.restrict(min_L), other.restrict(min_L)
    if len(e.points) < 4 or len(o.points) < 4:
        return {"ratio_all": None, "ratio_upper": None, "stable": False}

    def ratio(cut):
        be = fit_form(e.restrict(cut), "log")[1]
        bo = fit_form(o.restrict(cut), "log")[1]
        return bo / be if be != 0 else math.nan

    upper = e.points[min(len(e.points) // 2, len(e.points) - 3)][0]
    r_all, r_up = ratio(min_L), ratio(upper)
    stable = math.isfinite(r_all) and math.isfinite(r_up) and abs(r_up - r_all) < RATIO_STABILITY * abs(r_all)
    return {"ratio_all": r_all, "ratio_upper": r_up, "stable": bool(stable)}


def run_scaling_study(cfg: StudyConfig) -> StudyResult:
    outcomes = run_points(_jobs(cfg), cfg.workers)
    rows, files = _write_rows(cfg, "rows", outcomes)
    sdir = _outdir(cfg) / "series"
    sdir.mkdir(exist_ok=True)

    gaps = sorted({o.job.L for o in outcomes if not o.ok or any(r.S_vN is None for r in o.rows)})
    good = [o for o in outcomes if o.job.L not in gaps]
    series = {"S_vN": ScalingSeries([(o.job.L, o.rows[0].S_vN) for o in good], "S_vN")}
    for k, axis in enumerate(cfg.axes):
        a = axis.value
        pick = [(o.job.L, o.rows[k]) for o in good]
        series[f"var_half_{a}"] = ScalingSeries([(L, r.var_omega) for L, r in pick], f"var_half_{a}")
        series[f"var_total_{a}"] = ScalingSeries([(L, r.var_total) for L, r in pick], f"var_total_{a}")
        series[f"reduced_{a}"] = ScalingSeries([(L, r.reduced) for L, r in pick], f"reduced_{a}")
        series[f"beta_{a}"] = ScalingSeries([(L, r.beta) for L, r in pick if r.beta is not None], f"beta_{a}")
    for name, s in series.items():
        write_series_csv(sdir / f"{name}.csv", s)
        files.append(sdir / f"{name}.csv")

    fits = {name: _classify(s, cfg.min_fit_L) for name, s in series.items() if not name.startswith("beta")}
    entropy_class = fits["S_vN"].get("class")
    comparison = {}
    for axis in cfg.axes:
        a = axis.value
        rc = fits[f"reduced_{a}"].get("class")
        comparison[a] = {
            "entropy_class": entropy_class,
            "reduced_class": rc,
            "bare_class": fits[f"var_half_{a}"].get("class"),
            "reduced_matches_entropy": entropy_class is not None and rc == entropy_class,
            "log_ratio": log_coefficient_ratio(series["S_vN"], series[f"reduced_{a}"], cfg.min_fit_L),
        }
        # same scaling: same class, and for log scaling also a stable coefficient ratio
        same = comparison[a]["reduced_matches_entropy"]
        if same and rc == "log":
            same = comparison[a]["log_ratio"]["stable"]
        comparison[a]["same_scaling"] = bool(same)
    p = cfg.params
    summary = {
        "params": {"J": p.J, "gamma": p.gamma, "Jz": p.Jz, "coupling_sign": p.coupling_sign},
        "lengths": cfg.lengths,
        "min_fit_L": cfg.min_fit_L,
        "gaps": gaps,
        "fits": fits,
        "comparison": comparison,
    }
    _write_json(_outdir(cfg) / "summary.json", summary)
    files.append(_outdir(cfg) / "summary.json")
    return StudyResult(rows, outcomes, files, summary)


def _beta_by_axis(o: PointOutcome) -> dict:
    return {r.axis: r.beta for r in o.rows}


def run_phase_diagram(cfg: StudyConfig) -> StudyResult:
    outcomes = run_points(_jobs(cfg), cfg.workers)
    rows, files = _write_rows(cfg, "rows", outcomes)
    header = ["L", "J", "gamma", "Jz", "critical_line_distance", "backend", "energy", "S_vN",
              "imbalance", "G_r", "beta_x", "beta_y", "beta_z", "status"]
    records = []
    for o in outcomes:
        r0, b = o.rows[0], _beta_by_axis(o)
        p = o.job.params
        records.append([
            o.job.L, p.J, p.gamma, p.Jz, critical_line_distance(p), r0.backend, r0.energy, r0.S_vN,
            r0.imbalance, r0.G_r, b.get("x"), b.get("y"), b.get("z"), "ok" if o.ok else "flagged",
        ])
    path = _outdir(cfg) / "grid.csv"
    _write_csv(path, header, records)
    files.append(path)
    return StudyResult(rows, outcomes, files, {"shape": [len(cfg.gammas), len(cfg.Jzs)]})


def run_visibility_cut(cfg: StudyConfig) -> StudyResult:
    outcomes = run_points(_jobs(cfg), cfg.workers)
    rows, files = _write_rows(cfg, "rows", outcomes)
    records = []
    for o in outcomes:
        b = _beta_by_axis(o)
        records.append([o.job.params.gamma, b.get("x"), b.get("y"), b.get("z")])
    path = _outdir(cfg) / "visibility.csv"
    _write_csv(path, ["gamma", "beta_x", "beta_y", "beta_z"], records)
    files.append(path)
    return StudyResult(rows, outcomes, files)


def _shot_seed(seed: int, k: int, i: int) -> int:
    # independent Philox keys per (seed replica, shot-count index)
    return int(np.random.SeedSequence([seed, k, i]).generate_state(1, np.uint64)[0])


def se_slope(shots, ses) -> float:
    """Least-squares slope of log SE against log N."""
    x, y = np.log(np.asarray(shots, float)), np.log(np.asarray(ses, float))
    return float(np.polyfit(x, y, 1)[0])


def run_sampling_study(cfg: StudyConfig) -> StudyResult:
    jobs = _jobs(cfg)
    outcomes = run_points(jobs, 1)
    rows, files = _write_rows(cfg, "rows", outcomes)
    out = _outdir(cfg)
    if not outcomes[0].ok:
        return StudyResult(rows, outcomes, files, {"error": outcomes[0].flags})
    job = jobs[0]
    state = ground_state_lanczos(ChainSpec(job.L), job.params, job.sector, job.lanczos_tol, seed=job.seed).state
    omega = Bipartition(job.cut, job.L)
    if cfg.export_shots:
        (out / "shots").mkdir(exist_ok=True)
    records, summary = [], {"axes": {}}
    for axis in cfg.axes:
        exact_value = reduced_fluctuation(state, axis, omega)
        slopes, z_last = [], []
        for k in range(cfg.n_seeds):
            ses = []
            for i, n in enumerate(cfg.shots):
                shots = sample_shots(state, axis, n, _shot_seed(cfg.seed, k, i))
                est, se = estimate_reduced_fluctuation(shots, omega)
                z = (est - exact_value) / se if se > 0 else math.inf
                records.append([axis.value, k, n, est, se, exact_value, z])
                ses.append(se)
                if cfg.export_shots:
                    write_shots_csv(out / "shots" / f"{axis.value}_seed{k}_N{n}.csv", shots)
            z_last.append(abs(z))
            if len(cfg.shots) >= 2:
                slopes.append(se_slope(cfg.shots, ses))
        summary["axes"][axis.value] = {
            "exact": exact_value,
            "slopes": slopes,
            "mean_slope": float(np.mean(slopes)) if slopes else None,
            "max_abs_z_at_largest_N": float(max(z_last)),
        }
    if cfg.shots_file:
        imported = read_shots_csv(cfg.shots_file, cfg.axes[0])
        est, se = estimate_reduced_fluctuation(imported, Bipartition(cfg.cut_for(imported.L), imported.L))
        summary["imported"] = {"file": cfg.shots_file, "n_shots": imported.n_shots, "estimate": est, "se": se}
    path = out / "estimates.csv"
    _write_csv(path, ["axis", "seed", "N", "estimate", "se", "exact", "z"], records)
    _write_json(out / "slope.json", summary)
    files += [path, out / "slope.json"]
    return StudyResult(rows, outcomes, files, summary)


RUNNERS = {
    "ground": run_ground,
    "scaling": run_scaling_study,
    "phase_diagram": run_phase_diagram,
    "visibility_cut": run_visibility_cut,
    "sampling": run_sampling_study,
}


# ---------------------------------------------------------------- argparse


def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redfluct", description=__doc__.split("\n\n")[0].replace("\n", " "))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file; the section named after the study is read")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--backend", choices=("ed", "dmrg", "auto"))
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int)
    common.add_argument("--chi-max", type=int)
    common.add_argument("--sector", choices=("even", "odd", "full"))
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    for kind in STUDY_KINDS:
        sub.add_parser(kind.replace("_", "-"), parents=[common], help=f"run a {kind.replace('_', ' ')} study")

    fit = sub.add_parser("fit", help="classify a series CSV (L,value) offline")
    fit.add_argument("series", nargs="+")
    fit.add_argument("--min-L", type=int, default=8)
    fit.add_argument("--mixed", action="store_true", help="also score a + b ln L + c L")
    fit.add_argument("--out", help="write the JSON summary here")

    sub.add_parser("defaults", help="print the default configuration")

    val = sub.add_parser("validate", help="check result-row CSV files")
    val.add_argument("files", nargs="+")
    return parser


def _study_config(kind: str, args) -> StudyConfig:
    overrides = _parse_sets(args.set)
    for flag, key in (("backend", "backend"), ("seed", "seed"), ("chi_max", "chi_max"), ("sector", "sector")):
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = val
    cfg = load_config(kind, args.config, overrides)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg.workers = args.workers
    cfg.out = args.out
    return cfg


def _cmd_fit(args) -> int:
    results = []
    for path in args.series:
        s = read_series_csv(path).restrict(args.min_L)
        results.append(classify_scaling(s, include_mixed=args.mixed).to_dict())
    text = json.dumps(results if len(results) > 1 else results[0], indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    status = EXIT_OK
    for path in args.files:
        problems = validate_rows_file(path)
        if problems:
            status = EXIT_VALIDATION
            for p in problems:
                print(f"{path}: {p}")
        else:
            print(f"{path}: ok ({len(read_rows_csv(path))} rows)")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "defaults":
            sys.stdout.write(defaults_text())
            return EXIT_OK
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "fit":
            return _cmd_fit(args)
        kind = args.command.replace("-", "_")
        cfg = _study_config(kind, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    result = RUNNERS[kind](cfg)
    for f in result.files:
        log.info("wrote %s", f)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
