"""Command-line interface: scenario runs, experiments and the invariant suite.

Subcommands: simulate, dipole-test, poincare, greens-table, validate.
All numeric output is serialized with 17 significant digits so that reruns
of the same configuration are byte-identical.  The environment variable
SURFVORTEX_OUTPUT_ROOT, when set, prefixes every output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checks
from . import dynamics as dy
from . import experiments as ex
from .config import ScenarioConfig
from .errors import CollisionError, ConfigError, MetricError, ShootingError, SurfVortexError
from .greens import GreensEvaluator
from .sphere import east_north_basis

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.17g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


@dataclass
class RunReport:
    """What a scenario produced: files, conservation summary, timing."""

    config: dict
    files: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "config": self.config,
                "files": self.files,
                "summary": self.summary,
                "wall_time_s": self.wall_time_s,
            }
        )


def resolve_output_dir(cfg: ScenarioConfig) -> Path:
    root = os.environ.get("SURFVORTEX_OUTPUT_ROOT")
    out = Path(root) / cfg.output_dir if root else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_trajectory_csv(path: Path, times: np.ndarray, positions: np.ndarray):
    n = positions.shape[1]
    header = "t," + ",".join(f"x{j+1},y{j+1},z{j+1}" for j in range(n))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i, t in enumerate(times):
            row = [_fmt(t)]
            for j in range(n):
                row.extend(_fmt(c) for c in positions[i, j])
            fh.write(",".join(row) + "\n")


def write_section_csv(path: Path, record: ex.SectionRecord):
    n = record.states.shape[1] if record.n_crossings else 2
    header = "t," + ",".join(f"x{j+1},y{j+1},z{j+1}" for j in range(n)) + ",energy"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(record.n_crossings):
            row = [_fmt(record.times[i])]
            for j in range(n):
                row.extend(_fmt(c) for c in record.states[i, j])
            row.append(_fmt(record.energies[i]))
            fh.write(",".join(row) + "\n")


def _write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trajectory_diagnostics(cfg: ScenarioConfig, traj: dy.Trajectory) -> dict:
    return {
        "config": cfg.to_dict(),
        "energy_initial": traj.energy[0],
        "energy_final": traj.energy[-1],
        "max_abs_energy_drift": traj.energy_drift,
        "energy_monitor_bound": traj.energy_bound,
        "energy_monitor_ok": bool(traj.energy_bound_ok),
        "momentum_labels": traj.conserved_labels,
        "momentum_series": np.column_stack([traj.times, traj.momentum]),
        "conserved_series": np.column_stack([traj.times, traj.conserved])
        if traj.conserved.shape[1]
        else [],
        "n_steps": traj.n_steps,
        "n_rhs_evals": traj.n_rhs_evals,
    }


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Execute a validated configuration and write its outputs."""
    start = time.time()
    out = resolve_output_dir(cfg)
    metric = cfg.build_metric()
    report = RunReport(config=cfg.to_dict())
    kind = cfg.experiment.kind

    if kind == "none":
        ev = GreensEvaluator(metric)
        masses = cfg.masses()
        if masses is None:
            state = dy.VortexState(cfg.positions(), cfg.strengths())
            traj = dy.integrate_trajectory(ev, state, cfg.T, cfg.tol, cfg.n_samples)
            times, positions = traj.times, traj.positions
            diag = _trajectory_diagnostics(cfg, traj)
        else:
            pos = cfg.positions()
            state = dy.MassVortexState(pos, np.zeros_like(pos), masses, cfg.strengths())
            times, positions, momenta, energy = dy.integrate_mass_trajectory(
                ev,
                state,
                cfg.T,
                cfg.tol,
                cfg.n_samples,
                include_self_robin=cfg.experiment.include_self_robin,
            )
            diag = {
                "config": cfg.to_dict(),
                "energy_initial": energy[0],
                "energy_final": energy[-1],
                "max_abs_energy_drift": float(np.abs(energy - energy[0]).max()),
                "n_samples": int(times.size),
            }
        traj_path = out / "trajectory.csv"
        write_trajectory_csv(traj_path, times, positions)
        _write_json(out / "diagnostics.json", diag)
        report.files += [str(traj_path), str(out / "diagnostics.json")]
        report.summary = {
            "energy_initial": diag["energy_initial"],
            "energy_final": diag["energy_final"],
            "max_abs_energy_drift": diag["max_abs_energy_drift"],
        }

    elif kind == "dipole":
        ev = GreensEvaluator(metric)
        v0 = cfg.vortices[0]
        s0 = v0.position()
        east, north = east_north_basis(s0)
        azim = np.deg2rad(cfg.experiment.direction_azimuth_deg)
        direction = np.cos(azim) * north + np.sin(azim) * east
        rows = []
        for i, eps in enumerate(cfg.experiment.epsilons):
            rep = ex.dipole_experiment(
                metric, s0, direction, eps, cfg.T, tol=cfg.tol, evaluator=ev
            )
            rows.append(rep)
            per_eps = out / f"dipole_eps{i}.csv"
            with open(per_eps, "w") as fh:
                fh.write("t,deviation,separation\n")
                for t, d, s in zip(rep.times, rep.deviations, rep.separations):
                    fh.write(f"{_fmt(t)},{_fmt(d)},{_fmt(s)}\n")
            report.files.append(str(per_eps))
        payload = {
            "config": cfg.to_dict(),
            "epsilons": [r.eps for r in rows],
            "strengths": [r.strength for r in rows],
            "initial_speeds": [r.initial_speed for r in rows],
            "max_deviations": [r.max_deviation for r in rows],
            "energy_drifts": [r.energy_drift for r in rows],
        }
        if len(rows) >= 2:
            payload["fitted_order"] = ex.fit_convergence_order(
                [r.eps for r in rows], [r.max_deviation for r in rows]
            )
        _write_json(out / "dipole_report.json", payload)
        report.files.append(str(out / "dipole_report.json"))
        report.summary = {k: payload[k] for k in payload if k != "config"}

    elif kind == "poincare":
        ev = GreensEvaluator(metric)
        state = dy.VortexState(cfg.positions(), cfg.strengths())
        sec = cfg.experiment.section
        spec = ex.SectionSpec(sec.coordinate, sec.level, sec.direction)
        record = ex.poincare_section(ev, state, spec, cfg.T, tol=cfg.tol)
        sec_path = out / "section.csv"
        write_section_csv(sec_path, record)
        payload = {
            "config": cfg.to_dict(),
            "n_crossings": record.n_crossings,
            "energy_spread": float(np.ptp(record.energies)) if record.n_crossings else 0.0,
            "max_section_residual": float(record.residuals.max()) if record.n_crossings else 0.0,
        }
        _write_json(out / "diagnostics.json", payload)
        report.files += [str(sec_path), str(out / "diagnostics.json")]
        report.summary = {k: payload[k] for k in payload if k != "config"}

    elif kind == "greens-table":
        ev = GreensEvaluator(metric)
        s0 = cfg.vortices[0].position()
        nlat, nlon = cfg.experiment.grid_size
        lats = np.linspace(-89.0, 89.0, nlat)
        lons = np.linspace(0.0, 360.0, nlon, endpoint=False)
        path = out / "greens_table.csv"
        with open(path, "w") as fh:
            fh.write("lat_deg,lon_deg,x,y,z,green,robin\n")
            for lat in lats:
                for lon in lons:
                    from .sphere import latlon_to_point

                    p = latlon_to_point(lat, lon)
                    g = ev.green(p, s0) if np.linalg.norm(p - s0) > 1e-8 else np.nan
                    r = ev.robin(p)
                    fh.write(
                        ",".join(
                            [_fmt(lat), _fmt(lon)]
                            + [_fmt(c) for c in p]
                            + [_fmt(g), _fmt(r)]
                        )
                        + "\n"
                    )
        report.files.append(str(path))
        report.summary = {"rows": int(nlat * nlon), "source": [cfg.vortices[0].lat, cfg.vortices[0].lon]}

    report.wall_time_s = time.time() - start
    _write_json(out / "run_report.json", report.to_dict())
    report.files.append(str(out / "run_report.json"))
    return report


def validate_report(report: RunReport) -> list[str]:
    """Check that every file a report lists exists and parses; returns issues."""
    issues = []
    for f in report.files:
        p = Path(f)
        if not p.exists():
            issues.append(f"missing file: {f}")
            continue
        if p.suffix == ".json":
            try:
                json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                issues.append(f"bad JSON in {f}: {exc}")
        elif p.suffix == ".csv":
            lines = p.read_text().strip().splitlines()
            if not lines:
                issues.append(f"empty CSV: {f}")
                continue
            ncol = len(lines[0].split(","))
            for i, line in enumerate(lines[1:], start=2):
                if len(line.split(",")) != ncol:
                    issues.append(f"ragged CSV row {i} in {f}")
                    break
    return issues


def _error_record(out_dir: Path | None, exc: Exception, code: int):
    payload = {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
    }
    if isinstance(exc, CollisionError):
        payload["pair"] = exc.pair
        payload["time"] = exc.time
    if out_dir is not None:
        try:
            _write_json(out_dir / "error.json", payload)
        except OSError:
            pass
    print(f"error: {payload['error']}: {payload['message']}", file=sys.stderr)


def _run_config_command(args, expected_kind: str | None) -> int:
    out_dir = None
    try:
        cfg = ScenarioConfig.load(args.config)
        if expected_kind is not None and cfg.experiment.kind != expected_kind:
            raise ConfigError(
                f"this subcommand needs experiment.kind = {expected_kind!r}, "
                f"got {cfg.experiment.kind!r}"
            )
    except (ConfigError, MetricError) as exc:
        _error_record(None, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    try:
        out_dir = resolve_output_dir(cfg)
        report = run_scenario(cfg)
    except (ConfigError, MetricError) as exc:
        _error_record(out_dir, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except (CollisionError, ShootingError, SurfVortexError, RuntimeError) as exc:
        _error_record(out_dir, exc, EXIT_RUNTIME)
        return EXIT_RUNTIME
    issues = validate_report(report)
    if issues:
        for issue in issues:
            print(f"report issue: {issue}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(report.files)} file(s) in {report.wall_time_s:.2f}s:")
    for f in report.files:
        print(f"  {f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="surfvortex",
        description="Point-vortex dynamics on closed genus-0 surfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in [
        ("simulate", None),
        ("dipole-test", "dipole"),
        ("poincare", "poincare"),
        ("greens-table", "greens-table"),
    ]:
        p = sub.add_parser(name, help=f"run a {name} scenario from a config file")
        p.add_argument("config", help="path to a YAML scenario configuration")
        p.set_defaults(kind=kind)
    pv = sub.add_parser("validate", help="run the invariant suite")
    pv.add_argument("--full", action="store_true", help="include the slow checks")
    pv.add_argument("--corrupt-robin", type=float, default=0.0, help=argparse.SUPPRESS)
    pv.add_argument("--only", default=None, help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.command == "validate":
        tweaks = checks.Tweaks(robin_offset=args.corrupt_robin)
        only = args.only.split(",") if args.only else None
        results = checks.validate_suite("full" if args.full else "quick", tweaks, only=only)
        failed = [r.name for r in results if not r.passed]
        if failed:
            print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
            return 1
        return EXIT_OK
    return _run_config_command(args, args.kind)


if __name__ == "__main__":
    sys.exit(main())
