"""Command-line front end: ``rydkick {gate,sweep,thermal,cycles,validity}``.

Every CSV starts with a header row; floats are written with 12 significant
digits and booleans as 0/1, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path

import contourpy
import numpy as np

from rydkick import gate
from rydkick.config import ConfigError, RunConfig, load_config
from rydkick.gate import GateParams
from rydkick.parallel import ordered_map

log = logging.getLogger("rydkick")

TWO_PI = 2 * math.pi

EXIT_OK, EXIT_CONFIG, EXIT_UNTRUSTED = 0, 1, 2

SWEEP_COLUMNS = (
    "theta", "theta_T_ho", "x0", "dt1", "alpha_plus_sq", "lambda", "F0", "phi_dyn",
    "phi_geom", "tau", "impulse_margin", "phase_margin", "linear_margin",
    "fast_x0_margin", "fast_dt_margin", "r_bound", "truncation_loss", "untrusted",
)
GATE_COLUMNS = SWEEP_COLUMNS + ("abs_alpha_00", "phi_00")
THERMAL_COLUMNS = ("theta", "theta_T_ho", "x0", "kT", "F", "n_levels", "untrusted")
CYCLE_COLUMNS = ("theta", "theta_T_ho", "x0", "N", "S", "F_N", "truncation_loss", "untrusted")
CONTOUR_COLUMNS = ("segment", "theta", "theta_T_ho", "x0")
REFERENCE_COLUMNS = ("theta", "theta_T_ho", "x0")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row[c]) for c in columns) + "\n")


@dataclass
class GateRun:
    record: dict
    outcome: gate.GateOutcome | None


def sweep_record(params: GateParams, keep_state: bool = False) -> GateRun:
    """Run the gate on |0> and collect one output row; failures become untrusted rows."""
    rec = {c: None for c in GATE_COLUMNS}
    rec.update(theta=params.theta, theta_T_ho=params.theta / TWO_PI, x0=params.x0,
               **{"lambda": params.quartic})
    try:
        alpha_sq, dt1 = params.resolved()
        budget = params.budget()
        report = gate.check_validity(params)
        out = gate.run_gate(params, 0)
    except (ValueError, ArithmeticError) as exc:
        log.warning("point theta=%g x0=%g failed: %s", params.theta, params.x0, exc)
        rec.update(F0=math.nan, untrusted=True)
        return GateRun(rec, None)
    rec.update(
        dt1=dt1, alpha_plus_sq=alpha_sq, F0=out.F_k, phi_dyn=budget.phi_dyn,
        phi_geom=budget.phi_geom, tau=budget.gate_time,
        impulse_margin=report.impulse_margin, phase_margin=report.phase_margin,
        linear_margin=report.linear_margin, fast_x0_margin=report.fast_x0_margin,
        fast_dt_margin=report.fast_dt_margin, r_bound=report.r_bound,
        truncation_loss=out.truncation_loss, untrusted=out.untrusted,
        abs_alpha_00=abs(out.alpha_kk), phi_00=out.phi_kk,
    )
    return GateRun(rec, out if keep_state else None)


def _sweep_row(params: GateParams) -> dict:
    return sweep_record(params).record


def reference_x0(theta, phi_target: float):
    """Factor-ten linearisation curve x0 = 10 sqrt(|phi|/theta)."""
    return 10.0 * np.sqrt(abs(phi_target) / np.asarray(theta, dtype=float))


def extract_contours(thetas, x0s, fidelity, level: float) -> list[np.ndarray]:
    """Marching-squares iso-lines of ``fidelity[i_theta, j_x0]``; each row is (theta, x0)."""
    z = np.ma.masked_invalid(np.asarray(fidelity, dtype=float))
    gen = contourpy.contour_generator(x=np.asarray(x0s), y=np.asarray(thetas), z=z,
                                      name="serial")
    return [np.column_stack([seg[:, 1], seg[:, 0]]) for seg in gen.lines(level)]


def _require_points(cfg: RunConfig, what: str):
    if not cfg.points():
        raise ConfigError(f"[protocol].theta: {what} needs theta and x0 values")


def cmd_gate(cfg: RunConfig, out: Path, jobs: int, dump: bool) -> int:
    _require_points(cfg, "gate")
    points = cfg.points()
    if len(points) != 1:
        raise ConfigError("[protocol].theta_range: gate mode takes a single (theta, x0) point")
    params = cfg.gate_params(*points[0])
    params.resolved()
    run = sweep_record(params, keep_state=True)
    rec = run.record
    write_csv(out / "gate.csv", GATE_COLUMNS, [rec])
    if run.outcome is None:
        print("gate run failed; see log", file=sys.stderr)
        return EXIT_UNTRUSTED
    if dump:
        run.outcome.final_state.save_csv(out / "wavefunction.csv")
    lines = [
        f"theta       = {rec['theta']:.6g} rad ({rec['theta_T_ho']:.6g} T_ho)",
        f"x0          = {rec['x0']:.6g}",
        f"dt1         = {rec['dt1']:.6g}",
        f"alpha+^2    = {rec['alpha_plus_sq']:.6g}",
        f"phi target  = {params.phi_target:.6g}",
        f"phi_dyn     = {rec['phi_dyn']:.6g}",
        f"phi_geom    = {rec['phi_geom']:.6g}",
        f"tau         = {rec['tau']:.6g} ({rec['tau'] / TWO_PI:.6g} T_ho)",
        f"|alpha_00|  = {rec['abs_alpha_00']:.10f}",
        f"phi_00      = {rec['phi_00']:.10f}",
        f"F0          = {rec['F0']:.10f}",
        f"trunc. loss = {rec['truncation_loss']:.3e}",
        f"untrusted   = {bool(rec['untrusted'])}",
    ]
    print("\n".join(lines))
    return EXIT_UNTRUSTED if rec["untrusted"] else EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int, dump: bool) -> int:
    _require_points(cfg, "sweep")
    params = cfg.all_params()
    rows = ordered_map(_sweep_row, params, jobs)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    p = cfg.protocol
    thetas = np.array(p.thetas)
    if not p.param_sets and len(p.thetas) >= 2 and len(p.x0s) >= 2:
        grid = np.array([r["F0"] for r in rows]).reshape(len(p.thetas), len(p.x0s))
        for level in cfg.analysis.contour_levels:
            segs = extract_contours(p.thetas, p.x0s, grid, level)
            crow = [dict(segment=i, theta=t, theta_T_ho=t / TWO_PI, x0=x)
                    for i, seg in enumerate(segs) for t, x in seg]
            write_csv(out / f"contours_{level:g}.csv", CONTOUR_COLUMNS, crow)
    if len(thetas):
        ref = [dict(theta=t, theta_T_ho=t / TWO_PI, x0=x)
               for t, x in zip(thetas, reference_x0(thetas, p.phi_target))]
        write_csv(out / "reference_curve.csv", REFERENCE_COLUMNS, ref)
    bad = sum(bool(r["untrusted"]) for r in rows)
    print(f"{len(rows)} points written to {out / 'sweep.csv'}; {bad} untrusted")
    return EXIT_UNTRUSTED if bad else EXIT_OK


def _level_task(task):
    params, k = task
    out = gate.run_gate(params, k)
    return out.F_k, out.untrusted


def cmd_thermal(cfg: RunConfig, out: Path, jobs: int, dump: bool) -> int:
    _require_points(cfg, "thermal")
    temps = cfg.analysis.temperatures
    if not temps:
        raise ConfigError("[analysis].temperatures: thermal mode needs a non-empty list")
    n_levels = max(gate.thermal_levels(t) for t in temps)
    params = [cfg.gate_params(*pt) for pt in cfg.points()]
    n_max = max(cfg.numerics.n_max, n_levels - 1)
    params = [replace(p, n_max=n_max) for p in params]
    tasks = [(p, k) for p in params for k in range(n_levels)]
    results = ordered_map(_level_task, tasks, jobs)
    rows = []
    any_bad = False
    for i, p in enumerate(params):
        chunk = results[i * n_levels:(i + 1) * n_levels]
        level_F = np.array([r[0] for r in chunk])
        base = dict(theta=p.theta, theta_T_ho=p.theta / TWO_PI, x0=p.x0)
        rows.append(dict(base, kT=0.0, F=level_F[0], n_levels=1, untrusted=chunk[0][1]))
        for t in temps:
            res = gate.fidelity_thermal(p, t, level_F=level_F)
            bad = any(r[1] for r in chunk[:res.n_levels])
            any_bad = any_bad or bad
            rows.append(dict(base, kT=t, F=res.fidelity, n_levels=res.n_levels, untrusted=bad))
    write_csv(out / "thermal.csv", THERMAL_COLUMNS, rows)
    print(f"{len(rows)} rows written to {out / 'thermal.csv'} ({n_levels} levels max)")
    return EXIT_UNTRUSTED if any_bad else EXIT_OK


def _cycle_rows(params: GateParams, n_cycles: int, jobs: int = 1) -> list[dict]:
    base = dict(theta=params.theta, theta_T_ho=params.theta / TWO_PI, x0=params.x0)
    return [dict(base, N=r.n, S=r.entropy, F_N=r.fidelity, truncation_loss=r.truncation_loss,
                 untrusted=r.untrusted)
            for r in gate.iterate_cycles(params, n_cycles, jobs=jobs)]


def cmd_cycles(cfg: RunConfig, out: Path, jobs: int, dump: bool) -> int:
    _require_points(cfg, "cycles")
    params = cfg.all_params()
    n = cfg.analysis.n_cycles
    if len(params) == 1:
        # parallelise over the Fock levels instead of the parameter points
        chunks = [_cycle_rows(params[0], n, jobs)]
    else:
        chunks = ordered_map(partial(_cycle_rows, n_cycles=n), params, jobs)
    rows = [r for chunk in chunks for r in chunk]
    write_csv(out / "cycles.csv", CYCLE_COLUMNS, rows)
    bad = any(r["untrusted"] for r in rows)
    print(f"{len(rows)} rows written to {out / 'cycles.csv'}")
    return EXIT_UNTRUSTED if bad else EXIT_OK


def _mark(ok: bool | None) -> str:
    return "" if ok is None else ("PASS" if ok else "WARN")


def validity_rows(cfg: RunConfig) -> list[tuple[str, GateParams]]:
    """Labelled parameter points for the validity table."""
    rows = [(f"point{i}", cfg.gate_params(t, x)) for i, (t, x) in enumerate(cfg.points())]
    alpha_sq = cfg.alpha_plus_sq()
    design = cfg.design_point() if alpha_sq else None
    if cfg.protocol.design is not None and not alpha_sq:
        log.warning("factor-ten design needs a non-zero coupling; skipped")
    if design is not None:
        rows.append(("design", _with_alpha(cfg, design.theta, design.x0)))
        if cfg.physical is not None and cfg.physical.lattice_wavelength is not None:
            x_lat = cfg.scales.lattice_separation()
            rows.append(("lattice", _with_alpha(cfg, design.theta, x_lat)))
    return rows


def _with_alpha(cfg: RunConfig, theta: float, x0: float) -> GateParams:
    return GateParams(theta=theta, x0=x0, alpha_plus_sq=cfg.alpha_plus_sq(),
                      phi_target=cfg.protocol.phi_target, quartic=cfg.protocol.quartic,
                      n_max=cfg.numerics.n_max)


def format_validity(cfg: RunConfig) -> str:
    lines = []
    if cfg.physical is not None:
        sc = cfg.scales
        lines += [
            f"a_ho                  = {sc.osc_length:.6g} m",
            f"(mu/m_e)/(a_ho/a0)    = {sc.mass_ratio_over_length:.6g}",
            f"alpha+^2              = {sc.alpha_plus_sq:.6g}",
        ]
        if cfg.physical.lattice_wavelength is not None:
            lines.append(f"lattice x0            = {sc.lattice_separation():.6g}")
    elif cfg.protocol.alpha_plus_sq is not None:
        lines.append(f"alpha+^2              = {cfg.protocol.alpha_plus_sq:.6g}")
    names = ("impulse_margin", "phase_margin", "linear_margin", "fast_x0_margin",
             "fast_dt_margin", "rabi_margin")
    for label, p in validity_rows(cfg):
        rep = gate.check_validity(p, rabi=cfg.rabi)
        status = rep.status()
        if p.alpha_plus_sq == 0 and p.action > 0:
            dt1, tau = math.inf, math.inf
        else:
            _, dt1 = p.resolved()
            tau = p.budget().gate_time
        lines += [
            "",
            f"[{label}]",
            f"theta                 = {p.theta:.6g} rad ({p.theta / TWO_PI:.6g} T_ho)",
            f"x0                    = {p.x0:.6g}",
            f"dt1                   = {dt1:.6g}",
            f"tau                   = {tau:.6g} ({tau / TWO_PI:.6g} T_ho)",
            f"tau fast limit 2theta = {2 * p.theta:.6g} ({2 * p.theta / TWO_PI:.6g} T_ho)",
            f"R bound               = {rep.r_bound:.6g}",
        ]
        for name in names:
            value = getattr(rep, name)
            if value is None:
                lines.append(f"{name:<21} = n/a")
            elif name == "rabi_margin" and math.isinf(value):
                lines.append(f"{name:<21} = inf  PASS (unconditionally valid)")
            else:
                lines.append(f"{name:<21} = {value:.6g}  {_mark(status.get(name))}")
    return "\n".join(lines) + "\n"


def cmd_validity(cfg: RunConfig, out: Path, jobs: int, dump: bool) -> int:
    if not cfg.points() and cfg.protocol.design is None:
        raise ConfigError("[protocol].design: validity needs points or design = 'factor_ten'")
    text = format_validity(cfg)
    with open(out / "validity.txt", "w", newline="\n") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "gate": cmd_gate,
    "sweep": cmd_sweep,
    "thermal": cmd_thermal,
    "cycles": cmd_cycles,
    "validity": cmd_validity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydkick", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes; results are identical for any value")
        p.add_argument("--dump-wavefunction", action="store_true",
                       help="write the final wavefunction (gate mode)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        mode = cfg.analysis.mode
        if mode is not None and mode != args.command:
            raise ConfigError(f"[analysis].mode: config is for {mode!r}, not {args.command!r}")
        if args.jobs < 1:
            raise ConfigError(f"--jobs: must be >= 1, got {args.jobs}")
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.jobs, args.dump_wavefunction)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
