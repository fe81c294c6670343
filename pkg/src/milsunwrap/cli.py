"""Command-line entry point: ``milsunwrap {unwrap,curves,roc,calibrate,reconstruct,rerun}``.

Every run writes ``manifest.json`` next to its outputs; ``milsunwrap rerun
manifest.json`` replays it and reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from milsunwrap import __version__
from milsunwrap.model import ConfigurationError, SystemConfig, case_study_config, load_config
from milsunwrap.montecarlo import (
    DEFAULT_TRIALS,
    MIN_ACCR,
    ThresholdTable,
    calibrate_from_pool,
    check_trial_count,
    draw_unit_trials,
    performance_grid,
    phase_variance_db,
    roc_from_pool,
    simulate_pool,
    write_roc_csv,
)
from milsunwrap.scene import Mode, TargetScene, generate_ship_target, reconstruct, synthesize_phases
from milsunwrap.solver import integer_bounds, solver_for

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_UNREACHABLE = 4

DEFAULT_SNRS = [15.0, 20.0, 25.0, 30.0, 35.0]
_MODES = {"none": Mode.NO_UNWRAP, "before": Mode.BEFORE_AR, "after": Mode.AFTER_AR}


class InputError(ValueError):
    pass


def _resolve_config(args) -> SystemConfig:
    if getattr(args, "config_dict", None) is not None:
        return SystemConfig.from_dict(args.config_dict)
    if args.config is None:
        return case_study_config()
    return load_config(args.config)


def _snrs(args) -> list[float]:
    return args.snr if args.snr else DEFAULT_SNRS


def _read_phases(path: Path, config: SystemConfig, snr_db: float | None):
    """Phase rows in channel order, plus one SNR per row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        snr_col = header.index("snr_db") if "snr_db" in header else None
        id_col = header.index("id") if "id" in header else None
        names = config.channel_names
        if set(names) <= set(header):
            phase_cols = [header.index(n) for n in names]
        else:
            phase_cols = [i for i in range(len(header)) if i not in (snr_col, id_col)]
        if len(phase_cols) != config.n_channels:
            raise InputError(
                f"{path}: {len(phase_cols)} phase columns but the configuration has {config.n_channels} channels"
            )
        ys, snrs = [], []
        for rowno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                y = [float(row[i]) for i in phase_cols]
            except (ValueError, IndexError):
                raise InputError(f"{path}: row {rowno}: malformed phase value") from None
            for v in y:
                if not -math.pi <= v < math.pi:
                    raise InputError(f"{path}: row {rowno}: phase outside [-pi, pi): {v}")
            if snr_col is not None and row[snr_col].strip():
                s = float(row[snr_col])
            elif snr_db is not None:
                s = snr_db
            else:
                raise InputError(f"{path}: row {rowno}: no SNR (pass --snr or add an snr_db column)")
            ys.append(y)
            snrs.append(s)
    return np.array(ys, dtype=float).reshape(-1, config.n_channels), np.array(snrs)


def cmd_unwrap(args, config: SystemConfig) -> list[Path]:
    snr = args.snr[0] if args.snr else None
    Y, snrs = _read_phases(Path(args.phases), config, snr)
    thr = 0.0 if args.ap_thr is None else args.ap_thr
    names = config.channel_names
    out = Path(args.out_dir) / "solutions.csv"
    rows = []
    for s in np.unique(snrs):
        idx_rows = np.flatnonzero(snrs == s)
        s2 = phase_variance_db(s)
        solver = solver_for(config, tuple(integer_bounds(config, math.sqrt(s2))))
        idx, cost, ap, _, b = solver.solve_many(Y[idx_rows], 1.0 / s2)
        for k, r in enumerate(idx_rows):
            rows.append((r, idx[k], cost[k], ap[k], b[k], solver.grid))
    rows.sort(key=lambda t: t[0])
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row"] + [f"k_hat_{n}" for n in names] + ["xi1_hat_m", "xi3_hat_m", "cost", "ap", "accepted"])
        for r, i, c, a, b, grid in rows:
            if i < 0:
                w.writerow([r] + [""] * len(names) + ["nan", "nan", "nan", "nan", 0])
                continue
            w.writerow([r] + grid[i].tolist() + [f"{b[0]:.4f}", f"{b[1]:.4f}", f"{c:.6f}", f"{a:.6f}", int(a >= thr)])
    return [out]


def cmd_curves(args, config: SystemConfig) -> list[Path]:
    grid = performance_grid(config, _snrs(args), None, args.trials, args.seed, args.threads)
    out = Path(args.out_dir) / "grid.csv"
    grid.to_csv(out)
    return [out]


def cmd_roc(args, config: SystemConfig) -> list[Path]:
    check_trial_count(args.trials)
    draws = draw_unit_trials(config, args.trials, args.seed)
    curves = {s: roc_from_pool(simulate_pool(config, s, args.trials, args.seed, args.threads, draws)) for s in _snrs(args)}
    out = Path(args.out_dir) / "roc.csv"
    write_roc_csv(curves, out)
    return [out]


def _calibrate(args, config, snrs) -> ThresholdTable:
    check_trial_count(args.trials)
    draws = draw_unit_trials(config, args.trials, args.seed)
    entries = tuple(
        calibrate_from_pool(simulate_pool(config, s, args.trials, args.seed, args.threads, draws), args.cofar)
        for s in snrs
    )
    return ThresholdTable(args.cofar, entries)


def cmd_calibrate(args, config: SystemConfig) -> list[Path]:
    table = _calibrate(args, config, _snrs(args))
    out = Path(args.out_dir) / "thresholds.csv"
    table.to_csv(out)
    args._unreachable = [e.snr_db for e in table.entries if not e.reachable]
    return [out]


def cmd_reconstruct(args, config: SystemConfig) -> list[Path]:
    out_dir = Path(args.out_dir)
    if args.generate_ship:
        scene = generate_ship_target(args.seed, args.n_points, tuple(args.ship_dims), args.scene_snr)
    elif args.scene:
        scene = TargetScene.from_csv(args.scene, default_snr_db=args.scene_snr)
    else:
        raise InputError("pass --scene CSV or --generate-ship")
    try:
        obs = synthesize_phases(scene, config, args.seed + 1)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    mode = _MODES[args.mode]
    table = None
    outputs = []
    if mode is Mode.AFTER_AR and args.ap_thr is None:
        if args.cofar is None:
            raise InputError("--mode after needs --cofar or --ap-thr")
        table = _calibrate(args, config, sorted(set(scene.snr_db.tolist())))
        table.to_csv(out_dir / "thresholds.csv")
        outputs.append(out_dir / "thresholds.csv")
        args._unreachable = [e.snr_db for e in table.entries if not e.reachable]
    report = reconstruct(obs, config, mode, ap_thr=args.ap_thr, thresholds=table)
    report.to_json(out_dir / "report.json")
    report.to_csv(out_dir / "points.csv")
    return outputs + [out_dir / "report.json", out_dir / "points.csv"]


COMMANDS = {
    "unwrap": cmd_unwrap,
    "curves": cmd_curves,
    "roc": cmd_roc,
    "calibrate": cmd_calibrate,
    "reconstruct": cmd_reconstruct,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="milsunwrap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="system configuration JSON (default: bundled case study)")
    common.add_argument("--seed", type=int, default=0, help="master random seed (default: 0)")
    common.add_argument("--out-dir", default=".", help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it (default: 1)")
    common.add_argument("--snr", type=float, action="append", help="SNR in dB, repeatable")

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help=f"Monte Carlo trials per SNR (default: {DEFAULT_TRIALS})")

    u = sub.add_parser("unwrap", parents=[common], help="solve scatterers from a CSV of wrapped phases")
    u.add_argument("--phases", required=True, help="CSV with one column per channel (optional snr_db column)")
    u.add_argument("--ap-thr", type=float, help="acceptance threshold on AP (default: accept all)")

    sub.add_parser("curves", parents=[common, mc], help=f"AccR/CoFaR grid -> grid.csv (default SNRs {DEFAULT_SNRS})")
    sub.add_parser("roc", parents=[common, mc], help="CoFaR-vs-AccR curves -> roc.csv")

    c = sub.add_parser("calibrate", parents=[common, mc], help="fixed-CoFaR thresholds -> thresholds.csv")
    c.add_argument("--cofar", type=float, default=0.05, help="target conditional failure rate (default: 0.05)")

    r = sub.add_parser("reconstruct", parents=[common, mc], help="point-cloud reconstruction -> report.json, points.csv")
    r.add_argument("--scene", help="scatterer CSV (xi1_m, xi2_m, xi3_m, snr_db)")
    r.add_argument("--generate-ship", action="store_true", help="use the procedural ship target")
    r.add_argument("--n-points", type=int, default=312, help="ship scatterer count (default: 312)")
    r.add_argument("--ship-dims", type=float, nargs=3, default=[60.0, 10.0, 15.0], metavar=("L", "W", "H"),
                   help="ship dimensions in metres (default: 60 10 15)")
    r.add_argument("--scene-snr", type=float, default=25.0, help="SNR for scatterers without one (default: 25)")
    r.add_argument("--mode", choices=sorted(_MODES), default="after", help="processing mode (default: after)")
    r.add_argument("--cofar", type=float, help="target CoFaR for --mode after")
    r.add_argument("--ap-thr", type=float, help="fixed AP threshold for --mode after")

    rr = sub.add_parser("rerun", help="replay a manifest.json")
    rr.add_argument("manifest")
    rr.add_argument("--out-dir", help="write outputs here instead of the recorded directory")
    return p


def _run(args) -> int:
    config = _resolve_config(args)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs = COMMANDS[args.command](args, config)
    params = {k: v for k, v in vars(args).items() if not k.startswith("_") and k not in ("config_dict", "config")}
    manifest = {
        "command": args.command,
        "arguments": params,
        "config": config.to_dict(),
        "seed": args.seed,
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "duration_s": round(time.perf_counter() - t0, 3),
    }
    with open(Path(args.out_dir) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    unreachable = getattr(args, "_unreachable", [])
    if unreachable:
        print(f"target CoFaR unreachable at SNR {unreachable} dB (AccR >= {MIN_ACCR:.0%})", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


def _from_manifest(path: str, out_dir: str | None) -> argparse.Namespace:
    with open(path) as fh:
        m = json.load(fh)
    ns = argparse.Namespace(**m["arguments"])
    ns.config = None
    ns.config_dict = m["config"]
    if out_dir is not None:
        ns.out_dir = out_dir
    return ns


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            args = _from_manifest(args.manifest, args.out_dir)
        return _run(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
