"""Command-line front end: ``compute``, ``sweep`` and ``convergence``.

Exit codes: 0 success, 1 configuration error, 2 computation error. Failures
print a JSON error object on stdout. Output is deterministic: JSON keys are
sorted, floats use round-trip precision and no timestamps are written.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

from . import __version__
from .config import ExperimentConfig, SweepSpec, load_config, load_sweep
from .decoherence import E2_PRESETS, w_bb_zz_full, w_half_zz, w_sp
from .errors import ConfigError, SpdecohereError
from .oracle import mc_w1osc, nested_w1osc, thread_count
from .profiles import profile_from_grating, transform

__all__ = ["main", "build_parser", "compute_report", "sweep_rows", "convergence_report",
           "CONVENTION_NOTE", "CSV_HEADER"]

CSV_HEADER = ("param", "epsilon", "w_half_zz", "w_half_zz_over_eps0", "err_estimate")
CSV_HEADER_FULL = CSV_HEADER + ("w_bb_zz", "groove_ratio")

CONVENTION_NOTE = (
    "The value of e2 depends on the electromagnetic unit convention: gaussian e2 = alpha, "
    "heaviside (Heaviside-Lorentz) e2 = 4 pi alpha. For the N=1000, (v_y tan theta)^2 = 0.1 "
    "example the often quoted visibility |F| ~ 0.42 (W ~ 0.867) is not reproduced under either "
    "convention (W ~ 0.137 and W ~ 1.719 respectively). Results here evaluate the formulas "
    "as stated; they do not reproduce that constant."
)


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _profile(cfg: ExperimentConfig):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return profile_from_grating(cfg.grating, cfg.beam, cfg.proximity_threshold)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


# --------------------------------------------------------------------------
# compute
# --------------------------------------------------------------------------

def compute_report(cfg: ExperimentConfig) -> dict:
    br = w_sp(cfg.grating, cfg.beam, cfg.w_plane, cfg.mode, cfg.attenuate, cfg.quad,
              cfg.proximity_threshold)
    diag = br.diagnostics
    quad = diag["quadrature"]
    grating_part = br.w_sp - br.w_plane
    by_preset = {}
    for name, e2 in sorted(E2_PRESETS.items()):
        w = br.w_plane + grating_part * (e2 / cfg.e2)
        by_preset[name] = {"e2": e2, "w_sp": w, "visibility": math.exp(-w)}
    return {
        "status": "ok",
        "command": "compute",
        "tool": {"name": "spdecohere", "version": __version__},
        "config": cfg.to_dict(),
        "result": br.to_dict(),
        "flags": {
            "validity_violation": diag["two_r_bound_violated"],
            "proximity": diag["proximity"],
            "depth_not_small": diag["depth_not_small"],
            "quadrature_converged": all(v["converged"] for v in quad.values()),
        },
        "quadrature_errors": {k: v["error_estimate"] for k, v in quad.items()},
        "coupling_convention": {
            "e2": cfg.e2,
            "preset": cfg.e2_preset,
            "by_preset": by_preset,
            "note": CONVENTION_NOTE,
        },
    }


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def _point_config(cfg: ExperimentConfig, param: str, x: float) -> ExperimentConfig:
    if param == "R_over_tau":
        return cfg.with_overrides(R=x * cfg.tau_z)
    if param == "Tz_over_tau":
        return cfg.with_overrides(d=x * cfg.tau_z * cfg.v_y)
    if param == "N":
        return cfg.with_overrides(n_grooves=int(x))
    if param == "theta":
        return cfg.with_overrides(theta=x)
    if param == "v_y":
        return cfg.with_overrides(v_y=x)
    raise ConfigError(f"unknown sweep parameter {param!r}")


def _sweep_point(cfg: ExperimentConfig, sweep: SweepSpec, x: float) -> List[list]:
    try:
        pc = _point_config(cfg, sweep.param, x)
    except ConfigError as exc:
        raise ConfigError(f"sweep point {sweep.param}={x!r}: {exc}") from exc
    profile, t_z = _profile(pc)
    s = transform(profile)
    quad = pc.quad
    full = pc.mode == "full"
    base, _ = w_half_zz(s, pc.R, 0, pc.e2, quad, full_output=True)
    rows = []
    for eps in sweep.epsilons:
        wh, info = w_half_zz(s, pc.R, eps, pc.e2, quad, full_output=True)
        ratio = wh / base if base > 0 else float("nan")
        row = [x, eps, wh, ratio, info.error]
        if full:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                wbb = w_bb_zz_full(s, pc.R, eps, pc.n_grooves, t_z, pc.e2, quad, v_y=pc.v_y)
            denom = 2 * pc.n_grooves * wh
            row += [wbb, wbb / denom if denom > 0 else float("nan")]
        rows.append(row)
    return rows


def sweep_rows(cfg: ExperimentConfig, sweep: SweepSpec, threads: Optional[int] = None) -> List[list]:
    """All CSV rows, ordered by grid index then epsilon."""
    grid = [float(x) for x in sweep.grid()]
    workers = threads or thread_count()
    if workers == 1:
        parts = [_sweep_point(cfg, sweep, x) for x in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda x: _sweep_point(cfg, sweep, x), grid))
    return [row for part in parts for row in part]


def sweep_csv(cfg: ExperimentConfig, sweep: SweepSpec, threads: Optional[int] = None) -> str:
    header = CSV_HEADER_FULL if cfg.mode == "full" else CSV_HEADER
    lines = [",".join(header)]
    for row in sweep_rows(cfg, sweep, threads):
        cells = [_fmt(row[0]), str(int(row[1]))] + [_fmt(v) for v in row[2:]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# convergence
# --------------------------------------------------------------------------

def convergence_report(cfg: ExperimentConfig) -> dict:
    """Tolerance ladder for ``W_SP`` plus Monte Carlo and nested-quadrature oracle rows."""
    tols = [cfg.rel_tol * 100.0, cfg.rel_tol * 10.0, cfg.rel_tol]
    ladder = []
    for tol in tols:
        c = cfg.with_overrides(rel_tol=tol)
        br = w_sp(c.grating, c.beam, c.w_plane, c.mode, c.attenuate, c.quad, c.proximity_threshold)
        ladder.append({"rel_tol": tol, "w_sp": br.w_sp, "w_half_zz": br.w_half_zz})
    final = ladder[-1]["w_sp"]
    final_grating = final - cfg.w_plane
    limit = 10.0 * cfg.rel_tol * abs(final_grating)
    prev_diff = None
    for row in ladder:
        diff = row["w_sp"] - final
        row["diff_from_final"] = diff
        row["within_10x_final_tol"] = abs(diff) <= limit
        row["ratio_to_previous_diff"] = (diff / prev_diff) if prev_diff else None
        prev_diff = diff if diff != 0 else None

    profile, _ = _profile(cfg)
    primary = ladder[-1]["w_half_zz"]
    oracle_rows = []
    sample_ladder = sorted({10_000, 100_000, cfg.mc_samples})
    for n in sample_ladder:
        mc = mc_w1osc(profile, cfg.R, cfg.epsilon, cfg.e2, n, cfg.seed)
        gap = mc.estimate - primary
        z = gap / mc.std_error if mc.std_error > 0 else (0.0 if gap == 0 else math.inf)
        oracle_rows.append({"oracle": "monte_carlo", "samples": n, "seed": cfg.seed,
                            "estimate": mc.estimate, "std_error": mc.std_error,
                            "z_score": z, "within_3_sigma": abs(z) <= 3.0})
    nested = nested_w1osc(profile, cfg.R, cfg.epsilon, cfg.e2, 1e-7)
    rel = abs(nested.estimate - primary) / primary if primary > 0 else abs(nested.estimate)
    oracle_rows.append({"oracle": "nested_quadrature", "estimate": nested.estimate,
                        "error_bound": nested.std_error, "converged": nested.converged,
                        "relative_difference": rel, "within_1e-5": rel <= 1e-5})
    return {
        "status": "ok",
        "command": "convergence",
        "tool": {"name": "spdecohere", "version": __version__},
        "config": cfg.to_dict(),
        "ladder": ladder,
        "stable": all(r["within_10x_final_tol"] for r in ladder),
        "primary_w_half_zz": primary,
        "oracles": oracle_rows,
        "oracles_agree": all(r.get("within_3_sigma", r.get("within_1e-5")) for r in oracle_rows),
    }


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config file")
    common.add_argument("--out", help="output file (default: config output path or stdout)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed (unsigned 64-bit)")
    common.add_argument("--preset-e2", choices=sorted(E2_PRESETS), help="override e2 by convention")
    common.add_argument("--mode", choices=["approx", "full"], help="override model.mode")
    common.add_argument("--attenuate", action="store_true", help="apply exp(-4 pi z0/d)")
    p = argparse.ArgumentParser(prog="spdecohere", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("compute", parents=[common], help="JSON report for one configuration")
    sw = sub.add_parser("sweep", parents=[common], help="CSV over a parameter grid")
    sw.add_argument("--sweep", required=True, help="sweep spec file")
    sub.add_parser("convergence", parents=[common], help="tolerance ladder and oracle agreement")
    return p


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.preset_e2:
        changes["e2_preset"] = args.preset_e2
    if args.mode:
        changes["mode"] = "approximate" if args.mode == "approx" else "full"
    if args.attenuate:
        changes["attenuate"] = True
    if args.seed is not None:
        changes["seed"] = args.seed
    if not changes:
        return cfg
    try:
        return cfg.with_overrides(**changes)
    except SpdecohereError as exc:
        raise ConfigError(str(exc)) from exc


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(exc: Exception, code: int) -> int:
    sys.stdout.write(dumps({"status": "error", "exit_code": code,
                            "error": {"type": type(exc).__name__, "message": str(exc)}}))
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        sweep = load_sweep(args.sweep) if args.command == "sweep" else None
    except ConfigError as exc:
        return _error(exc, 1)
    try:
        if args.command == "compute":
            _write(dumps(compute_report(cfg)), args.out or cfg.json_out)
        elif args.command == "sweep":
            _write(sweep_csv(cfg, sweep), args.out or cfg.csv_out)
        else:
            _write(dumps(convergence_report(cfg)), args.out or cfg.json_out)
    except ConfigError as exc:
        return _error(exc, 1)
    except (SpdecohereError, ArithmeticError, ValueError, OSError) as exc:
        return _error(exc, 2)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
