"""Command-line entry point: ``nvmag <subcommand> [options]``.

Exit codes: 0 ok, 2 usage error, 3 solver/model error, 4 fit error.
Results go to stdout as JSON (pretty by default, one line with ``--json``);
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as nio
from .bench import run_bench
from .core import NVParams
from .errors import DomainError, FitError, NVMagError, SolverError
from .forward import FieldVector, ResonancePair, axis_angles, resonances_all_axes
from .inverse import (
    HyperfineMode,
    aligned_field_approx,
    field_magnitude_sq,
    invert_pair,
    uncertainty_budget,
)
from .lineshape import MODELS, fit_spectrum, sensitivity
from .vector import (
    calibration_rotation,
    group_hyperfine,
    pair_lines,
    pair_resonances_consistent,
    reconstruct_report,
    symmetry_images,
)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_FIT = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _vec(text: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(" ", "").split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if v.shape != (3,):
        raise argparse.ArgumentTypeError(f"expected three components, got {text!r}")
    return v


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected f_l,f_u, got {text!r}") from None
    return a, b


# --------------------------------------------------------------------------
# shared helpers


def _config(args) -> nio.RunConfig:
    cfg = nio.RunConfig.load(args.config) if getattr(args, "config", None) else nio.RunConfig()
    return cfg.with_overrides(
        d_mhz=getattr(args, "d_mhz", None),
        e_mhz=getattr(args, "e_mhz", None),
        gamma_mhz_per_mt=getattr(args, "gamma_mhz_per_mt", None),
    )


def _emit(args, kind: str, payload: dict) -> None:
    sys.stdout.write(nio.dumps(nio.envelope(kind, payload), compact=getattr(args, "json", False)))
    sys.stdout.write("\n")


def _field_from_args(args) -> FieldVector:
    if args.b is not None:
        if args.along is not None:
            return FieldVector(args.b, tuple(args.along / np.linalg.norm(args.along)))
        return FieldVector.from_spherical(args.b, math.radians(args.theta), math.radians(args.phi))
    return FieldVector.from_components(args.bx, args.by, args.bz)


def _field_dict(fv: FieldVector) -> dict:
    return {
        "b_mt": fv.b_mt,
        "b_hat": list(fv.b_hat),
        "b_vec_mt": list(fv.vector),
        "sigma_b_mt": fv.sigma_b_mt,
        "ssr": fv.ssr,
        "signs": list(fv.signs),
    }


def _pairs_dicts(params: NVParams, fv: FieldVector) -> list[dict]:
    out = []
    for k, (pair, th) in enumerate(zip(resonances_all_axes(params, fv), axis_angles(fv.b_hat))):
        out.append(
            {"axis": k + 1, "theta_deg": math.degrees(th), "f_l_mhz": pair.f_l_mhz, "f_u_mhz": pair.f_u_mhz}
        )
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_forward(args, cfg: nio.RunConfig) -> int:
    params = cfg.params
    if args.sweep:
        grid = np.linspace(args.start, args.stop, args.num)
        cols = [args.sweep + ("_mt" if args.sweep == "b" else "_deg")]
        for k in range(4):
            cols += [f"f_l{k + 1}_mhz", f"f_u{k + 1}_mhz"]
        rows = []
        for g in grid:
            b = g if args.sweep == "b" else (args.b if args.b is not None else 10.0)
            theta = g if args.sweep == "theta" else args.theta
            phi = g if args.sweep == "phi" else args.phi
            if args.sweep == "b" and args.along is not None:
                fv = FieldVector(b, tuple(args.along / np.linalg.norm(args.along)))
            else:
                fv = FieldVector.from_spherical(b, math.radians(theta), math.radians(phi))
            pairs = resonances_all_axes(params, fv)
            rows.append([float(g)] + [f for p in pairs for f in (p.f_l_mhz, p.f_u_mhz)])
        nio.write_table_csv(sys.stdout, cols, rows)
        return EXIT_OK
    fv = _field_from_args(args)
    _emit(
        args,
        "forward",
        {"params": nio.params_dict(params), "field": _field_dict(fv), "pairs": _pairs_dicts(params, fv)},
    )
    return EXIT_OK


def cmd_inverse(args, cfg: nio.RunConfig) -> int:
    params = cfg.params
    f_l, f_u = sorted((args.f_l, args.f_u))
    pair = ResonancePair(f_l, f_u, args.sigma_l, args.sigma_u)
    g = params.gamma_mhz_per_mt
    x = field_magnitude_sq(params, pair)
    out = {"params": nio.params_dict(params), "f_l_mhz": f_l, "f_u_mhz": f_u}
    out["b_mt"] = math.sqrt(x.value) / g
    out["sigma_b_mt"] = math.sqrt(x.variance / (4 * x.value)) / g if x.value > 0 else 0.0
    if x.value > 0:
        m = invert_pair(params, pair)
        out.update(
            cos_sq_theta=m.cos_sq_theta,
            sigma_cos_sq_theta=math.sqrt(m.var_cos_sq),
            theta_deg=math.degrees(m.theta_rad),
        )
    try:
        out["b_aligned_approx_mt"] = aligned_field_approx(params, pair)
    except SolverError:
        out["b_aligned_approx_mt"] = None
    _emit(args, "inverse", out)
    return EXIT_OK


def _read_input(path: str):
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    text = text.strip()
    if text.startswith("{"):
        import json

        doc = json.loads(text)
        if "pairs" in doc:
            return None, [(p["f_l_mhz"], p["f_u_mhz"]) for p in doc["pairs"]]
        if "lines_mhz" in doc:
            return [float(v) for v in doc["lines_mhz"]], None
        raise UsageError("input JSON needs 'pairs' or 'lines_mhz'")
    vals = [float(t) for t in re.split(r"[,\s]+", text) if t and not t.startswith("#")]
    return vals, None


def cmd_reconstruct(args, cfg: nio.RunConfig) -> int:
    params = cfg.params
    hyper = HyperfineMode(args.hyperfine) if args.hyperfine else cfg.hyperfine
    weighted = cfg.weighted and not args.unweighted
    lines, pairs_in = list(args.lines), None
    if args.pairs:
        pairs_in = list(args.pairs)
    if args.input:
        lines_f, pairs_f = _read_input(args.input)
        lines = lines + (lines_f or [])
        pairs_in = (pairs_in or []) + (pairs_f or [])
    if pairs_in and lines:
        raise UsageError("give either lines or pairs, not both")
    sig = args.sigma
    if pairs_in:
        if len(pairs_in) not in (3, 4):
            raise UsageError(f"need 3 or 4 pairs, got {len(pairs_in)}")
        pairs = [ResonancePair(min(p), max(p), sig, sig) for p in pairs_in]
        lines_used = None
    else:
        n = hyper.line_count
        if len(lines) not in (6 * n, 8 * n):
            raise UsageError(f"need {6 * n} or {8 * n} lines, got {len(lines)}")
        sigmas = np.full(len(lines), sig)
        f, s = np.asarray(lines, float), sigmas
        if hyper is not HyperfineMode.NONE:
            f, s = group_hyperfine(f, hyper, s)
        lines_used = list(f)
        if args.consistent_pairing:
            pairs = pair_resonances_consistent(params, f, s)
        else:
            pairs = pair_lines(params, f, s, weighted)
    rec = reconstruct_report(params, pairs, weighted=weighted)
    out = {
        "params": nio.params_dict(params),
        "weighted": weighted,
        "hyperfine": hyper.value,
        "field": _field_dict(rec.field),
        "axes": rec.axis_rows(params.gamma_mhz_per_mt),
    }
    if lines_used is not None:
        out["lines_mhz"] = lines_used
    if args.symmetry or cfg.symmetry_output:
        imgs = symmetry_images(rec.field)
        out["images"] = [{"b_hat": list(v.b_hat), "b_vec_mt": list(v.vector)} for v in imgs]
    _emit(args, "reconstruct", out)
    return EXIT_OK


def _power_of(path: Path, meta: dict) -> float:
    for key in ("power_dbm", "mw_power_dbm", "power"):
        if key in meta:
            return float(meta[key])
    m = re.search(r"(-?\d+(?:\.\d+)?)\s*dbm", path.stem, re.IGNORECASE)
    return float(m.group(1)) if m else float("nan")


def _fit_file(job):
    path, model, photon_rate, gamma = job
    spec, meta = nio.read_spectrum_csv(path)
    rows = []
    for fit in fit_spectrum(spec, model):
        row = {
            "file": Path(path).name,
            "power_dbm": _power_of(Path(path), meta),
            "model": fit.model,
            "f_res_mhz": fit.f_res_mhz,
            "contrast": fit.contrast,
            "alpha_v_mhz": fit.alpha_v,
            "alpha_l_mhz": fit.alpha_l,
            "alpha_g_mhz": fit.alpha_g,
            "sigma_g_mhz": fit.sigma_g,
            "nu_l_mhz": fit.nu_l,
            "d": fit.d,
            "r_squared": fit.r_squared,
            "converged": fit.converged,
            "stderr": {k + ("" if k in ("contrast", "amplitude", "baseline", "baseline_slope") else "_mhz"): v
                       for k, v in fit.stderr().items()},
        }
        if photon_rate is not None:
            rep = sensitivity(fit, photon_rate, gamma)
            row["max_slope_per_mhz"] = rep.max_slope
            row["eta_t_per_sqrt_hz"] = rep.eta_t_per_sqrt_hz
            row["eta_ut_per_sqrt_hz"] = rep.eta_ut_per_sqrt_hz
        rows.append(row)
    return rows


TABLE_COLUMNS = [
    "file", "power_dbm", "f_res_mhz", "contrast", "alpha_v_mhz", "alpha_l_mhz",
    "alpha_g_mhz", "d", "r_squared", "eta_ut_per_sqrt_hz",
]  # fmt: skip


def cmd_fit(args, cfg: nio.RunConfig) -> int:
    target = Path(args.path)
    gamma = cfg.params.gamma_mhz_per_mt
    if target.is_dir():
        files = sorted(p for p in target.iterdir() if p.suffix.lower() == ".csv")
        if not files:
            raise UsageError(f"no .csv spectra in {target}")
    elif target.is_file():
        files = [target]
    else:
        raise UsageError(f"no such file or directory: {target}")
    jobs = [(str(p), args.model, args.photon_rate, gamma) for p in files]
    n_jobs = max(1, getattr(args, "jobs", 1) or 1)
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_fit_file, jobs))
    else:
        results = [_fit_file(j) for j in jobs]
    rows = [r for rs in results for r in rs]
    if target.is_dir():
        rows.sort(key=lambda r: (np.nan_to_num(r["power_dbm"], nan=np.inf), r["file"], r["f_res_mhz"]))
    if args.table:
        nio.write_table_csv(sys.stdout, TABLE_COLUMNS, ([r.get(c, float("nan")) for c in TABLE_COLUMNS] for r in rows))
        return EXIT_OK
    _emit(args, "fit", {"model": args.model, "photon_rate_per_s": args.photon_rate, "lines": rows})
    return EXIT_OK


def cmd_budget(args, cfg: nio.RunConfig) -> int:
    params = cfg.params
    bud = uncertainty_budget(
        params, args.b_mt, math.radians(args.theta_deg), args.fit_sigma_mhz, sigma_g=args.sigma_g
    )
    ut = bud.absolute_ut()
    items = [{"source": k, "relative": v, "delta_b_ut": ut[k]} for k, v in bud.relative.items()]
    _emit(
        args,
        "budget",
        {
            "params": nio.params_dict(params),
            "b_mt": args.b_mt,
            "theta_deg": args.theta_deg,
            "fit_sigma_mhz": args.fit_sigma_mhz,
            "items": items,
        },
    )
    return EXIT_OK


def cmd_symmetry(args, cfg: nio.RunConfig) -> int:
    fv = _field_from_args(args)
    imgs = symmetry_images(fv)
    _emit(
        args,
        "symmetry",
        {
            "field": _field_dict(fv),
            "orbit_size": len(imgs),
            "images": [{"b_hat": list(v.b_hat), "b_vec_mt": list(v.vector)} for v in imgs],
        },
    )
    return EXIT_OK


def cmd_calibrate(args, cfg: nio.RunConfig) -> int:
    if len(args.measured) != 2 or len(args.target) != 2:
        raise UsageError("need exactly two --measured and two --target vectors")
    cal = calibration_rotation(args.measured, args.target, use_symmetry=args.symmetry)
    _emit(
        args,
        "calibrate",
        {
            "rotation": [list(r) for r in cal.rotation],
            "measured_angle_deg": cal.measured_angle_deg,
            "target_angle_deg": cal.target_angle_deg,
            "angle_mismatch_deg": cal.angle_mismatch_deg,
            "image_index": cal.image_index,
            "residual_rad": cal.residual_rad,
        },
    )
    return EXIT_OK


def cmd_bench(args, cfg: nio.RunConfig) -> int:
    if args.iterations < 1 or args.points < 1:
        raise UsageError("iterations and points must be positive")
    seed = getattr(args, "seed", None)
    res = run_bench(args.iterations, args.points, 0 if seed is None else seed, cfg.params)
    _emit(args, "bench", res.to_dict())
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(sub: bool) -> argparse.ArgumentParser:
    """Global options; repeated on every subparser so they work in either position."""
    d = argparse.SUPPRESS if sub else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="key=value run configuration file")
    p.add_argument("--d-mhz", type=float, default=d, help="zero-field splitting D (MHz)")
    p.add_argument("--e-mhz", type=float, default=d, help="strain splitting E (MHz)")
    p.add_argument("--gamma-mhz-per-mt", type=float, default=d, help="gyromagnetic ratio (MHz/mT)")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS if sub else False,
                   help="compact single-line JSON")  # fmt: skip
    p.add_argument("--seed", type=int, default=d, help="random seed")
    p.add_argument("--jobs", type=int, default=d if sub else 1, help="worker processes")
    return p


def _field_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("field")
    g.add_argument("--bx", type=float, default=0.0, help="mT")
    g.add_argument("--by", type=float, default=0.0, help="mT")
    g.add_argument("--bz", type=float, default=0.0, help="mT")
    g.add_argument("--b", type=float, default=None, help="magnitude (mT)")
    g.add_argument("--theta", type=float, default=0.0, help="polar angle from lattice z (deg)")
    g.add_argument("--phi", type=float, default=0.0, help="azimuth from lattice x (deg)")
    g.add_argument("--along", type=_vec, default=None, help="direction x,y,z (with --b)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvmag", description="NV-center vector magnetometry toolkit", parents=[_common(False)]
    )
    subs = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = subs.add_parser("forward", parents=[common], help="resonances from a field vector")
    _field_opts(p)
    p.add_argument("--sweep", choices=("b", "theta", "phi"), help="emit a CSV table over a grid")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=90.0)
    p.add_argument("--num", type=int, default=91)
    p.set_defaults(func=cmd_forward)

    p = subs.add_parser("inverse", parents=[common], help="magnitude and angle from one pair")
    p.add_argument("--f-l", type=float, required=True, help="lower resonance (MHz)")
    p.add_argument("--f-u", type=float, required=True, help="upper resonance (MHz)")
    p.add_argument("--sigma-l", type=float, default=0.0)
    p.add_argument("--sigma-u", type=float, default=0.0)
    p.set_defaults(func=cmd_inverse)

    p = subs.add_parser("reconstruct", parents=[common], help="field vector from lines or pairs")
    p.add_argument("lines", nargs="*", type=float, help="6 or 8 resonance lines (MHz)")
    p.add_argument("--pairs", nargs="+", type=_pair, help="f_l,f_u per axis, in axis order")
    p.add_argument("--input", help="JSON (forward output / lines_mhz) or whitespace list; '-' = stdin")
    p.add_argument("--sigma", type=float, default=0.0, help="per-line uncertainty (MHz)")
    p.add_argument("--hyperfine", choices=[m.value for m in HyperfineMode])
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--consistent-pairing", action="store_true",
                   help="search all line matchings for one consistent with D, E")  # fmt: skip
    p.add_argument("--symmetry", action="store_true", help="also emit the cubic-group images")
    p.set_defaults(func=cmd_reconstruct)

    p = subs.add_parser("fit", parents=[common], help="fit ODMR spectra (file or directory)")
    p.add_argument("path")
    p.add_argument("--model", choices=MODELS, default="voigt")
    p.add_argument("--photon-rate", type=float, default=None, help="detected photons per second")
    p.add_argument("--table", action="store_true", help="CSV table instead of JSON")
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("budget", parents=[common], help="itemised field-magnitude uncertainty")
    p.add_argument("--b-mt", type=float, default=10.0)
    p.add_argument("--theta-deg", type=float, default=1.0)
    p.add_argument("--fit-sigma-mhz", type=float, default=0.01)
    p.add_argument("--sigma-g", type=float, default=None, help="g-factor uncertainty")
    p.set_defaults(func=cmd_budget)

    p = subs.add_parser("symmetry", parents=[common], help="cubic-group images of a field")
    _field_opts(p)
    p.set_defaults(func=cmd_symmetry)

    p = subs.add_parser("calibrate", parents=[common], help="rotation from two vector pairs")
    p.add_argument("--measured", type=_vec, action="append", required=True)
    p.add_argument("--target", type=_vec, action="append", required=True)
    p.add_argument("--symmetry", action="store_true", help="pick the best cubic image first")
    p.set_defaults(func=cmd_calibrate)

    p = subs.add_parser("bench", parents=[common], help="analytical vs numerical timing")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--points", type=int, default=600)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nvmag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"nvmag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (SolverError, DomainError) as exc:
        print(f"nvmag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        if isinstance(exc, NVMagError):
            raise
        print(f"nvmag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
