"""Command-line front end.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input or
profile, 3 lambda on a threshold or at a bound state.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bound as bound_mod
from . import smatrix as smatrix_mod
from . import transition as transition_mod
from .errors import (AtThreshold, DegenerateSplit, LayerResonance, ProfileError, ScatteringError,
                     SingularPhiPlus)
from .jost import basic_wronskian_residual, wronskian_drift
from .medium import LEFT, RIGHT, MediumProfile, diagonalize_ends, load_profile, save_profile
from .oracle import transfer_matrix_solve
from .profiles import (ALL_CLOSED, ALL_OPEN, MIXED, barrier, decoupled_wells, lambda_window,
                       random_piecewise_profile, smooth_frame_profile, square_well, step_junction)
from .spectral import classify_channels
from .tolerances import DEFAULT_TOLERANCES, Tolerances

log = logging.getLogger("multiscat")

EXIT_OK, EXIT_VERIFY, EXIT_INVALID, EXIT_SPECTRAL = 0, 1, 2, 3

# Applied to every ScatteringSet built by `verify`; tests use it to inject faults.
SCATTERING_HOOK = None


@dataclass
class RunConfig:
    command: str
    profile: Path | None = None
    lam: float | None = None
    lam_range: tuple | None = None  # (lo, hi, count, spacing)
    out: Path = Path(".")
    fmt: str = "csv"
    threads: int = 1
    tol: Tolerances = DEFAULT_TOLERANCES
    extra: dict = field(default_factory=dict)

    def lambdas(self) -> np.ndarray:
        lo, hi, count, spacing = self.lam_range
        if spacing == "log":
            return np.sign(lo) * np.geomspace(abs(lo), abs(hi), count)
        return np.linspace(lo, hi, count)


def parse_range(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) not in (2, 3, 4):
        raise argparse.ArgumentTypeError("expected LO:HI[:N[:log]]")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[2]) if len(parts) > 2 else None
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    spacing = parts[3] if len(parts) > 3 else "linear"
    if spacing not in ("linear", "log"):
        raise argparse.ArgumentTypeError("spacing must be 'linear' or 'log'")
    if count is not None and count < 1:
        raise argparse.ArgumentTypeError("count must be at least 1")
    if spacing == "log" and (lo == 0 or hi == 0 or np.sign(lo) != np.sign(hi)):
        raise argparse.ArgumentTypeError("log spacing needs LO and HI nonzero with the same sign")
    return lo, hi, count, spacing


def parse_tolerances(items) -> Tolerances:
    tol = DEFAULT_TOLERANCES
    names = Tolerances.names()
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep or name not in names:
            raise ValueError(f"--tol expects NAME=VALUE with NAME in {names}")
        tol = tol.override(**{name: float(value)})
    return tol


# ---------------------------------------------------------------- output


def _write_rows(path: Path, header, rows, fmt: str) -> Path:
    if fmt == "json":
        path = path.with_suffix(".json")
        data = [dict(zip(header, row)) for row in rows]
        path.write_text(json.dumps(data, indent=1) + "\n")
    else:
        path = path.with_suffix(".csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    return path


def _num(x) -> str:
    return repr(float(x))


def _complex_rows(name, m):
    return [[name, i, j, _num(m[i, j].real), _num(m[i, j].imag)]
            for i in range(m.shape[0]) for j in range(m.shape[1])]


def _json_ready(rows, numeric_cols):
    return [[float(v) if k in numeric_cols else v for k, v in enumerate(r)] for r in rows]


# ---------------------------------------------------------------- core runs


def _pipeline(profile: MediumProfile, lam: float, tol: Tolerances):
    tset, field_ = transition_mod.solve_transition(profile, lam, tol=tol, return_field=True)
    sset = smatrix_mod.scattering_matrices(tset, tol)
    if SCATTERING_HOOK is not None:
        sset = SCATTERING_HOOK(sset)
    return tset, sset, field_


def residual_record(profile, lam, tset, sset, field_, tol) -> dict[str, float]:
    """Every identity residual available at one real lambda."""
    rec = {"expansion": tset.expansion_residual,
           "wronskian_drift": wronskian_drift(field_),
           "basic_wronskian": basic_wronskian_residual(field_)}
    rec.update({f"bilinear.{k}": v for k, v in transition_mod.bilinear_residuals(tset).items()})
    rec.update({f"conjugation.{k}": v for k, v in
                transition_mod.conjugation_residuals(profile, lam, tol=tol, tset=tset).items()})
    rec.update({f"symmetry.{k}": v for k, v in smatrix_mod.symmetry_residuals(sset).items()})
    rec.update({f"unitarity.{k}": v for k, v in smatrix_mod.unitarity_residuals(sset).items()})
    rec.update({f"determinant.{k}": v for k, v in smatrix_mod.determinant_residuals(sset).items()})
    proj = smatrix_mod.projector_residuals(sset, tol)
    rec.update({f"projector.{k}": v for k, v in proj.items()})
    try:
        rec.update({f"closed_open.{k}": v for k, v in smatrix_mod.closed_open_residuals(sset).items()})
    except DegenerateSplit:
        pass
    return rec


def _classification_doc(cls) -> dict:
    return {
        "open_left": cls.open_left.tolist(), "closed_left": cls.closed_left.tolist(),
        "open_right": cls.open_right.tolist(), "closed_right": cls.closed_right.tolist(),
        "kappa_left": cls.kappa_left.tolist(), "kappa_right": cls.kappa_right.tolist(),
        "note": "left = z -> -infinity, right = z -> +infinity",
    }


def cmd_scatter(cfg: RunConfig) -> int:
    profile = load_profile(cfg.profile)
    profile.require_valid(cfg.tol)
    lam = cfg.lam
    bases = diagonalize_ends(profile, cfg.tol)
    cls = classify_channels(bases, lam, tol=cfg.tol)
    tset, sset, field_ = _pipeline(profile, lam, cfg.tol)
    rec = residual_record(profile, lam, tset, sset, field_, cfg.tol)
    cfg.out.mkdir(parents=True, exist_ok=True)

    t_rows = [r for name, m in tset.matrices().items() for r in _complex_rows(name, m)]
    s_rows = smatrix_mod.block_rows(sset, lam)
    r_rows = [[_num(lam), k, _num(v)] for k, v in rec.items()]
    if cfg.fmt == "json":
        t_rows = _json_ready(t_rows, {3, 4})
        s_rows = _json_ready(s_rows, {0, 4, 5})
        r_rows = _json_ready(r_rows, {0, 2})
    _write_rows(cfg.out / "transition", ["matrix", "row", "col", "re", "im"], t_rows, cfg.fmt)
    _write_rows(cfg.out / "smatrix", ["lambda", "block", "row", "col", "re", "im"], s_rows, cfg.fmt)
    _write_rows(cfg.out / "residuals", ["lambda", "check_name", "residual"], r_rows, cfg.fmt)
    (cfg.out / "classification.json").write_text(json.dumps(_classification_doc(cls), indent=1) + "\n")
    print(f"lambda = {lam!r}: l_o={cls.l_o} l_c={cls.l_c} r_o={cls.r_o} r_c={cls.r_c}; "
          f"{len(rec)} residuals written to {cfg.out}")
    return EXIT_OK


def _sweep_point(profile, lam, tol):
    try:
        tset, sset, _ = _pipeline(profile, lam, tol)
    except AtThreshold as exc:
        return lam, None, f"lambda = {lam!r} skipped: {exc}"
    except (SingularPhiPlus, LayerResonance) as exc:
        return lam, None, f"lambda = {lam!r} skipped: {exc}"
    cls = sset.classification
    t = sset.block("t1", "oo", tilde=True)
    r = sset.block("r1", "oo", tilde=True)
    if cls.l_o:
        trans = float(np.sum(np.abs(t) ** 2)) / cls.l_o
        refl = float(np.sum(np.abs(r) ** 2)) / cls.l_o
    else:
        trans = refl = float("nan")
    uni = smatrix_mod.unitarity_residuals(sset)
    uni.pop("full_tilde_unitarity", None)
    return lam, (trans, refl, max(uni.values()), cls.l_o, cls.r_o), None


def _ordered_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_sweep(cfg: RunConfig) -> int:
    profile = load_profile(cfg.profile)
    profile.require_valid(cfg.tol)
    diagonalize_ends(profile, cfg.tol)
    lams = sorted(cfg.lambdas().tolist())
    results = _ordered_map(lambda x: _sweep_point(profile, x, cfg.tol), lams, cfg.threads)
    rows = []
    for lam, vals, notice in results:
        if notice:
            log.warning(notice)
            continue
        rows.append([_num(lam), _num(vals[0]), _num(vals[1]), _num(vals[2]), vals[3], vals[4]])
    if cfg.fmt == "json":
        rows = _json_ready(rows, {0, 1, 2, 3})
    cfg.out.mkdir(parents=True, exist_ok=True)
    header = ["lambda", "transmission", "reflection", "unitarity_residual", "l_o", "r_o"]
    path = _write_rows(cfg.out / "sweep", header, rows, cfg.fmt)
    print(f"{len(rows)} of {len(lams)} points written to {path}")
    return EXIT_OK


def cmd_bound(cfg: RunConfig) -> int:
    profile = load_profile(cfg.profile)
    profile.require_valid(cfg.tol)
    lo, hi, count, _ = cfg.lam_range
    result = bound_mod.bound_state_scan(profile, lo, hi, n_scan=count, tol=cfg.tol, return_trace=True)
    for notice in result.notices:
        print(notice)
    cfg.out.mkdir(parents=True, exist_ok=True)
    bound_mod.export_json(result.states, cfg.out / "bound_states.json")
    bound_mod.export_trace_csv(result, cfg.out / "scan_trace.csv")
    print(f"{len(result.states)} bound state(s) in [{lo!r}, {hi!r}]")
    for bs in result.states:
        flags = f" [{', '.join(bs.flags)}]" if bs.flags else ""
        print(f"  lambda = {bs.lambda_b!r}{flags}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def default_verify_lambdas(profile: MediumProfile, per_class: int = 5, tol: Tolerances = DEFAULT_TOLERANCES):
    """Deterministic points: ``per_class`` each below, between and above the thresholds."""
    left, right = diagonalize_ends(profile, tol)
    thr = np.sort(np.concatenate([left.thresholds, right.thresholds]))
    out = {}
    windows = {ALL_OPEN: lambda_window(profile, ALL_OPEN), ALL_CLOSED: lambda_window(profile, ALL_CLOSED)}
    mixed = lambda_window(profile, MIXED)
    if mixed is None and thr[-1] - thr[0] > 0.1:
        mixed = (thr[0] + 0.05, thr[-1] - 0.05)
    windows[MIXED] = mixed
    for kind, window in windows.items():
        if window is None:
            out[kind] = []
            continue
        lo, hi = window
        # interior points at irrational fractions, kept clear of thresholds
        fr = (np.arange(per_class) + 0.5 + 0.1180339887) / per_class
        pts = lo + (hi - lo) * np.clip(fr, 0.0, 1.0)
        gap = 1e-3 * max(1.0, hi - lo)
        out[kind] = [float(x) for x in pts if np.min(np.abs(thr - x)) > gap]
    return out


def _limit_for(name: str, tol: Tolerances):
    """(limit, sense) for a residual name; sense 'le' or 'gt'."""
    if name == "unitarity.full_tilde_unitarity":
        return 1e-2, "gt"
    if name in ("projector.offdiagonal", "projector.conjugate_pair", "projector.right_inverse",
                "projector.left_inverse_t2"):
        return None, None
    return tol.check_tol, "le"


def verify_point(profile, lam, tol, with_oracle: bool):
    checks = []
    tset, sset, field_ = _pipeline(profile, lam, tol)
    rec = residual_record(profile, lam, tset, sset, field_, tol)
    cls = sset.classification
    for name, value in rec.items():
        limit, sense = _limit_for(name, tol)
        if limit is None:
            continue
        if sense == "gt" and cls.all_closed:
            continue
        checks.append((name, value, limit, sense))
    if with_oracle:
        otset, osset = transfer_matrix_solve(profile, lam, tol=tol)
        dev_t = max(transition_mod.relative_deviation(a, b)
                    for a, b in zip(tset.matrices().values(), otset.matrices().values()))
        dev_s = transition_mod.relative_deviation(sset.S, osset.S)
        checks.append(("oracle.transition", dev_t, tol.check_tol, "le"))
        checks.append(("oracle.scattering", dev_s, tol.check_tol, "le"))
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    profile = load_profile(cfg.profile)
    profile.require_valid(cfg.tol)
    tol = cfg.tol
    if cfg.lam is not None:
        points = [("given", cfg.lam)]
    elif cfg.lam_range is not None:
        points = [("given", float(x)) for x in cfg.lambdas()]
    else:
        points = [(k, x) for k, xs in default_verify_lambdas(profile, tol=tol).items() for x in xs]
    with_oracle = profile.is_piecewise_constant
    if not with_oracle:
        print("notice: profile has sampled layers, oracle comparison skipped")

    def run(item):
        kind, lam = item
        try:
            return kind, lam, verify_point(profile, lam, tol, with_oracle), None
        except (SingularPhiPlus, LayerResonance, AtThreshold) as exc:
            return kind, lam, [], str(exc)

    results = _ordered_map(run, points, cfg.threads)
    rows = []
    failed = 0
    for kind, lam, checks, skipped in results:
        if skipped:
            print(f"notice: lambda = {lam!r} skipped ({skipped.splitlines()[0]})")
            continue
        for name, value, limit, sense in checks:
            ok = value <= limit if sense == "le" else value > limit
            failed += not ok
            rows.append([_num(lam), kind, name, _num(value), ("<= " if sense == "le" else "> ") + _num(limit),
                         "PASS" if ok else "FAIL"])

    mono = []
    if cfg.extra.get("monodromy", True):
        z = complex(np.mean([x for _, x in points]) if points else 0.0, 0.5)
        for side in (LEFT, RIGHT):
            for ch in range(profile.channels):
                value = transition_mod.monodromy_residual(profile, z, ch, side, tol=tol)
                ok = value <= tol.check_tol
                failed += not ok
                mono.append([repr(z), "complex", f"monodromy.{side}.{ch}", _num(value),
                             "<= " + _num(tol.check_tol), "PASS" if ok else "FAIL"])
    rows.extend(mono)

    header = ["lambda", "class", "check_name", "residual", "limit", "status"]
    cfg.out.mkdir(parents=True, exist_ok=True)
    out_rows = _json_ready(rows, {3}) if cfg.fmt == "json" else rows
    _write_rows(cfg.out / "verify", header, out_rows, cfg.fmt)
    width = max((len(r[2]) for r in rows), default=10)
    for r in rows:
        print(f"{r[5]}  {r[0]:>24}  {r[2]:<{width}}  {float(r[3]):.3e}  ({r[4]})")
    print(f"{len(rows) - failed} passed, {failed} failed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------- helpers


def cmd_make_profile(args) -> int:
    kind = args.kind
    if kind == "random":
        rng = np.random.default_rng(args.seed)
        profile = random_piecewise_profile(rng, n=args.channels)
    elif kind == "well":
        profile = square_well(args.depth)
    elif kind == "barrier":
        profile = barrier(args.depth)
    elif kind == "step":
        profile = step_junction(0.0, args.depth)
    elif kind == "decoupled":
        profile = decoupled_wells()
    else:
        profile = smooth_frame_profile()
    save_profile(profile, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiscat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, lam=True, rng=True):
        p.add_argument("--profile", required=True, type=Path, help="medium profile JSON")
        if lam:
            p.add_argument("--lambda", dest="lam", type=float, help="spectral parameter")
        if rng:
            p.add_argument("--lambda-range", dest="lam_range", type=parse_range,
                           help="LO:HI:N[:log]; write negative bounds as --lambda-range=-5:-1:11")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")

    common(sub.add_parser("scatter", help="transition and scattering matrices at one lambda"), rng=False)
    common(sub.add_parser("sweep", help="transmission/reflection over a lambda range"), lam=False)
    common(sub.add_parser("bound", help="bound-state scan"), lam=False)
    verify = sub.add_parser("verify", help="run every identity check")
    common(verify)
    verify.add_argument("--corrupt-s", action="store_true", help=argparse.SUPPRESS)
    verify.add_argument("--no-monodromy", action="store_true", help="skip complex-lambda sheet checks")

    make = sub.add_parser("make-profile", help="write a sample profile JSON")
    make.add_argument("kind", choices=("random", "well", "barrier", "step", "decoupled", "smooth"))
    make.add_argument("output", type=Path)
    make.add_argument("--seed", type=int, default=0)
    make.add_argument("--channels", type=int, default=None)
    make.add_argument("--depth", type=float, default=10.0, help="well depth, barrier height or step size")
    return parser


def _corrupt(sset):
    from dataclasses import replace
    bad = sset.S.copy()
    bad[0, 0] += 1e-3
    bad_t = sset.S_tilde.copy()
    bad_t[0, 0] += 1e-3
    n = sset.n
    return replace(sset, S=bad, S_tilde=bad_t, t1=bad[:n, :n])


def main(argv=None) -> int:
    global SCATTERING_HOOK
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "make-profile":
        return cmd_make_profile(args)
    try:
        tol = parse_tolerances(args.tol)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    cfg = RunConfig(args.command, args.profile, getattr(args, "lam", None), getattr(args, "lam_range", None),
                    args.out, args.fmt, max(1, args.threads), tol)
    if cfg.lam_range is not None and cfg.lam_range[2] is None:
        cfg.lam_range = cfg.lam_range[:2] + ((101 if cfg.command == "sweep" else None),) + cfg.lam_range[3:]
    if args.command == "scatter" and cfg.lam is None:
        print("error: scatter needs --lambda", file=sys.stderr)
        return EXIT_INVALID
    if args.command in ("sweep", "bound") and cfg.lam_range is None:
        print(f"error: {args.command} needs --lambda-range", file=sys.stderr)
        return EXIT_INVALID
    previous = SCATTERING_HOOK
    if args.command == "verify":
        cfg.extra["monodromy"] = not args.no_monodromy
        if args.corrupt_s:
            SCATTERING_HOOK = _corrupt
    handlers = {"scatter": cmd_scatter, "sweep": cmd_sweep, "bound": cmd_bound, "verify": cmd_verify}
    try:
        return handlers[args.command](cfg)
    except ProfileError as exc:
        print(f"invalid profile: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (AtThreshold, SingularPhiPlus) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPECTRAL
    except (ScatteringError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        SCATTERING_HOOK = previous


if __name__ == "__main__":
    sys.exit(main())
