"""Bound states: real zeros of det Phi_+ and the structure of their null vectors."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .errors import ScanTooCoarse
from .jost import MM, PP, GridSpec, integrate_jost, jost_at_reference, max_wavenumber, wronskian
from .medium import LEFT, RIGHT, MediumProfile, diagonalize_ends
from .spectral import classify_channels
from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .transition import transition_matrices

NEAR_THRESHOLD = "NEAR_THRESHOLD"
MULTIPLE = "MULTIPLE"
SCAN_DENSITY = 2000  # nodes per unit lambda
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BoundState:
    lambda_b: float
    v: np.ndarray
    w: np.ndarray
    det_residual: float
    null_residuals: tuple[float, float]
    z: np.ndarray
    wavefunction: np.ndarray
    open_component_norms: tuple[float, float]
    decay_rates: dict
    psi_relation_residual: float
    flags: tuple[str, ...] = ()
    extra_v: tuple = ()
    extra_w: tuple = ()
    scan_value: complex = 0.0

    def to_dict(self) -> dict:
        def cvec(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}
        return {
            "lambda": self.lambda_b,
            "v": cvec(self.v),
            "w": cvec(self.w),
            "det_residual": self.det_residual,
            "null_residuals": list(self.null_residuals),
            "open_component_norms": list(self.open_component_norms),
            "psi_relation_residual": self.psi_relation_residual,
            "decay_rates": self.decay_rates,
            "flags": list(self.flags),
            "wavefunction": {"z": self.z.tolist(),
                             "components": [cvec(self.wavefunction[:, s]) for s in range(self.wavefunction.shape[1])]},
        }


@dataclass
class ScanResult:
    states: list[BoundState]
    lambdas: np.ndarray
    values: np.ndarray
    notices: list[str] = field(default_factory=list)


def _normalize(vec: np.ndarray) -> np.ndarray:
    vec = vec / np.linalg.norm(vec)
    nz = np.flatnonzero(np.abs(vec) > 1e-14 * np.max(np.abs(vec)))
    phase = vec[nz[0]] / abs(vec[nz[0]])
    return vec / phase


def determinant_values(profile: MediumProfile, bases, lams, grid_spec: GridSpec) -> np.ndarray:
    """D(lambda) = det w[F-_-, F+_+] at the reference point, for many real lambdas."""
    n = profile.channels
    yp, ym = jost_at_reference(profile, bases, np.asarray(lams, dtype=float), grid_spec)
    u2, p2 = yp[:, :n, :n], yp[:, n:, :n]
    u1, p1 = ym[:, :n, n:], ym[:, n:, n:]
    return np.linalg.det(wronskian(u1, p1, u2, p2))


def _golden_min(f, a: float, b: float, tol: float):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _region_kind(bases, lam: float) -> str:
    thr = np.concatenate([b.thresholds for b in bases])
    if lam < thr.min():
        return "open"
    if lam > thr.max():
        return "closed"
    return "mixed"


def _decay_fit(z, u, lo, hi) -> float:
    sel = (z >= lo) & (z <= hi)
    mag = np.linalg.norm(u[sel], axis=1)
    good = mag > 0
    if np.count_nonzero(good) < 3:
        return float("nan")
    slope = np.polyfit(z[sel][good], np.log(mag[good]), 1)[0]
    return float(abs(slope))


def _analyze(profile: MediumProfile, bases, lam: float, grid_spec: GridSpec, tol: Tolerances,
             scan_value: complex = 0.0) -> BoundState:
    field = integrate_jost(profile, bases, lam, grid_spec, tol)
    tset = transition_matrices(field)
    phi = tset.phi_plus
    u_svd, s, vh = np.linalg.svd(phi)
    v = _normalize(vh[-1].conj())
    w = _normalize(u_svd[:, -1].conj())
    scale = max(1.0, float(s[0]))
    flags = []
    extra_v, extra_w = (), ()
    if len(s) > 1 and s[-2] <= 1e-6 * s[0]:
        flags.append(MULTIPLE)
        extra_v = (_normalize(vh[-2].conj()),)
        extra_w = (_normalize(u_svd[:, -2].conj()),)

    cls = classify_channels(bases, lam, tol=tol)
    v_open = float(np.linalg.norm(v[cls.open_right])) if cls.r_o else 0.0
    w_open = float(np.linalg.norm(w[cls.open_left])) if cls.l_o else 0.0

    # Psi_+ v is parallel to K_-^{-1} w; v and w carry independent normalisations
    lhs = tset.psi_plus @ v
    rhs = w / tset.K_left
    alpha = np.vdot(rhs, lhs) / np.vdot(rhs, rhs)
    psi_res = float(np.linalg.norm(lhs - alpha * rhs) / max(np.linalg.norm(lhs), 1e-300))

    wave = field.U[PP] @ v
    lz = profile.half_width
    z = field.z
    pad = z[-1] - lz
    thr = tol.null_tol
    kr = np.abs(tset.K_right.imag)[cls.closed_right]
    kl = np.abs(tset.K_left.imag)[cls.closed_left]
    right_coef = np.abs(v[cls.closed_right]) > thr
    left_coef = np.abs((w / tset.K_left)[cls.closed_left]) > thr
    decay = {
        RIGHT: {"fitted": _decay_fit(z, wave, lz + 0.5 * pad, z[-1]),
                "expected": float(kr[right_coef].min()) if np.any(right_coef) else float("nan")},
        LEFT: {"fitted": _decay_fit(z, wave, z[0], -lz - 0.5 * pad),
               "expected": float(kl[left_coef].min()) if np.any(left_coef) else float("nan")},
    }
    thresholds = np.concatenate([b.thresholds for b in bases])
    if np.min(np.abs(thresholds - lam)) <= 10 * tol.threshold(lam):
        flags.append(NEAR_THRESHOLD)
    return BoundState(
        lambda_b=float(lam), v=v, w=w,
        det_residual=float(abs(np.linalg.det(phi))),
        null_residuals=(float(np.linalg.norm(phi @ v)) / scale, float(np.linalg.norm(w @ phi)) / scale),
        z=z, wavefunction=wave, open_component_norms=(v_open, w_open), decay_rates=decay,
        psi_relation_residual=psi_res, flags=tuple(flags), extra_v=extra_v, extra_w=extra_w,
        scan_value=complex(scan_value))


def _null_ok(bs: BoundState, tol: Tolerances) -> bool:
    return (max(bs.null_residuals) <= tol.null_tol and max(bs.open_component_norms) <= tol.null_tol
            and bs.psi_relation_residual <= tol.null_tol)


def scan_grid_spec(profile: MediumProfile, lo: float, hi: float, grid_spec: GridSpec | None = None) -> GridSpec:
    """One fixed step for the whole scan so refinement sees the same discretisation."""
    grid_spec = grid_spec or GridSpec()
    h = grid_spec.step(profile, max_wavenumber(profile, [lo, hi]))
    return GridSpec(h_max=h, pad_fraction=grid_spec.pad_fraction, wave_cap=None, z_ref=grid_spec.z_ref,
                    subdivide=grid_spec.subdivide)


def bound_state_scan(profile: MediumProfile, lambda_lo: float, lambda_hi: float, n_scan: int | None = None,
                     refine_tol: float | None = None, tol: Tolerances = DEFAULT_TOLERANCES,
                     grid_spec: GridSpec | None = None, skip_open: bool = True,
                     return_trace: bool = False):
    """Find bound states with lambda in [lambda_lo, lambda_hi].

    Where every channel is closed D(lambda) is real and roots are bracketed by
    sign changes, then bisected.  In mixed regions local minima of |D| are
    refined by golden-section search and kept only if |D| is negligible and
    the null vectors have the closed-channel structure.  Regions where every
    channel is open cannot hold bound states and are skipped unless
    ``skip_open`` is false.
    """
    profile.require_valid(tol)
    refine_tol = tol.refine_tol if refine_tol is None else refine_tol
    lo, hi = float(lambda_lo), float(lambda_hi)
    if not hi > lo:
        raise ValueError("lambda_hi must exceed lambda_lo")
    bases = diagonalize_ends(profile, tol)
    spec = scan_grid_spec(profile, lo, hi, grid_spec)
    if n_scan is None:
        n_scan = max(200, int(math.ceil(SCAN_DENSITY * (hi - lo))) + 1)
    lams = np.linspace(lo, hi, n_scan)
    thresholds = np.unique(np.concatenate([b.thresholds for b in bases]))
    limits = np.array([tol.threshold(x) for x in (lo, hi)]).max()
    lams = lams[np.all(np.abs(thresholds[None, :] - lams[:, None]) > limits, axis=1)]
    notices = []

    kinds = np.where(lams < thresholds[0], "open", np.where(lams > thresholds[-1], "closed", "mixed"))
    if skip_open and np.all(kinds == "open"):
        notices.append("all channels open: no bound states possible")
    active = kinds != "open" if skip_open else np.ones(len(lams), dtype=bool)
    values = np.full(len(lams), np.nan + 0j)
    if np.any(active):
        values[active] = determinant_values(profile, bases, lams[active], spec)

    def D(x):
        return complex(determinant_values(profile, bases, [x], spec)[0])

    abs_vals = np.abs(values)
    finite = np.isfinite(abs_vals)
    accept_limit = tol.det_accept_rel * float(np.median(abs_vals[finite])) if np.any(finite) else 0.0
    candidates: list[tuple[float, complex, str]] = []

    # runs of consecutive nodes of one region kind, split at thresholds
    cuts = np.searchsorted(lams, thresholds)
    starts = sorted(set([0, *cuts.tolist(), len(lams)]))
    for a, b in zip(starts[:-1], starts[1:]):
        if b - a < 2 or not active[a]:
            continue
        xs, ds = lams[a:b], values[a:b]
        if kinds[a] == "closed":
            candidates.extend(_closed_candidates(xs, ds.real, lambda x: D(x).real, refine_tol))
        else:
            candidates.extend(_mixed_candidates(xs, ds, D, refine_tol))

    states = []
    for lam_b, d_b, how in sorted(candidates, key=lambda c: c[0]):
        try:
            bs = _analyze(profile, bases, lam_b, spec, tol, d_b)
        except Exception as exc:  # noqa: BLE001 - a candidate on a threshold is dropped with notice
            notices.append(f"candidate at {lam_b!r} dropped: {exc}")
            continue
        if how == "sign" or (abs(d_b) <= accept_limit and _null_ok(bs, tol)):
            states.append(bs)
    for bs in states:
        if _region_kind(bases, bs.lambda_b) == "open":
            raise AssertionError(f"bound state accepted at {bs.lambda_b} where all channels are open")
    if return_trace:
        return ScanResult(states, lams, values, notices)
    return states


def _closed_candidates(xs, ds, f, refine_tol):
    out = []
    sign = np.sign(ds)
    for i in range(len(xs) - 1):
        if sign[i] == 0:
            out.append((float(xs[i]), complex(ds[i]), "sign"))
        elif sign[i] * sign[i + 1] < 0:
            root = bisect(f, xs[i], xs[i + 1], xtol=refine_tol, rtol=4 * np.finfo(float).eps, maxiter=200)
            out.append((float(root), complex(f(root)), "sign"))
    # a dip of |D| without a sign change may hide two crossings inside one cell
    mag = np.abs(ds)
    for i in range(1, len(xs) - 1):
        if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1] and sign[i - 1] == sign[i] == sign[i + 1] != 0:
            x_min, _ = _golden_min(lambda x: abs(f(x)), xs[i - 1], xs[i + 1], refine_tol)
            f_min = f(x_min)
            if np.sign(f_min) == -sign[i]:
                warnings.warn(f"two sign changes of D within one scan cell near lambda = {x_min:.6g}; "
                              "bracket split at the minimum", ScanTooCoarse, stacklevel=3)
                for a, b in ((xs[i - 1], x_min), (x_min, xs[i + 1])):
                    root = bisect(f, a, b, xtol=refine_tol, rtol=4 * np.finfo(float).eps, maxiter=200)
                    out.append((float(root), complex(f(root)), "sign"))
    return out


def _mixed_candidates(xs, ds, D, refine_tol):
    out = []
    mag = np.abs(ds)
    for i in range(1, len(xs) - 1):
        if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]:
            x_min, _ = _golden_min(lambda x: abs(D(x)), xs[i - 1], xs[i + 1], refine_tol)
            out.append((float(x_min), D(x_min), "min"))
    return out


def verify_bound_state(bs: BoundState, profile: MediumProfile, tol: Tolerances = DEFAULT_TOLERANCES,
                       grid_spec: GridSpec | None = None) -> dict[str, float]:
    """Recompute every bound-state property at ``bs.lambda_b``."""
    bases = diagonalize_ends(profile, tol)
    lam = bs.lambda_b
    spec = grid_spec or scan_grid_spec(profile, lam, lam)
    fresh = _analyze(profile, bases, lam, spec, tol)
    field = integrate_jost(profile, bases, lam, spec, tol)
    tset = transition_matrices(field)

    # F+_+ v = F-_- Psi_+ v on the whole grid
    u_right = field.U[PP] @ fresh.v
    u_left = field.U[MM] @ (tset.psi_plus @ fresh.v)
    size = float(np.max(np.abs(u_right)))
    out = {
        "det_residual": fresh.det_residual,
        "null_right": fresh.null_residuals[0],
        "null_left": fresh.null_residuals[1],
        "v_open": fresh.open_component_norms[0],
        "w_open": fresh.open_component_norms[1],
        "psi_relation": fresh.psi_relation_residual,
        "jost_relation": float(np.max(np.abs(u_right - u_left))) / max(size, 1e-300),
        "ode_residual": ode_residual(profile, field.z, u_right, field.P[PP] @ fresh.v, lam, field.grid),
    }
    for side in (LEFT, RIGHT):
        rate = fresh.decay_rates[side]
        if np.isfinite(rate["expected"]):
            out[f"decay_{side}"] = abs(rate["fitted"] - rate["expected"]) / rate["expected"]
    return out


def bound_state_passes(record: dict[str, float], tol: Tolerances = DEFAULT_TOLERANCES,
                       det_limit: float = 1e-6, decay_limit: float = 0.05) -> bool:
    """Acceptance of a :func:`verify_bound_state` record."""
    for name, value in record.items():
        if name.startswith("decay_"):
            if not value <= decay_limit:
                return False
        elif name in ("det_residual", "jost_relation", "ode_residual"):
            if not value <= det_limit:
                return False
        elif not value <= tol.null_tol:
            return False
    return True


def ode_residual(profile: MediumProfile, z, u, p, lam: float, grid) -> float:
    """Five-point finite-difference residual of p = g u' and p' + (V - lambda g) u = 0.

    Evaluated on segment interiors only, where the spacing is uniform and the
    coefficients are smooth; normalised by max|u| (1 + max|V - lambda g|).
    """
    worst = 0.0
    umax = float(np.max(np.abs(u)))
    for seg in grid.segments:
        if seg.i1 - seg.i0 < 6:
            continue
        idx = np.arange(seg.i0 + 2, seg.i1 - 1)
        h = z[seg.i0 + 1] - z[seg.i0]

        def d5(y):
            return (y[idx - 2] - 8 * y[idx - 1] + 8 * y[idx + 1] - y[idx + 2]) / (12 * h)

        g, v = seg.layer.coefficients(z[idx])
        g = np.asarray(g)
        a = np.asarray(v) - lam * g
        r1 = d5(p) + np.einsum("mij,mj->mi", a, u[idx])
        r2 = p[idx] - np.einsum("mij,mj->mi", g, d5(u))
        scale = umax * (1.0 + float(np.max(np.abs(a)))) + 1e-300
        worst = max(worst, float(max(np.max(np.abs(r1)), np.max(np.abs(r2)))) / scale)
    return worst


def export_json(states, path) -> None:
    with open(path, "w") as fh:
        json.dump([bs.to_dict() for bs in states], fh, indent=1)
        fh.write("\n")


def export_trace_csv(result: ScanResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "re_D", "im_D", "abs_D"])
        for x, d in zip(result.lambdas, result.values):
            writer.writerow([repr(float(x)), repr(float(d.real)), repr(float(d.imag)), repr(float(abs(d)))])


def square_well_levels(depth: float, half_width: float = 1.0) -> list[float]:
    """Independent scalar oracle: even/odd matching conditions solved by bisection.

    Inside the well q = sqrt(depth - lambda); outside kappa = sqrt(lambda).
    Even states: q tan(q a) = kappa; odd states: -q cot(q a) = kappa.
    """
    a = half_width

    def even(lam):
        q = math.sqrt(depth - lam)
        return q * math.sin(q * a) - math.sqrt(lam) * math.cos(q * a)

    def odd(lam):
        q = math.sqrt(depth - lam)
        return -q * math.cos(q * a) - math.sqrt(lam) * math.sin(q * a)

    grid = np.linspace(1e-12, depth - 1e-12, 20001)
    roots = []
    for f in (even, odd):
        vals = np.array([f(x) for x in grid])
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
            roots.append(bisect(f, grid[i], grid[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return sorted(roots)
