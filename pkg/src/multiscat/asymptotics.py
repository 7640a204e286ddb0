"""Shortwave (semiclassical) Jost solutions and the |lambda| -> infinity limits.

In the no-turning-point regime each channel follows its local eigenvector
``f(z)`` with amplitude ``K(z)^{-1/2}`` and phase ``S(z)``, ``S' = K``.  The
phases are anchored so the WKB solutions coincide with the exact tails at
``z = +-L_z``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import TurningPoint
from .jost import MM, MP, PM, PP, GridSpec, Grid, build_grid, integrate_jost, max_wavenumber
from .medium import MediumProfile, diagonalize_ends, generalized_eig
from .spectral import SpectralPoint, principal_sqrt
from .smatrix import scattering_matrices
from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .transition import transition_matrices


@dataclass(frozen=True)
class WkbField:
    point: SpectralPoint
    grid: Grid
    z: np.ndarray
    frames: np.ndarray        # (M, N, N), columns are f_s(z)
    thresholds: np.ndarray    # (M, N) local Lambda_s(z)
    K: np.ndarray             # (M, N) local momenta
    S_plus: np.ndarray        # (M, N)
    S_minus: np.ndarray       # (M, N)
    signs: np.ndarray         # frame at +L_z relative to the right tail frame
    U: np.ndarray             # (4, M, N, N) tilde-normalised Jost samples, family order as in jost
    g: np.ndarray
    v: np.ndarray

    def phase_difference(self) -> np.ndarray:
        return self.S_plus[0] - self.S_minus[0]


def _coefficients(profile: MediumProfile, grid: Grid):
    z = grid.z
    n = profile.channels
    g = np.empty((len(z), n, n))
    v = np.empty_like(g)
    for seg in grid.segments:
        idx = np.arange(seg.i0, seg.i1 + 1)
        gg, vv = seg.layer.coefficients(z[idx])
        g[idx] = gg
        v[idx] = vv
    return g, v


def local_frames(g, v):
    """Generalized eigen-decomposition at every node with sign continuity along z."""
    m, n, _ = g.shape
    lam = np.empty((m, n))
    frames = np.empty((m, n, n))
    for i in range(m):
        lam[i], f = generalized_eig(g[i], v[i])
        if i:
            overlap = np.einsum("is,ij,js->s", frames[i - 1], g[i], f)
            f = f * np.where(overlap < 0, -1.0, 1.0)[None, :]
        frames[i] = f
    return lam, frames


def _cumulative_phase(K, grid: Grid, i0: int):
    """int_{z[i0]}^{z} K over the interior nodes, Simpson within each segment."""
    out = np.zeros_like(K)
    acc = np.zeros(K.shape[1], dtype=K.dtype)
    for seg in grid.segments:
        idx = np.arange(seg.i0, seg.i1 + 1)
        seg_k = K[idx - i0]
        # the library routine is real-only
        part = (cumulative_simpson(seg_k.real, x=grid.z[idx], axis=0, initial=0)
                + 1j * cumulative_simpson(seg_k.imag, x=grid.z[idx], axis=0, initial=0))
        out[idx - i0] = acc[None, :] + part
        acc = out[seg.i1 - i0]
    return out


def wkb_jost(profile: MediumProfile, lam, grid_spec: GridSpec | None = None,
             tol: Tolerances = DEFAULT_TOLERANCES) -> WkbField:
    point = lam if isinstance(lam, SpectralPoint) else SpectralPoint(lam)
    lam = complex(point.lam)
    grid_spec = grid_spec or GridSpec()
    profile.require_valid(tol)
    left, right = diagonalize_ends(profile, tol)
    h = grid_spec.step(profile, max_wavenumber(profile, [lam]))
    grid = build_grid(profile, grid_spec, h)
    sl = slice(grid.i_left, grid.i_right + 1)
    z = grid.z[sl]
    g, v = _coefficients(profile, grid)
    g, v = g[sl], v[sl]
    thresholds, frames = local_frames(g, v)

    if lam.imag == 0:
        # the tails count too: a jump across lambda at +-L_z is a turning point
        gap = np.vstack([left.thresholds, thresholds, right.thresholds]) - lam.real
        if np.any(gap > 0) and np.any(gap < 0):
            i, s = np.argwhere(np.sign(gap) != np.sign(gap[0:1, 0:1]))[0]
            where = np.concatenate([[z[0]], z, [z[-1]]])[i]
            raise TurningPoint(f"Lambda_{s}(z) - lambda changes sign near z = {where:.6g}")

    K = principal_sqrt(thresholds - lam)
    lz = profile.half_width
    Km = principal_sqrt(left.thresholds - lam)
    Kp = principal_sqrt(right.thresholds - lam)
    integral = _cumulative_phase(K, grid, grid.i_left)
    S_minus = integral - Km[None, :] * lz
    S_plus = Kp[None, :] * lz - (integral[-1][None, :] - integral)

    # continued frame at +L_z against the right tail frame (which seeds F+)
    signs = np.sign(np.einsum("is,ij,js->s", frames[-1], g[-1], right.frame))
    amp = frames / np.sqrt(K)[:, None, :]
    U = np.empty((4, len(z)) + frames.shape[1:], dtype=complex)
    U[PP] = amp * (signs * np.exp(1j * S_plus))[:, None, :]
    U[PM] = amp * (signs * np.exp(-1j * S_plus))[:, None, :]
    U[MP] = amp * np.exp(1j * S_minus)[:, None, :]
    U[MM] = amp * np.exp(-1j * S_minus)[:, None, :]
    return WkbField(point, grid, z, frames, thresholds, K, S_plus, S_minus, signs, U, g, v)


def eigen_residual(field: WkbField) -> float:
    """max over nodes of |g f Lambda - V f| and |f^T g f - 1|."""
    f = field.frames
    gf = field.g @ f
    r1 = gf * field.thresholds[:, None, :] - field.v @ f
    r2 = np.swapaxes(f, 1, 2) @ gf - np.eye(f.shape[-1])[None]
    return float(max(np.max(np.abs(r1)) / (1 + np.max(np.abs(field.v))), np.max(np.abs(r2))))


def phase_residual(field: WkbField) -> float:
    """Central-difference check of S' = K on segment interiors, relative to max|K|."""
    worst = 0.0
    i0 = field.grid.i_left
    for S in (field.S_plus, field.S_minus):
        for seg in field.grid.segments:
            idx = np.arange(seg.i0 + 1, seg.i1) - i0
            if len(idx) == 0:
                continue
            dz = field.z[idx + 1] - field.z[idx - 1]
            ds = (S[idx + 1] - S[idx - 1]) / dz[:, None]
            worst = max(worst, float(np.max(np.abs(ds - field.K[idx]))))
    return worst / float(np.max(np.abs(field.K)))


def conservation_residual(field: WkbField) -> float:
    """K_s times the g-norm of the WKB amplitude f_s / K_s^{1/2} equals 1 at real K."""
    real = np.abs(field.K.imag) <= 1e-14 * np.abs(field.K)
    amp = field.frames / np.sqrt(field.K)[:, None, :]
    norm = np.einsum("mis,mij,mjs->ms", amp.conj(), field.g, amp)
    product = field.K * norm
    if not np.any(real):
        return 0.0
    return float(np.max(np.abs(product[real] - 1.0)))


def exact_tilde_jost(profile: MediumProfile, lam, grid_spec: GridSpec | None = None,
                     tol: Tolerances = DEFAULT_TOLERANCES):
    """Exact Jost samples on [-L_z, L_z] with the K^{-1/2} normalisation, plus the field."""
    bases = diagonalize_ends(profile, tol)
    field = integrate_jost(profile, bases, lam, grid_spec, tol)
    sl = slice(field.grid.i_left, field.grid.i_right + 1)
    U = field.U[:, sl].copy()
    hr = np.sqrt(field.K_right)
    hl = np.sqrt(field.K_left)
    U[PP] /= hr[None, None, :]
    U[PM] /= hr[None, None, :]
    U[MP] /= hl[None, None, :]
    U[MM] /= hl[None, None, :]
    return U, field


def wkb_deviation(profile: MediumProfile, lam, grid_spec: GridSpec | None = None,
                  tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Max over families of max_z |F~_wkb - F~_exact| / max_z |F~_exact|."""
    wkb = wkb_jost(profile, lam, grid_spec, tol)
    exact, _ = exact_tilde_jost(profile, lam, grid_spec, tol)
    worst = 0.0
    for k in (PP, PM, MP, MM):
        worst = max(worst, float(np.max(np.abs(wkb.U[k] - exact[k])) / np.max(np.abs(exact[k]))))
    return worst


def dets_asymptote(profile: MediumProfile, lambdas, grid_spec: GridSpec | None = None,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> list[dict]:
    """Per lambda: |det S~ - 1|, max|Phi~_+ - WKB prediction| and the det identities."""
    lambdas = [float(x) for x in lambdas]
    if any(abs(b) < abs(a) for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be sorted by increasing |lambda|")
    bases = diagonalize_ends(profile, tol)
    out = []
    for lam in lambdas:
        wkb = wkb_jost(profile, lam, grid_spec, tol)
        field = integrate_jost(profile, bases, lam, grid_spec, tol)
        tset = transition_matrices(field)
        sset = scattering_matrices(tset, tol)
        hl = principal_sqrt(tset.K_left)
        hr = principal_sqrt(tset.K_right)
        phi_tilde = hl[:, None] * tset.phi_plus / hr[None, :]
        predicted = np.diag(wkb.signs * np.exp(1j * wkb.phase_difference()))
        det_s = complex(np.linalg.det(sset.S))
        det_st = complex(np.linalg.det(sset.S_tilde))
        ratio = complex(np.linalg.det(tset.phi_minus) / np.linalg.det(tset.phi_plus))
        scale = max(1.0, abs(det_s))
        out.append({
            "lambda": lam,
            "abs_det_S_tilde_minus_1": abs(det_st - 1.0),
            "phi_dev": float(np.max(np.abs(phi_tilde - predicted))),
            "det_identity": max(abs(det_s - ratio), abs(det_s - det_st)) / scale,
            "det_modulus": abs(abs(det_st) - 1.0),
        })
    return out


def export_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "abs_det_S_tilde_minus_1", "phi_dev"])
        for r in records:
            writer.writerow([repr(float(r["lambda"])), repr(float(r["abs_det_S_tilde_minus_1"])),
                             repr(float(r["phi_dev"]))])
