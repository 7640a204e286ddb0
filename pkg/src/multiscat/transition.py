"""Transition matrices Phi_pm, Psi_pm and their analytic structure.

The right Jost basis expands in the left one,
``F+_+ = F-_+ Phi_+ + F-_- Psi_+`` and ``F+_- = F-_+ Psi_- + F-_- Phi_-``,
and the coefficients follow from z-independent Wronskians.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .jost import MM, MP, PM, PP, GridSpec, JostField, integrate_jost, wronskian
from .medium import LEFT, RIGHT, MediumProfile, diagonalize_ends
from .spectral import SpectralPoint, classify_channels
from .tolerances import DEFAULT_TOLERANCES, Tolerances


@dataclass(frozen=True)
class TransitionSet:
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    point: SpectralPoint
    K_left: np.ndarray
    K_right: np.ndarray
    expansion_residual: float = 0.0

    def matrices(self) -> dict[str, np.ndarray]:
        return {"Phi_plus": self.phi_plus, "Phi_minus": self.phi_minus,
                "Psi_plus": self.psi_plus, "Psi_minus": self.psi_minus}


def _wronskians_at(field: JostField, i: int):
    def w(a, b):
        return wronskian(field.U[a, i], field.P[a, i], field.U[b, i], field.P[b, i])
    return w(MM, PP), w(MP, PM), w(MP, PP), w(MM, PM)


def _from_wronskians(K_minus, w_mm_pp, w_mp_pm, w_mp_pp, w_mm_pm):
    inv = (1.0 / (2j * K_minus))[:, None]
    return inv * w_mm_pp, -inv * w_mp_pm, -inv * w_mp_pp, inv * w_mm_pm


def expansion_residual(field: JostField, phi_p, phi_m, psi_p, psi_m) -> float:
    """max |F+_+ - F-_+ Phi_+ - F-_- Psi_+| (and the F+_- analogue) over the grid, relative."""
    u = field.U
    r1 = u[PP] - u[MP] @ phi_p - u[MM] @ psi_p
    r2 = u[PM] - u[MP] @ psi_m - u[MM] @ phi_m
    scale = 1.0 + max(np.max(np.abs(u[PP])), np.max(np.abs(u[PM])))
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))) / scale)


def transition_matrices(field: JostField, K_minus=None, z_ref_index: int | None = None) -> TransitionSet:
    K_minus = field.K_left if K_minus is None else np.asarray(K_minus)
    i = field.grid.i_ref if z_ref_index is None else z_ref_index
    phi_p, phi_m, psi_p, psi_m = _from_wronskians(K_minus, *_wronskians_at(field, i))
    res = expansion_residual(field, phi_p, phi_m, psi_p, psi_m)
    return TransitionSet(phi_p, phi_m, psi_p, psi_m, field.point, field.K_left, field.K_right, res)


def solve_transition(profile: MediumProfile, point, grid_spec: GridSpec | None = None,
                     tol: Tolerances = DEFAULT_TOLERANCES, return_field: bool = False):
    """Full pipeline for one spectral point: validate, diagonalise, integrate, Wronskians."""
    profile.require_valid(tol)
    bases = diagonalize_ends(profile, tol)
    field = integrate_jost(profile, bases, point, grid_spec, tol)
    tset = transition_matrices(field)
    return (tset, field) if return_field else tset


def relative_deviation(a, b) -> float:
    """max|a - b| / max(1, max|a|, max|b|): absolute for O(1) entries, relative for large ones.

    Closed channels make Phi/Psi grow like exp(kappa L), so an absolute entrywise
    bound would measure the matrix size rather than the solver error.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def bilinear_residuals(ts: TransitionSet) -> dict[str, float]:
    """The six quadratic identities linking Phi, Psi and K."""
    Km = np.diag(ts.K_left)
    Kp = np.diag(ts.K_right)
    Kp_inv = np.diag(1.0 / ts.K_right)
    Km_inv = np.diag(1.0 / ts.K_left)
    P, Pm, Q, Qm = ts.phi_plus, ts.phi_minus, ts.psi_plus, ts.psi_minus
    zero = np.zeros_like(P)
    return {
        "phiT_K_psi_plus": relative_deviation(P.T @ Km @ Q, Q.T @ Km @ P),
        "phiT_K_phi_minus": relative_deviation(P.T @ Km @ Pm - Q.T @ Km @ Qm, Kp),
        "phiT_K_psi_minus": relative_deviation(Pm.T @ Km @ Qm, Qm.T @ Km @ Pm),
        "phi_Kinv_psiT_a": relative_deviation(P @ Kp_inv @ Qm.T - Qm @ Kp_inv @ P.T, zero),
        "phi_Kinv_phiT": relative_deviation(P @ Kp_inv @ Pm.T - Qm @ Kp_inv @ Q.T, Km_inv),
        "phi_Kinv_psiT_b": relative_deviation(Pm @ Kp_inv @ Q.T - Q @ Kp_inv @ Pm.T, zero),
    }


def conjugation_residuals(profile: MediumProfile, lam: float, grid_spec: GridSpec | None = None,
                          tol: Tolerances = DEFAULT_TOLERANCES, tset: TransitionSet | None = None) -> dict[str, float]:
    """Complex-conjugation relations of Phi/Psi at real lambda, by entry class.

    Entry (s, s') is classed by whether left channel s and right channel s'
    are closed (lambda on the cut of the corresponding momentum).  Empty
    classes report 0.
    """
    bases = diagonalize_ends(profile, tol)
    cls = classify_channels(bases, lam, tol=tol)
    if tset is None:
        tset = solve_transition(profile, lam, grid_spec, tol)
    n = profile.channels
    left_closed = np.zeros(n, dtype=bool)
    left_closed[cls.closed_left] = True
    right_closed = np.zeros(n, dtype=bool)
    right_closed[cls.closed_right] = True
    P, Pm, Q, Qm = tset.phi_plus, tset.phi_minus, tset.psi_plus, tset.psi_minus
    scale = max(1.0, max(float(np.max(np.abs(m))) for m in (P, Pm, Q, Qm)))

    # entrywise |lhs - rhs| for each rule, then masked by class
    rules = {
        "open_open": np.maximum.reduce([np.abs(P.conj() - Pm), np.abs(Pm.conj() - P),
                                        np.abs(Q.conj() - Qm), np.abs(Qm.conj() - Q)]),
        "closed_left": np.maximum(np.abs(P.conj() - Qm), np.abs(Pm.conj() - Q)),
        "closed_right": np.maximum(np.abs(P.conj() - Q), np.abs(Pm.conj() - Qm)),
        "closed_closed": np.maximum.reduce([np.abs(P.imag), np.abs(Pm.imag), np.abs(Q.imag), np.abs(Qm.imag)]),
    }
    masks = {
        "open_open": ~left_closed[:, None] & ~right_closed[None, :],
        "closed_left": left_closed[:, None] & ~right_closed[None, :],
        "closed_right": ~left_closed[:, None] & right_closed[None, :],
        "closed_closed": left_closed[:, None] & right_closed[None, :],
    }
    out = {}
    for name, mat in rules.items():
        sel = mat[masks[name]]
        out[name] = float(np.max(sel)) / scale if sel.size else 0.0
    return out


def predicted_flip(ts: TransitionSet, side: str, channel: int) -> dict[str, np.ndarray]:
    """Phi/Psi expected after flipping the sheet of one channel momentum."""
    P, Pm, Q, Qm = (m.copy() for m in (ts.phi_plus, ts.phi_minus, ts.psi_plus, ts.psi_minus))
    s = channel
    if side == LEFT:
        # row s: Phi_pm <-> Psi_pm
        P[s], Q[s] = ts.psi_plus[s], ts.phi_plus[s]
        Pm[s], Qm[s] = ts.psi_minus[s], ts.phi_minus[s]
    else:
        # column s: Phi_pm <-> Psi_mp
        P[:, s], Qm[:, s] = ts.psi_minus[:, s], ts.phi_plus[:, s]
        Pm[:, s], Q[:, s] = ts.psi_plus[:, s], ts.phi_minus[:, s]
    return {"Phi_plus": P, "Phi_minus": Pm, "Psi_plus": Q, "Psi_minus": Qm}


def monodromy_residual(profile: MediumProfile, lam: complex, channel: int, side: str,
                       grid_spec: GridSpec | None = None, tol: Tolerances = DEFAULT_TOLERANCES,
                       solver=None) -> float:
    """Mismatch between a recomputation on the flipped sheet and the predicted swap.

    ``solver(profile, point) -> TransitionSet`` defaults to the RK4 pipeline.
    """
    if side not in (LEFT, RIGHT):
        raise ValueError(f"side must be {LEFT!r} or {RIGHT!r}")
    if solver is None:
        def solver(prof, pt):
            return solve_transition(prof, pt, grid_spec, tol)
    base_point = SpectralPoint(lam)
    ts = solver(profile, base_point)
    flipped = solver(profile, base_point.flipped(side, channel, profile.channels))
    expected = predicted_flip(ts, side, channel)
    return max(relative_deviation(flipped.matrices()[k], expected[k]) for k in expected)


def export_csv(ts: TransitionSet, path, lam=None, method: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["matrix", "row", "col", "re", "im"]
        if method:
            header.append("method")
        writer.writerow(header)
        for name, m in ts.matrices().items():
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    row = [name, i, j, repr(float(m[i, j].real)), repr(float(m[i, j].imag))]
                    if method:
                        row.append(method)
                    writer.writerow(row)
