"""Transmission/reflection matrices, the S-matrix and its identities.

Index conventions.  ``t1`` maps left channels to right channels (rows are
right channels, columns left), ``r1`` is left-to-left, ``t2`` right-to-left
and ``r2`` right-to-right.  Open/closed block names ``xy`` give the class of
the row index then the column index, each measured on that matrix's own side.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSplit, SingularPhiPlus
from .medium import LEFT, RIGHT
from .spectral import ChannelClassification, classify_from_momenta, principal_sqrt
from .tolerances import DEFAULT_TOLERANCES, Tolerances

# (row side, column side) of each scattering matrix
SIDES = {"t1": (RIGHT, LEFT), "r1": (LEFT, LEFT), "t2": (LEFT, RIGHT), "r2": (RIGHT, RIGHT)}
NAMES = ("t1", "r1", "t2", "r2")


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def pseudo_inverse(a, rcond: float):
    """SVD pseudo-inverse with relative cutoff; also returns the numerical rank."""
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros(a.shape[::-1], dtype=complex), 0
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return (vh.conj().T * inv_s[None, :]) @ u.conj().T, int(np.count_nonzero(keep))


@dataclass(frozen=True)
class ScatteringSet:
    t1: np.ndarray
    t2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    K_left: np.ndarray
    K_right: np.ndarray
    S: np.ndarray
    S_tilde: np.ndarray
    classification: ChannelClassification | None = None
    L: np.ndarray | None = None
    rank_report: dict = field(default_factory=dict)
    warnings: tuple = ()
    det_phi_plus: complex | None = None
    det_phi_minus: complex | None = None

    @property
    def n(self) -> int:
        return self.t1.shape[0]

    def matrix(self, name: str, tilde: bool = False) -> np.ndarray:
        n = self.n
        full = self.S_tilde if tilde else self.S
        rows, cols = {"t1": (0, 0), "r2": (0, 1), "r1": (1, 0), "t2": (1, 1)}[name]
        return full[rows * n:(rows + 1) * n, cols * n:(cols + 1) * n]

    def block(self, name: str, kinds: str, tilde: bool = False) -> np.ndarray:
        """Open/closed sub-block, e.g. ``block("t1", "oc")``."""
        if self.classification is None:
            raise ValueError("open/closed blocks need a real spectral parameter")
        row_side, col_side = SIDES[name]
        rows = self.classification.indices(row_side, kinds[0])
        cols = self.classification.indices(col_side, kinds[1])
        return self.matrix(name, tilde)[np.ix_(rows, cols)]

    @classmethod
    def from_blocks(cls, t1, t2, r1, r2, K_left, K_right, real_lambda: bool = True,
                    tol: Tolerances = DEFAULT_TOLERANCES, phi_minus=None, phi_plus=None) -> "ScatteringSet":
        K_left = np.asarray(K_left, dtype=complex)
        K_right = np.asarray(K_right, dtype=complex)
        S = np.block([[t1, r2], [r1, t2]])
        # S~ = D1 S D2^-1 with D1 = diag(K+^1/2, K-^1/2), D2 = diag(K-^1/2, K+^1/2)
        hl = principal_sqrt(K_left)
        hr = principal_sqrt(K_right)
        d1 = np.concatenate([hr, hl])
        d2 = np.concatenate([hl, hr])
        S_tilde = d1[:, None] * S / d2[None, :]
        return cls._finish(t1, t2, r1, r2, K_left, K_right, S, S_tilde, real_lambda, tol,
                           phi_plus, phi_minus)

    @classmethod
    def _finish(cls, t1, t2, r1, r2, K_left, K_right, S, S_tilde, real_lambda, tol, phi_plus, phi_minus):
        classification = L = None
        rank_report = {}
        warnings = []
        if real_lambda:
            classification = classify_from_momenta(K_left, K_right)
            ro = classification.open_right
            lo = classification.open_left
            t1oo = t1[np.ix_(ro, lo)]
            t2oo = t2[np.ix_(lo, ro)]
            pinv1, rank1 = pseudo_inverse(t1oo, tol.rank_tol)
            _, rank2 = pseudo_inverse(t2oo, tol.rank_tol)
            L = pinv1 @ t1oo
            rank_report = {"t1_oo": rank1, "t2_oo": rank2,
                           "expected": int(min(classification.l_o, classification.r_o))}
            if min(rank1, rank2) < rank_report["expected"]:
                warnings.append(f"open-open transmission rank {min(rank1, rank2)} below "
                                f"{rank_report['expected']}")
        det_p = complex(np.linalg.det(phi_plus)) if phi_plus is not None else None
        det_m = complex(np.linalg.det(phi_minus)) if phi_minus is not None else None
        return cls(t1, t2, r1, r2, K_left, K_right, S, S_tilde, classification, L,
                   rank_report, tuple(warnings), det_p, det_m)


for _name in NAMES:
    for _kinds in ("oo", "oc", "co", "cc"):
        setattr(ScatteringSet, f"{_name}_{_kinds}",
                property(lambda self, a=_name, b=_kinds: self.block(a, b)))


def check_phi_plus(phi_plus, tol: Tolerances = DEFAULT_TOLERANCES) -> None:
    n = phi_plus.shape[0]
    norm = float(np.linalg.norm(phi_plus, 2))
    det = abs(np.linalg.det(phi_plus))
    limit = tol.singularity_tol * norm ** n
    if det < limit:
        raise SingularPhiPlus(f"|det Phi_+| = {det:.3e} below {limit:.3e}; lambda is at or near a bound state")


def _tilde(m, K_left, K_right):
    hl = principal_sqrt(K_left)
    hr = principal_sqrt(K_right)
    return hl[:, None] * m / hr[None, :]


def _assemble(phi_p, phi_m, psi_p, psi_m):
    t1 = np.linalg.inv(phi_p)
    r1 = psi_p @ t1
    t2 = phi_m - r1 @ psi_m
    r2 = -t1 @ psi_m
    return t1, t2, r1, r2


def scattering_matrices(tset, tol: Tolerances = DEFAULT_TOLERANCES) -> ScatteringSet:
    """t, r and S from a TransitionSet; S~ from the K^1/2-dressed transition matrices."""
    check_phi_plus(tset.phi_plus, tol)
    Kl, Kr = tset.K_left, tset.K_right
    t1, t2, r1, r2 = _assemble(tset.phi_plus, tset.phi_minus, tset.psi_plus, tset.psi_minus)
    tt1, tt2, tr1, tr2 = _assemble(*(_tilde(m, Kl, Kr) for m in
                                     (tset.phi_plus, tset.phi_minus, tset.psi_plus, tset.psi_minus)))
    S = np.block([[t1, r2], [r1, t2]])
    S_tilde = np.block([[tt1, tr2], [tr1, tt2]])
    return ScatteringSet._finish(t1, t2, r1, r2, Kl, Kr, S, S_tilde, tset.point.is_physical, tol,
                                 tset.phi_plus, tset.phi_minus)


def _momentum_blocks(sset: ScatteringSet, side: str, kind: str):
    """Diagonal of K restricted to one class, written as kappa (open) or i*kappa (closed)."""
    cls = sset.classification
    kappa = cls.kappa(side, kind)
    return kappa.astype(complex) if kind == "o" else 1j * kappa


def symmetry_residuals(sset: ScatteringSet) -> dict[str, float]:
    """Transpose symmetries of t, r, in full, block and 2N form."""
    Kl = np.diag(sset.K_left)
    Kr = np.diag(sset.K_right)
    t1, t2, r1, r2 = sset.t1, sset.t2, sset.r1, sset.r2
    out = {
        "sym_t": _rel(Kl @ t2, t1.T @ Kr),
        "sym_r1": _rel(Kl @ r1, r1.T @ Kl),
        "sym_r2": _rel(Kr @ r2, r2.T @ Kr),
    }
    n = sset.n
    zero = np.zeros((n, n))
    lhs = np.block([[zero, Kl], [Kr, zero]]) @ sset.S
    rhs = sset.S.T @ np.block([[zero, Kr], [Kl, zero]])
    out["sym_S"] = _rel(lhs, rhs)
    if sset.classification is not None:
        # K_a X_ab = Y_ba^T K_b with K written as kappa or i*kappa per block
        pairs = {"t": ("t2", "t1", LEFT, RIGHT), "r1": ("r1", "r1", LEFT, LEFT), "r2": ("r2", "r2", RIGHT, RIGHT)}
        for label, (x, y, row_side, col_side) in pairs.items():
            for a in "oc":
                for b in "oc":
                    ka = _momentum_blocks(sset, row_side, a)
                    kb = _momentum_blocks(sset, col_side, b)
                    out[f"sym_{label}_{a}{b}"] = _rel(ka[:, None] * sset.block(x, a + b),
                                                      sset.block(y, b + a).T * kb[None, :])
    return out


def unitarity_residuals(sset: ScatteringSet) -> dict[str, float]:
    """Flux conservation.

    All channels open: the K-weighted unitarity of S and plain unitarity of S~.
    Otherwise: the open-subspace relations, plus ``full_tilde_unitarity``
    which is expected to be O(1) since the complete S~ is then not unitary.
    """
    cls = sset.classification
    if cls is None:
        raise ValueError("unitarity needs a real spectral parameter on the physical sheet")
    n = sset.n
    out = {}
    eye = np.eye(2 * n)
    full_tilde = _rel(sset.S_tilde.conj().T @ sset.S_tilde, eye)
    if cls.all_open:
        Kl = np.diag(sset.K_left.real)
        Kr = np.diag(sset.K_right.real)
        z = np.zeros((n, n))
        out["weighted_unitarity"] = _rel(sset.S.conj().T @ np.block([[Kr, z], [z, Kl]]) @ sset.S,
                                         np.block([[Kl, z], [z, Kr]]))
        out["tilde_unitarity"] = full_tilde
        return out

    kl = np.diag(cls.kappa(LEFT, "o"))
    kr = np.diag(cls.kappa(RIGHT, "o"))
    t1, t2, r1, r2 = (sset.block(m, "oo") for m in ("t1", "t2", "r1", "r2"))
    L = sset.L
    h = lambda m: m.conj().T  # noqa: E731
    out["open_cross_left"] = _rel(h(t2) @ kl @ r1 @ L + h(r2) @ kr @ t1, np.zeros_like(t1))
    out["open_flux_left_projected"] = _rel(h(t1) @ kr @ t1 + h(r1) @ kl @ r1 @ L, kl @ L)
    out["open_cross_right"] = _rel(h(r1) @ kl @ t2 + h(t1) @ kr @ r2, np.zeros_like(t2))
    out["open_flux_right"] = _rel(h(t2) @ kl @ t2 + h(r2) @ kr @ r2, kr)
    out["open_flux_left"] = _rel(h(t1) @ kr @ t1 + h(r1) @ kl @ r1, kl)
    out["open_conjugate_identity"] = _rel(t2.conj() @ t1 + r1.conj() @ r1, np.eye(cls.l_o))
    out["full_tilde_unitarity"] = full_tilde
    return out


OPEN_SUBSPACE_CHECKS = ("open_cross_left", "open_flux_left_projected", "open_cross_right",
                        "open_flux_right", "open_flux_left", "open_conjugate_identity")


def closed_open_residuals(sset: ScatteringSet) -> dict[str, float]:
    """Relations tying closed-channel blocks to open ones, and their 1<->2 mirrors."""
    cls = sset.classification
    if cls is None:
        raise ValueError("closed/open relations need a real spectral parameter")
    if cls.all_open or cls.l_o == 0 or cls.r_o == 0:
        raise DegenerateSplit(f"need open channels on both sides and at least one closed channel "
                              f"(l_o={cls.l_o}, l_c={cls.l_c}, r_o={cls.r_o}, r_c={cls.r_c})")
    out = {}
    for tag, (t, r, tb, rb) in {"1": ("t1", "r1", "t2", "r2"), "2": ("t2", "r2", "t1", "r1")}.items():
        b = lambda name, k: sset.block(name, k)  # noqa: E731
        c = lambda name, k: sset.block(name, k).conj()  # noqa: E731
        out[f"t{tag}_cc"] = _rel(b(t, "cc"), c(t, "cc") - b(rb, "co") @ c(t, "oc") - b(t, "co") @ c(r, "oc"))
        out[f"r{tag}_cc"] = _rel(b(r, "cc"), c(r, "cc") - b(tb, "co") @ c(t, "oc") - b(r, "co") @ c(r, "oc"))
        out[f"t{tag}_co"] = _rel(b(t, "co"), c(t, "co") @ b(r, "oo") + c(rb, "co") @ b(t, "oo"))
        out[f"r{tag}_co"] = _rel(b(r, "co"), c(tb, "co") @ b(t, "oo") + c(r, "co") @ b(r, "oo"))
        out[f"t{tag}_oc"] = _rel(b(t, "oc"), -b(rb, "oo") @ c(t, "oc") - b(t, "oo") @ c(r, "oc"))
        out[f"r{tag}_oc"] = _rel(b(r, "oc"), -b(tb, "oo") @ c(t, "oc") - b(r, "oo") @ c(r, "oc"))
    return out


def projector_residuals(sset: ScatteringSet, tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, float]:
    """Structure of the open-subspace projector built from pinv(t1_oo) t1_oo."""
    cls = sset.classification
    if cls is None:
        raise ValueError("projector needs a real spectral parameter")
    L = sset.L
    t1 = sset.block("t1", "oo")
    t2 = sset.block("t2", "oo")
    pinv1, _ = pseudo_inverse(t1, tol.rank_tol)
    pinv2, _ = pseudo_inverse(t2, tol.rank_tol)
    L2 = t2 @ pinv2
    off = L - np.diag(np.diag(L)) if L.size else L
    rank = int(round(float(np.trace(L).real))) if L.size else 0
    return {
        "hermitian": _rel(L, L.conj().T),
        "idempotent": _rel(L @ L, L),
        "offdiagonal": float(np.max(np.abs(off))) if L.size else 0.0,
        "rank_defect": float(abs(rank - min(cls.l_o, cls.r_o))),
        "right_inverse": _rel(t1 @ pinv1, np.eye(cls.r_o)),
        "left_inverse_t2": _rel(pinv2 @ t2, np.eye(cls.r_o)),
        "conjugate_pair": _rel(L, L2.conj()),
    }


def determinant_residuals(sset: ScatteringSet) -> dict[str, float]:
    """det S = det Phi_- / det Phi_+ = det S~, relative to |det S|."""
    det_s = complex(np.linalg.det(sset.S))
    det_st = complex(np.linalg.det(sset.S_tilde))
    scale = max(1.0, abs(det_s))
    out = {"det_S_vs_tilde": abs(det_s - det_st) / scale}
    if sset.det_phi_plus is not None and sset.det_phi_minus is not None:
        out["det_S_vs_phi"] = abs(det_s - sset.det_phi_minus / sset.det_phi_plus) / scale
    if sset.classification is not None and sset.classification.all_open:
        out["det_S_tilde_modulus"] = abs(abs(det_st) - 1.0)
    return out


def _lam_text(lam) -> str:
    lam = complex(lam)
    return repr(lam.real) if lam.imag == 0 else repr(lam)


def block_rows(sset: ScatteringSet, lam):
    """Rows ``lambda, block, row, col, re, im`` for the four matrices and their tilde versions."""
    rows = []
    for tilde in (False, True):
        for name in NAMES:
            m = sset.matrix(name, tilde)
            label = name + ("_tilde" if tilde else "")
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    rows.append([_lam_text(lam), label, i, j, repr(float(m[i, j].real)), repr(float(m[i, j].imag))])
    return rows


def export_csv(records, path, method: str | None = None) -> None:
    """``records`` is an iterable of ``(lambda, ScatteringSet)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["lambda", "block", "row", "col", "re", "im"]
        writer.writerow(header + (["method"] if method else []))
        for lam, sset in records:
            for row in block_rows(sset, lam):
                writer.writerow(row + ([method] if method else []))


def export_json(records, path, method: str | None = None) -> None:
    data = []
    for lam, sset in records:
        for row in block_rows(sset, lam):
            item = dict(zip(["lambda", "block", "row", "col", "re", "im"], row))
            item["re"] = float(item["re"])
            item["im"] = float(item["im"])
            if method:
                item["method"] = method
            data.append(item)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def export_residuals_csv(records, path) -> None:
    """``records`` is an iterable of ``(lambda, {check_name: residual})``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "check_name", "residual"])
        for lam, res in records:
            for name, value in res.items():
                writer.writerow([_lam_text(lam), name, repr(float(value))])
