"""Matrix media g(z), V(z) on the line and their asymptotic tails.

A :class:`MediumProfile` is a stack of layers covering ``[-L_z, L_z]`` plus
two constant tails.  Every matrix is real symmetric and ``g`` is positive
definite.  The tails are diagonalised by the symmetric-definite problem
``V f = Lambda g f`` normalised so that ``f^T g f = 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DegenerateThresholds, ProfileError
from .tolerances import DEFAULT_TOLERANCES, Tolerances

CONSTANT = "constant"
SAMPLED = "sampled"
LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class Layer:
    """One slab of the medium.

    For ``kind == "constant"`` ``g`` and ``v`` have shape ``(N, N)``.  For
    ``kind == "sampled"`` they have shape ``(M, N, N)`` and are attached to the
    strictly increasing ``nodes`` (which start at ``z_lo`` and end at ``z_hi``);
    values in between are linear interpolants, entry by entry.
    """

    kind: str
    z_lo: float
    z_hi: float
    g: np.ndarray
    v: np.ndarray
    nodes: np.ndarray | None = None

    @classmethod
    def constant(cls, z_lo, z_hi, g, v) -> "Layer":
        g = np.atleast_2d(np.asarray(g, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return cls(CONSTANT, float(z_lo), float(z_hi), g, v)

    @classmethod
    def sampled(cls, nodes, g, v) -> "Layer":
        nodes = np.asarray(nodes, dtype=float)
        g = np.asarray(g, dtype=float)
        v = np.asarray(v, dtype=float)
        if g.ndim == 1:
            g = g[:, None, None]
        if v.ndim == 1:
            v = v[:, None, None]
        return cls(SAMPLED, float(nodes[0]), float(nodes[-1]), g, v, nodes)

    @property
    def is_constant(self) -> bool:
        return self.kind == CONSTANT

    def matrices(self):
        """All stored (g, V) pairs of the layer."""
        if self.is_constant:
            return [(self.g, self.v)]
        return list(zip(self.g, self.v))

    def coefficients(self, z):
        """Evaluate ``(g, V)`` at ``z`` (scalar or 1-D array) inside the layer.

        Array input returns stacks of shape ``(len(z), N, N)``.
        """
        z_arr = np.asarray(z, dtype=float)
        if self.is_constant:
            if z_arr.ndim == 0:
                return self.g, self.v
            shape = (z_arr.size,) + self.g.shape
            return np.broadcast_to(self.g, shape), np.broadcast_to(self.v, shape)
        zs = np.atleast_1d(z_arr)
        idx = np.clip(np.searchsorted(self.nodes, zs, side="right") - 1, 0, len(self.nodes) - 2)
        z0 = self.nodes[idx]
        z1 = self.nodes[idx + 1]
        w = ((zs - z0) / (z1 - z0))[:, None, None]
        g = (1.0 - w) * self.g[idx] + w * self.g[idx + 1]
        v = (1.0 - w) * self.v[idx] + w * self.v[idx + 1]
        if z_arr.ndim == 0:
            return g[0], v[0]
        return g, v

    def to_dict(self) -> dict:
        if self.is_constant:
            return {"kind": CONSTANT, "z": [self.z_lo, self.z_hi],
                    "g": self.g.tolist(), "v": self.v.tolist()}
        return {"kind": SAMPLED, "nodes": [
            {"z": float(z), "g": g.tolist(), "v": v.tolist()}
            for z, g, v in zip(self.nodes, self.g, self.v)]}


@dataclass(frozen=True)
class MediumProfile:
    channels: int
    half_width: float
    layers: tuple[Layer, ...]
    left_tail: tuple[np.ndarray, np.ndarray]
    right_tail: tuple[np.ndarray, np.ndarray]

    @classmethod
    def build(cls, half_width, layers, left_tail, right_tail) -> "MediumProfile":
        gl, vl = (np.atleast_2d(np.asarray(m, dtype=float)) for m in left_tail)
        gr, vr = (np.atleast_2d(np.asarray(m, dtype=float)) for m in right_tail)
        return cls(gl.shape[0], float(half_width), tuple(layers), (gl, vl), (gr, vr))

    @classmethod
    def uniform(cls, g, v, half_width=1.0) -> "MediumProfile":
        """Medium equal to its tails everywhere."""
        return cls.build(half_width, [Layer.constant(-half_width, half_width, g, v)],
                         (g, v), (g, v))

    @classmethod
    def from_dict(cls, doc: dict) -> "MediumProfile":
        try:
            n = int(doc["channels"])
            lz = float(doc["half_width"])
            tails = []
            for key in ("left_tail", "right_tail"):
                tails.append((_matrix(doc[key]["g"], n), _matrix(doc[key]["v"], n)))
            layers = []
            for entry in doc["layers"]:
                kind = entry.get("kind", CONSTANT)
                if kind == CONSTANT:
                    lo, hi = entry["z"]
                    layers.append(Layer.constant(lo, hi, _matrix(entry["g"], n), _matrix(entry["v"], n)))
                elif kind == SAMPLED:
                    nodes = entry["nodes"]
                    layers.append(Layer.sampled(
                        [nd["z"] for nd in nodes],
                        np.array([_matrix(nd["g"], n) for nd in nodes]),
                        np.array([_matrix(nd["v"], n) for nd in nodes])))
                else:
                    raise ProfileError(f"unknown layer kind {kind!r}")
        except ProfileError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ProfileError(f"malformed profile document: {exc!r}") from exc
        return cls(n, lz, tuple(layers), tails[0], tails[1])

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "half_width": self.half_width,
            "left_tail": {"g": self.left_tail[0].tolist(), "v": self.left_tail[1].tolist()},
            "right_tail": {"g": self.right_tail[0].tolist(), "v": self.right_tail[1].tolist()},
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @property
    def is_piecewise_constant(self) -> bool:
        return all(layer.is_constant for layer in self.layers)

    def breakpoints(self) -> np.ndarray:
        pts = {-self.half_width, self.half_width}
        for layer in self.layers:
            pts.update((layer.z_lo, layer.z_hi))
        return np.array(sorted(pts))

    def layer_at(self, z: float) -> Layer:
        """Layer used at an interior point; the later layer wins at a shared boundary."""
        chosen = self.layers[0]
        for layer in self.layers:
            if layer.z_lo <= z:
                chosen = layer
        return chosen

    def require_valid(self, tol: Tolerances = DEFAULT_TOLERANCES) -> None:
        report = validate_profile(self, tol)
        if not report.ok:
            raise ProfileError("profile failed validation:\n" + report.summary(), report)


def _matrix(rows, n: int) -> np.ndarray:
    m = np.array(rows, dtype=float)
    if m.ndim == 0 and n == 1:
        m = m.reshape(1, 1)
    if m.shape != (n, n):
        raise ProfileError(f"expected a {n}x{n} matrix, got shape {m.shape}")
    return m


def load_profile(path) -> MediumProfile:
    with open(Path(path)) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"{path}: not valid JSON ({exc})") from exc
    return MediumProfile.from_dict(doc)


def save_profile(profile: MediumProfile, path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n")


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    layer: int | None = None
    margin: float | None = None
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = []
        for c in self.failures:
            where = "" if c.layer is None else f" (layer {c.layer})"
            lines.append(f"  {c.name}{where}: {c.message}")
        return "\n".join(lines) if lines else "  all checks passed"


def _matrix_checks(label, layer_index, g, v, n, tol):
    out = []
    if g.shape != (n, n) or v.shape != (n, n):
        out.append(Check(f"{label}.shape", False, layer_index, None,
                         f"expected {n}x{n}, got {g.shape} and {v.shape}"))
        return out
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
        out.append(Check(f"{label}.finite", False, layer_index, None, "non-finite entry"))
        return out
    asym_g = float(np.max(np.abs(g - g.T)))
    asym_v = float(np.max(np.abs(v - v.T)))
    out.append(Check(f"{label}.g_symmetric", asym_g <= tol.sym_tol, layer_index, asym_g,
                     f"max |g - g^T| = {asym_g:.3g}"))
    out.append(Check(f"{label}.v_symmetric", asym_v <= tol.sym_tol, layer_index, asym_v,
                     f"max |V - V^T| = {asym_v:.3g}"))
    lam_min = float(np.linalg.eigvalsh(0.5 * (g + g.T))[0])
    out.append(Check(f"{label}.g_positive", lam_min > 0.0, layer_index, lam_min,
                     f"smallest eigenvalue of g = {lam_min:.3g}"))
    return out


def validate_profile(profile: MediumProfile, tol: Tolerances = DEFAULT_TOLERANCES) -> ValidationReport:
    """Check every structural hypothesis on the medium; never raises."""
    checks = []
    n = profile.channels
    lz = profile.half_width
    checks.append(Check("channels", n >= 1, None, float(n), f"N = {n}"))
    checks.append(Check("half_width", lz > 0, None, lz, f"L_z = {lz}"))
    for label, (g, v) in (("left_tail", profile.left_tail), ("right_tail", profile.right_tail)):
        checks.extend(_matrix_checks(label, None, g, v, n, tol))

    layers = profile.layers
    if not layers:
        checks.append(Check("coverage", False, None, None, "no layers"))
        return ValidationReport(tuple(checks))
    edge_tol = 1e-12 * max(1.0, lz)
    for i, layer in enumerate(layers):
        checks.append(Check("layer.order", layer.z_lo < layer.z_hi, i, layer.z_hi - layer.z_lo,
                            f"z_lo = {layer.z_lo}, z_hi = {layer.z_hi}"))
        if not layer.is_constant:
            nodes = layer.nodes
            ok = nodes is not None and len(nodes) >= 2 and bool(np.all(np.diff(nodes) > 0))
            checks.append(Check("layer.nodes", ok, i, None, "sampled nodes must be >= 2 and strictly increasing"))
            if ok and (len(layer.g) != len(nodes) or len(layer.v) != len(nodes)):
                checks.append(Check("layer.nodes", False, i, None, "one (g, V) pair per node required"))
        for j, (g, v) in enumerate(layer.matrices()):
            label = "layer" if layer.is_constant else f"layer.node{j}"
            checks.extend(_matrix_checks(label, i, g, v, n, tol))

    lo_gap = abs(layers[0].z_lo + lz)
    checks.append(Check("coverage.left", lo_gap <= edge_tol, 0, lo_gap,
                        f"first layer starts at {layers[0].z_lo}, expected {-lz}"))
    hi_gap = abs(layers[-1].z_hi - lz)
    checks.append(Check("coverage.right", hi_gap <= edge_tol, len(layers) - 1, hi_gap,
                        f"last layer ends at {layers[-1].z_hi}, expected {lz}"))
    for i in range(1, len(layers)):
        gap = layers[i].z_lo - layers[i - 1].z_hi
        checks.append(Check("coverage.contiguous", abs(gap) <= edge_tol, i, gap,
                            f"layer {i - 1} ends at {layers[i - 1].z_hi}, layer {i} starts at {layers[i].z_lo}"))
    return ValidationReport(tuple(checks))


# --------------------------------------------------------------------------
# tail diagonalisation


@dataclass(frozen=True)
class AsymptoticBasis:
    side: str
    thresholds: np.ndarray
    frame: np.ndarray
    g: np.ndarray
    v: np.ndarray

    @property
    def n(self) -> int:
        return len(self.thresholds)


def fix_column_signs(f: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive (first one on ties)."""
    f = f.copy()
    for s in range(f.shape[1]):
        col = f[:, s]
        mags = np.abs(col)
        k = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-12))[0])
        if col[k] < 0:
            f[:, s] = -col
    return f


def generalized_eig(g: np.ndarray, v: np.ndarray):
    """Solve ``v f = Lambda g f`` with ``f^T g f = 1``; eigenvalues ascending."""
    lam, f = scipy.linalg.eigh(v, g)
    return lam, fix_column_signs(f)


def diagonalize_ends(profile: MediumProfile, tol: Tolerances = DEFAULT_TOLERANCES,
                     gap_tol: float | None = None):
    """Return the (left, right) asymptotic bases of the medium."""
    out = []
    for side, (g, v) in ((LEFT, profile.left_tail), (RIGHT, profile.right_tail)):
        lam, f = generalized_eig(g, v)
        if len(lam) > 1:
            gap = float(np.min(np.diff(lam)))
            limit = tol.gap(lam) if gap_tol is None else gap_tol
            if gap <= limit:
                raise DegenerateThresholds(
                    f"{side} tail thresholds {lam.tolist()} are degenerate (gap {gap:.3g} <= {limit:.3g})")
        out.append(AsymptoticBasis(side, lam, f, g, v))
    return out[0], out[1]


def sample_medium(profile: MediumProfile, z: float):
    """(g, V) at a single point; tails outside ``[-L_z, L_z]``."""
    if z > profile.half_width:
        return profile.right_tail
    if z < -profile.half_width:
        return profile.left_tail
    return profile.layer_at(z).coefficients(z)
