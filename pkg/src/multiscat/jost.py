"""Jost solutions by fixed-step RK4 across the interior, exact data in the tails.

The second-order system ``(g u')' + (V - lambda g) u = 0`` is integrated as
``u' = g^{-1} p``, ``p' = -(V - lambda g) u`` with ``p = g u'``.  ``u`` and
``p`` are continuous across layer boundaries.  F+_pm start from their exact
tail values at ``z = L_z`` and run right-to-left, F-_pm start at ``z = -L_z``
and run left-to-right.  Because the equation is linear, one RK4 step is a
2N x 2N matrix; all columns of a family are carried together.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .medium import Layer, MediumProfile, generalized_eig
from .oracle import constant_propagator, tail_states
from .spectral import SpectralPoint, channel_momenta, check_off_threshold, principal_sqrt
from .tolerances import DEFAULT_TOLERANCES, Tolerances

FAMILIES = ("F+_+", "F+_-", "F-_+", "F-_-")
PP, PM, MP, MM = range(4)


@dataclass(frozen=True)
class GridSpec:
    """Step control.

    ``h_max`` defaults to ``1e-3 * 2 L_z``.  ``wave_cap`` additionally bounds
    ``h * max|k| <= wave_cap`` (k the largest local momentum), which only
    bites at large |lambda|.  ``subdivide`` splits every interval of the
    resulting grid into that many equal steps (exact step halving for
    convergence studies).
    """

    h_max: float | None = None
    pad_fraction: float = 0.5
    wave_cap: float | None = 0.05
    z_ref: float = 0.0
    subdivide: int = 1

    def step(self, profile: MediumProfile, wave_max: float | None = None) -> float:
        h = self.h_max if self.h_max is not None else 1e-3 * 2 * profile.half_width
        if self.wave_cap is not None and wave_max:
            h = min(h, self.wave_cap / wave_max)
        return h


@dataclass(frozen=True)
class Segment:
    layer: Layer
    i0: int
    i1: int


@dataclass(frozen=True)
class Grid:
    z: np.ndarray
    segments: tuple[Segment, ...]
    i_left: int
    i_right: int
    i_ref: int
    h: float


def max_wavenumber(profile: MediumProfile, lams) -> float:
    eig = [generalized_eig(*profile.left_tail)[0], generalized_eig(*profile.right_tail)[0]]
    for layer in profile.layers:
        for g, v in layer.matrices():
            eig.append(generalized_eig(g, v)[0])
    eig = np.concatenate(eig)
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    return float(np.sqrt(np.max(np.abs(eig[None, :] - lams[:, None]))))


def _intervals(n_steps_float: float) -> int:
    n = max(2, int(np.ceil(n_steps_float - 1e-9)))
    return n + (n % 2)


def build_grid(profile: MediumProfile, spec: GridSpec, h: float) -> Grid:
    lz = profile.half_width
    pts = set(profile.breakpoints().tolist())
    if -lz < spec.z_ref < lz:
        pts.add(float(spec.z_ref))
    pts = np.array(sorted(pts))
    pad = spec.pad_fraction * lz
    n_pad = _intervals(pad / h) * spec.subdivide if pad > 0 else 0

    chunks = []
    if n_pad:
        chunks.append(np.linspace(-lz - pad, -lz, n_pad + 1)[:-1])
    segments = []
    start = sum(len(c) for c in chunks)
    i_left = start
    for a, b in zip(pts[:-1], pts[1:]):
        n = _intervals((b - a) / h) * spec.subdivide
        nodes = np.linspace(a, b, n + 1)
        if segments:
            nodes = nodes[1:]
        chunks.append(nodes)
        i0 = start if not segments else segments[-1].i1
        i1 = i0 + n
        segments.append(Segment(profile.layer_at(0.5 * (a + b)), i0, i1))
        start += len(nodes)
    i_right = segments[-1].i1
    if n_pad:
        chunks.append(np.linspace(lz, lz + pad, n_pad + 1)[1:])
    z = np.concatenate(chunks)
    z[i_left] = -lz
    z[i_right] = lz
    i_ref = int(np.argmin(np.abs(z - spec.z_ref)))
    return Grid(z, tuple(segments), i_left, i_right, i_ref, h / spec.subdivide)


def _system(layer: Layer, z, lams):
    """A(z; lambda) for all z (1-D) and lambdas (1-D): shape (L, Z, 2N, 2N)."""
    g, v = layer.coefficients(np.atleast_1d(z))
    g = np.asarray(g)
    v = np.asarray(v)
    n = g.shape[-1]
    chol = np.linalg.cholesky(g)
    cinv = np.linalg.inv(chol)
    ginv = np.swapaxes(cinv, -1, -2) @ cinv
    base = np.zeros(g.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    base[..., :n, n:] = ginv
    base[..., n:, :n] = -v
    lower = np.zeros_like(base)
    lower[..., n:, :n] = g
    lams = np.asarray(lams, dtype=complex)
    return base[None] + lams[:, None, None, None] * lower[None]


def rk4_step_matrix(a0, am, a1, h):
    """Matrix M with RK4(y) = M y for the linear field y' = A(z) y."""
    eye = np.broadcast_to(np.eye(a0.shape[-1]), a0.shape)
    k1 = a0
    k2 = am @ (eye + 0.5 * h * k1)
    k3 = am @ (eye + 0.5 * h * k2)
    k4 = a1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segment_steps(seg: Segment, z, lams, backward: bool):
    """Step matrices for one segment, ordered in the direction of travel.

    Returns ``(M, n)`` with ``M`` shaped (L, 2N, 2N) for constant layers (one
    matrix for all n steps), else shaped (L, n, 2N, 2N).
    """
    zs = z[seg.i0:seg.i1 + 1]
    if backward:
        zs = zs[::-1]
    n = len(zs) - 1
    if seg.layer.is_constant:
        a = _system(seg.layer, zs[:1], lams)[:, 0]
        h = zs[1] - zs[0]
        return rk4_step_matrix(a, a, a, h), n
    h = np.diff(zs)
    a0 = _system(seg.layer, zs[:-1], lams)
    am = _system(seg.layer, zs[:-1] + 0.5 * h, lams)
    a1 = _system(seg.layer, zs[1:], lams)
    return rk4_step_matrix(a0, am, a1, h[None, :, None, None]), n


@dataclass(frozen=True)
class JostField:
    """Four Jost families sampled on a grid.

    ``U[family, node]`` and ``P[family, node]`` are N x N; column ``s`` is the
    s-th Jost vector and ``P = g u'``.  Family order is :data:`FAMILIES`.
    """

    point: SpectralPoint
    K_left: np.ndarray
    K_right: np.ndarray
    grid: Grid
    U: np.ndarray
    P: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    def family(self, k: int):
        return self.U[k], self.P[k]

    def at(self, k: int, i: int):
        return self.U[k, i], self.P[k, i]


def _fill_tail(basis, lam, y0, dz):
    k = principal_sqrt(basis.thresholds - complex(lam))
    return constant_propagator(basis.frame, k, basis.g, dz) @ y0


def integrate_jost(profile: MediumProfile, bases, point: SpectralPoint | complex,
                   grid_spec: GridSpec | None = None, tol: Tolerances = DEFAULT_TOLERANCES) -> JostField:
    if not isinstance(point, SpectralPoint):
        point = SpectralPoint(point)
    grid_spec = grid_spec or GridSpec()
    lam = complex(point.lam)
    check_off_threshold(bases, lam, tol)
    mom = channel_momenta(bases, point)
    left, right = bases
    n = profile.channels
    h = grid_spec.step(profile, max_wavenumber(profile, [lam]))
    grid = build_grid(profile, grid_spec, h)
    z = grid.z
    lams = np.array([lam])

    yp = np.empty((len(z), 2 * n, 2 * n), dtype=complex)
    ym = np.empty_like(yp)

    yp[grid.i_right] = tail_states(right, mom.K_right, z[grid.i_right])
    for seg in reversed(grid.segments):
        m, steps = _segment_steps(seg, z, lams, backward=True)
        y = yp[seg.i1]
        for j in range(steps):
            y = (m[0] if m.ndim == 3 else m[0, j]) @ y
            yp[seg.i1 - j - 1] = y

    ym[grid.i_left] = tail_states(left, mom.K_left, z[grid.i_left])
    for seg in grid.segments:
        m, steps = _segment_steps(seg, z, lams, backward=False)
        y = ym[seg.i0]
        for j in range(steps):
            y = (m[0] if m.ndim == 3 else m[0, j]) @ y
            ym[seg.i0 + j + 1] = y

    # tails: the seeded family is exact, the other one is carried exactly
    zr = z[grid.i_right + 1:]
    if len(zr):
        yp[grid.i_right + 1:] = np.stack([tail_states(right, mom.K_right, zz) for zz in zr])
        ym[grid.i_right + 1:] = _fill_tail(right, lam, ym[grid.i_right], zr - z[grid.i_right])
    zl = z[:grid.i_left]
    if len(zl):
        ym[:grid.i_left] = np.stack([tail_states(left, mom.K_left, zz) for zz in zl])
        yp[:grid.i_left] = _fill_tail(left, lam, yp[grid.i_left], zl - z[grid.i_left])

    U = np.empty((4, len(z), n, n), dtype=complex)
    P = np.empty_like(U)
    for k, (y, cols) in enumerate(((yp, slice(0, n)), (yp, slice(n, 2 * n)),
                                   (ym, slice(0, n)), (ym, slice(n, 2 * n)))):
        U[k] = y[:, :n, cols]
        P[k] = y[:, n:, cols]
    return JostField(point, mom.K_left, mom.K_right, grid, U, P)


def jost_at_reference(profile: MediumProfile, bases, lams, grid_spec: GridSpec,
                      sheets=None, chunk: int = 512):
    """Jost states at ``z_ref`` for many lambdas at once (no samples kept).

    The same RK4 step matrices as :func:`integrate_jost` are used, with the
    step count raised to a power instead of iterated.  ``grid_spec.h_max``
    should be set explicitly so all lambdas share one grid.  Returns two
    arrays shaped (L, 2N, 2N): F+ states (columns F+_+, F+_-) and F- states.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    left, right = bases
    n = profile.channels
    h = grid_spec.step(profile, max_wavenumber(profile, lams))
    grid = build_grid(profile, grid_spec, h)
    z = grid.z
    out_p = np.empty((len(lams), 2 * n, 2 * n), dtype=complex)
    out_m = np.empty_like(out_p)
    for c0 in range(0, len(lams), chunk):
        block = lams[c0:c0 + chunk]
        yp = _seed_batch(right, _momenta(right, block, sheets, 1), z[grid.i_right])
        ym = _seed_batch(left, _momenta(left, block, sheets, 0), z[grid.i_left])
        for seg in reversed(grid.segments):
            if seg.i1 <= grid.i_ref:
                break
            m, steps = _segment_steps(seg, z, block, backward=True)
            yp = _advance(m, steps, yp)
        for seg in grid.segments:
            if seg.i0 >= grid.i_ref:
                break
            m, steps = _segment_steps(seg, z, block, backward=False)
            ym = _advance(m, steps, ym)
        out_p[c0:c0 + chunk] = yp
        out_m[c0:c0 + chunk] = ym
    return out_p, out_m


def _momenta(basis, lams, sheets, which):
    sign = 1 if sheets is None or sheets[which] is None else np.asarray(sheets[which])
    return sign * principal_sqrt(basis.thresholds[None, :] - lams[:, None])


def _seed_batch(basis, K, z):
    """Batched :func:`tail_states` for momenta of shape (L, N)."""
    f, g = basis.frame, basis.g
    n = K.shape[1]
    ep = np.exp(1j * K * z)
    em = np.exp(-1j * K * z)
    gf = g @ f
    y = np.empty((K.shape[0], 2 * n, 2 * n), dtype=complex)
    y[:, :n, :n] = f[None] * ep[:, None, :]
    y[:, :n, n:] = f[None] * em[:, None, :]
    y[:, n:, :n] = gf[None] * (1j * K * ep)[:, None, :]
    y[:, n:, n:] = gf[None] * (-1j * K * em)[:, None, :]
    return y


def _advance(m, steps, y):
    if m.ndim == 3:
        return np.linalg.matrix_power(m, steps) @ y
    for j in range(steps):
        y = m[:, j] @ y
    return y


def wronskian(u1, p1, u2, p2):
    """w[phi, psi] = phi^T g psi' - phi'^T g psi = u1^T p2 - p1^T u2 (batched)."""
    return np.swapaxes(u1, -1, -2) @ p2 - np.swapaxes(p1, -1, -2) @ u2


DRIFT_PAIRS = ((MM, PP), (MP, PP), (MP, PM), (MM, PM))


def wronskian_drift(field: JostField) -> float:
    i_ref = field.grid.i_ref
    worst = 0.0
    for a, b in DRIFT_PAIRS:
        w = wronskian(field.U[a], field.P[a], field.U[b], field.P[b])
        ref = w[i_ref]
        dev = np.max(np.abs(w - ref[None]), axis=(1, 2))
        worst = max(worst, float(np.max(dev)) / (1.0 + float(np.max(np.abs(ref)))))
    return worst


def basic_wronskian_residual(field: JostField) -> float:
    """Largest deviation from w[F_+,F_+] = w[F_-,F_-] = 0, w[F_+,F_-] = -2iK, over all nodes.

    Each node's deviation is divided by ``1 + |u||p|`` of the pair, the size of
    the products being cancelled.
    """
    worst = 0.0
    for plus, minus, K in ((PP, PM, field.K_right), (MP, MM, field.K_left)):
        expected = -2j * np.diag(K)
        for a, b, target in ((plus, plus, 0.0), (minus, minus, 0.0), (plus, minus, expected)):
            ua, pa = field.family(a)
            ub, pb = field.family(b)
            w = wronskian(ua, pa, ub, pb)
            scale = 1.0 + (np.max(np.abs(ua), axis=(1, 2)) * np.max(np.abs(pb), axis=(1, 2))
                           + np.max(np.abs(pa), axis=(1, 2)) * np.max(np.abs(ub), axis=(1, 2)))
            dev = np.max(np.abs(w - target), axis=(1, 2)) / scale
            worst = max(worst, float(np.max(dev)))
    return worst


def export_csv(field: JostField, path) -> None:
    n = field.U.shape[-1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["z", "family", "column", "component", "re_u", "im_u", "re_p", "im_p"])
        for i, zz in enumerate(field.z):
            for k, name in enumerate(FAMILIES):
                for col in range(n):
                    for comp in range(n):
                        u = field.U[k, i, comp, col]
                        p = field.P[k, i, comp, col]
                        writer.writerow([repr(float(zz)), name, col, comp, repr(u.real), repr(u.imag),
                                         repr(p.real), repr(p.imag)])
