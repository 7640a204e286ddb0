"""Seeded test media and spectral-point pickers."""

from __future__ import annotations

import numpy as np

from .errors import AtThreshold, LayerResonance, SingularPhiPlus
from .medium import Layer, MediumProfile, diagonalize_ends

ALL_OPEN = "all_open"
MIXED = "mixed"
ALL_CLOSED = "all_closed"


def random_spd(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.T


def random_symmetric(rng: np.random.Generator, n: int, amp: float = 3.0) -> np.ndarray:
    a = rng.uniform(-amp, amp, (n, n))
    return 0.5 * (a + a.T)


def spread_thresholds(rng: np.random.Generator, n: int, min_gap: float = 0.3) -> np.ndarray:
    """Sorted thresholds with the lowest in [-3, -1], the highest in [1, 3] and gaps >= min_gap."""
    if n == 1:
        return np.array([rng.uniform(-3.0, 3.0)])
    lo = rng.uniform(-3.0, -1.0)
    hi = rng.uniform(1.0, 3.0)
    while True:
        inner = np.sort(rng.uniform(lo, hi, n - 2))
        thr = np.concatenate([[lo], inner, [hi]])
        if np.all(np.diff(thr) >= min_gap):
            return thr


def tail_with_thresholds(rng: np.random.Generator, thresholds) -> tuple[np.ndarray, np.ndarray]:
    """(g, V) whose generalized eigenvalues are exactly ``thresholds``."""
    n = len(thresholds)
    g = random_spd(rng, n)
    c = np.linalg.cholesky(g)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    v = c @ (q * thresholds) @ q.T @ c.T
    return g, 0.5 * (v + v.T)


def random_piecewise_profile(rng: np.random.Generator, n: int | None = None,
                             max_layers: int = 6) -> MediumProfile:
    n = int(rng.integers(1, 5)) if n is None else n
    lz = float(rng.uniform(0.5, 1.0))
    n_layers = int(rng.integers(1, max_layers + 1))
    cuts = np.sort(rng.uniform(-lz, lz, n_layers - 1))
    edges = np.concatenate([[-lz], cuts, [lz]])
    layers = [Layer.constant(a, b, random_spd(rng, n), random_symmetric(rng, n))
              for a, b in zip(edges[:-1], edges[1:])]
    left = tail_with_thresholds(rng, spread_thresholds(rng, n))
    right = tail_with_thresholds(rng, spread_thresholds(rng, n))
    return MediumProfile.build(lz, layers, left, right)


def lambda_window(profile: MediumProfile, kind: str, margin: float = 0.05, span: float = 3.0):
    """Interval of real lambda giving the requested channel layout, or None.

    ``mixed`` asks for 1 <= l_o, r_o < N (some open and some closed on each side).
    """
    left, right = diagonalize_ends(profile)
    tl, tr = left.thresholds, right.thresholds
    if kind == ALL_OPEN:
        hi = min(tl[0], tr[0]) - margin
        return hi - span, hi
    if kind == ALL_CLOSED:
        lo = max(tl[-1], tr[-1]) + margin
        return lo, lo + span
    if kind == MIXED:
        lo, hi = max(tl[0], tr[0]) + margin, min(tl[-1], tr[-1]) - margin
        return (lo, hi) if hi > lo else None
    raise ValueError(f"unknown lambda class {kind!r}")


def _clear_of(lam, thresholds, margin) -> bool:
    return bool(np.all(np.abs(np.asarray(thresholds) - lam) > margin))


def pick_lambdas(profile: MediumProfile, kind: str, count: int, rng: np.random.Generator,
                 margin: float = 0.05, max_cond: float | None = 1e6, max_tries: int = 200) -> list[float]:
    """Random real lambdas of one class, avoiding thresholds by ``margin``.

    With ``max_cond`` set (piecewise-constant media only), points where the
    exact Phi_+ is worse conditioned than ``max_cond`` are redrawn, which keeps
    them away from bound states.
    """
    from .oracle import transfer_matrix_solve

    window = lambda_window(profile, kind, margin)
    if window is None:
        return []
    left, right = diagonalize_ends(profile)
    thresholds = np.concatenate([left.thresholds, right.thresholds])
    out: list[float] = []
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        lam = float(rng.uniform(*window))
        if not _clear_of(lam, thresholds, margin):
            continue
        if max_cond is not None and profile.is_piecewise_constant:
            try:
                tset, _ = transfer_matrix_solve(profile, lam)
            except (SingularPhiPlus, LayerResonance, AtThreshold, np.linalg.LinAlgError):
                continue
            if np.linalg.cond(tset.phi_plus) > max_cond:
                continue
        out.append(lam)
    return out


def square_well(depth: float, half_width: float = 1.0) -> MediumProfile:
    """Scalar medium: g = 1, V = 0 outside, V = depth on [-half_width, half_width]."""
    one = np.eye(1)
    return MediumProfile.build(half_width, [Layer.constant(-half_width, half_width, one, depth * one)],
                               (one, 0 * one), (one, 0 * one))


def barrier(height: float = 1.0, half_width: float = 1.0) -> MediumProfile:
    """Scalar medium with tails V = height and V = 0 inside."""
    one = np.eye(1)
    return MediumProfile.build(half_width, [Layer.constant(-half_width, half_width, one, 0 * one)],
                               (one, height * one), (one, height * one))


def step_junction(v_left: float, v_right: float, half_width: float = 1.0) -> MediumProfile:
    one = np.eye(1)
    layers = [Layer.constant(-half_width, 0.0, one, v_left * one),
              Layer.constant(0.0, half_width, one, v_right * one)]
    return MediumProfile.build(half_width, layers, (one, v_left * one), (one, v_right * one))


def decoupled_wells(tails=(20.0, 0.0), depths=(30.0, 3.0), half_width: float = 1.0) -> MediumProfile:
    """Diagonal two-channel medium: each channel is an independent scalar square well."""
    g = np.eye(2)
    return MediumProfile.build(half_width, [Layer.constant(-half_width, half_width, g, np.diag(depths))],
                               (g, np.diag(tails)), (g, np.diag(tails)))


def smooth_frame_profile(half_width: float = 1.0, nodes: int = 401) -> MediumProfile:
    """Smooth two-channel SAMPLED medium whose local eigenvectors keep fixed directions.

    ``g(z) = a(z) G0`` and ``V(z) = b(z) V0 + c(z) G0`` share the frame of the
    pair (G0, V0) at every z, so only the local thresholds vary.  The left and
    right tails differ; all coefficients join the tails continuously.
    """
    g0 = np.array([[1.0, 0.3], [0.3, 1.5]])
    v0 = np.array([[1.0, 0.4], [0.4, -0.5]])
    z = np.linspace(-half_width, half_width, nodes)
    s = (z + half_width) / (2 * half_width)
    smooth_step = s * s * s * (10 - 15 * s + 6 * s * s)
    bump = (1 - (z / half_width) ** 2) ** 3
    a = 1.0 + 0.3 * bump
    b = 1.0 + 0.5 * smooth_step - 0.4 * bump
    c = 0.5 * smooth_step + 0.6 * bump
    g = a[:, None, None] * g0
    v = b[:, None, None] * v0 + c[:, None, None] * g0
    return MediumProfile.build(half_width, [Layer.sampled(z, g, v)], (g[0], v[0]), (g[-1], v[-1]))
