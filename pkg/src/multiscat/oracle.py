"""Exact transfer-matrix solver for piecewise-constant media.

Inside a constant slab the modal coordinates ``q = f^T g u`` and
``pi = f^T (g u')`` decouple into scalar oscillators ``q'' = -k^2 q`` with
``k^2 = Lambda - lambda``, so the slab propagator is known in closed form.
Chaining slabs gives the Jost solutions at the far tail without any ODE
stepping; the only error is round-off.
"""

from __future__ import annotations

import numpy as np

from .errors import LayerResonance, NotPiecewiseConstant
from .medium import MediumProfile, diagonalize_ends, generalized_eig
from .spectral import SpectralPoint, channel_momenta, check_off_threshold, principal_sqrt
from .tolerances import DEFAULT_TOLERANCES, Tolerances

# cosh(MAX_GROWTH) stays far from overflow; thicker slabs are split.
MAX_GROWTH = 40.0


def constant_propagator(f, k, g, dz):
    """(u, g u') propagator over ``dz`` for a constant medium.

    ``f`` and ``k`` are the modal frame and momenta of the medium.  ``dz`` may
    be a scalar or a 1-D array; for an array the result has shape
    ``(len(dz), 2N, 2N)``.
    """
    dz_arr = np.atleast_1d(np.asarray(dz, dtype=float))
    k = np.asarray(k, dtype=complex)
    kd = k[None, :] * dz_arr[:, None]
    cos = np.cos(kd)
    sin = np.sin(kd)
    safe_k = np.where(k == 0, 1.0, k)
    sin_over_k = np.where(k[None, :] == 0, dz_arr[:, None], sin / safe_k[None, :])
    k_sin = k[None, :] * sin

    ftg = f.T @ g
    gf = g @ f
    n = len(k)
    out = np.empty((len(dz_arr), 2 * n, 2 * n), dtype=complex)
    out[:, :n, :n] = np.einsum("is,ms,sj->mij", f, cos, ftg)
    out[:, :n, n:] = np.einsum("is,ms,sj->mij", f, sin_over_k, f.T)
    out[:, n:, :n] = np.einsum("is,ms,sj->mij", gf, -k_sin, ftg)
    out[:, n:, n:] = np.einsum("is,ms,sj->mij", gf, cos, f.T)
    if np.ndim(dz) == 0:
        return out[0]
    return out


def _layer_transfer(g, v, lam, dz, tol: Tolerances):
    lam_eig, f = generalized_eig(g, v)
    k = principal_sqrt(lam_eig - lam)
    if np.any(np.abs(k) ** 2 <= tol.threshold(lam)):
        raise LayerResonance(f"a local momentum vanishes at lambda = {lam} (layer eigenvalues {lam_eig.tolist()})")
    growth = float(np.max(np.abs(k.imag))) * abs(dz)
    pieces = max(1, int(np.ceil(growth / MAX_GROWTH)))
    step = constant_propagator(f, k, g, dz / pieces)
    return step, pieces


def tail_states(basis, K, z):
    """Exact (u, p) of the two Jost families seeded on one tail, at position ``z``.

    Returns an array of shape ``(2N, 2N)``: rows ``u`` then ``p``, columns the
    ``+`` family then the ``-`` family.
    """
    f, g = basis.frame, basis.g
    n = len(K)
    ep = np.exp(1j * K * z)
    em = np.exp(-1j * K * z)
    y = np.empty((2 * n, 2 * n), dtype=complex)
    y[:n, :n] = f * ep[None, :]
    y[:n, n:] = f * em[None, :]
    gf = g @ f
    y[n:, :n] = gf * (1j * K * ep)[None, :]
    y[n:, n:] = gf * (-1j * K * em)[None, :]
    return y


def decompose_on_tail(basis, K, z, y):
    """Coefficients (a, b) with ``y = F_+ a + F_- b`` on a tail at position ``z``."""
    n = len(K)
    f, g = basis.frame, basis.g
    q = f.T @ g @ y[:n]
    pi = f.T @ y[n:]
    a = 0.5 * (q + pi / (1j * K)[:, None]) * np.exp(-1j * K * z)[:, None]
    b = 0.5 * (q - pi / (1j * K)[:, None]) * np.exp(1j * K * z)[:, None]
    return a, b


def propagate_exact(profile: MediumProfile, lam, y, z_from, z_to, tol: Tolerances = DEFAULT_TOLERANCES):
    """Carry the state ``y`` (rows u then p) from ``z_from`` to ``z_to`` exactly."""
    if not profile.is_piecewise_constant:
        raise NotPiecewiseConstant("transfer matrices need CONSTANT layers only")
    lo, hi = sorted((z_from, z_to))
    direction = 1.0 if z_to >= z_from else -1.0
    layers = [lay for lay in profile.layers if lay.z_hi > lo and lay.z_lo < hi]
    if direction < 0:
        layers = layers[::-1]
    y = np.array(y, dtype=complex)
    log_scale = np.zeros(y.shape[1])
    z = z_from
    for layer in layers:
        end = min(layer.z_hi, hi) if direction > 0 else max(layer.z_lo, lo)
        dz = end - z
        if dz == 0:
            continue
        step, pieces = _layer_transfer(layer.g, layer.v, lam, dz, tol)
        for _ in range(pieces):
            y = step @ y
            # keep intermediates bounded; scale is restored at the end
            norms = np.max(np.abs(y), axis=0)
            norms = np.where(norms > 0, norms, 1.0)
            y = y / norms[None, :]
            log_scale += np.log(norms)
        z = end
    return y * np.exp(log_scale)[None, :]


def transfer_matrix_solve(profile: MediumProfile, lam, point: SpectralPoint | None = None,
                          tol: Tolerances = DEFAULT_TOLERANCES):
    """Transition and scattering sets by exact layer propagation.

    Phi/Psi come from expanding the right Jost basis in the left one at
    ``z = -L_z``; t/r are solved directly from their defining boundary-value
    problems, not from the Phi/Psi formulas.
    """
    from .smatrix import ScatteringSet
    from .transition import TransitionSet

    if not profile.is_piecewise_constant:
        raise NotPiecewiseConstant("transfer matrices need CONSTANT layers only")
    profile.require_valid(tol)
    point = point or SpectralPoint(lam)
    lam = complex(point.lam)
    bases = diagonalize_ends(profile, tol)
    check_off_threshold(bases, lam, tol)
    mom = channel_momenta(bases, point)
    left, right = bases
    n = profile.channels
    lz = profile.half_width

    right_seed = tail_states(right, mom.K_right, lz)
    at_left = propagate_exact(profile, lam, right_seed, lz, -lz, tol)
    a, b = decompose_on_tail(left, mom.K_left, -lz, at_left)
    phi_p, psi_p = a[:, :n], b[:, :n]
    psi_m, phi_m = a[:, n:], b[:, n:]
    tset = TransitionSet(phi_p, phi_m, psi_p, psi_m, point, mom.K_left, mom.K_right, 0.0)

    # F+_+ t1 = F-_+ + F-_- r1  and  F-_- t2 = F+_- + F+_+ r2, at z = -L_z
    left_seed = tail_states(left, mom.K_left, -lz)
    fpp, fpm = at_left[:, :n], at_left[:, n:]
    fmp, fmm = left_seed[:, :n], left_seed[:, n:]
    sol1 = np.linalg.solve(np.hstack([fpp, -fmm]), fmp)
    sol2 = np.linalg.solve(np.hstack([fmm, -fpp]), fpm)
    t1, r1 = sol1[:n], sol1[n:]
    t2, r2 = sol2[:n], sol2[n:]
    sset = ScatteringSet.from_blocks(t1, t2, r1, r2, mom.K_left, mom.K_right,
                                     real_lambda=point.is_physical, tol=tol,
                                     phi_minus=phi_m, phi_plus=phi_p)
    return tset, sset
