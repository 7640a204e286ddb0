import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiscat.errors import NotPiecewiseConstant
from multiscat.medium import Layer, MediumProfile
from multiscat.oracle import transfer_matrix_solve
from multiscat.profiles import barrier, random_piecewise_profile, smooth_frame_profile, step_junction


def test_step_junction_closed_form():
    # k_left = 1, k_right = 2: t = 2k/(k + k'), r = (k - k')/(k + k')
    tset, sset = transfer_matrix_solve(step_junction(0.0, 3.0), -1.0)
    np.testing.assert_allclose(tset.phi_plus, [[1.5]], atol=1e-14)
    np.testing.assert_allclose(tset.phi_minus, [[1.5]], atol=1e-14)
    np.testing.assert_allclose(tset.psi_plus, [[-0.5]], atol=1e-14)
    np.testing.assert_allclose(tset.psi_minus, [[-0.5]], atol=1e-14)
    np.testing.assert_allclose(sset.t1, [[2 / 3]], atol=1e-14)
    np.testing.assert_allclose(sset.r1, [[-1 / 3]], atol=1e-14)
    np.testing.assert_allclose(sset.t2, [[4 / 3]], atol=1e-14)
    np.testing.assert_allclose(sset.r2, [[1 / 3]], atol=1e-14)
    np.testing.assert_allclose(sset.matrix("r1", tilde=True), [[-1 / 3]], atol=1e-14)
    assert abs(sset.matrix("t1", tilde=True)[0, 0]) ** 2 == pytest.approx(8 / 9, abs=1e-14)


def test_barrier_tunnelling_probability():
    # equal momenta inside and outside: |t|^2 = 1 / cosh^2(kappa * 2)
    _, sset = transfer_matrix_solve(barrier(1.0), 0.5)
    assert abs(sset.matrix("t1", tilde=True)[0, 0]) ** 2 == pytest.approx(0.21077109396613053, abs=1e-14)
    assert abs(sset.matrix("t1", tilde=True)[0, 0]) ** 2 == pytest.approx(1 / math.cosh(math.sqrt(2)) ** 2,
                                                                          abs=1e-14)


def test_uniform_medium_is_transparent():
    g = np.array([[1.0, 0.2], [0.2, 2.0]])
    v = np.array([[0.5, 0.3], [0.3, -0.5]])
    tset, sset = transfer_matrix_solve(MediumProfile.uniform(g, v), 1.0)
    np.testing.assert_allclose(tset.phi_plus, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(tset.psi_plus, 0, atol=1e-12)
    np.testing.assert_allclose(sset.t1, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(sset.r1, 0, atol=1e-12)


def _split(profile: MediumProfile, fractions):
    layers = []
    for layer, frac in zip(profile.layers, fractions):
        g, v = layer.g, layer.v
        cut = layer.z_lo + frac * (layer.z_hi - layer.z_lo)
        layers += [Layer.constant(layer.z_lo, cut, g, v), Layer.constant(cut, layer.z_hi, g, v)]
    return MediumProfile.build(profile.half_width, layers, profile.left_tail, profile.right_tail)


@given(st.integers(0, 2**31), st.lists(st.floats(0.1, 0.9), min_size=6, max_size=6))
def test_splitting_a_layer_changes_nothing(seed, fractions):
    rng = np.random.default_rng(seed)
    profile = random_piecewise_profile(rng)
    lam = float(rng.uniform(-4, 4))
    try:
        a, sa = transfer_matrix_solve(profile, lam)
    except Exception:  # noqa: BLE001 - threshold or resonance draws are irrelevant here
        return
    b, sb = transfer_matrix_solve(_split(profile, fractions), lam)
    for x, y in zip(a.matrices().values(), b.matrices().values()):
        scale = max(1.0, np.max(np.abs(x)))
        assert np.max(np.abs(x - y)) <= 1e-12 * scale


def test_sampled_media_refused():
    with pytest.raises(NotPiecewiseConstant):
        transfer_matrix_solve(smooth_frame_profile(nodes=11), -1.0)
