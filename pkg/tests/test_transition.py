import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cases import class_sweep, solved, worst
from multiscat.jost import GridSpec
from multiscat.medium import LEFT, RIGHT
from multiscat.oracle import transfer_matrix_solve
from multiscat.profiles import random_piecewise_profile, step_junction
from multiscat.spectral import SpectralPoint
from multiscat.transition import (bilinear_residuals, conjugation_residuals, export_csv, monodromy_residual,
                                  predicted_flip, solve_transition)


def test_step_junction_matches_closed_form():
    tset = solve_transition(step_junction(0.0, 3.0), -1.0)
    np.testing.assert_allclose(tset.phi_plus, [[1.5]], atol=1e-9)
    np.testing.assert_allclose(tset.psi_plus, [[-0.5]], atol=1e-9)
    np.testing.assert_allclose(tset.phi_minus, [[1.5]], atol=1e-9)
    np.testing.assert_allclose(tset.psi_minus, [[-0.5]], atol=1e-9)


def test_identities_across_classes():
    bil, conj = [], []
    for profile, lam, _ in class_sweep():
        tset, _, _ = solved(profile, lam)
        bil.append(bilinear_residuals(tset))
        conj.append(conjugation_residuals(profile, lam, tset=tset))
        assert tset.expansion_residual <= 1e-8
    assert max(worst(bil).values()) <= 1e-8
    assert max(worst(conj).values()) <= 1e-8


def test_identities_hold_off_the_real_axis(rng):
    for _ in range(4):
        profile = random_piecewise_profile(rng)
        tset = solve_transition(profile, complex(rng.uniform(-3, 3), rng.uniform(0.1, 1.0)))
        assert max(bilinear_residuals(tset).values()) <= 1e-8


def test_conjugation_check_detects_perturbation():
    profile, lam, _ = next(c for c in class_sweep() if c[2] == "mixed")
    tset, _, _ = solved(profile, lam)
    bumped = type(tset)(tset.phi_plus + 1e-5j, tset.phi_minus, tset.psi_plus, tset.psi_minus,
                        tset.point, tset.K_left, tset.K_right)
    assert max(conjugation_residuals(profile, lam, tset=bumped).values()) > 1e-6


@given(st.integers(0, 2**31), st.floats(-0.9, 0.9))
def test_reference_point_independence(seed, z_frac):
    rng = np.random.default_rng(seed)
    profile = random_piecewise_profile(rng, max_layers=3)
    lam = complex(rng.uniform(-3, 3), 0.2)
    a = solve_transition(profile, lam)
    b = solve_transition(profile, lam, GridSpec(z_ref=z_frac * profile.half_width))
    for x, y in zip(a.matrices().values(), b.matrices().values()):
        assert np.max(np.abs(x - y)) <= 1e-8 * max(1.0, np.max(np.abs(x)))


def test_monodromy_pipeline_and_oracle(rng):
    oracle = lambda pr, pt: transfer_matrix_solve(pr, pt.lam, pt)[0]  # noqa: E731
    for _ in range(3):
        profile = random_piecewise_profile(rng)
        lam = complex(rng.uniform(-3, 3), rng.uniform(0.2, 0.8))
        for side in (LEFT, RIGHT):
            for ch in range(profile.channels):
                assert monodromy_residual(profile, lam, ch, side) <= 1e-8
                assert monodromy_residual(profile, lam, ch, side, solver=oracle) <= 1e-8


def test_flip_prediction_is_not_trivial(rng):
    profile = random_piecewise_profile(rng, n=2)
    point = SpectralPoint(0.4 + 0.3j)
    tset = solve_transition(profile, point)
    flipped = solve_transition(profile, point.flipped(LEFT, 0, 2))
    predicted = predicted_flip(tset, LEFT, 0)
    assert np.max(np.abs(flipped.phi_plus - tset.phi_plus)) > 1e-3
    for key, m in flipped.matrices().items():
        np.testing.assert_allclose(predicted[key], m, atol=1e-8 * max(1.0, np.max(np.abs(m))))


def test_export_columns(tmp_path):
    tset = solve_transition(step_junction(0.0, 3.0), -1.0)
    path = tmp_path / "t.csv"
    export_csv(tset, path, lam=-1.0, method="rk4")
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:5] == ["matrix", "row", "col", "re", "im"]
    assert len(lines) == 5
