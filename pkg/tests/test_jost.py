import numpy as np
import pytest

from multiscat.jost import (MM, MP, PM, PP, GridSpec, basic_wronskian_residual, build_grid, export_csv,
                            integrate_jost, jost_at_reference, wronskian_drift)
from multiscat.medium import MediumProfile, diagonalize_ends
from multiscat.profiles import random_piecewise_profile, smooth_frame_profile


def test_grid_contains_breakpoints_and_reference(rng):
    profile = random_piecewise_profile(rng, n=2, max_layers=5)
    grid = build_grid(profile, GridSpec(), 0.01)
    for b in profile.breakpoints():
        assert np.min(np.abs(grid.z - b)) < 1e-14
    assert grid.z[grid.i_ref] == 0.0
    assert grid.z[grid.i_left] == -profile.half_width and grid.z[grid.i_right] == profile.half_width
    assert np.all(np.diff(grid.z) <= 0.01 + 1e-15)


def test_subdivide_halves_every_step(rng):
    profile = random_piecewise_profile(rng, n=2)
    a = build_grid(profile, GridSpec(h_max=0.05), 0.05)
    b = build_grid(profile, GridSpec(h_max=0.05, subdivide=2), 0.05)
    assert len(b.z) == 2 * len(a.z) - 1
    np.testing.assert_allclose(b.z[::2], a.z, atol=1e-15)


def test_wave_cap_bounds_step():
    profile = MediumProfile.uniform(np.eye(1), np.zeros((1, 1)))
    spec = GridSpec()
    assert spec.step(profile, 1000.0) == pytest.approx(5e-5)
    assert spec.step(profile, 1.0) == pytest.approx(2e-3)
    assert GridSpec(wave_cap=None).step(profile, 1000.0) == pytest.approx(2e-3)


def test_uniform_medium_families_are_plane_waves():
    g = np.array([[2.0, 0.5], [0.5, 1.0]])
    v = np.array([[1.0, 0.2], [0.2, -1.0]])
    profile = MediumProfile.uniform(g, v)
    bases = diagonalize_ends(profile)
    field = integrate_jost(profile, bases, -0.7)
    # F+ and F- share tails when the medium has no structure
    np.testing.assert_allclose(field.U[PP], field.U[MP], atol=1e-10)
    np.testing.assert_allclose(field.U[PM], field.U[MM], atol=1e-10)


def test_wronskian_invariants_on_random_media(rng):
    for _ in range(6):
        profile = random_piecewise_profile(rng)
        bases = diagonalize_ends(profile)
        lam = complex(rng.uniform(-4, 4), rng.choice([0.0, 0.3]))
        field = integrate_jost(profile, bases, lam)
        assert wronskian_drift(field) <= 1e-8
        assert basic_wronskian_residual(field) <= 1e-8


def test_wronskian_invariants_on_sampled_medium():
    profile = smooth_frame_profile()
    field = integrate_jost(profile, diagonalize_ends(profile), -3.0)
    assert wronskian_drift(field) <= 1e-8
    assert basic_wronskian_residual(field) <= 1e-8


def test_batched_reference_states_match_full_integration(rng):
    profile = random_piecewise_profile(rng, n=3)
    bases = diagonalize_ends(profile)
    spec = GridSpec(h_max=2e-3, wave_cap=None)
    lams = [-2.5, 0.1, 3.7]
    out_p, out_m = jost_at_reference(profile, bases, lams, spec)
    n = profile.channels
    for j, lam in enumerate(lams):
        field = integrate_jost(profile, bases, lam, spec)
        i = field.grid.i_ref
        np.testing.assert_allclose(out_p[j, :n, :n], field.U[PP, i], rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(out_m[j, n:, n:], field.P[MM, i], rtol=1e-10, atol=1e-10)


def test_export_layout(tmp_path):
    profile = MediumProfile.uniform(np.eye(1), np.zeros((1, 1)), half_width=0.01)
    field = integrate_jost(profile, diagonalize_ends(profile), -1.0, GridSpec(h_max=0.01))
    path = tmp_path / "jost.csv"
    export_csv(field, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "z,family,column,component,re_u,im_u,re_p,im_p"
    assert len(lines) == 1 + 4 * len(field.z)
