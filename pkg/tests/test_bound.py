import json
import math

import numpy as np
import pytest

from multiscat.bound import (_golden_min, bound_state_passes, bound_state_scan, export_json, export_trace_csv,
                             square_well_levels, verify_bound_state)
from multiscat.profiles import decoupled_wells, square_well

# even/odd matching conditions solved to 30 digits with mpmath, frozen
WELL_LEVELS = {
    1.0: [0.45375316586032825],
    3.0: [0.061320966892886493, 2.0518006510275195],
    10.0: [0.0040192624533292855, 4.6241940863297795, 8.5927852752298389],
    30.0: [4.0873680210505725, 14.666053424208803, 23.036247639323539, 28.241113487931262],
}


@pytest.mark.parametrize("depth", sorted(WELL_LEVELS))
def test_transcendental_oracle_matches_frozen_levels(depth):
    np.testing.assert_allclose(square_well_levels(depth), WELL_LEVELS[depth], atol=1e-12)


@pytest.mark.parametrize("depth", [1.0, 3.0, 10.0])
def test_square_well_spectrum(depth):
    profile = square_well(depth)
    states = bound_state_scan(profile, -1.0, depth + 1.0)
    found = [bs.lambda_b for bs in states]
    assert len(found) == len(WELL_LEVELS[depth])
    np.testing.assert_allclose(found, WELL_LEVELS[depth], atol=1e-9)
    for bs in states:
        rec = verify_bound_state(bs, profile)
        assert bound_state_passes(rec), rec
        # scalar well: kappa = sqrt(lambda) on both sides
        assert rec["decay_left"] <= 0.05 and rec["decay_right"] <= 0.05
        assert bs.decay_rates["right"]["expected"] == pytest.approx(math.sqrt(bs.lambda_b))


def test_decoupled_wells_union_of_scalar_spectra():
    profile = decoupled_wells()
    states = bound_state_scan(profile, -1.0, 31.0)
    expected = sorted([20.0 + x for x in WELL_LEVELS[10.0]] + WELL_LEVELS[3.0])
    np.testing.assert_allclose([bs.lambda_b for bs in states], expected, atol=1e-9)
    for bs in states:
        assert bound_state_passes(verify_bound_state(bs, profile))
    # the embedded states have no weight on the open channel (threshold 20, second in ascending order)
    for bs in states[:2]:
        assert abs(bs.v[1]) <= 1e-7 and abs(bs.v[0]) == pytest.approx(1.0)


def test_open_region_skipped_or_empty():
    profile = square_well(3.0)
    trace = bound_state_scan(profile, -3.0, -0.5, return_trace=True)
    assert trace.states == [] and trace.notices
    assert bound_state_scan(profile, -3.0, -0.5, skip_open=False) == []


def test_golden_min():
    x, fx = _golden_min(lambda t: (t - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-9) and fx <= 1e-18


def test_exports(tmp_path):
    profile = square_well(1.0)
    result = bound_state_scan(profile, 0.1, 0.9, n_scan=201, return_trace=True)
    export_json(result.states, tmp_path / "b.json")
    doc = json.loads((tmp_path / "b.json").read_text())
    assert len(doc) == 1 and doc[0]["lambda"] == pytest.approx(WELL_LEVELS[1.0][0], abs=1e-9)
    export_trace_csv(result, tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "lambda,re_D,im_D,abs_D" and len(lines) == 1 + len(result.lambdas)


def test_invalid_range():
    with pytest.raises(ValueError):
        bound_state_scan(square_well(1.0), 1.0, 0.0)
