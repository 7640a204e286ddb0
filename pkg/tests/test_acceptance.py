"""The twelve acceptance criteria, one test each, each printing a PASS/FAIL line."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from cases import CLASSES, class_sweep, mixed_sweep, open_sweep, solved, worst
from multiscat.asymptotics import dets_asymptote, wkb_deviation
from multiscat.bound import bound_state_passes, bound_state_scan, square_well_levels, verify_bound_state
from multiscat.jost import GridSpec
from multiscat.medium import LEFT, RIGHT, diagonalize_ends
from multiscat.oracle import transfer_matrix_solve
from multiscat.profiles import (barrier, decoupled_wells, pick_lambdas, random_piecewise_profile,
                                smooth_frame_profile, square_well, step_junction)
from multiscat.smatrix import (OPEN_SUBSPACE_CHECKS, closed_open_residuals, determinant_residuals,
                               scattering_matrices, symmetry_residuals, unitarity_residuals)
from multiscat.transition import (bilinear_residuals, conjugation_residuals, monodromy_residual,
                                  relative_deviation, solve_transition)

TOL = 1e-8


@pytest.fixture
def report(capsys):
    """Yields a dict; the test fills ``detail`` and the line is printed whatever the outcome."""
    state = {"detail": ""}
    yield state
    with capsys.disabled():
        status = "PASS" if state.get("ok") else "FAIL"
        print(f"\n[{status}] criterion {state['id']:>2}: {state['name']} {state['detail']}")


def check(report, ok: bool):
    report["ok"] = bool(ok)
    assert ok, report["detail"]


def all_sweep_points():
    for profile, lams in open_sweep() + mixed_sweep():
        for lam in lams:
            yield profile, lam


def test_01_all_open_unitarity(report):
    report.update(id=1, name="all-open unitarity of S~ (pipeline 1e-8, oracle 1e-12, <= 60 s)")
    start = time.perf_counter()
    pipe = oracle = 0.0
    count = 0
    for profile, lams in open_sweep():
        for lam in lams:
            tset = solve_transition(profile, lam)
            pipe = max(pipe, unitarity_residuals(scattering_matrices(tset))["tilde_unitarity"])
            _, osset = transfer_matrix_solve(profile, lam)
            oracle = max(oracle, unitarity_residuals(osset)["tilde_unitarity"])
            count += 1
    elapsed = time.perf_counter() - start
    report["detail"] = f"({count} points: pipeline {pipe:.2e}, oracle {oracle:.2e}, {elapsed:.1f} s)"
    check(report, count == 500 and pipe <= TOL and oracle <= 1e-12 and elapsed <= 60.0)


def test_02_open_subspace_unitarity(report):
    report.update(id=2, name="open-subspace flux relations with closed channels; full S~ not unitary")
    res, full_min, count = 0.0, math.inf, 0
    for profile, lams in mixed_sweep():
        for lam in lams:
            sset = solved(profile, lam)[1]
            cls = sset.classification
            assert 1 <= cls.l_o < profile.channels and 1 <= cls.r_o < profile.channels
            rec = unitarity_residuals(sset)
            res = max(res, max(rec[k] for k in OPEN_SUBSPACE_CHECKS))
            full_min = min(full_min, rec["full_tilde_unitarity"])
            count += 1
    report["detail"] = f"({count} points: open-subspace {res:.2e}, min full-S~ residual {full_min:.3f})"
    check(report, res <= TOL and full_min > 1e-2)


def test_03_symmetry(report):
    report.update(id=3, name="transpose symmetries (full, block with i-factors, 2N form)")
    rec = worst(symmetry_residuals(solved(p, lam)[1]) for p, lam in all_sweep_points())
    name = max(rec, key=rec.get)
    report["detail"] = f"({len(rec)} residuals, worst {name} = {rec[name]:.2e})"
    check(report, rec[name] <= TOL)


def test_04_bilinear(report):
    report.update(id=4, name="six bilinear identities")
    rec = worst(bilinear_residuals(solved(p, lam)[0]) for p, lam in all_sweep_points())
    name = max(rec, key=rec.get)
    report["detail"] = f"(worst {name} = {rec[name]:.2e})"
    check(report, len(rec) == 6 and rec[name] <= TOL)


def test_05_closed_open(report):
    report.update(id=5, name="closed<->open relations and 1<->2 partners at 5 mixed points per profile")
    recs = []
    for profile, lams in mixed_sweep():
        assert len(lams) == 5
        recs.extend(closed_open_residuals(solved(profile, lam)[1]) for lam in lams)
    rec = worst(recs)
    name = max(rec, key=rec.get)
    report["detail"] = f"({len(recs)} points, {len(rec)} identities, worst {name} = {rec[name]:.2e})"
    check(report, len(rec) == 12 and rec[name] <= TOL)


def oracle_cases(count=200, seed=606):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        profile = random_piecewise_profile(rng)
        for lam in pick_lambdas(profile, CLASSES[len(out) % 3], 1, rng):
            out.append((profile, lam))
    return out


def oracle_deviation(profile, lam, grid_spec=None):
    tset = solve_transition(profile, lam, grid_spec)
    sset = scattering_matrices(tset)
    otset, osset = transfer_matrix_solve(profile, lam)
    devs = [relative_deviation(a, b) for a, b in zip(tset.matrices().values(), otset.matrices().values())]
    devs += [relative_deviation(sset.matrix(k), osset.matrix(k)) for k in ("t1", "t2", "r1", "r2")]
    return max(devs)


def test_06_oracle_equivalence(report):
    report.update(id=6, name="pipeline vs transfer matrices on 200 cases; RK4 step halving >= 12x")
    cases = oracle_cases()
    dev = max(oracle_deviation(p, lam) for p, lam in cases)
    coarse = GridSpec(h_max=0.05, wave_cap=None)
    fine = GridSpec(h_max=0.05, wave_cap=None, subdivide=2)
    ratios = [oracle_deviation(p, lam, coarse) / oracle_deviation(p, lam, fine) for p, lam in cases[:20]]
    report["detail"] = (f"(max deviation {dev:.2e}; halving ratio min {min(ratios):.1f}, "
                        f"median {np.median(ratios):.1f})")
    check(report, len(cases) == 200 and dev <= TOL and min(ratios) >= 12.0)


def test_07_bound_states(report):
    report.update(id=7, name="square-well counts vs transcendental oracle; decoupled wells union")
    lines, ok = [], True
    for depth in (1.0, 3.0, 10.0, 30.0):
        profile = square_well(depth)
        states = bound_state_scan(profile, -1.0, depth + 1.0)
        expected = square_well_levels(depth)
        ok &= len(states) == len(expected)
        for bs in states:
            rec = verify_bound_state(bs, profile)
            ok &= max(rec["v_open"], rec["w_open"], rec["psi_relation"]) <= 1e-7
            ok &= rec["decay_left"] <= 0.05 and rec["decay_right"] <= 0.05
            ok &= bound_state_passes(rec)
        lines.append(f"V0={depth:g}:{len(states)}/{len(expected)}")
    profile = decoupled_wells()
    states = bound_state_scan(profile, -1.0, 31.0)
    union = sorted([20.0 + x for x in square_well_levels(10.0)] + square_well_levels(3.0))
    err = max(abs(a.lambda_b - b) for a, b in zip(states, union)) if len(states) == len(union) else math.inf
    ok &= err <= 1e-9 and all(bound_state_passes(verify_bound_state(bs, profile)) for bs in states)
    report["detail"] = f"({' '.join(lines)}; decoupled {len(states)}/{len(union)}, max |dlambda| {err:.1e})"
    check(report, ok)


def test_08_no_states_in_open_region(report):
    report.update(id=8, name="no bound states below every threshold (50 profiles, open region not skipped)")
    rng = np.random.default_rng(808)
    found = 0
    for _ in range(50):
        profile = random_piecewise_profile(rng)
        left, right = diagonalize_ends(profile)
        top = min(left.thresholds[0], right.thresholds[0]) - 0.05
        found += len(bound_state_scan(profile, top - 3.0, top, skip_open=False))
    report["detail"] = f"({found} states found)"
    check(report, found == 0)


def test_09_analytic_structure(report):
    report.update(id=9, name="conjugation relations per class; single-channel sheet-flip monodromy")
    by_class = {k: [] for k in CLASSES}
    for profile, lam, kind in class_sweep():
        by_class[kind].append(conjugation_residuals(profile, lam, tset=solved(profile, lam)[0]))
    conj = {k: max(worst(v).values()) for k, v in by_class.items()}
    rng = np.random.default_rng(909)
    mono = 0.0
    for _ in range(20):
        profile = random_piecewise_profile(rng)
        lam = complex(rng.uniform(-3, 3), rng.uniform(0.1, 1.0))
        for side in (LEFT, RIGHT):
            for ch in range(profile.channels):
                mono = max(mono, monodromy_residual(profile, lam, ch, side))
    parts = ", ".join(f"{k} {v:.1e} ({len(by_class[k])} pts)" for k, v in conj.items())
    report["detail"] = f"(conjugation {parts}; monodromy {mono:.1e})"
    check(report, all(by_class.values()) and max(conj.values()) <= TOL and mono <= TOL)


def test_10_shortwave_limit(report):
    report.update(id=10, name="|det S~ - 1| ladder and WKB |lambda|^-1/2 scaling on a smooth sampled medium")
    profile = smooth_frame_profile()
    ladder = [-1e2, -1e3, -1e4]
    recs = dets_asymptote(profile, ladder)
    dets = [r["abs_det_S_tilde_minus_1"] for r in recs]
    devs = [wkb_deviation(profile, lam) for lam in ladder]
    ident = max(r["det_identity"] for r in recs)
    decreasing = all(b < a for a, b in zip(dets, dets[1:]))
    # each decade should shrink the deviation by sqrt(10); allow a factor 2 either way
    ratios = [a / b for a, b in zip(devs, devs[1:])] + [devs[0] / devs[-1] / math.sqrt(10)]
    scaling = all(math.sqrt(10) / 2 <= r <= 2 * math.sqrt(10) for r in ratios)
    report["detail"] = (f"(|det S~ - 1| = {', '.join(f'{d:.2e}' for d in dets)}; WKB deviation "
                        f"{', '.join(f'{d:.2e}' for d in devs)}; det identity {ident:.1e})")
    check(report, decreasing and dets[-1] <= 1e-2 and scaling and ident <= TOL)


def test_11_wronskian_constancy(report):
    report.update(id=11, name="Wronskian drift and basic Wronskian values at every node")
    drift = basic = 0.0
    count = 0
    for profile, lam in list(all_sweep_points()) + [(p, lam) for p, lam, _ in class_sweep()]:
        wr = solved(profile, lam)[2]
        drift, basic = max(drift, wr["drift"]), max(basic, wr["basic"])
        count += 1
    fixed = [(square_well(10.0), 4.0), (barrier(1.0), 0.5), (step_junction(0.0, 3.0), -1.0),
             (decoupled_wells(), 10.0), (smooth_frame_profile(), -3.0), (smooth_frame_profile(), 1.2)]
    for profile, lam in fixed:
        wr = solved(profile, lam)[2]
        drift, basic = max(drift, wr["drift"]), max(basic, wr["basic"])
        count += 1
    report["detail"] = f"({count} fields: drift {drift:.2e}, basic {basic:.2e})"
    check(report, drift <= TOL and basic <= TOL)


def _run(args, cwd):
    res = subprocess.run([sys.executable, "-m", "multiscat", *args], cwd=cwd, capture_output=True)
    return res.returncode, res.stdout


def test_12_determinism(report, tmp_path):
    report.update(id=12, name="verify and sweep byte-identical across runs and thread counts")
    profile = tmp_path / "profile.json"
    assert _run(["make-profile", "random", str(profile), "--seed", "12", "--channels", "3"], tmp_path)[0] == 0
    outputs = {}
    for label, threads in (("a", 1), ("b", 1), ("c", 8)):
        out = tmp_path / label
        code_v, stdout_v = _run(["verify", "--profile", str(profile), "--out", str(out / "v"),
                                 "--threads", str(threads)], tmp_path)
        code_s, stdout_s = _run(["sweep", "--profile", str(profile), "--lambda-range=-4:4:41",
                                 "--out", str(out / "s"), "--threads", str(threads)], tmp_path)
        outputs[label] = (code_v, code_s, stdout_v, (out / "v" / "verify.csv").read_bytes(),
                          (out / "s" / "sweep.csv").read_bytes())
    same = outputs["a"] == outputs["b"] == outputs["c"]
    report["detail"] = f"(verify exit {outputs['a'][0]}, sweep exit {outputs['a'][1]}, identical: {same})"
    check(report, same and outputs["a"][0] == 0 and outputs["a"][1] == 0)
