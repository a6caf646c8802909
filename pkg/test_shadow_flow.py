import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.classes.CriticalFinder import kplus
from src.classes.InteractionMatrix import build_matrix, enumerate_candidates
from src.classes.ShadowFlow import (
    CONCENTRATES,
    ESCAPES,
    UNDECIDED,
    FlowConfig,
    FlowState,
    dump_trajectory,
    interaction_matrix_at,
    run_to_verdict,
    step_flow,
    trajectory_frame,
)
from src.classes.SphereModel import SpherePoint
from src.utils.exceptions import DivergedWeights, StepUnderflow
from src.utils.rk_utils import DormandPrince54

NORTH = SpherePoint([0, 0, 0, 0, 1])
EAST = SpherePoint([1, 0, 0, 0, 0])


def test_dormand_prince_single_step():
    solver = DormandPrince54(tol=1e-6)
    y, err = solver.step(lambda t, y: -y, 0.0, np.array([1.0]), 0.1)
    assert_allclose(y, [math.exp(-0.1)], atol=1e-9)
    assert err < 1.0
    assert solver.accept(err)
    assert solver.propose(0.1, 0.0) == pytest.approx(0.5)
    assert solver.propose(0.1, np.inf) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        DormandPrince54(tol=0.0)


def test_dormand_prince_evaluates_seven_stages_per_step():
    calls = []

    def rhs(t, y):
        calls.append((t, y.copy()))
        return -y

    solver = DormandPrince54(tol=1e-6)
    y1, _ = solver.step(rhs, 0.0, np.array([1.0]), 0.1)
    assert len(calls) == 7
    # last stage sits at the propagated solution
    assert calls[-1][0] == pytest.approx(0.1)
    assert_allclose(calls[-1][1], y1, rtol=1e-15)

    solver.step(rhs, 0.1, y1, 0.1)
    assert len(calls) == 14
    assert calls[7][0] == pytest.approx(0.1)


def test_constant_matrix_decay(affine_field, round_s4):
    cfg = FlowConfig(matrix=np.diag([1.0, 2.0]), freeze_points=True)
    state = FlowState.at_points([NORTH, EAST], affine_field, s0=1.0)
    result = run_to_verdict(state, affine_field, round_s4, horizon=1.0, cfg=cfg)
    assert result.verdict == UNDECIDED
    assert_allclose(result.state.t, 1.0, atol=1e-12)
    assert_allclose(result.state.inv_scales, [math.exp(-1.0), math.exp(-2.0)], rtol=1e-6)
    assert_allclose(result.state.points, state.points, atol=0)
    assert_allclose(result.state.weights, state.weights, rtol=1e-12)


def test_zero_horizon(affine_field, round_s4):
    state = FlowState.at_points([NORTH], affine_field)
    result = run_to_verdict(state, affine_field, round_s4, horizon=0.0)
    assert result.verdict == UNDECIDED
    assert result.steps == 0
    assert result.s_ratio == 1.0
    with pytest.raises(ValueError):
        run_to_verdict(state, affine_field, round_s4, horizon=-1.0)


def test_single_peak_concentrates(affine_set, affine_field, round_s4):
    north = affine_set.lookup("north")
    state = FlowState.at_points([north.location], affine_field)
    result = run_to_verdict(state, affine_field, round_s4)
    assert result.verdict == CONCENTRATES
    assert result.s_ratio < 1e-6
    # s' = -(4/27) s at a fixed peak
    assert_allclose(result.state.t, math.log(1e6) * 27 / 4, rtol=0.05)


def test_negative_beta_escapes(affine_set, affine_field, round_s4):
    south = affine_set.lookup("south")
    state = FlowState.at_points([south.location], affine_field)
    result = run_to_verdict(state, affine_field, round_s4)
    assert result.verdict == ESCAPES
    assert result.s_ratio > 10.0


def test_antipodal_pair_concentrates(quadric_set, quadric_5, round_s4):
    pair = [quadric_set.lookup("north").location, quadric_set.lookup("south").location]
    result = run_to_verdict(FlowState.at_points(pair, quadric_5), quadric_5, round_s4)
    assert result.verdict == CONCENTRATES


def test_matrix_at_critical_points(quadric_set, quadric_5, round_s4):
    members = kplus(quadric_set)
    X = np.array([m.location.coords for m in members])
    assert_allclose(interaction_matrix_at(X, quadric_5, round_s4), build_matrix(members, round_s4), rtol=1e-9, atol=1e-12)


def test_step_rejects_nonpositive_dt(affine_field, round_s4):
    state = FlowState.at_points([NORTH], affine_field)
    with pytest.raises(ValueError):
        step_flow(state, affine_field, round_s4, 0.0)


def test_step_underflow(affine_field, round_s4):
    state = FlowState.at_points([NORTH], affine_field)
    with pytest.raises(StepUnderflow):
        step_flow(state, affine_field, round_s4, 0.5, FlowConfig(min_dt=1.0))


def test_unbalanced_weights_diverge(affine_field, round_s4):
    state = FlowState(
        points=np.array([NORTH.coords, EAST.coords]),
        inv_scales=np.array([0.05, 0.05]),
        weights=np.array([1.0, 10.0]),
    )
    with pytest.raises(DivergedWeights):
        step_flow(state, affine_field, round_s4, 1e-3, FlowConfig(freeze_points=True))


def test_at_points_rejects_nonpositive_scales(affine_field):
    with pytest.raises(ValueError):
        FlowState.at_points([NORTH], affine_field, s0=0.0)


def test_trajectory_dump(affine_field, round_s4, tmp_path):
    cfg = FlowConfig(freeze_points=True, record=True)
    state = FlowState.at_points([NORTH, EAST], affine_field)
    result = run_to_verdict(state, affine_field, round_s4, horizon=0.05, cfg=cfg)
    frame = trajectory_frame(result)
    assert list(frame.columns[:3]) == ["t", "s1", "s2"]
    assert list(frame.columns[-2:]) == ["alpha1", "alpha2"]
    assert frame.shape == (result.steps + 1, 1 + 2 + 10 + 2)

    path = dump_trajectory(result, tmp_path / "trajectory.csv")
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("t,s1,s2,a1_1,a1_2")
    with pytest.raises(FileExistsError):
        dump_trajectory(result, path)
    dump_trajectory(result, path, overwrite=True)


def test_dump_needs_recording(affine_field, round_s4, tmp_path):
    state = FlowState.at_points([NORTH], affine_field)
    result = run_to_verdict(state, affine_field, round_s4, horizon=0.01)
    with pytest.raises(ValueError):
        dump_trajectory(result, tmp_path / "t.csv")


def test_verdict_agrees_with_f1_membership(quadric_set, quadric_5, round_s4):
    f1 = enumerate_candidates(kplus(quadric_set), round_s4)
    assert len(f1.candidates) == 15
    for cand in f1.candidates:
        state = FlowState.at_points([m.location for m in cand.members], quadric_5, s0=0.05)
        result = run_to_verdict(state, quadric_5, round_s4)
        assert (result.verdict == CONCENTRATES) == cand.in_f1, cand.names


def test_inverse_scales_decay_at_rate_rho(quadric_set, quadric_5, round_s4):
    f1 = enumerate_candidates(kplus(quadric_set), round_s4)
    cfg = FlowConfig(freeze_points=True, record=True)
    for cand in f1.members:
        state = FlowState.at_points([m.location for m in cand.members], quadric_5, s0=0.05)
        result = run_to_verdict(state, quadric_5, round_s4, horizon=50.0, cfg=cfg)
        frame = trajectory_frame(result)
        s = frame[[f"s{i + 1}" for i in range(cand.p)]].to_numpy()
        t = frame["t"].to_numpy()
        bound = np.linalg.norm(s[0]) * np.exp(-cand.rho * t) * (1 + 1e-6)
        assert np.all(np.linalg.norm(s, axis=1) <= bound), cand.names
