import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smctrack.association import (INFEASIBLE, TrackerConfig, Tracker, TrackerState, TrackStatus,
                                  compute_split_threshold, fuse_gate, fuse_weighted, partition_detections,
                                  run_sequence, smc_step)
from smctrack.errors import ConfigError, SequencingError
from smctrack.evaluation import evaluate
from smctrack.geometry import BoundingBox, Detection, FrameObservations, iou
from smctrack.io.synth import ScenarioSpec, generate_scenario
from smctrack.scenarios import adversarial_crossing_spec, crossing_spec, occlusion_dip_spec


def det(score, frame=1, x=0.0, emb=None):
    return Detection(BoundingBox(x, 0.0, 10.0, 20.0), score, frame, emb)


# -- split and partition ---------------------------------------------------------

def test_split_threshold_lower_half_mean():
    assert compute_split_threshold([det(s) for s in (0.2, 0.4, 0.9, 0.95)]) == 0.3


def test_split_threshold_odd_count_uses_ceil_half():
    assert compute_split_threshold([det(s) for s in (0.9, 0.1, 0.5)]) == pytest.approx(0.3)


@given(st.floats(0, 1), st.integers(1, 9))
def test_split_threshold_constant(c, n):
    assert compute_split_threshold([det(c)] * n) == pytest.approx(c, abs=1e-15)


def test_split_threshold_degenerate_cases():
    assert compute_split_threshold([], det_floor=0.1) == 0.1
    assert compute_split_threshold([det(0.8)]) == 0.8
    assert compute_split_threshold([det(0.8)], mode="fixed", fixed_split=0.6) == 0.6
    with pytest.raises(ConfigError):
        compute_split_threshold([det(0.8)], mode="median")


def test_partition_buckets():
    high, low, bg = partition_detections([det(0.95), det(0.5), det(0.05)], 0.6, 0.1)
    assert [d.score for d in high] == [0.95]
    assert [d.score for d in low] == [0.5]
    assert [d.score for d in bg] == [0.05]


def test_partition_all_high_and_boundary():
    high, low, bg = partition_detections([det(0.9), det(0.8)], 0.6)
    assert len(high) == 2 and not low and not bg
    high, low, _ = partition_detections([det(0.6)], 0.6)
    assert not high and len(low) == 1
    with pytest.raises(ValueError):
        partition_detections([det(0.6)], 0.05, 0.1)


@given(st.lists(st.floats(0, 1), max_size=20), st.floats(0.1, 1))
def test_partition_is_complete(scores, thres):
    dets = [det(s) for s in scores]
    parts = partition_detections(dets, thres, 0.1)
    assert sorted(d.score for p in parts for d in p) == sorted(scores)


# -- fusion -----------------------------------------------------------------------

def test_gate_examples():
    assert fuse_gate([[0.0]], [[1.0]], 0.7).tolist() == [[0.0]]
    assert fuse_gate([[0.0]], [[0.5]], 0.7)[0, 0] == INFEASIBLE
    assert fuse_gate([[0.3]], [[0.8]], 0.7)[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_gate_literal_subtracts():
    assert fuse_gate([[0.3]], [[0.8]], 0.7, literal=True)[0, 0] == pytest.approx(0.1, abs=1e-15)


def test_gate_missing_appearance_is_feasible_motion_only():
    assert fuse_gate([[0.15]], [[np.nan]], 0.7).tolist() == [[0.15]]


@given(st.floats(0, 1), st.floats(-1, 1), st.floats(0, 1))
def test_gate_feasibility_rule(m, a, eps):
    c = fuse_gate([[m]], [[a]], eps)[0, 0]
    assert (c == INFEASIBLE) == (a < eps)


def test_weighted_examples():
    assert fuse_weighted([[1.0]], [[1.0]], 0.5).tolist() == [[0.0]]
    assert fuse_weighted([[1.0]], [[0.0]], 0.5).tolist() == [[0.5]]


@given(st.floats(0, 1), st.floats(-1, 1))
def test_weighted_alpha_one_is_iou_only(s, a):
    assert fuse_weighted([[s]], [[a]], 1.0)[0, 0] == 1.0 - s


def test_config_validation():
    with pytest.raises(ConfigError):
        TrackerConfig(det_floor=0.8, new_track_threshold=0.7)
    with pytest.raises(ConfigError):
        TrackerConfig(gate_epsilon=1.5)
    with pytest.raises(ConfigError):
        TrackerConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        TrackerConfig(lost_ttl=0)
    with pytest.raises(ConfigError):
        TrackerConfig(fusion_mode="max")
    with pytest.raises(ConfigError):
        TrackerConfig(position_std_factor=0.0)
    assert TrackerConfig().match_cost_cap == 0.2 and TrackerConfig().lost_ttl == 30


# -- single steps -------------------------------------------------------------------

def test_empty_frame_on_empty_state():
    state, out = smc_step(TrackerState(), FrameObservations(1))
    assert out == [] and state.next_id == 1


def test_single_confident_detection_starts_track():
    state, out = smc_step(TrackerState(), FrameObservations(1, [det(0.9)]))
    assert [o.id for o in out] == [1] and state.tracks[0].status is TrackStatus.ACTIVE


def test_detection_at_new_track_threshold_does_not_start_track():
    _, out = smc_step(TrackerState(), FrameObservations(1, [det(0.7)]))
    assert out == []


def test_out_of_order_frames():
    state, _ = smc_step(TrackerState(), FrameObservations(5, [det(0.9, 5)]))
    with pytest.raises(SequencingError):
        smc_step(state, FrameObservations(5))
    with pytest.raises(SequencingError):
        run_sequence([FrameObservations(3), FrameObservations(2)])


def test_lost_track_recovered_after_gap():
    def person(f):
        return Detection(BoundingBox(2.0 * f, 0.0, 50.0, 120.0), 0.9, f)

    frames = [FrameObservations(f, [person(f)]) for f in range(1, 6)]
    frames += [FrameObservations(f) for f in range(6, 9)]
    frames += [FrameObservations(f, [person(f)]) for f in range(9, 12)]
    assert {o.id for o in run_sequence(frames)} == {1}


def test_small_fast_box_exceeds_cost_cap():
    # 10 px wide, 2 px/frame: IoU 2/3, distance 1/3 > 0.2, so every frame starts a new track
    frames = [FrameObservations(f, [det(0.9, f, x=2.0 * f)]) for f in range(1, 4)]
    assert [o.id for o in run_sequence(frames)] == [1, 2, 3]


def test_track_deleted_after_ttl_and_id_not_reused():
    cfg = TrackerConfig(lost_ttl=2)
    tracker = Tracker(cfg)
    tracker.step(FrameObservations(1, [det(0.9, 1)]))
    for f in (2, 3, 4):
        tracker.step(FrameObservations(f))
    assert tracker.state.deleted_ids == [1] and tracker.state.tracks == []
    out = tracker.step(FrameObservations(5, [det(0.9, 5)]))
    assert [o.id for o in out] == [2]


def test_gap_frames_are_filled():
    frames = [FrameObservations(1, [det(0.9, 1)]), FrameObservations(40, [det(0.9, 40)])]
    out = run_sequence(frames)
    # the first track expired during the 38 empty frames in between
    assert [o.id for o in out] == [1, 2]


def test_gate_blocks_dissimilar_appearance():
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.6, 0.8])  # cosine 0.6 < 0.7
    tracker = Tracker(TrackerConfig())
    tracker.step(FrameObservations(1, [det(0.9, 1, emb=e1)]))
    out = tracker.step(FrameObservations(2, [det(0.9, 2, emb=e2)]))
    assert [o.id for o in out] == [2]
    tracker = Tracker(TrackerConfig(fusion_mode="weighted"))
    tracker.step(FrameObservations(1, [det(0.9, 1, emb=e1)]))
    out = tracker.step(FrameObservations(2, [det(0.9, 2, emb=e2)]))
    assert [o.id for o in out] == [1]


def test_run_sequence_empty():
    assert run_sequence([]) == []


def test_one_identity_one_id():
    spec = ScenarioSpec(identities=1, frames=20, seed=3)
    sc = generate_scenario(spec)
    assert {o.id for o in run_sequence(sc.frames)} == {1}


def test_deterministic():
    sc = generate_scenario(ScenarioSpec(identities=6, frames=60, seed=9, detector_miss_rate=0.1))
    assert run_sequence(sc.frames) == run_sequence(sc.frames)


# -- canned scenarios ------------------------------------------------------------------

def _run(spec, **cfg):
    sc = generate_scenario(spec)
    return sc, run_sequence(sc.frames, TrackerConfig(**cfg))


def test_occlusion_dip_needs_stage_two():
    _, full = _run(occlusion_dip_spec())
    _, no2 = _run(occlusion_dip_spec(), stage2_enabled=False)
    # the dipped person is the only one in the top-left quarter of the image
    def ids_of_target(out):
        return {o.id for o in out if o.box.top < 300 and o.box.left < 450}

    assert len(ids_of_target(full)) == 1
    assert len(ids_of_target(no2)) >= 2


@pytest.mark.parametrize("mode", ["gate", "weighted", "iou-only", "eq4-literal"])
def test_plain_crossing_is_clean(mode):
    sc, out = _run(crossing_spec(), fusion_mode=mode)
    rep = evaluate(sc.ground_truth, out)
    assert rep.idsw == 0


def test_adversarial_crossing_gate_vs_weighted():
    sc, gate = _run(adversarial_crossing_spec())
    _, weighted = _run(adversarial_crossing_spec(), fusion_mode="weighted")
    assert evaluate(sc.ground_truth, gate).idsw == 0
    assert evaluate(sc.ground_truth, weighted).idsw >= 1


def test_iou_only_matches_full_pipeline_on_separated_targets():
    sc = generate_scenario(occlusion_dip_spec())
    for fo in sc.frames:
        boxes = [d.box for d in fo.detections]
        assert all(iou(a, b) == 0 for i, a in enumerate(boxes) for b in boxes[i + 1:])
    assert run_sequence(sc.frames, TrackerConfig(fusion_mode="iou-only")) == run_sequence(sc.frames)


# -- invariants over random scenes --------------------------------------------------------

scenario_specs = st.builds(
    ScenarioSpec,
    identities=st.integers(1, 10),
    frames=st.integers(5, 60),
    seed=st.integers(0, 10_000),
    detector_miss_rate=st.sampled_from([0.0, 0.05, 0.2]),
    score_range=st.sampled_from([(0.75, 1.0), (0.05, 1.0), (0.3, 0.9)]),
    appearance_noise_sigma=st.sampled_from([0.05, 0.5]),
)


def run_with_reports(frames, cfg):
    tracker = Tracker(cfg)
    emitted, reports, snapshots = [], [], []
    for f in frames:
        out = tracker.step(f)
        emitted.append(out)
        reports.append(tracker.state.last_report)
        snapshots.append([(t.id, t.status, t.frames_since_update) for t in tracker.state.tracks])
    return tracker, emitted, reports, snapshots


@settings(max_examples=40)
@given(scenario_specs, st.sampled_from(["gate", "weighted"]))
def test_lifecycle_invariants(spec, mode):
    cfg = TrackerConfig(fusion_mode=mode)
    sc = generate_scenario(spec)
    tracker, emitted, reports, snapshots = run_with_reports(sc.frames, cfg)
    seen, deleted = set(), set()
    for fo, out, rep, snap in zip(sc.frames, emitted, reports, snapshots):
        assert rep.n_high + rep.n_low + rep.n_discarded == rep.n_detections == len(fo.detections)
        ids = [o.id for o in out]
        assert len(ids) == len(set(ids))
        matched = {m[0] for m in rep.stage1_matches + rep.stage2_matches} | set(rep.new_ids)
        assert set(ids) == matched
        assert not set(rep.new_ids) & seen
        assert not set(ids) & deleted
        seen |= set(rep.new_ids)
        deleted |= set(rep.deleted_ids)
        lost_now = {i for i, status, _ in snap if status is TrackStatus.LOST}
        assert not lost_now & set(ids)
        assert all(age <= cfg.lost_ttl for _, _, age in snap)
        assert all(age >= 1 for _, status, age in snap if status is TrackStatus.LOST)
        if mode == "gate":
            assert all(math.isnan(m[3]) or m[3] >= cfg.gate_epsilon for m in rep.stage1_matches)
        assert all(m[2] <= cfg.match_cost_cap for m in rep.stage2_matches)


@settings(max_examples=25)
@given(scenario_specs)
def test_stage_two_never_adds_deletions(spec):
    frames = generate_scenario(spec).frames
    with_two = Tracker(TrackerConfig())
    without = Tracker(TrackerConfig(stage2_enabled=False))
    run_sequence(frames, tracker=with_two)
    run_sequence(frames, tracker=without)
    assert len(with_two.state.deleted_ids) <= len(without.state.deleted_ids)
