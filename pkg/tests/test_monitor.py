"""Monitor engine semantics, episode debouncing, and oracle agreement."""

import random
from collections import Counter

import pytest

from oracle_rescan import oracle_key, rescan_violations, violation_key
from tipsmon.model import (
    ClipApplied,
    Cut,
    Detach,
    ForceSample,
    Retrieve,
    SessionEnd,
    Suture,
    ToolPose,
    Vec3,
)
from tipsmon.monitor import ImmediateAlert, MonitorError, compile_monitors, run_stream
from tipsmon.specparse import parse_spec_document


def _pose(t, x, activated=True, tool="maryland_dissector", y=0.0, z=50.0):
    return ToolPose(t=t, tool_id=tool, tip=Vec3(x, y, z), activated=activated)


# -- compilation ------------------------------------------------------------------


def test_golden_spec_monitor_counts(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    assert len(ms.proximity_monitors) == 1
    assert len(ms.force_monitors) == 1
    assert len(ms.clip_rules) == 1
    assert ms.has_foreign_monitor
    assert ms.completion_rule.target_anatomy_id == "gallbladder"
    # clip map starts empty for every clippable simlet in scene
    assert set(ms.clip_map) == {"cystic_duct", "cystic_artery"}
    assert all(v == [] for v in ms.clip_map.values())


def test_spec_without_clauses_compiles_completion_only(golden_catalog, golden_scene):
    doc = {
        "title": "Bare",
        "catalog": "golden_catalog.json",
        "completion": "free and retrieve Gallbladder via pouch",
        "steps": [
            {"action": "cut", "anatomy": "Cystic duct", "tool": "Scissors", "safety": "", "comment": ""}
        ],
    }
    spec, findings = parse_spec_document(doc, golden_catalog)
    assert findings == []
    ms = compile_monitors(spec, golden_scene, golden_catalog)
    assert not ms.proximity_monitors and not ms.force_monitors
    assert not ms.clip_rules and not ms.suture_rules
    assert not ms.has_foreign_monitor


def test_rule_on_anatomy_outside_scene_fails(golden_spec, golden_catalog):
    from tipsmon.catalog import compose

    partial = compose(golden_catalog, ["cystic_duct", "cystic_artery", "gallbladder"])
    with pytest.raises(MonitorError, match="not in the scene"):
        compile_monitors(golden_spec, partial, golden_catalog)


# -- event semantics ----------------------------------------------------------------


def test_proximity_breach_emits_alert_and_violation(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    out = ms.step(_pose(100.0, 7.0))  # 3 mm from the common bile duct
    assert [type(o).__name__ for o in out] == ["ImmediateAlert", "Violation"]
    alert, violation = out
    assert alert.kind == "toolTipRed"
    assert violation.error_type == "I"
    assert violation.measured == pytest.approx(3.0)
    assert violation.threshold == 5.0


def test_inactive_tool_is_not_checked(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    assert ms.step(_pose(100.0, 7.0, activated=False)) == []


def test_force_breach_and_hysteresis(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    out = ms.step(ForceSample(t=0.0, anatomy_id="cystic_duct", force=2.5, stretch=1.0))
    assert out[0].kind == "vesselFlash"
    assert out[1].error_type == "II" and out[1].measured == 2.5
    # still above 90% of the limit: same episode, no new violation
    assert ms.step(ForceSample(t=10.0, anatomy_id="cystic_duct", force=1.9, stretch=1.0)) == []
    assert ms.step(ForceSample(t=20.0, anatomy_id="cystic_duct", force=2.6, stretch=1.0)) == []
    # drop to 1.7 (< 1.8) ends the episode; the next breach is a new violation
    assert ms.step(ForceSample(t=30.0, anatomy_id="cystic_duct", force=1.7, stretch=1.0)) == []
    out = ms.step(ForceSample(t=40.0, anatomy_id="cystic_duct", force=2.2, stretch=1.0))
    assert out[1].error_type == "II"
    assert len([v for v in ms.violations if v.error_type == "II"]) == 2


def test_proximity_episode_single_violation_on_dwell(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    xs = [12.0, 7.0, 7.5, 8.0, 8.5, 9.3, 9.6, 12.0]  # exit needs d >= 5.5 i.e. x >= 9.5
    for i, x in enumerate(xs):
        ms.step(_pose(100.0 * i, x))
    assert [v.error_type for v in ms.violations] == ["I"]


def test_clip_layout_satisfied_by_correct_cut(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    for i, p in enumerate((0.2, 0.35, 0.7)):
        ms.step(ClipApplied(t=10.0 * i, vessel_id="cystic_duct", position=p))
    out = ms.step(Cut(t=100.0, anatomy_id="cystic_duct", position=0.5))
    assert out == []


def test_clip_layout_violated_counts(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    for i, p in enumerate((0.2, 0.7)):
        ms.step(ClipApplied(t=10.0 * i, vessel_id="cystic_duct", position=p))
    (violation,) = ms.step(Cut(t=100.0, anatomy_id="cystic_duct", position=0.5))
    assert violation.error_type == "IV"
    assert violation.measured == (1, 1)
    assert violation.threshold == (2, 1)


def test_mislocated_cut_strands_clips(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    for i, p in enumerate((0.2, 0.35, 0.7)):
        ms.step(ClipApplied(t=10.0 * i, vessel_id="cystic_duct", position=p))
    ms.step(Cut(t=100.0, anatomy_id="cystic_duct", position=0.1))
    assert ms.clip_map["cystic_duct"] == []
    assert len(ms.dropped_clips) == 3
    _, new = ms._finalize_inner()
    assert [v.error_type for v in new if v.error_type == "III"] != []
    assert len([v for v in ms.violations if v.error_type == "III"]) == 3


def test_wrong_location_cut_is_type_I(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    (violation,) = ms.step(Cut(t=5.0, anatomy_id="common_bile_duct", position=0.5))
    assert violation.error_type == "I"
    assert violation.measured == 0.0


def test_sanctioned_cut_on_step_anatomy_is_clean(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    assert ms.step(Cut(t=5.0, anatomy_id="cystic_artery", position=0.5)) == []
    assert ms.step(Cut(t=6.0, anatomy_id="fatty_tissue", position=0.5)) == []


def test_suture_outside_region(suture_spec, golden_scene, golden_catalog):
    ms = compile_monitors(suture_spec, golden_scene, golden_catalog)
    (violation,) = ms.step(
        Suture(t=50.0, anatomy_id="common_bile_duct", location=Vec3(0, 0, 90))
    )
    assert violation.error_type == "VI"
    assert violation.measured == pytest.approx(34.0)
    # inside the declared region: clean
    assert ms.step(Suture(t=60.0, anatomy_id="common_bile_duct", location=Vec3(0, 0, 52))) == []


def test_detach_and_retrieve_achievements(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    ms.step(Detach(t=10.0, child_id="gallbladder", parent_id="cystic_duct"))
    assert not any(a.label.startswith("freed") for a in ms.achievements)
    ms.step(Detach(t=20.0, child_id="gallbladder", parent_id="cystic_artery"))
    assert any(a.label == "freed Gallbladder" for a in ms.achievements)
    ms.step(Retrieve(t=30.0, anatomy_id="gallbladder", via_pouch=True))
    assert any(a.label.startswith("completed:") for a in ms.achievements)


def test_retrieve_wrong_anatomy_is_type_V(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    (violation,) = ms.step(Retrieve(t=10.0, anatomy_id="cystic_duct", via_pouch=True))
    assert violation.error_type == "V"


def test_missing_retrieval_fails_at_finalize(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    _, new = ms._finalize_inner()
    assert [v.error_type for v in new] == ["V"]


def test_decreasing_timestamp_rejected(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    ms.step(_pose(100.0, 30.0))
    with pytest.raises(MonitorError, match="decreasing timestamp"):
        ms.step(_pose(50.0, 30.0))


def test_unknown_ids_rejected(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    with pytest.raises(MonitorError, match="unknown tool"):
        ms.step(_pose(0.0, 30.0, tool="laser"))
    with pytest.raises(MonitorError, match="unknown anatomy"):
        ms.step(Cut(t=0.0, anatomy_id="liver", position=0.5))


def test_detach_is_idempotent(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    ms.step(Detach(t=1.0, child_id="gallbladder", parent_id="cystic_duct"))
    ms.step(Detach(t=2.0, child_id="gallbladder", parent_id="cystic_duct"))
    assert len([a for a in ms.achievements if a.label.startswith("freed")]) == 0


def test_events_after_finalize_rejected(golden_spec, golden_scene, golden_catalog):
    ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
    ms.step(SessionEnd(t=10.0))
    with pytest.raises(MonitorError, match="finalized"):
        ms.step(_pose(20.0, 30.0))


# -- clip map soundness ----------------------------------------------------------------


def test_clip_map_soundness_random_sequences(golden_spec, golden_scene, golden_catalog):
    rng = random.Random(99)
    for _ in range(30):
        ms = compile_monitors(golden_spec, golden_scene, golden_catalog)
        applied = {"cystic_duct": [], "cystic_artery": []}
        dropped = {"cystic_duct": [], "cystic_artery": []}
        t = 0.0
        for _ in range(rng.randrange(1, 25)):
            t += rng.choice((0.0, 10.0, 100.0))
            vessel = rng.choice(("cystic_duct", "cystic_artery"))
            if rng.random() < 0.7:
                pos = round(rng.random(), 3)
                ms.step(ClipApplied(t=t, vessel_id=vessel, position=pos))
                applied[vessel].append(pos)
            else:
                pos = round(rng.random(), 3)
                ms.step(Cut(t=t, anatomy_id=vessel, position=pos))
                live = sorted(set_minus(applied[vessel], dropped[vessel]))
                if live and pos < min(live):
                    dropped[vessel].extend(live)
        for vessel in applied:
            expected = sorted(set_minus(applied[vessel], dropped[vessel]))
            assert ms.clip_map[vessel] == expected


def set_minus(a, b):
    out = list(a)
    for x in b:
        out.remove(x)
    return out


# -- determinism and order independence ---------------------------------------------


def _scenario_events(name):
    from tipsmon.harness import gen_scenario

    return gen_scenario(name).events


@pytest.mark.parametrize("name", ["clean", "errI", "errII", "errIII", "errIV", "errV"])
def test_identical_streams_identical_outputs(name, golden_spec, golden_scene, golden_catalog):
    events = _scenario_events(name)
    _, out1 = run_stream(golden_spec, golden_scene, golden_catalog, events)
    _, out2 = run_stream(golden_spec, golden_scene, golden_catalog, events)
    assert out1 == out2


def test_equal_timestamp_disjoint_monitor_permutation(golden_spec, golden_scene, golden_catalog):
    base = [
        _pose(100.0, 7.0),  # proximity breach
        ForceSample(t=100.0, anatomy_id="cystic_duct", force=2.5, stretch=1.0),  # force breach
        ClipApplied(t=100.0, vessel_id="cystic_artery", position=0.5),
    ]
    multisets = []
    import itertools

    for perm in itertools.permutations(base):
        ms, _ = run_stream(golden_spec, golden_scene, golden_catalog, list(perm))
        multisets.append(
            Counter((v.error_type, v.t, str(v.measured)) for v in ms.violations)
        )
    assert all(m == multisets[0] for m in multisets)


# -- brute-force oracle on random streams ----------------------------------------------


def _random_stream(rng, catalog):
    anatomy = list(catalog.simlets)
    clippable = ["cystic_duct", "cystic_artery"]
    events = []
    t = 0.0
    for _ in range(rng.randrange(1, 50)):
        t += rng.choice((0.0, 50.0, 100.0))
        kind = rng.randrange(7)
        if kind == 0:
            events.append(
                ToolPose(
                    t=t,
                    tool_id=rng.choice(list(catalog.tools)),
                    tip=Vec3(rng.uniform(-10, 40), rng.uniform(-10, 10), rng.uniform(30, 70)),
                    activated=rng.random() < 0.6,
                )
            )
        elif kind == 1:
            events.append(
                ForceSample(
                    t=t,
                    anatomy_id=rng.choice(anatomy),
                    force=round(rng.uniform(0.0, 3.0), 2),
                    stretch=round(rng.uniform(0.8, 2.0), 2),
                )
            )
        elif kind == 2:
            events.append(
                ClipApplied(t=t, vessel_id=rng.choice(clippable), position=round(rng.random(), 2))
            )
        elif kind == 3:
            events.append(
                Cut(t=t, anatomy_id=rng.choice(anatomy), position=round(rng.random(), 2))
            )
        elif kind == 4:
            events.append(
                Suture(
                    t=t,
                    anatomy_id=rng.choice(anatomy),
                    location=Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(30, 100)),
                )
            )
        elif kind == 5:
            a, b = rng.sample(anatomy, 2)
            events.append(Detach(t=t, child_id=a, parent_id=b))
        else:
            events.append(
                Retrieve(t=t, anatomy_id=rng.choice(anatomy), via_pouch=rng.random() < 0.7)
            )
    t += 100.0
    events.append(SessionEnd(t=t))
    return events


def test_engine_matches_rescan_oracle_on_random_streams(
    golden_spec, golden_scene, golden_catalog
):
    rng = random.Random(4242)
    for _ in range(200):
        events = _random_stream(rng, golden_catalog)
        ms, _ = run_stream(golden_spec, golden_scene, golden_catalog, events)
        oracle = rescan_violations(golden_spec, golden_scene, golden_catalog, events)
        got = Counter(violation_key(v) for v in ms.violations)
        want = Counter(oracle_key(o) for o in oracle)
        assert got == want
