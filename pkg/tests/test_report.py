"""Snapshot naming, SVG rendering, report assembly, message template."""

import json
import xml.etree.ElementTree as ET

import pytest

from tipsmon.model import Achievement, Violation
from tipsmon.report import (
    SNAPSHOT_NAME_RE,
    SceneState,
    build_report,
    parse_snapshot_name,
    render_svg,
    snapshot,
    snapshot_base_name,
    value_token,
    write_report,
)


def _violation(t=12345.0, error_type="I", measured=3.0, threshold=5.0, unit="mm", subjects=("maryland_dissector", "common_bile_duct")):
    return Violation(
        t=t,
        error_type=error_type,
        measured=measured,
        threshold=threshold,
        unit=unit,
        subject_ids=subjects,
        snapshot_base_name=snapshot_base_name(t, error_type, measured, unit),
    )


# -- naming -----------------------------------------------------------------------


def test_type_I_name_applies_the_rule():
    assert snapshot_base_name(12345, "I", 3.0, "mm") == "00012345ms_typeI_3p0mm"


def test_type_III_zero_time_name():
    assert snapshot_base_name(0, "III", 1, "clip") == "00000000ms_typeIII_1clip"


def test_type_II_value_token():
    assert value_token(2.5, "N") == "2p5N"


def test_clip_counts_token():
    assert value_token((1, 1), "clips") == "1-1clips"


def test_names_match_normative_regex_and_parse_back():
    cases = [
        (12345, "I", 3.0, "mm"),
        (0, "III", 1, "clip"),
        (999, "II", 2.5, "N"),
        (1500, "IV", (1, 1), "clips"),
        (2000, "V", 0, "retrieved"),
        (100, "VI", 34.0, "mm"),
    ]
    for t, et, m, u in cases:
        base = snapshot_base_name(t, et, m, u)
        for ext in (".json", ".svg"):
            name = base + ext
            assert SNAPSHOT_NAME_RE.match(name), name
            parsed_t, parsed_type, parsed_value = parse_snapshot_name(name)
            assert parsed_t == t
            assert parsed_type == et
            assert parsed_value == value_token(m, u)


def test_parse_rejects_foreign_names():
    with pytest.raises(ValueError):
        parse_snapshot_name("report.json")


# -- snapshots ----------------------------------------------------------------------


def _state(golden_scene, t=12345.0):
    from tipsmon.model import Vec3

    return SceneState(
        t=t,
        tool_tips={"maryland_dissector": (Vec3(7, 0, 50), True)},
        clip_map={"cystic_duct": [0.2, 0.35, 0.7], "cystic_artery": []},
        dropped_clips=(),
        attachment_edges=(("cystic_duct", "gallbladder"),),
        scene=golden_scene,
    )


def test_snapshot_writes_pair(tmp_path, golden_scene):
    v = _violation()
    json_name, svg_name = snapshot(_state(golden_scene), v, tmp_path)
    assert json_name == "00012345ms_typeI_3p0mm.json"
    assert svg_name == "00012345ms_typeI_3p0mm.svg"
    assert (tmp_path / json_name).exists() and (tmp_path / svg_name).exists()
    payload = json.loads((tmp_path / json_name).read_text(encoding="utf-8"))
    assert payload["t"] == 12345.0
    assert payload["clipMap"]["cystic_duct"] == [0.2, 0.35, 0.7]
    assert payload["violation"]["errorType"] == "I"


def test_svg_is_valid_xml_with_tool_markers(golden_scene):
    text = render_svg(_state(golden_scene), highlight_ids=("common_bile_duct",))
    root = ET.fromstring(text)  # raises on invalid XML
    markers = [
        el
        for el in root.iter("{http://www.w3.org/2000/svg}circle")
        if el.get("class") == "tool-tip"
    ]
    assert len(markers) == 1
    assert "viewBox" in root.attrib


def test_svg_marker_per_tool_tip(golden_scene):
    from tipsmon.model import Vec3

    state = SceneState(
        t=0.0,
        tool_tips={
            "maryland_dissector": (Vec3(7, 0, 50), True),
            "scissors": (Vec3(30, 0, 60), False),
            "grasper": (Vec3(50, 5, 80), False),
        },
        clip_map={},
        dropped_clips=(),
        attachment_edges=(),
        scene=golden_scene,
    )
    root = ET.fromstring(render_svg(state))
    markers = [
        el
        for el in root.iter("{http://www.w3.org/2000/svg}circle")
        if el.get("class") == "tool-tip"
    ]
    assert len(markers) == 3


# -- reports ----------------------------------------------------------------------


def _full_achievements(golden_spec):
    out = [
        Achievement(step_index=s.index, t=100.0 * s.index, label=f"step {s.index}: x")
        for s in golden_spec.steps
    ]
    out.append(Achievement(0, 900.0, "freed Gallbladder"))
    out.append(Achievement(0, 950.0, "retrieved Gallbladder"))
    out.append(Achievement(0, 950.0, "completed: freed and retrieved Gallbladder"))
    return out


def test_clean_report_is_proficient(golden_spec):
    report = build_report("sid-1", golden_spec, _full_achievements(golden_spec), (), "sid-1/snapshots")
    assert report.proficient is True
    assert report.violations == ()
    assert "0 errors" in report.message_text.splitlines()[0]
    assert "no safety violations" in report.message_text


def test_report_with_violations_lists_snapshots(golden_spec):
    violations = (_violation(), _violation(t=20000.0, error_type="II", measured=2.5, threshold=2.0, unit="N", subjects=("cystic_duct",)))
    report = build_report("sid-2", golden_spec, _full_achievements(golden_spec), violations, "sid-2/snapshots")
    assert report.proficient is False
    assert "00012345ms_typeI_3p0mm.json" in report.message_text
    assert "00020000ms_typeII_2p5N.json" in report.message_text


def test_missing_step_achievement_blocks_proficiency(golden_spec):
    achievements = [a for a in _full_achievements(golden_spec) if a.step_index != 2]
    report = build_report("sid-3", golden_spec, achievements, (), "sid-3/snapshots")
    assert report.proficient is False


def test_missing_completion_blocks_proficiency(golden_spec):
    achievements = [
        a for a in _full_achievements(golden_spec) if not a.label.startswith("completed:")
    ]
    report = build_report("sid-4", golden_spec, achievements, (), "sid-4/snapshots")
    assert report.proficient is False


def test_write_report_layout_and_first_line(tmp_path, golden_spec):
    report = build_report("fixed-session", golden_spec, _full_achievements(golden_spec), (), "fixed-session/snapshots")
    path = write_report(report, tmp_path)
    assert path == tmp_path / "fixed-session" / "report.json"
    message = (tmp_path / "fixed-session" / "message.txt").read_text(encoding="utf-8")
    assert message.splitlines()[0] == (
        f"TIPS session fixed-session: 0 errors, {len(report.achievements)} achievements"
    )
    loaded = json.loads(path.read_text(encoding="utf-8"))
    assert loaded["proficient"] is True
    assert loaded["sessionId"] == "fixed-session"
