"""Violation snapshots, the end-of-session report, and the message text.

A "snapshot" is a serialized scene state plus a deterministic 2D SVG
projection (orthographic XY). Snapshot files are named
``<t, 8 digits>ms_type<I..VI>_<value token>.json|.svg`` where the value token
writes decimal points as 'p' (3.0 mm -> "3p0mm").
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .catalog import Scene
from .model import Capsule, ProcedureSpec, SessionReport, Sphere, Vec3, Violation

SNAPSHOT_NAME_RE = re.compile(
    r"^(\d{8})ms_type(I|II|III|IV|V|VI)_([A-Za-z0-9p\-]+)\.(json|svg)$"
)

COMPLETION_LABEL_PREFIX = "completed:"


def value_token(measured: Any, unit: str) -> str:
    """Render a measured value + unit as a file-name token ('.' becomes 'p')."""
    if isinstance(measured, tuple):
        nums = "-".join(str(int(m)) for m in measured)
        return f"{nums}{unit}"
    if isinstance(measured, int):
        return f"{measured}{unit}"
    return f"{measured:.1f}".replace(".", "p") + unit


def snapshot_base_name(t: float, error_type: str, measured: Any, unit: str) -> str:
    return f"{int(round(t)):08d}ms_type{error_type}_{value_token(measured, unit)}"


def parse_snapshot_name(filename: str):
    """Invert the naming convention: (t_ms, error_type, value_token)."""
    m = SNAPSHOT_NAME_RE.match(filename)
    if m is None:
        raise ValueError(f"not a snapshot file name: '{filename}'")
    return int(m.group(1)), m.group(2), m.group(3)


# ---------------------------------------------------------------------------
# Scene state captured at violation time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneState:
    t: float
    tool_tips: dict  # toolId -> (Vec3, activated)
    clip_map: dict  # vesselId -> [position, ...]
    dropped_clips: tuple  # of (clipId, position)
    attachment_edges: tuple  # of sorted (a, b) pairs
    scene: Scene = field(compare=False, repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "toolTips": {
                tid: {"tip": tip.to_list(), "activated": act}
                for tid, (tip, act) in sorted(self.tool_tips.items())
            },
            "clipMap": {v: list(ps) for v, ps in sorted(self.clip_map.items())},
            "droppedClips": [
                {"clipId": cid, "position": pos} for cid, pos in self.dropped_clips
            ],
            "attachmentEdges": [list(e) for e in self.attachment_edges],
        }


# ---------------------------------------------------------------------------
# SVG projection
# ---------------------------------------------------------------------------

_SVG_NS = "http://www.w3.org/2000/svg"


def _bounds(state: SceneState):
    xs, ys = [], []

    def add(v: Vec3):
        xs.append(v.x)
        ys.append(v.y)

    if state.scene is not None:
        for simlet in state.scene.instances.values():
            for g in simlet.geometry:
                if isinstance(g, Sphere):
                    add(Vec3(g.center.x - g.radius, g.center.y - g.radius, 0))
                    add(Vec3(g.center.x + g.radius, g.center.y + g.radius, 0))
                elif isinstance(g, Capsule):
                    for e in (g.endpoint_a, g.endpoint_b):
                        add(Vec3(e.x - g.radius, e.y - g.radius, 0))
                        add(Vec3(e.x + g.radius, e.y + g.radius, 0))
                else:
                    for v in g.vertices:
                        add(v)
    for tip, _ in state.tool_tips.values():
        add(tip)
    if not xs:
        return -10.0, -10.0, 10.0, 10.0
    pad = 10.0
    return min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad


def _lerp(a: Vec3, b: Vec3, t: float) -> Vec3:
    return Vec3(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t)


def render_svg(state: SceneState, highlight_ids=()) -> str:
    """Orthographic XY projection: simlet outlines, clip marks, tool tip markers."""
    highlight = set(highlight_ids)
    x0, y0, x1, y1 = _bounds(state)
    root = ET.Element(
        "svg",
        {
            "xmlns": _SVG_NS,
            "viewBox": f"{x0:.1f} {y0:.1f} {x1 - x0:.1f} {y1 - y0:.1f}",
            "width": "640",
            "height": "480",
        },
    )
    if state.scene is not None:
        for sid in sorted(state.scene.instances):
            simlet = state.scene.instances[sid]
            color = "#cc2222" if sid in highlight else "#557788"
            group = ET.SubElement(root, "g", {"id": f"simlet-{sid}", "stroke": color, "fill": "none"})
            for g in simlet.geometry:
                if isinstance(g, Sphere):
                    ET.SubElement(
                        group,
                        "circle",
                        {"cx": f"{g.center.x:.2f}", "cy": f"{g.center.y:.2f}", "r": f"{g.radius:.2f}"},
                    )
                elif isinstance(g, Capsule):
                    ET.SubElement(
                        group,
                        "line",
                        {
                            "x1": f"{g.endpoint_a.x:.2f}",
                            "y1": f"{g.endpoint_a.y:.2f}",
                            "x2": f"{g.endpoint_b.x:.2f}",
                            "y2": f"{g.endpoint_b.y:.2f}",
                            "stroke-width": f"{2 * g.radius:.2f}",
                            "stroke-linecap": "round",
                            "opacity": "0.6",
                        },
                    )
                else:
                    for i, j, k in g.triangles:
                        pts = " ".join(
                            f"{v.x:.2f},{v.y:.2f}" for v in (g.vertices[i], g.vertices[j], g.vertices[k])
                        )
                        ET.SubElement(group, "polygon", {"points": pts})
            # clip marks along the first capsule axis of clip-carrying vessels
            clips = state.clip_map.get(sid) or []
            axis = next((g for g in simlet.geometry if isinstance(g, Capsule)), None)
            if axis is not None:
                if simlet.proximal_end == "A":
                    a, b = axis.endpoint_a, axis.endpoint_b
                else:
                    a, b = axis.endpoint_b, axis.endpoint_a
                for pos in clips:
                    at = _lerp(a, b, pos)
                    ET.SubElement(
                        group,
                        "rect",
                        {
                            "x": f"{at.x - 1.5:.2f}",
                            "y": f"{at.y - 1.5:.2f}",
                            "width": "3",
                            "height": "3",
                            "fill": color,
                            "class": "clip-mark",
                        },
                    )
    for tid in sorted(state.tool_tips):
        tip, activated = state.tool_tips[tid]
        ET.SubElement(
            root,
            "circle",
            {
                "cx": f"{tip.x:.2f}",
                "cy": f"{tip.y:.2f}",
                "r": "2.0",
                "class": "tool-tip",
                "id": f"tool-{tid}",
                "fill": "#dd2200" if activated else "#222222",
            },
        )
    return ET.tostring(root, encoding="unicode")


# ---------------------------------------------------------------------------
# Snapshot and report writing
# ---------------------------------------------------------------------------


def snapshot(state: SceneState, violation: Violation, out_dir) -> tuple:
    """Write the snapshot pair for a violation; returns (json_name, svg_name)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = violation.snapshot_base_name or snapshot_base_name(
        violation.t, violation.error_type, violation.measured, violation.unit
    )
    json_name = f"{base}.json"
    svg_name = f"{base}.svg"
    payload = state.to_dict()
    payload["violation"] = violation.to_dict()
    (out_dir / json_name).write_text(
        json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
    )
    (out_dir / svg_name).write_text(
        render_svg(state, highlight_ids=violation.subject_ids), encoding="utf-8"
    )
    return json_name, svg_name


def _fmt_measured(v: Violation) -> str:
    if isinstance(v.measured, tuple):
        return f"({', '.join(str(int(m)) for m in v.measured)}) {v.unit}"
    if isinstance(v.measured, int):
        return f"{v.measured} {v.unit}"
    return f"{v.measured:g} {v.unit}"


def build_message(report: SessionReport) -> str:
    lines = [
        f"TIPS session {report.session_id}: {len(report.violations)} errors, "
        f"{len(report.achievements)} achievements",
        f"Procedure: {report.spec_title}",
        f"Snapshot directory: {report.snapshot_dir}",
        "",
    ]
    if report.proficient:
        lines.append(
            "Result: proficient. This session recorded no safety violations and a "
            "complete list of achievements."
        )
    else:
        lines.append("Result: not yet proficient.")
    if report.violations:
        lines.append("")
        lines.append("Violations:")
        for v in report.violations:
            lines.append(
                f"  - {v.snapshot_base_name}.json | type {v.error_type} at {v.t:g} ms | "
                f"measured {_fmt_measured(v)}"
            )
    if report.achievements:
        lines.append("")
        lines.append("Achievements:")
        for a in report.achievements:
            lines.append(f"  - [{a.t:g} ms] {a.label}")
    lines.append("")
    return "\n".join(lines)


def build_report(
    session_id: str,
    spec: ProcedureSpec,
    achievements,
    violations,
    snapshot_dir: str,
) -> SessionReport:
    """Assemble the session report; proficiency is the conjunction of zero
    violations, one achievement per step, and the completion achievement."""
    achievements = tuple(achievements)
    violations = tuple(violations)
    step_indices = {s.index for s in spec.steps}
    achieved_steps = {a.step_index for a in achievements}
    completion_done = any(a.label.startswith(COMPLETION_LABEL_PREFIX) for a in achievements)
    proficient = (
        not violations and step_indices <= achieved_steps and completion_done
    )
    report = SessionReport(
        session_id=session_id,
        spec_title=spec.title,
        achievements=achievements,
        violations=violations,
        proficient=proficient,
        snapshot_dir=snapshot_dir,
        message_text="",
    )
    return replace(report, message_text=build_message(report))


def write_report(report: SessionReport, out_dir) -> Path:
    """Write report.json and message.txt into the session's directory."""
    session_dir = Path(out_dir) / report.session_id
    session_dir.mkdir(parents=True, exist_ok=True)
    path = session_dir / "report.json"
    path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    (session_dir / "message.txt").write_text(report.message_text, encoding="utf-8")
    return path
