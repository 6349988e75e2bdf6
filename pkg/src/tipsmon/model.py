"""Shared domain types: authored procedures, simulation events, violations, reports.

All types are immutable value data. Serialization is plain JSON with camelCase
keys; ``from_dict`` constructors validate shape and report the location of the
offending field. Units are fixed globally: millimeters, newtons, milliseconds,
dimensionless stretch ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional, Union

SIMLET_KINDS = frozenset({"organ", "vessel", "duct", "fattyTissue", "pouch"})
SIMLET_FLAGS = frozenset(
    {"sensitive", "clippable", "cuttable", "suturable", "removalTarget"}
)
TOOL_CAPABILITIES = frozenset(
    {"cauterize", "dissect", "cut", "clipApply", "grasp", "suture", "retrieve"}
)
ERROR_TYPES = ("I", "II", "III", "IV", "V", "VI")


class ModelError(ValueError):
    """Malformed or invariant-breaking data, reported with its location."""

    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}")


def _require(d: dict, key: str, loc: str) -> Any:
    if not isinstance(d, dict):
        raise ModelError(loc, "expected an object")
    if key not in d:
        raise ModelError(loc, f"missing field '{key}'")
    return d[key]


def _finite(v: Any, loc: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelError(loc, f"expected a number, got {type(v).__name__}")
    f = float(v)
    if not math.isfinite(f):
        raise ModelError(loc, "number must be finite")
    return f


def _positive(v: Any, loc: str) -> float:
    f = _finite(v, loc)
    if f <= 0:
        raise ModelError(loc, "number must be positive")
    return f


def _text(v: Any, loc: str) -> str:
    if not isinstance(v, str):
        raise ModelError(loc, f"expected text, got {type(v).__name__}")
    return v


def _boolean(v: Any, loc: str) -> bool:
    if not isinstance(v, bool):
        raise ModelError(loc, f"expected a boolean, got {type(v).__name__}")
    return v


def _int(v: Any, loc: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ModelError(loc, f"expected an integer, got {type(v).__name__}")
    return v


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vec3:
    """Point or offset in millimeters."""

    x: float
    y: float
    z: float

    def to_list(self) -> list:
        return [self.x, self.y, self.z]

    @classmethod
    def from_obj(cls, v: Any, loc: str) -> "Vec3":
        if not isinstance(v, (list, tuple)) or len(v) != 3:
            raise ModelError(loc, "expected [x, y, z]")
        return cls(*(_finite(c, f"{loc}[{i}]") for i, c in enumerate(v)))


@dataclass(frozen=True)
class Sphere:
    center: Vec3
    radius: float


@dataclass(frozen=True)
class Capsule:
    endpoint_a: Vec3
    endpoint_b: Vec3
    radius: float


@dataclass(frozen=True)
class TriangleMesh:
    vertices: tuple  # of Vec3
    triangles: tuple  # of (i, j, k) index triples


GeometryPrimitive = Union[Sphere, Capsule, TriangleMesh]


def geometry_to_dict(g: GeometryPrimitive) -> dict:
    if isinstance(g, Sphere):
        return {"type": "sphere", "center": g.center.to_list(), "radius": g.radius}
    if isinstance(g, Capsule):
        return {
            "type": "capsule",
            "endpointA": g.endpoint_a.to_list(),
            "endpointB": g.endpoint_b.to_list(),
            "radius": g.radius,
        }
    return {
        "type": "mesh",
        "vertices": [v.to_list() for v in g.vertices],
        "triangles": [list(t) for t in g.triangles],
    }


def geometry_from_dict(d: Any, loc: str) -> GeometryPrimitive:
    tag = _text(_require(d, "type", loc), f"{loc}.type")
    if tag == "sphere":
        return Sphere(
            center=Vec3.from_obj(_require(d, "center", loc), f"{loc}.center"),
            radius=_positive(_require(d, "radius", loc), f"{loc}.radius"),
        )
    if tag == "capsule":
        a = Vec3.from_obj(_require(d, "endpointA", loc), f"{loc}.endpointA")
        b = Vec3.from_obj(_require(d, "endpointB", loc), f"{loc}.endpointB")
        if a == b:
            raise ModelError(loc, "capsule endpoints must be distinct")
        return Capsule(a, b, _positive(_require(d, "radius", loc), f"{loc}.radius"))
    if tag == "mesh":
        raw_v = _require(d, "vertices", loc)
        raw_t = _require(d, "triangles", loc)
        if not isinstance(raw_v, list) or not isinstance(raw_t, list):
            raise ModelError(loc, "mesh vertices/triangles must be arrays")
        vertices = tuple(
            Vec3.from_obj(v, f"{loc}.vertices[{i}]") for i, v in enumerate(raw_v)
        )
        if not raw_t:
            raise ModelError(loc, "mesh must have at least one triangle")
        triangles = []
        for i, t in enumerate(raw_t):
            if not isinstance(t, (list, tuple)) or len(t) != 3:
                raise ModelError(f"{loc}.triangles[{i}]", "expected an index triple")
            tri = tuple(_int(ix, f"{loc}.triangles[{i}][{j}]") for j, ix in enumerate(t))
            for ix in tri:
                if ix < 0 or ix >= len(vertices):
                    raise ModelError(
                        f"{loc}.triangles[{i}]", f"vertex index {ix} out of range"
                    )
            triangles.append(tri)
        return TriangleMesh(vertices, tuple(triangles))
    raise ModelError(f"{loc}.type", f"unknown geometry type '{tag}'")


# ---------------------------------------------------------------------------
# Catalog entries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SutureRegionDef:
    region_id: str
    geometry: GeometryPrimitive


@dataclass(frozen=True)
class Simlet:
    """A physics-annotated piece of anatomy with safety-relevant flags."""

    id: str
    name: str
    kind: str
    geometry: tuple = ()
    youngs_modulus: Optional[float] = None
    force_threshold: Optional[float] = None
    stretch_threshold: Optional[float] = None
    flags: frozenset = frozenset()
    suture_regions: tuple = ()
    attachments: tuple = ()
    proximal_end: str = "A"

    def has_flag(self, flag: str) -> bool:
        return flag in self.flags

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind,
            "geometry": [geometry_to_dict(g) for g in self.geometry],
            "youngsModulus": self.youngs_modulus,
            "forceThreshold": self.force_threshold,
            "stretchThreshold": self.stretch_threshold,
            "flags": sorted(self.flags),
            "sutureRegions": [
                {"regionId": r.region_id, "geometry": geometry_to_dict(r.geometry)}
                for r in self.suture_regions
            ],
            "attachments": list(self.attachments),
            "proximalEnd": self.proximal_end,
        }

    @classmethod
    def from_dict(cls, d: Any, loc: str = "simlet") -> "Simlet":
        sid = _text(_require(d, "id", loc), f"{loc}.id")
        if not sid:
            raise ModelError(f"{loc}.id", "id must be nonempty")
        kind = _text(_require(d, "kind", loc), f"{loc}.kind")
        if kind not in SIMLET_KINDS:
            raise ModelError(f"{loc}.kind", f"unknown kind '{kind}'")
        raw_flags = d.get("flags", [])
        if not isinstance(raw_flags, list):
            raise ModelError(f"{loc}.flags", "expected an array")
        flags = frozenset(_text(f, f"{loc}.flags") for f in raw_flags)
        unknown = flags - SIMLET_FLAGS
        if unknown:
            raise ModelError(f"{loc}.flags", f"unknown flags {sorted(unknown)}")
        if "clippable" in flags and kind not in ("vessel", "duct"):
            raise ModelError(loc, "clippable simlets must be vessels or ducts")
        raw_geo = d.get("geometry", [])
        if not isinstance(raw_geo, list):
            raise ModelError(f"{loc}.geometry", "expected an array")
        geometry = tuple(
            geometry_from_dict(g, f"{loc}.geometry[{i}]") for i, g in enumerate(raw_geo)
        )
        regions = []
        raw_regions = d.get("sutureRegions", [])
        if not isinstance(raw_regions, list):
            raise ModelError(f"{loc}.sutureRegions", "expected an array")
        for i, r in enumerate(raw_regions):
            rloc = f"{loc}.sutureRegions[{i}]"
            regions.append(
                SutureRegionDef(
                    region_id=_text(_require(r, "regionId", rloc), f"{rloc}.regionId"),
                    geometry=geometry_from_dict(
                        _require(r, "geometry", rloc), f"{rloc}.geometry"
                    ),
                )
            )
        if "suturable" in flags and not regions:
            raise ModelError(loc, "suturable simlets need at least one suture region")
        raw_att = d.get("attachments", [])
        if not isinstance(raw_att, list):
            raise ModelError(f"{loc}.attachments", "expected an array")
        proximal = d.get("proximalEnd", "A")
        if proximal not in ("A", "B"):
            raise ModelError(f"{loc}.proximalEnd", "must be 'A' or 'B'")
        ym = d.get("youngsModulus")
        ft = d.get("forceThreshold")
        st = d.get("stretchThreshold")
        return cls(
            id=sid,
            name=_text(_require(d, "name", loc), f"{loc}.name"),
            kind=kind,
            geometry=geometry,
            youngs_modulus=None if ym is None else _positive(ym, f"{loc}.youngsModulus"),
            force_threshold=None if ft is None else _positive(ft, f"{loc}.forceThreshold"),
            stretch_threshold=None
            if st is None
            else _positive(st, f"{loc}.stretchThreshold"),
            flags=flags,
            suture_regions=tuple(regions),
            attachments=tuple(_text(a, f"{loc}.attachments") for a in raw_att),
            proximal_end=proximal,
        )


@dataclass(frozen=True)
class ToolSpec:
    id: str
    name: str
    capabilities: frozenset

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "capabilities": sorted(self.capabilities),
        }

    @classmethod
    def from_dict(cls, d: Any, loc: str = "tool") -> "ToolSpec":
        tid = _text(_require(d, "id", loc), f"{loc}.id")
        if not tid:
            raise ModelError(f"{loc}.id", "id must be nonempty")
        raw = _require(d, "capabilities", loc)
        if not isinstance(raw, list) or not raw:
            raise ModelError(f"{loc}.capabilities", "must be a nonempty array")
        caps = frozenset(_text(c, f"{loc}.capabilities") for c in raw)
        unknown = caps - TOOL_CAPABILITIES
        if unknown:
            raise ModelError(f"{loc}.capabilities", f"unknown capabilities {sorted(unknown)}")
        return cls(id=tid, name=_text(_require(d, "name", loc), f"{loc}.name"), capabilities=caps)


# ---------------------------------------------------------------------------
# Safety rules (the six monitorable error classes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Proximity:
    """Error type I: activated tool must keep a minimum distance."""

    tool_id: str
    protected_anatomy_id: str
    min_distance: float
    active_only: bool = True


@dataclass(frozen=True)
class ForceLimit:
    """Error type II: force cap, optionally a stretch-ratio cap."""

    anatomy_id: str
    max_force: float
    max_stretch: Optional[float] = None


@dataclass(frozen=True)
class NoForeignBodies:
    """Error type III: nothing left behind at session end."""


@dataclass(frozen=True)
class ClipLayout:
    """Error type IV: required clip counts relative to the cut."""

    vessel_id: str
    required_proximal: int
    required_distal: int
    must_precede_cut: bool = True


@dataclass(frozen=True)
class Completion:
    """Error type V guard: the procedure's achievement definition."""

    target_anatomy_id: str
    must_be_freed: bool = True
    must_be_retrieved_via_pouch: bool = True


@dataclass(frozen=True)
class SutureRegionRule:
    """Error type VI: sutures must land inside the declared region."""

    anatomy_id: str
    region_id: str


SafetyRule = Union[
    Proximity, ForceLimit, NoForeignBodies, ClipLayout, Completion, SutureRegionRule
]


def rule_to_dict(r: SafetyRule) -> dict:
    if isinstance(r, Proximity):
        return {
            "type": "proximity",
            "toolId": r.tool_id,
            "protectedAnatomyId": r.protected_anatomy_id,
            "minDistance": r.min_distance,
            "activeOnly": r.active_only,
        }
    if isinstance(r, ForceLimit):
        return {
            "type": "forceLimit",
            "anatomyId": r.anatomy_id,
            "maxForce": r.max_force,
            "maxStretch": r.max_stretch,
        }
    if isinstance(r, NoForeignBodies):
        return {"type": "noForeignBodies"}
    if isinstance(r, ClipLayout):
        return {
            "type": "clipLayout",
            "vesselId": r.vessel_id,
            "requiredProximal": r.required_proximal,
            "requiredDistal": r.required_distal,
            "mustPrecedeCut": r.must_precede_cut,
        }
    if isinstance(r, Completion):
        return {
            "type": "completion",
            "targetAnatomyId": r.target_anatomy_id,
            "mustBeFreed": r.must_be_freed,
            "mustBeRetrievedViaPouch": r.must_be_retrieved_via_pouch,
        }
    return {"type": "sutureRegion", "anatomyId": r.anatomy_id, "regionId": r.region_id}


def rule_from_dict(d: Any, loc: str = "rule") -> SafetyRule:
    tag = _text(_require(d, "type", loc), f"{loc}.type")
    if tag == "proximity":
        return Proximity(
            tool_id=_text(_require(d, "toolId", loc), f"{loc}.toolId"),
            protected_anatomy_id=_text(
                _require(d, "protectedAnatomyId", loc), f"{loc}.protectedAnatomyId"
            ),
            min_distance=_positive(_require(d, "minDistance", loc), f"{loc}.minDistance"),
            active_only=_boolean(d.get("activeOnly", True), f"{loc}.activeOnly"),
        )
    if tag == "forceLimit":
        ms = d.get("maxStretch")
        return ForceLimit(
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            max_force=_positive(_require(d, "maxForce", loc), f"{loc}.maxForce"),
            max_stretch=None if ms is None else _positive(ms, f"{loc}.maxStretch"),
        )
    if tag == "noForeignBodies":
        return NoForeignBodies()
    if tag == "clipLayout":
        rp = _int(_require(d, "requiredProximal", loc), f"{loc}.requiredProximal")
        rd = _int(_require(d, "requiredDistal", loc), f"{loc}.requiredDistal")
        if rp < 0 or rd < 0:
            raise ModelError(loc, "clip counts must be non-negative")
        return ClipLayout(
            vessel_id=_text(_require(d, "vesselId", loc), f"{loc}.vesselId"),
            required_proximal=rp,
            required_distal=rd,
            must_precede_cut=_boolean(d.get("mustPrecedeCut", True), f"{loc}.mustPrecedeCut"),
        )
    if tag == "completion":
        return Completion(
            target_anatomy_id=_text(
                _require(d, "targetAnatomyId", loc), f"{loc}.targetAnatomyId"
            ),
            must_be_freed=_boolean(d.get("mustBeFreed", True), f"{loc}.mustBeFreed"),
            must_be_retrieved_via_pouch=_boolean(
                d.get("mustBeRetrievedViaPouch", True), f"{loc}.mustBeRetrievedViaPouch"
            ),
        )
    if tag == "sutureRegion":
        return SutureRegionRule(
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            region_id=_text(_require(d, "regionId", loc), f"{loc}.regionId"),
        )
    raise ModelError(f"{loc}.type", f"unknown rule type '{tag}'")


# ---------------------------------------------------------------------------
# Procedure specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskStep:
    index: int  # 1-based
    action: str
    anatomy_id: str
    tool_id: str
    safety: tuple = ()  # of SafetyRule
    safety_text: str = ""
    comment: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "action": self.action,
            "anatomyId": self.anatomy_id,
            "toolId": self.tool_id,
            "safety": [rule_to_dict(r) for r in self.safety],
            "safetyText": self.safety_text,
            "comment": self.comment,
        }

    @classmethod
    def from_dict(cls, d: Any, loc: str = "step") -> "TaskStep":
        raw_rules = d.get("safety", [])
        if not isinstance(raw_rules, list):
            raise ModelError(f"{loc}.safety", "expected an array")
        return cls(
            index=_int(_require(d, "index", loc), f"{loc}.index"),
            action=_text(_require(d, "action", loc), f"{loc}.action"),
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            tool_id=_text(_require(d, "toolId", loc), f"{loc}.toolId"),
            safety=tuple(
                rule_from_dict(r, f"{loc}.safety[{i}]") for i, r in enumerate(raw_rules)
            ),
            safety_text=_text(d.get("safetyText", ""), f"{loc}.safetyText"),
            comment=_text(d.get("comment", ""), f"{loc}.comment"),
        )


@dataclass(frozen=True)
class ProcedureSpec:
    title: str
    catalog_ref: str
    steps: tuple  # of TaskStep
    completion_rule: Completion

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "catalogRef": self.catalog_ref,
            "steps": [s.to_dict() for s in self.steps],
            "completionRule": rule_to_dict(self.completion_rule),
        }

    @classmethod
    def from_dict(cls, d: Any, loc: str = "spec") -> "ProcedureSpec":
        raw_steps = _require(d, "steps", loc)
        if not isinstance(raw_steps, list):
            raise ModelError(f"{loc}.steps", "expected an array")
        completion = rule_from_dict(
            _require(d, "completionRule", loc), f"{loc}.completionRule"
        )
        if not isinstance(completion, Completion):
            raise ModelError(f"{loc}.completionRule", "must be a completion rule")
        return cls(
            title=_text(_require(d, "title", loc), f"{loc}.title"),
            catalog_ref=_text(_require(d, "catalogRef", loc), f"{loc}.catalogRef"),
            steps=tuple(
                TaskStep.from_dict(s, f"{loc}.steps[{i}]") for i, s in enumerate(raw_steps)
            ),
            completion_rule=completion,
        )


# ---------------------------------------------------------------------------
# Simulation events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToolPose:
    t: float
    tool_id: str
    tip: Vec3
    activated: bool


@dataclass(frozen=True)
class ForceSample:
    t: float
    anatomy_id: str
    force: float
    stretch: float = 1.0


@dataclass(frozen=True)
class ClipApplied:
    t: float
    vessel_id: str
    position: float  # parameter in [0, 1] along the vessel axis


@dataclass(frozen=True)
class Cut:
    t: float
    anatomy_id: str
    position: float


@dataclass(frozen=True)
class Suture:
    t: float
    anatomy_id: str
    location: Vec3


@dataclass(frozen=True)
class Detach:
    t: float
    child_id: str
    parent_id: str


@dataclass(frozen=True)
class Retrieve:
    t: float
    anatomy_id: str
    via_pouch: bool


@dataclass(frozen=True)
class SessionEnd:
    t: float


SimEvent = Union[
    ToolPose, ForceSample, ClipApplied, Cut, Suture, Detach, Retrieve, SessionEnd
]


def event_to_dict(e: SimEvent) -> dict:
    if isinstance(e, ToolPose):
        return {
            "t": e.t,
            "kind": "toolPose",
            "toolId": e.tool_id,
            "tip": e.tip.to_list(),
            "activated": e.activated,
        }
    if isinstance(e, ForceSample):
        return {
            "t": e.t,
            "kind": "forceSample",
            "anatomyId": e.anatomy_id,
            "force": e.force,
            "stretch": e.stretch,
        }
    if isinstance(e, ClipApplied):
        return {"t": e.t, "kind": "clipApplied", "vesselId": e.vessel_id, "position": e.position}
    if isinstance(e, Cut):
        return {"t": e.t, "kind": "cut", "anatomyId": e.anatomy_id, "position": e.position}
    if isinstance(e, Suture):
        return {"t": e.t, "kind": "suture", "anatomyId": e.anatomy_id, "location": e.location.to_list()}
    if isinstance(e, Detach):
        return {"t": e.t, "kind": "detach", "childId": e.child_id, "parentId": e.parent_id}
    if isinstance(e, Retrieve):
        return {"t": e.t, "kind": "retrieve", "anatomyId": e.anatomy_id, "viaPouch": e.via_pouch}
    return {"t": e.t, "kind": "sessionEnd"}


def _param(v: Any, loc: str) -> float:
    f = _finite(v, loc)
    if not 0.0 <= f <= 1.0:
        raise ModelError(loc, "parameter must lie in [0, 1]")
    return f


def event_from_dict(d: Any, loc: str = "event") -> SimEvent:
    t = _finite(_require(d, "t", loc), f"{loc}.t")
    if t < 0:
        raise ModelError(f"{loc}.t", "timestamp must be non-negative")
    kind = _text(_require(d, "kind", loc), f"{loc}.kind")
    if kind == "toolPose":
        return ToolPose(
            t=t,
            tool_id=_text(_require(d, "toolId", loc), f"{loc}.toolId"),
            tip=Vec3.from_obj(_require(d, "tip", loc), f"{loc}.tip"),
            activated=_boolean(_require(d, "activated", loc), f"{loc}.activated"),
        )
    if kind == "forceSample":
        return ForceSample(
            t=t,
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            force=_finite(_require(d, "force", loc), f"{loc}.force"),
            stretch=_finite(d.get("stretch", 1.0), f"{loc}.stretch"),
        )
    if kind == "clipApplied":
        return ClipApplied(
            t=t,
            vessel_id=_text(_require(d, "vesselId", loc), f"{loc}.vesselId"),
            position=_param(_require(d, "position", loc), f"{loc}.position"),
        )
    if kind == "cut":
        return Cut(
            t=t,
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            position=_param(_require(d, "position", loc), f"{loc}.position"),
        )
    if kind == "suture":
        return Suture(
            t=t,
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            location=Vec3.from_obj(_require(d, "location", loc), f"{loc}.location"),
        )
    if kind == "detach":
        return Detach(
            t=t,
            child_id=_text(_require(d, "childId", loc), f"{loc}.childId"),
            parent_id=_text(_require(d, "parentId", loc), f"{loc}.parentId"),
        )
    if kind == "retrieve":
        return Retrieve(
            t=t,
            anatomy_id=_text(_require(d, "anatomyId", loc), f"{loc}.anatomyId"),
            via_pouch=_boolean(_require(d, "viaPouch", loc), f"{loc}.viaPouch"),
        )
    if kind == "sessionEnd":
        return SessionEnd(t=t)
    raise ModelError(f"{loc}.kind", f"unknown event kind '{kind}'")


# ---------------------------------------------------------------------------
# Violations, achievements, reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    t: float
    error_type: str  # "I".."VI"
    measured: Any  # float, int, or (int, int) for clip counts
    threshold: Any
    unit: str
    subject_ids: tuple
    snapshot_base_name: str

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "errorType": self.error_type,
            "measured": list(self.measured) if isinstance(self.measured, tuple) else self.measured,
            "threshold": list(self.threshold) if isinstance(self.threshold, tuple) else self.threshold,
            "unit": self.unit,
            "subjectIds": list(self.subject_ids),
            "snapshotBaseName": self.snapshot_base_name,
        }

    @classmethod
    def from_dict(cls, d: Any, loc: str = "violation") -> "Violation":
        et = _text(_require(d, "errorType", loc), f"{loc}.errorType")
        if et not in ERROR_TYPES:
            raise ModelError(f"{loc}.errorType", f"unknown error type '{et}'")
        measured = _require(d, "measured", loc)
        threshold = _require(d, "threshold", loc)
        return cls(
            t=_finite(_require(d, "t", loc), f"{loc}.t"),
            error_type=et,
            measured=tuple(measured) if isinstance(measured, list) else measured,
            threshold=tuple(threshold) if isinstance(threshold, list) else threshold,
            unit=_text(d.get("unit", ""), f"{loc}.unit"),
            subject_ids=tuple(d.get("subjectIds", [])),
            snapshot_base_name=_text(d.get("snapshotBaseName", ""), f"{loc}.snapshotBaseName"),
        )


@dataclass(frozen=True)
class Achievement:
    step_index: int  # 0 for procedure-level milestones
    t: float
    label: str

    def to_dict(self) -> dict:
        return {"stepIndex": self.step_index, "t": self.t, "label": self.label}

    @classmethod
    def from_dict(cls, d: Any, loc: str = "achievement") -> "Achievement":
        return cls(
            step_index=_int(_require(d, "stepIndex", loc), f"{loc}.stepIndex"),
            t=_finite(_require(d, "t", loc), f"{loc}.t"),
            label=_text(_require(d, "label", loc), f"{loc}.label"),
        )


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    spec_title: str
    achievements: tuple  # of Achievement
    violations: tuple  # of Violation
    proficient: bool
    snapshot_dir: str
    message_text: str

    def to_dict(self) -> dict:
        return {
            "sessionId": self.session_id,
            "specTitle": self.spec_title,
            "achievements": [a.to_dict() for a in self.achievements],
            "violations": [v.to_dict() for v in self.violations],
            "proficient": self.proficient,
            "snapshotDir": self.snapshot_dir,
            "messageText": self.message_text,
        }

    @classmethod
    def from_dict(cls, d: Any, loc: str = "report") -> "SessionReport":
        return cls(
            session_id=_text(_require(d, "sessionId", loc), f"{loc}.sessionId"),
            spec_title=_text(_require(d, "specTitle", loc), f"{loc}.specTitle"),
            achievements=tuple(
                Achievement.from_dict(a, f"{loc}.achievements[{i}]")
                for i, a in enumerate(_require(d, "achievements", loc))
            ),
            violations=tuple(
                Violation.from_dict(v, f"{loc}.violations[{i}]")
                for i, v in enumerate(_require(d, "violations", loc))
            ),
            proficient=_boolean(_require(d, "proficient", loc), f"{loc}.proficient"),
            snapshot_dir=_text(_require(d, "snapshotDir", loc), f"{loc}.snapshotDir"),
            message_text=_text(_require(d, "messageText", loc), f"{loc}.messageText"),
        )


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    """One validation problem. Findings are data, not failures."""

    message: str
    step: Optional[int] = None  # 1-based step index
    position: Optional[int] = None  # 1-based column within the safety text

    def to_dict(self) -> dict:
        return {"message": self.message, "step": self.step, "position": self.position}


def _check_rule(rule: SafetyRule, catalog, step: Optional[int], out: list) -> None:
    def missing(anatomy_id: str) -> bool:
        return anatomy_id not in catalog.simlets

    if isinstance(rule, Proximity):
        if rule.tool_id not in catalog.tools:
            out.append(Finding(f"unresolved tool '{rule.tool_id}'", step))
        if missing(rule.protected_anatomy_id):
            out.append(Finding(f"unresolved anatomy '{rule.protected_anatomy_id}'", step))
        if rule.min_distance <= 0:
            out.append(Finding("proximity distance must be positive", step))
    elif isinstance(rule, ForceLimit):
        if missing(rule.anatomy_id):
            out.append(Finding(f"unresolved anatomy '{rule.anatomy_id}'", step))
        if rule.max_force <= 0:
            out.append(Finding("force limit must be positive", step))
        if rule.max_stretch is not None and rule.max_stretch <= 0:
            out.append(Finding("stretch limit must be positive", step))
    elif isinstance(rule, ClipLayout):
        if missing(rule.vessel_id):
            out.append(Finding(f"unresolved anatomy '{rule.vessel_id}'", step))
        elif not catalog.simlets[rule.vessel_id].has_flag("clippable"):
            out.append(Finding(f"clip rule targets non-clippable simlet '{rule.vessel_id}'", step))
        if rule.required_proximal < 0 or rule.required_distal < 0:
            out.append(Finding("clip counts must be non-negative", step))
        if rule.required_proximal + rule.required_distal < 1:
            out.append(Finding("clip rule requires at least one clip", step))
    elif isinstance(rule, Completion):
        if missing(rule.target_anatomy_id):
            out.append(Finding(f"unresolved anatomy '{rule.target_anatomy_id}'", step))
    elif isinstance(rule, SutureRegionRule):
        if missing(rule.anatomy_id):
            out.append(Finding(f"unresolved anatomy '{rule.anatomy_id}'", step))
        else:
            simlet = catalog.simlets[rule.anatomy_id]
            ids = {r.region_id.casefold() for r in simlet.suture_regions}
            if rule.region_id.casefold() not in ids:
                out.append(
                    Finding(
                        f"unknown suture region '{rule.region_id}' on '{rule.anatomy_id}'",
                        step,
                    )
                )


def validate_spec(spec: ProcedureSpec, catalog) -> list:
    """Check every spec invariant against the catalog; empty list means valid.

    Pure: identical inputs produce identical finding lists, in step order.
    """
    from . import specparse  # deferred; specparse depends on this module

    out: list = []
    if not spec.steps:
        out.append(Finding("spec must have at least one step"))
    completion_count = 1  # the procedure-wide completion rule
    for step in spec.steps:
        idx = step.index
        if not step.action.strip():
            out.append(Finding("step action must be nonempty", idx))
        if step.anatomy_id not in catalog.simlets:
            out.append(Finding(f"unresolved anatomy '{step.anatomy_id}'", idx))
        if step.tool_id not in catalog.tools:
            out.append(Finding(f"unresolved tool '{step.tool_id}'", idx))
        for rule in step.safety:
            if isinstance(rule, Completion):
                completion_count += 1
                out.append(
                    Finding("completion rule belongs in the spec header, not a step", idx)
                )
            _check_rule(rule, catalog, idx, out)
        try:
            reparsed = specparse.parse_safety(
                step.safety_text, catalog, tool_id=step.tool_id
            )
        except specparse.SafetyParseError as err:
            out.append(Finding(f"safety clause does not parse: {err.message}", idx, err.column))
        else:
            if tuple(reparsed) != tuple(step.safety):
                out.append(Finding("safety text does not round-trip to the stored rules", idx))
    _check_rule(spec.completion_rule, catalog, None, out)
    if completion_count != 1:
        out.append(Finding("exactly one completion rule is allowed procedure-wide"))
    return out
