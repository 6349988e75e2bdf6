"""Runtime monitors: compile a validated spec + scene, consume the event
stream, emit immediate alerts and violations, finalize achievements.

Episode semantics: a proximity or force monitor raises exactly one violation
per breach episode. A proximity episode starts when the activated tool drops
below the distance threshold and ends when it retreats past 110% of it (or
the tool deactivates); a force episode ends when the triggering value falls
to 90% of its limit. The violation's measured value is the value at breach
onset; the episode peak is tracked on the monitor state.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional

from . import report as report_mod
from .catalog import Catalog, Scene
from .geom import dist_point_primitive, dist_point_simlet
from .model import (
    Achievement,
    ClipApplied,
    ClipLayout,
    Completion,
    Cut,
    Detach,
    ForceLimit,
    ForceSample,
    NoForeignBodies,
    ProcedureSpec,
    Proximity,
    Retrieve,
    SessionEnd,
    SimEvent,
    Suture,
    SutureRegionRule,
    TaskStep,
    ToolPose,
    Violation,
)

EPISODE_EXIT_DISTANCE_FACTOR = 1.1
EPISODE_EXIT_FORCE_FACTOR = 0.9

_CUT_VERBS = frozenset(
    {"cut", "divide", "dissect", "transect", "incise", "separate", "excise", "carve"}
)
_CLIP_VERBS = frozenset({"clip", "clamp", "staple"})
_GRASP_VERBS = frozenset({"grasp", "retract", "hold", "mobilize", "stretch"})
_SUTURE_VERBS = frozenset({"suture", "sew", "stitch", "oversew"})
_RETRIEVE_VERBS = frozenset({"retrieve", "remove", "extract"})

_KNOWN_VERBS = _CUT_VERBS | _CLIP_VERBS | _GRASP_VERBS | _SUTURE_VERBS | _RETRIEVE_VERBS


class MonitorError(ValueError):
    """Invalid event stream: unknown id, decreasing timestamp, bad state."""


@dataclass(frozen=True)
class ImmediateAlert:
    """Presentation-free stand-in for the red tool tip / flashing vessel."""

    t: float
    kind: str  # "toolTipRed" | "vesselFlash"
    subject_id: str
    measured: float
    threshold: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "kind": self.kind,
            "subjectId": self.subject_id,
            "measured": self.measured,
            "threshold": self.threshold,
        }


@dataclass
class _ProximityState:
    rule: Proximity
    in_episode: bool = False


@dataclass
class _ForceState:
    rule: ForceLimit
    in_episode: bool = False
    metric: str = "force"  # which limit started the episode
    peak: float = 0.0


@dataclass
class _Clip:
    position: float
    clip_id: str


class MonitorSet:
    """All monitor state for one session. Strictly sequential: one event at a
    time, timestamps non-decreasing."""

    def __init__(self, spec: ProcedureSpec, scene: Scene, catalog: Catalog):
        self.spec = spec
        self.scene = scene
        self.catalog = catalog
        self.proximity_monitors: list = []
        self.force_monitors: list = []
        self.clip_rules: list = []
        self.suture_rules: list = []
        self.has_foreign_monitor = False
        self.completion_rule = spec.completion_rule
        self._clips: dict = {
            sid: [] for sid, s in scene.instances.items() if s.has_flag("clippable")
        }
        self._clip_seq: dict = {sid: 0 for sid in self._clips}
        self.dropped_clips: list = []  # of _Clip
        self.attachment_state: set = set(scene.attachment_edges)
        self.achievements: list = []
        self.violations: list = []
        self.violation_states: list = []  # SceneState at each violation
        self.tool_tips: dict = {}  # toolId -> (Vec3, activated)
        self.last_t = 0.0
        self.finalized = False
        self._used_names: set = set()
        self._achieved_steps: set = set()
        self._freed: set = set()
        self._retrieved: Optional[bool] = None  # via_pouch of the target retrieve
        self._completion_recorded = False
        self._step_anatomy_ids = {s.anatomy_id for s in spec.steps}
        target = spec.completion_rule.target_anatomy_id
        self._target_initially_free = not any(
            target in edge for edge in scene.attachment_edges
        )

    # -- views ---------------------------------------------------------------

    @property
    def clip_map(self) -> dict:
        """vesselId -> sorted clip positions (deployed minus dropped)."""
        return {sid: [c.position for c in clips] for sid, clips in self._clips.items()}

    def scene_state(self, t: float) -> report_mod.SceneState:
        return report_mod.SceneState(
            t=t,
            tool_tips=dict(self.tool_tips),
            clip_map=self.clip_map,
            dropped_clips=tuple((c.clip_id, c.position) for c in self.dropped_clips),
            attachment_edges=tuple(sorted(tuple(sorted(e)) for e in self.attachment_state)),
            scene=self.scene,
        )

    # -- violation/achievement plumbing ---------------------------------------

    def _violation(
        self, t: float, error_type: str, measured, threshold, unit: str, subjects
    ) -> Violation:
        base = report_mod.snapshot_base_name(t, error_type, measured, unit)
        name = base
        k = 2
        while name in self._used_names:
            name = f"{base}-{k}"
            k += 1
        self._used_names.add(name)
        violation = Violation(
            t=t,
            error_type=error_type,
            measured=measured,
            threshold=threshold,
            unit=unit,
            subject_ids=tuple(subjects),
            snapshot_base_name=name,
        )
        self.violations.append(violation)
        self.violation_states.append(self.scene_state(t))
        return violation

    def _achieve(self, step_index: int, t: float, label: str) -> None:
        self.achievements.append(Achievement(step_index=step_index, t=t, label=label))

    def _mark_steps(self, t: float, predicate) -> None:
        for step in self.spec.steps:
            if step.index in self._achieved_steps:
                continue
            if predicate(step):
                self._achieved_steps.add(step.index)
                anatomy = self.catalog.simlets[step.anatomy_id].name
                self._achieve(step.index, t, f"step {step.index}: {step.action} {anatomy}")

    @staticmethod
    def _verb(step: TaskStep) -> str:
        return step.action.split()[0].casefold() if step.action.split() else ""

    def _mark_subject_steps(self, t: float, verbs: frozenset, anatomy_id: str) -> None:
        def hit(step: TaskStep) -> bool:
            if step.anatomy_id != anatomy_id:
                return False
            verb = self._verb(step)
            if verb in verbs:
                return True
            return verb not in _KNOWN_VERBS  # unclassified verbs: any touch counts

        self._mark_steps(t, hit)

    def _check_completion(self, t: float) -> None:
        if self._completion_recorded:
            return
        rule = self.completion_rule
        freed_ok = (
            not rule.must_be_freed
            or self._target_initially_free
            or rule.target_anatomy_id in self._freed
        )
        retrieved_ok = self._retrieved is not None and (
            not rule.must_be_retrieved_via_pouch or self._retrieved
        )
        if freed_ok and retrieved_ok:
            self._completion_recorded = True
            name = self.catalog.simlets[rule.target_anatomy_id].name
            self._achieve(
                0, t, f"{report_mod.COMPLETION_LABEL_PREFIX} freed and retrieved {name}"
            )

    # -- event handlers --------------------------------------------------------

    def step(self, event: SimEvent) -> list:
        """Apply one event; returns newly emitted alerts and violations."""
        if self.finalized:
            raise MonitorError("session already finalized")
        if event.t < self.last_t:
            raise MonitorError(
                f"decreasing timestamp: {event.t} after {self.last_t}"
            )
        self.last_t = event.t
        if isinstance(event, ToolPose):
            return self._on_pose(event)
        if isinstance(event, ForceSample):
            return self._on_force(event)
        if isinstance(event, ClipApplied):
            return self._on_clip(event)
        if isinstance(event, Cut):
            return self._on_cut(event)
        if isinstance(event, Suture):
            return self._on_suture(event)
        if isinstance(event, Detach):
            return self._on_detach(event)
        if isinstance(event, Retrieve):
            return self._on_retrieve(event)
        if isinstance(event, SessionEnd):
            _, new = self._finalize_inner()
            return list(new)
        raise MonitorError(f"unhandled event {event!r}")

    def _simlet(self, anatomy_id: str):
        simlet = self.scene.instances.get(anatomy_id)
        if simlet is None:
            raise MonitorError(f"unknown anatomy id '{anatomy_id}'")
        return simlet

    def _on_pose(self, event: ToolPose) -> list:
        if event.tool_id not in self.catalog.tools:
            raise MonitorError(f"unknown tool id '{event.tool_id}'")
        self.tool_tips[event.tool_id] = (event.tip, event.activated)
        out: list = []
        for pm in self.proximity_monitors:
            rule = pm.rule
            if rule.tool_id != event.tool_id:
                continue
            if rule.active_only and not event.activated:
                pm.in_episode = False  # deactivation ends the episode
                continue
            protected = self._simlet(rule.protected_anatomy_id)
            d = dist_point_simlet(event.tip, protected)
            if pm.in_episode:
                if d >= rule.min_distance * EPISODE_EXIT_DISTANCE_FACTOR:
                    pm.in_episode = False
            elif d < rule.min_distance:
                pm.in_episode = True
                out.append(
                    ImmediateAlert(
                        event.t, "toolTipRed", event.tool_id, d, rule.min_distance
                    )
                )
                out.append(
                    self._violation(
                        event.t,
                        "I",
                        d,
                        rule.min_distance,
                        "mm",
                        (event.tool_id, rule.protected_anatomy_id),
                    )
                )
        return out

    def _on_force(self, event: ForceSample) -> list:
        self._simlet(event.anatomy_id)
        self._mark_subject_steps(event.t, _GRASP_VERBS, event.anatomy_id)
        out: list = []
        for fm in self.force_monitors:
            rule = fm.rule
            if rule.anatomy_id != event.anatomy_id:
                continue
            if fm.in_episode:
                value = event.force if fm.metric == "force" else event.stretch
                fm.peak = max(fm.peak, value)
                limit = rule.max_force if fm.metric == "force" else rule.max_stretch
                if value <= limit * EPISODE_EXIT_FORCE_FACTOR:
                    fm.in_episode = False
                continue
            if event.force > rule.max_force:
                metric, measured, limit, unit = "force", event.force, rule.max_force, "N"
            elif rule.max_stretch is not None and event.stretch > rule.max_stretch:
                metric, measured, limit, unit = "stretch", event.stretch, rule.max_stretch, "x"
            else:
                continue
            fm.in_episode = True
            fm.metric = metric
            fm.peak = measured
            out.append(
                ImmediateAlert(event.t, "vesselFlash", event.anatomy_id, measured, limit)
            )
            out.append(
                self._violation(
                    event.t, "II", measured, limit, unit, (event.anatomy_id,)
                )
            )
        return out

    def _on_clip(self, event: ClipApplied) -> list:
        simlet = self._simlet(event.vessel_id)
        if event.vessel_id not in self._clips:
            raise MonitorError(
                f"clip applied to non-clippable simlet '{event.vessel_id}'"
            )
        self._clip_seq[event.vessel_id] += 1
        clip = _Clip(
            position=event.position,
            clip_id=f"{event.vessel_id}-clip{self._clip_seq[event.vessel_id]}",
        )
        clips = self._clips[event.vessel_id]
        bisect.insort(clips, clip, key=lambda c: c.position)
        t = event.t

        def clip_step_done(step: TaskStep) -> bool:
            if step.anatomy_id != event.vessel_id or self._verb(step) not in _CLIP_VERBS:
                return False
            required = sum(
                r.required_proximal + r.required_distal
                for r in self.clip_rules
                if r.vessel_id == event.vessel_id
            )
            return len(clips) >= max(required, 1)

        self._mark_steps(t, clip_step_done)
        self._mark_subject_steps(t, frozenset(), event.vessel_id)
        return []

    def _on_cut(self, event: Cut) -> list:
        simlet = self._simlet(event.anatomy_id)
        out: list = []
        governing = [r for r in self.clip_rules if r.vessel_id == event.anatomy_id]
        if governing:
            positions = [c.position for c in self._clips.get(event.anatomy_id, [])]
            proximal = sum(1 for p in positions if p < event.position)
            distal = sum(1 for p in positions if p > event.position)
            for rule in governing:
                if not rule.must_precede_cut:
                    continue
                if proximal < rule.required_proximal or distal < rule.required_distal:
                    out.append(
                        self._violation(
                            event.t,
                            "IV",
                            (proximal, distal),
                            (rule.required_proximal, rule.required_distal),
                            "clips",
                            (event.anatomy_id,),
                        )
                    )
        else:
            sanctioned = simlet.has_flag("cuttable") and (
                event.anatomy_id in self._step_anatomy_ids
            )
            if not sanctioned:
                out.append(
                    self._violation(
                        event.t, "I", 0.0, 0.0, "mm", (event.anatomy_id,)
                    )
                )
        # a cut proximal of every clip detaches the carrying segment: those
        # clips land on the abdominal wall and become foreign bodies
        clips = self._clips.get(event.anatomy_id)
        if clips and event.position < clips[0].position:
            self.dropped_clips.extend(clips)
            self._clips[event.anatomy_id] = []
        self._mark_subject_steps(event.t, _CUT_VERBS, event.anatomy_id)
        return out

    def _on_suture(self, event: Suture) -> list:
        simlet = self._simlet(event.anatomy_id)
        out: list = []
        for rule in self.suture_rules:
            if rule.anatomy_id != event.anatomy_id:
                continue
            geoms = [
                r.geometry
                for r in simlet.suture_regions
                if r.region_id == rule.region_id
            ]
            if not geoms:
                continue
            d = min(dist_point_primitive(event.location, g) for g in geoms)
            if d > 0.0:
                out.append(
                    self._violation(
                        event.t,
                        "VI",
                        d,
                        0.0,
                        "mm",
                        (event.anatomy_id, rule.region_id),
                    )
                )
        self._mark_subject_steps(event.t, _SUTURE_VERBS, event.anatomy_id)
        return out

    def _on_detach(self, event: Detach) -> list:
        self._simlet(event.child_id)
        self._simlet(event.parent_id)
        edge = frozenset((event.child_id, event.parent_id))
        self.attachment_state.discard(edge)  # idempotent: re-detaching is a no-op
        for sid in (event.child_id, event.parent_id):
            simlet = self.scene.instances[sid]
            if not simlet.has_flag("removalTarget") or sid in self._freed:
                continue
            if not any(sid in e for e in self.attachment_state):
                self._freed.add(sid)
                self._achieve(0, event.t, f"freed {simlet.name}")
        self._mark_subject_steps(event.t, frozenset(), event.child_id)
        self._mark_subject_steps(event.t, frozenset(), event.parent_id)
        self._check_completion(event.t)
        return []

    def _on_retrieve(self, event: Retrieve) -> list:
        simlet = self._simlet(event.anatomy_id)
        out: list = []
        target = self.completion_rule.target_anatomy_id
        if event.anatomy_id != target:
            out.append(
                self._violation(
                    event.t, "V", 0, 1, "retrieved", (event.anatomy_id,)
                )
            )
        elif self._retrieved is None or (event.via_pouch and not self._retrieved):
            self._retrieved = event.via_pouch
            self._achieve(0, event.t, f"retrieved {simlet.name}")
        self._mark_subject_steps(event.t, _RETRIEVE_VERBS, event.anatomy_id)
        self._check_completion(event.t)
        return out

    # -- finalize ---------------------------------------------------------------

    def _finalize_inner(self) -> tuple:
        if self.finalized:
            return tuple(self.achievements), ()
        self.finalized = True
        new: list = []
        if self.has_foreign_monitor:
            for clip in self.dropped_clips:
                new.append(
                    self._violation(
                        self.last_t, "III", 1, 0, "clip", (clip.clip_id,)
                    )
                )
        rule = self.completion_rule
        freed_ok = (
            not rule.must_be_freed
            or self._target_initially_free
            or rule.target_anatomy_id in self._freed
        )
        retrieved_ok = self._retrieved is not None and (
            not rule.must_be_retrieved_via_pouch or self._retrieved
        )
        if not (freed_ok and retrieved_ok):
            new.append(
                self._violation(
                    self.last_t, "V", 0, 1, "retrieved", (rule.target_anatomy_id,)
                )
            )
        return tuple(self.achievements), tuple(new)

    def finalize(self) -> tuple:
        """End-of-session checks; returns (achievements, all violations)."""
        self._finalize_inner()
        return tuple(self.achievements), tuple(self.violations)


def compile_monitors(spec: ProcedureSpec, scene: Scene, catalog: Catalog) -> MonitorSet:
    """Build one monitor per safety rule across all steps plus the completion
    check. Rules referencing anatomy outside the scene are compile errors."""
    ms = MonitorSet(spec, scene, catalog)

    def need(anatomy_id: str, what: str) -> None:
        if anatomy_id not in scene.instances:
            raise MonitorError(f"{what} '{anatomy_id}' is not in the scene")

    for step in spec.steps:
        need(step.anatomy_id, "step anatomy")
        for rule in step.safety:
            if isinstance(rule, Proximity):
                need(rule.protected_anatomy_id, "protected anatomy")
                if rule.tool_id not in catalog.tools:
                    raise MonitorError(f"unknown tool '{rule.tool_id}' in proximity rule")
                ms.proximity_monitors.append(_ProximityState(rule))
            elif isinstance(rule, ForceLimit):
                need(rule.anatomy_id, "force-limited anatomy")
                ms.force_monitors.append(_ForceState(rule))
            elif isinstance(rule, ClipLayout):
                need(rule.vessel_id, "clip-ruled vessel")
                ms.clip_rules.append(rule)
            elif isinstance(rule, NoForeignBodies):
                ms.has_foreign_monitor = True
            elif isinstance(rule, SutureRegionRule):
                need(rule.anatomy_id, "sutured anatomy")
                ms.suture_rules.append(rule)
            elif isinstance(rule, Completion):
                raise MonitorError("completion rules belong in the spec header")
    need(spec.completion_rule.target_anatomy_id, "completion target")
    return ms


def run_stream(spec: ProcedureSpec, scene: Scene, catalog: Catalog, events) -> tuple:
    """Convenience: compile, apply all events, finalize.

    Returns (monitor_set, outputs) where outputs is the flat list of alerts
    and violations in emission order.
    """
    ms = compile_monitors(spec, scene, catalog)
    outputs: list = []
    saw_end = False
    for event in events:
        outputs.extend(ms.step(event))
        if isinstance(event, SessionEnd):
            saw_end = True
    if not saw_end:
        _, new = ms._finalize_inner()
        outputs.extend(new)
    return ms, outputs
