"""Trajectory files, scripted golden scenarios, and the batch replay driver.

Trajectories are JSON Lines: the first line is a header naming the spec and
catalog plus a session seed, every following line is one event, ending with a
sessionEnd event. The golden scenarios script a clean cholecystectomy run and
one minimal variant per error class.
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import report as report_mod
from .catalog import CatalogError, compose, load_catalog_file
from .model import (
    ClipApplied,
    Cut,
    Detach,
    ForceSample,
    ModelError,
    Retrieve,
    SessionEnd,
    SessionReport,
    Suture,
    ToolPose,
    Vec3,
    event_from_dict,
    event_to_dict,
)
from .monitor import compile_monitors
from .specparse import load_spec_file

SCENARIO_NAMES = ("clean", "errI", "errII", "errIII", "errIV", "errV", "errVI")

GOLDEN_CATALOG = "golden_catalog.json"
GOLDEN_SPEC = "cholecystectomy_spec.json"
SUTURE_SPEC = "duct_repair_spec.json"

_SCENARIO_SEEDS = {name: 101 + i for i, name in enumerate(SCENARIO_NAMES)}


def data_path(name: str) -> Path:
    """Filesystem path of a packaged golden data file."""
    return Path(resources.files("tipsmon.data") / name)


class TrajectoryError(ValueError):
    """Malformed trajectory file; names the offending line."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class Trajectory:
    spec_ref: str
    catalog_ref: str
    session_seed: int
    events: tuple  # of SimEvent, non-decreasing t, ends with SessionEnd

    def header_dict(self) -> dict:
        return {
            "specRef": self.spec_ref,
            "catalogRef": self.catalog_ref,
            "sessionSeed": self.session_seed,
        }


def write_trajectory(trajectory: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(trajectory.header_dict(), sort_keys=True) + "\n")
        for event in trajectory.events:
            fh.write(json.dumps(event_to_dict(event), sort_keys=True) + "\n")
    return path


def read_trajectory(path) -> Trajectory:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise TrajectoryError(1, "empty trajectory file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise TrajectoryError(1, f"malformed header: {err.msg}") from err
    if not isinstance(header, dict) or "specRef" not in header:
        raise TrajectoryError(1, "header must be an object with a specRef")
    events = []
    last_t = 0.0
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as err:
            raise TrajectoryError(i, f"malformed event: {err.msg}") from err
        try:
            event = event_from_dict(doc, "event")
        except ModelError as err:
            raise TrajectoryError(i, err.message) from err
        if event.t < last_t:
            raise TrajectoryError(i, f"decreasing timestamp {event.t:g}")
        last_t = event.t
        events.append(event)
    if not events or not isinstance(events[-1], SessionEnd):
        raise TrajectoryError(len(lines), "trajectory must end with a sessionEnd event")
    return Trajectory(
        spec_ref=str(header.get("specRef", "")),
        catalog_ref=str(header.get("catalogRef", "")),
        session_seed=int(header.get("sessionSeed", 0)),
        events=tuple(events),
    )


# ---------------------------------------------------------------------------
# Golden scenarios
# ---------------------------------------------------------------------------


def _dissect_poses(dip: bool) -> list:
    """Dissector path along the fatty tissue; optionally dipping to 3 mm from
    the common bile duct (its surface is the x=4 plane at y=0, z=50)."""
    xs = [(0, 30.0, False), (100, 26.0, True), (200, 22.0, True), (300, 18.0, True),
          (400, 14.0, True), (500, 12.0, True)]
    if dip:
        xs.append((550, 7.0, True))  # 3 mm from the duct surface
    xs += [(600, 14.0, True), (700, 18.0, False)]
    return [
        ToolPose(t=float(t), tool_id="maryland_dissector", tip=Vec3(x, 0.0, 50.0), activated=act)
        for t, x, act in xs
    ]


def _clean_events(
    dip: bool = False,
    force_ramp: bool = False,
    duct_clips=(0.2, 0.35, 0.7),
    artery_clip: float = None,
    artery_cut: float = 0.5,
    retrieve: bool = True,
) -> list:
    events: list = list(_dissect_poses(dip))
    events.append(Cut(t=800.0, anatomy_id="fatty_tissue", position=0.5))
    events.append(Detach(t=900.0, child_id="fatty_tissue", parent_id="cystic_duct"))
    events.append(Detach(t=1000.0, child_id="fatty_tissue", parent_id="cystic_artery"))
    if force_ramp:
        for i, f in enumerate((0.5, 1.0, 1.5, 2.5, 1.5, 0.5)):
            events.append(
                ForceSample(t=1100.0 + 10 * i, anatomy_id="cystic_duct", force=f, stretch=1.0)
            )
    else:
        events.append(ForceSample(t=1100.0, anatomy_id="cystic_duct", force=0.8, stretch=1.05))
    for i, pos in enumerate(duct_clips):
        events.append(ClipApplied(t=1200.0 + 100 * i, vessel_id="cystic_duct", position=pos))
    events.append(Cut(t=1500.0, anatomy_id="cystic_duct", position=0.5))
    if artery_clip is not None:
        events.append(ClipApplied(t=1550.0, vessel_id="cystic_artery", position=artery_clip))
    events.append(Cut(t=1600.0, anatomy_id="cystic_artery", position=artery_cut))
    events.append(Detach(t=1700.0, child_id="gallbladder", parent_id="cystic_duct"))
    events.append(Detach(t=1800.0, child_id="gallbladder", parent_id="cystic_artery"))
    if retrieve:
        events.append(Retrieve(t=1900.0, anatomy_id="gallbladder", via_pouch=True))
    events.append(SessionEnd(t=2000.0))
    return events


def _suture_events() -> list:
    return [
        ToolPose(t=0.0, tool_id="grasper", tip=Vec3(10.0, 0.0, 40.0), activated=False),
        Suture(t=100.0, anatomy_id="common_bile_duct", location=Vec3(0.0, 0.0, 90.0)),
        Detach(t=200.0, child_id="gallbladder", parent_id="cystic_duct"),
        Detach(t=300.0, child_id="gallbladder", parent_id="cystic_artery"),
        Retrieve(t=400.0, anatomy_id="gallbladder", via_pouch=True),
        SessionEnd(t=500.0),
    ]


def gen_scenario(name: str) -> Trajectory:
    """Deterministic golden trajectory for one scenario.

    clean  - full run with no violations
    errI   - activated dissector dips to 3 mm from the common bile duct
    errII  - force ramp peaking at 2.5 N on the cystic duct (limit 2 N)
    errIII - artery clip stranded by a cut proximal of it
    errIV  - only two duct clips before the cut (1 proximal, 1 distal)
    errV   - the gallbladder is freed but never retrieved
    errVI  - suture lands outside the declared duct region
    """
    spec_ref = GOLDEN_SPEC
    if name == "clean":
        events = _clean_events()
    elif name == "errI":
        events = _clean_events(dip=True)
    elif name == "errII":
        events = _clean_events(force_ramp=True)
    elif name == "errIII":
        events = _clean_events(artery_clip=0.3, artery_cut=0.1)
    elif name == "errIV":
        events = _clean_events(duct_clips=(0.2, 0.7))
    elif name == "errV":
        events = _clean_events(retrieve=False)
    elif name == "errVI":
        spec_ref = SUTURE_SPEC
        events = _suture_events()
    else:
        raise ValueError(f"unknown scenario '{name}' (expected one of {SCENARIO_NAMES})")
    return Trajectory(
        spec_ref=spec_ref,
        catalog_ref=GOLDEN_CATALOG,
        session_seed=_SCENARIO_SEEDS[name],
        events=tuple(events),
    )


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def session_id_from_seed(seed) -> str:
    """Deterministic UUID-shaped session id; random when seed is None."""
    if seed is None:
        return str(uuid.uuid4())
    return str(uuid.UUID(int=random.Random(seed).getrandbits(128), version=4))


def resolve_catalog_path(spec_path, catalog_ref: str, catalog_path=None) -> Path:
    if catalog_path is not None:
        return Path(catalog_path)
    beside = Path(spec_path).parent / catalog_ref
    if beside.exists():
        return beside
    packaged = data_path(catalog_ref)
    if packaged.exists():
        return packaged
    raise CatalogError("catalog", f"cannot resolve catalog '{catalog_ref}'")


def replay(
    spec_path,
    trajectory_path,
    out_dir,
    seed=None,
    catalog_path=None,
) -> SessionReport:
    """Load, validate, monitor, snapshot, and report one recorded session.

    Input problems raise SpecLoadError / CatalogError / TrajectoryError; the
    CLI maps those to exit code 2.
    """
    trajectory = read_trajectory(trajectory_path)
    catalog = load_catalog_file(
        resolve_catalog_path(spec_path, trajectory.catalog_ref or GOLDEN_CATALOG, catalog_path)
    )
    spec = load_spec_file(spec_path, catalog)
    scene = compose(catalog, list(catalog.simlets))
    ms = compile_monitors(spec, scene, catalog)
    for event in trajectory.events:
        ms.step(event)
    achievements, violations = ms.finalize()

    session_id = session_id_from_seed(seed if seed is not None else trajectory.session_seed)
    out_dir = Path(out_dir)
    snapshot_dir = out_dir / session_id / "snapshots"
    for violation, state in zip(ms.violations, ms.violation_states):
        report_mod.snapshot(state, violation, snapshot_dir)
    session_report = report_mod.build_report(
        session_id=session_id,
        spec=spec,
        achievements=achievements,
        violations=violations,
        snapshot_dir=f"{session_id}/snapshots",
    )
    report_mod.write_report(session_report, out_dir)
    return session_report


def replay_scenario(name: str, out_dir, seed=None) -> SessionReport:
    """Generate a golden scenario, persist it, and replay it end to end."""
    trajectory = gen_scenario(name)
    out_dir = Path(out_dir)
    traj_path = write_trajectory(trajectory, out_dir / f"{name}.jsonl")
    spec_path = data_path(trajectory.spec_ref)
    return replay(spec_path, traj_path, out_dir, seed=seed)
