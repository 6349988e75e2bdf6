"""HTTP facade for authoring and session analysis.

Routes:
    GET  /catalog/complete?prefix=P       name completion for the authoring UI
    POST /spec/validate                   parse + validate a spec document
    POST /spec/instructions               generated instruction pages (preview)
    POST /session                         create a session from a spec document
    POST /session/{id}/events             ingest a JSONL chunk, returns alerts
    POST /session/{id}/end                finalize, write and return the report
    GET  /session/{id}/report             the finalized report
    GET  /session/{id}/snapshots/{name}   stored snapshot file (json or svg)

Events are applied strictly in arrival order per session (a per-session lock
serializes concurrent posts); distinct sessions are independent. An optional
write-ahead log mirrors each session as a trajectory file so a crashed
service can be rebuilt by replay. Authentication is a deployment concern and
is intentionally absent here.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from . import harness, report as report_mod, specparse
from .catalog import Catalog, complete as complete_names, compose, load_catalog_file
from .model import ModelError, ProcedureSpec, event_from_dict, event_to_dict
from .monitor import ImmediateAlert, MonitorError, MonitorSet, compile_monitors


@dataclass
class Session:
    session_id: str
    spec: ProcedureSpec
    spec_doc: dict
    monitor_set: MonitorSet
    status: str = "open"  # open | finalized
    created_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)
    report: Optional[dict] = None


class ServiceState:
    def __init__(self, catalog: Catalog, out_dir: Path, wal_dir: Optional[Path] = None):
        self.catalog = catalog
        self.out_dir = Path(out_dir)
        self.wal_dir = Path(wal_dir) if wal_dir else None
        self.sessions: dict = {}
        self._registry_lock = threading.Lock()
        if self.wal_dir:
            self.wal_dir.mkdir(parents=True, exist_ok=True)

    # -- session registry ---------------------------------------------------

    def create_session(self, spec: ProcedureSpec, spec_doc: dict, seed=None) -> Session:
        session_id = harness.session_id_from_seed(seed)
        scene = compose(self.catalog, list(self.catalog.simlets))
        session = Session(
            session_id=session_id,
            spec=spec,
            spec_doc=spec_doc,
            monitor_set=compile_monitors(spec, scene, self.catalog),
        )
        with self._registry_lock:
            self.sessions[session_id] = session
        if self.wal_dir:
            (self.wal_dir / f"{session_id}.spec.json").write_text(
                json.dumps(spec_doc, sort_keys=True), encoding="utf-8"
            )
            header = {"specRef": f"{session_id}.spec.json", "catalogRef": "", "sessionSeed": 0}
            (self.wal_dir / f"{session_id}.jsonl").write_text(
                json.dumps(header, sort_keys=True) + "\n", encoding="utf-8"
            )
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        return session

    def log_events(self, session: Session, events) -> None:
        if not self.wal_dir:
            return
        with open(self.wal_dir / f"{session.session_id}.jsonl", "a", encoding="utf-8") as fh:
            for event in events:
                fh.write(json.dumps(event_to_dict(event), sort_keys=True) + "\n")

    def recover(self) -> int:
        """Rebuild in-memory sessions from the write-ahead log by replay."""
        if not self.wal_dir:
            return 0
        count = 0
        for wal in sorted(self.wal_dir.glob("*.jsonl")):
            session_id = wal.stem
            if session_id in self.sessions:
                continue
            spec_file = self.wal_dir / f"{session_id}.spec.json"
            if not spec_file.exists():
                continue
            spec_doc = json.loads(spec_file.read_text(encoding="utf-8"))
            spec, findings = specparse.parse_spec_document(spec_doc, self.catalog)
            if spec is None or findings:
                continue
            scene = compose(self.catalog, list(self.catalog.simlets))
            ms = compile_monitors(spec, scene, self.catalog)
            for line in wal.read_text(encoding="utf-8").splitlines()[1:]:
                if line.strip():
                    ms.step(event_from_dict(json.loads(line)))
            session = Session(
                session_id=session_id, spec=spec, spec_doc=spec_doc, monitor_set=ms
            )
            with self._registry_lock:
                self.sessions[session_id] = session
            count += 1
        return count


def _parse_jsonl_events(body: str):
    events = []
    for i, line in enumerate(body.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as err:
            raise HTTPException(status_code=400, detail=f"line {i}: malformed event: {err.msg}")
        try:
            events.append(event_from_dict(doc))
        except ModelError as err:
            raise HTTPException(status_code=400, detail=f"line {i}: {err.message}")
    return events


def create_app(
    catalog_path=None,
    catalog: Optional[Catalog] = None,
    out_dir="sessions",
    wal_dir=None,
) -> FastAPI:
    if catalog is None:
        catalog = load_catalog_file(catalog_path or harness.data_path(harness.GOLDEN_CATALOG))
    state = ServiceState(catalog, Path(out_dir), wal_dir)
    app = FastAPI(title="tipsmon", version="0.1.0")
    # the authoring UI is served as static files from another origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.monitors = state
    state.recover()

    @app.get("/catalog/complete")
    def catalog_complete(prefix: Optional[str] = Query(default=None)):
        if prefix is None:
            raise HTTPException(status_code=400, detail="missing 'prefix' parameter")
        return complete_names(state.catalog, prefix)

    async def _spec_document(request: Request) -> dict:
        try:
            doc = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="body is not a JSON document")
        if not isinstance(doc, dict):
            raise HTTPException(status_code=400, detail="spec document must be a JSON object")
        return doc

    @app.post("/spec/validate")
    async def spec_validate(request: Request):
        doc = await _spec_document(request)
        _, findings = specparse.parse_spec_document(doc, state.catalog)
        return {"findings": [f.to_dict() for f in findings]}

    @app.post("/spec/instructions")
    async def spec_instructions(request: Request):
        doc = await _spec_document(request)
        spec, findings = specparse.parse_spec_document(doc, state.catalog)
        if spec is None or findings:
            raise HTTPException(
                status_code=400,
                detail={"findings": [f.to_dict() for f in findings]},
            )
        pages = specparse.generate_instructions(spec, state.catalog)
        return {
            "pages": [
                {
                    "stepIndex": p.step_index,
                    "heading": p.heading,
                    "body": p.body,
                    "callouts": list(p.callouts),
                }
                for p in pages
            ]
        }

    @app.post("/session", status_code=201)
    async def session_create(request: Request, seed: Optional[int] = Query(default=None)):
        doc = await _spec_document(request)
        spec, findings = specparse.parse_spec_document(doc, state.catalog)
        if spec is None or findings:
            raise HTTPException(
                status_code=400,
                detail={"findings": [f.to_dict() for f in findings]},
            )
        session = state.create_session(spec, doc, seed=seed)
        return {"sessionId": session.session_id}

    @app.post("/session/{session_id}/events")
    async def session_events(session_id: str, request: Request):
        session = state.get(session_id)
        body = (await request.body()).decode("utf-8")
        events = _parse_jsonl_events(body)
        alerts = []
        violations = []
        accepted = 0
        with session.lock:
            if session.status != "open" or session.monitor_set.finalized:
                raise HTTPException(status_code=409, detail="session is finalized")
            applied = []
            for event in events:
                try:
                    outputs = session.monitor_set.step(event)
                except MonitorError as err:
                    state.log_events(session, applied)
                    status = 422 if "timestamp" in str(err) else 400
                    raise HTTPException(
                        status_code=status,
                        detail={"error": str(err), "accepted": accepted},
                    )
                applied.append(event)
                accepted += 1
                for out in outputs:
                    if isinstance(out, ImmediateAlert):
                        alerts.append(out.to_dict())
                    else:
                        violations.append(out.to_dict())
            state.log_events(session, applied)
        return {"accepted": accepted, "alerts": alerts, "violations": violations}

    @app.post("/session/{session_id}/end")
    def session_end(session_id: str):
        session = state.get(session_id)
        with session.lock:
            if session.status == "finalized":
                return session.report
            ms = session.monitor_set
            achievements, violations = ms.finalize()
            snapshot_dir = state.out_dir / session.session_id / "snapshots"
            for violation, snap_state in zip(ms.violations, ms.violation_states):
                report_mod.snapshot(snap_state, violation, snapshot_dir)
            session_report = report_mod.build_report(
                session_id=session.session_id,
                spec=session.spec,
                achievements=achievements,
                violations=violations,
                snapshot_dir=f"{session.session_id}/snapshots",
            )
            report_mod.write_report(session_report, state.out_dir)
            session.report = session_report.to_dict()
            session.status = "finalized"
        return session.report

    @app.get("/session/{session_id}/report")
    def session_report(session_id: str):
        session = state.get(session_id)
        if session.status != "finalized" or session.report is None:
            raise HTTPException(status_code=404, detail="report not available: session is open")
        return session.report

    @app.get("/session/{session_id}/snapshots/{name}")
    def session_snapshot(session_id: str, name: str):
        session = state.get(session_id)
        if report_mod.SNAPSHOT_NAME_RE.match(name) is None:
            raise HTTPException(status_code=404, detail=f"unknown snapshot '{name}'")
        path = state.out_dir / session.session_id / "snapshots" / name
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown snapshot '{name}'")
        media = "image/svg+xml" if name.endswith(".svg") else "application/json"
        return Response(content=path.read_bytes(), media_type=media)

    return app
