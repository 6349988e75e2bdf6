#!/usr/bin/env python3
"""Drive one session through the HTTP service in-process and print the
immediate-feedback channel: post a scenario in small chunks, show alerts as
they arrive, then fetch the final report.

Usage: python scripts/session_demo.py [scenario] [--chunk N]
"""

import argparse
import json
import sys
import tempfile

from fastapi.testclient import TestClient

from tipsmon import harness
from tipsmon.model import event_to_dict
from tipsmon.service import create_app


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", nargs="?", default="errI", choices=harness.SCENARIO_NAMES)
    parser.add_argument("--chunk", type=int, default=4, help="events per POST")
    args = parser.parse_args()

    trajectory = harness.gen_scenario(args.scenario)
    spec_doc = json.loads(harness.data_path(trajectory.spec_ref).read_text(encoding="utf-8"))

    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(out_dir=tmp)
        with TestClient(app) as client:
            sid = client.post("/session", json=spec_doc).json()["sessionId"]
            print(f"session {sid} ({args.scenario}, {len(trajectory.events)} events)")
            events = list(trajectory.events)
            for i in range(0, len(events), args.chunk):
                chunk = events[i : i + args.chunk]
                body = "\n".join(json.dumps(event_to_dict(e), sort_keys=True) for e in chunk)
                resp = client.post(f"/session/{sid}/events", content=body).json()
                for alert in resp["alerts"]:
                    print(
                        f"  t={alert['t']:>6.0f}  ALERT {alert['kind']}: "
                        f"{alert['subjectId']} measured {alert['measured']:g} "
                        f"(limit {alert['threshold']:g})"
                    )
            report = client.post(f"/session/{sid}/end").json()
            print()
            print(report["messageText"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
