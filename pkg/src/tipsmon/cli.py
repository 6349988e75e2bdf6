"""Command-line driver: replay sessions, generate scenarios, validate specs,
query completion, export instruction pages, serve the HTTP API.

Exit codes: 0 proficient / clean, 1 violations or findings, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, specparse
from .catalog import CatalogError, complete as complete_names, load_catalog_file
from .harness import SCENARIO_NAMES, TrajectoryError, data_path
from .specparse import SpecLoadError

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_INPUT_ERROR = 2


def _load_catalog(path):
    return load_catalog_file(Path(path) if path else data_path(harness.GOLDEN_CATALOG))


def _cmd_check(args) -> int:
    trajectory_path = Path(args.trajectory)
    paths = (
        sorted(trajectory_path.glob("*.jsonl"))
        if trajectory_path.is_dir()
        else [trajectory_path]
    )
    if not paths:
        print(f"no trajectories under {trajectory_path}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    worst = EXIT_OK
    for path in paths:
        report = harness.replay(
            args.spec, path, args.out, seed=args.seed, catalog_path=args.catalog
        )
        status = "proficient" if report.proficient else f"{len(report.violations)} violations"
        print(f"{path.name}: {status} (session {report.session_id})")
        if not report.proficient:
            worst = max(worst, EXIT_VIOLATIONS)
    return worst


def _cmd_gen_scenario(args) -> int:
    trajectory = harness.gen_scenario(args.name)
    out = Path(args.out) if args.out else Path(f"{args.name}.jsonl")
    harness.write_trajectory(trajectory, out)
    print(f"wrote {out} ({len(trajectory.events)} events, spec {trajectory.spec_ref})")
    return EXIT_OK


def _cmd_validate(args) -> int:
    catalog = _load_catalog(args.catalog)
    try:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        print(f"cannot read spec: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    _, findings = specparse.parse_spec_document(doc, catalog)
    for f in findings:
        where = f"step {f.step}" if f.step else "spec"
        col = f" (column {f.position})" if f.position else ""
        print(f"{where}: {f.message}{col}")
    if not findings:
        print("spec is valid")
    return EXIT_OK if not findings else EXIT_VIOLATIONS


def _cmd_complete(args) -> int:
    catalog = _load_catalog(args.catalog)
    for name in complete_names(catalog, args.prefix):
        print(name)
    return EXIT_OK


def _cmd_instructions(args) -> int:
    catalog = _load_catalog(args.catalog)
    spec = specparse.load_spec_file(args.spec, catalog)
    out = Path(args.out) if args.out else Path("instructions")
    written = specparse.write_instruction_pages(spec, catalog, out)
    print(f"wrote {len(written)} pages to {out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        catalog_path=Path(args.catalog) if args.catalog else data_path(harness.GOLDEN_CATALOG),
        out_dir=Path(args.out) if args.out else Path("sessions"),
        wal_dir=Path(args.wal) if args.wal else None,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tipsmon",
        description="Compile authored safety rules and monitor recorded training sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="replay a trajectory (or a directory of them)")
    check.add_argument("spec", help="spec document path")
    check.add_argument("trajectory", help="trajectory .jsonl file or directory")
    check.add_argument("--out", default="sessions", help="session output directory")
    check.add_argument("--seed", type=int, default=None, help="session id seed override")
    check.add_argument("--catalog", default=None, help="catalog file override")
    check.set_defaults(func=_cmd_check)

    gen = sub.add_parser("gen-scenario", help="write a golden scenario trajectory")
    gen.add_argument("name", choices=SCENARIO_NAMES)
    gen.add_argument("--out", default=None, help="output .jsonl path")
    gen.set_defaults(func=_cmd_gen_scenario)

    val = sub.add_parser("validate", help="validate a spec document")
    val.add_argument("spec")
    val.add_argument("--catalog", default=None)
    val.set_defaults(func=_cmd_validate)

    comp = sub.add_parser("complete", help="auto-complete a name prefix")
    comp.add_argument("prefix")
    comp.add_argument("--catalog", default=None)
    comp.set_defaults(func=_cmd_complete)

    instr = sub.add_parser("instructions", help="export instruction pages as Markdown")
    instr.add_argument("spec")
    instr.add_argument("--out", default=None)
    instr.add_argument("--catalog", default=None)
    instr.set_defaults(func=_cmd_instructions)

    serve = sub.add_parser("serve", help="run the authoring/session HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--catalog", default=None)
    serve.add_argument("--out", default=None, help="session report directory")
    serve.add_argument("--wal", default=None, help="write-ahead event log directory")
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CatalogError, SpecLoadError, TrajectoryError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
