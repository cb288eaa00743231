"""Command-line entry point.

Subcommands:
  run       replay scenario files and write metrics reports
  validate  check a lexicon/policy/templates/scenario/config file
  trace     print one turn's canonical trace from a scenario replay
  serve     start the HTTP/WebSocket gateway

Exit codes: 0 success, 1 failed expectations or invalid content, 2 unusable
input (missing/unreadable files). Human-facing text stays in English;
conversational Guarani lives in the data files only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .core import pretty_json
from .errors import ConvokeError, FileFormatError, NotFound, SessionCreationError
from .evaluation import compute_metrics, load_scenario, run_scenario
from .governance import load_policy
from .orchestrator import SessionConfig
from .response import load_templates
from .understanding import load_lexicon

TOKEN_ENV_VAR = "CONVOKE_GATEWAY_TOKEN"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convoke")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay scenarios and report metrics")
    run.add_argument("scenarios", nargs="+", help="scenario JSON files")
    run.add_argument("--config", required=True, help="session config JSON")
    run.add_argument("--report", help="directory to write metrics.json / metrics.txt")
    run.add_argument("--format", choices=("table", "machine"), default="table")

    validate = sub.add_parser("validate", help="validate a data file")
    validate.add_argument("path")
    validate.add_argument(
        "--kind",
        required=True,
        choices=("lexicon", "policy", "templates", "scenario", "config"),
    )

    trace = sub.add_parser("trace", help="print one turn's canonical trace")
    trace.add_argument("--scenario", required=True)
    trace.add_argument("--config", required=True)
    trace.add_argument("--turn", type=int, required=True, help="1-based turn index")

    serve = sub.add_parser("serve", help="start the gateway")
    serve.add_argument("--config", required=True)
    serve.add_argument("--bind", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8750)
    return parser


def _load_config_dict(path: str) -> dict:
    config_path = Path(path)
    if not config_path.is_file():
        print(f"error: config file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    try:
        return json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _cmd_run(args: argparse.Namespace) -> int:
    config_dir = Path(args.config).parent
    base_config = _load_config_dict(args.config)
    results = []
    for scenario_path in args.scenarios:
        if not Path(scenario_path).is_file():
            print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
            return 2
        try:
            script = load_scenario(scenario_path)
            results.append(run_scenario(script, base_config, base_dir=config_dir))
        except FileFormatError as exc:
            print(f"error: {scenario_path}: invalid scenario", file=sys.stderr)
            for issue in exc.issues:
                print(f"  {issue.render()}", file=sys.stderr)
            return 2
        except SessionCreationError as exc:
            print(f"error: {scenario_path}: {exc}", file=sys.stderr)
            return 2
    report = compute_metrics(results)
    if args.format == "machine":
        print(pretty_json(report.to_dict()))
    else:
        print(report.render_table())
    if args.report:
        out_dir = Path(args.report)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.json").write_text(
            pretty_json(report.to_dict()) + "\n", encoding="utf-8"
        )
        (out_dir / "metrics.txt").write_text(report.render_table(), encoding="utf-8")
    failures = [
        f"{r.scenario_id}: {message}"
        for r in results
        for message in (*r.expectation_failures, *r.gate_violations)
    ]
    for failure in failures:
        print(f"FAILED {failure}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"error: file not found: {path}", file=sys.stderr)
        return 2
    loaders = {
        "lexicon": load_lexicon,
        "policy": load_policy,
        "templates": load_templates,
        "scenario": load_scenario,
        "config": SessionConfig.from_file,
    }
    try:
        loaders[args.kind](path)
    except FileFormatError as exc:
        for issue in exc.issues:
            print(issue.render())
        return 1
    except (SessionCreationError, ConvokeError) as exc:
        print(str(exc))
        return 1
    print(f"{path}: valid {args.kind}")
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    config_dir = Path(args.config).parent
    base_config = _load_config_dict(args.config)
    if not Path(args.scenario).is_file():
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return 2
    try:
        script = load_scenario(args.scenario)
        result = run_scenario(script, base_config, base_dir=config_dir)
    except (FileFormatError, SessionCreationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    traces = [o.trace for o in result.outcomes]
    if not (1 <= args.turn <= len(traces)):
        print(
            f"error: turn {args.turn} out of range (scenario produced {len(traces)} turns)",
            file=sys.stderr,
        )
        return 1
    print(pretty_json(traces[args.turn - 1].to_dict()))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway import create_app

    token = os.environ.get(TOKEN_ENV_VAR)
    if args.bind not in ("127.0.0.1", "localhost", "::1") and not token:
        print(
            f"error: refusing to bind {args.bind} without {TOKEN_ENV_VAR} set "
            "(voice-derived data must not be exposed unauthenticated)",
            file=sys.stderr,
        )
        return 2
    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return 2
    app = create_app(default_config_path=config_path, auth_token=token)
    uvicorn.run(app, host=args.bind, port=args.port, log_level="info")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "trace": _cmd_trace,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except NotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
