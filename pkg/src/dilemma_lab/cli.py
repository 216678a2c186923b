"""Operator CLI: a thin client over the experiment service.

Without ``--server`` the requests run against an in-process instance of
the FastAPI app, so offline mock runs need no daemon; with ``--server``
the same requests go to a remote deployment.

Exit codes: 0 success, 1 validation violations, 2 configuration error,
3 I/O or internal error, 4 authentication error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .config import ConfigError, load_config_file

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_AUTH = 4

_KIND_EXITS = {"config": EXIT_CONFIG, "auth": EXIT_AUTH, "io": EXIT_IO, "internal": EXIT_IO}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # testclient import warns on some stacks
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _fail(detail: object) -> int:
    if isinstance(detail, dict) and "kind" in detail:
        kind = detail.get("kind", "internal")
        print(f"error ({kind}): {detail.get('message', '')}", file=sys.stderr)
        return _KIND_EXITS.get(kind, EXIT_IO)
    print(f"error: {detail}", file=sys.stderr)
    return EXIT_CONFIG  # request-shape errors (422) are configuration errors


def _post(args: argparse.Namespace, path: str, payload: dict) -> tuple[int, dict | None]:
    try:
        with _client(getattr(args, "server", None)) as client:
            response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        print(f"error (io): cannot reach service: {exc}", file=sys.stderr)
        return EXIT_IO, None
    try:
        body = response.json()
    except ValueError:
        print(f"error (io): non-JSON response ({response.status_code})", file=sys.stderr)
        return EXIT_IO, None
    if response.status_code != 200:
        return _fail(body.get("detail", body)), None
    return EXIT_OK, body


def _load_config_arg(path: str | None) -> dict | None:
    if path is None:
        return None
    return load_config_file(path)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _load_config_arg(args.config)
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = {
        "conditions": args.condition or None,
        "trials": args.trials,
        "seed": args.seed,
        "mode": "live" if args.live else "mock",
        "out_dir": str(Path(args.out).resolve()),
        "config": config,
        "precursor_rounds": args.precursor_rounds,
        "max_workers": args.max_workers,
    }
    payload = {k: v for k, v in payload.items() if v is not None}
    code, body = _post(args, "/run", payload)
    if code != EXIT_OK or body is None:
        return code
    for condition, row in sorted(body["summary"]["conditions"].items()):
        print(
            f"{condition}: {row['completed']} completed, {row['aborted']} aborted "
            f"of {row['requested']}"
        )
    print(f"summary: {body['summary_path']}")
    return EXIT_OK


def cmd_pilot(args: argparse.Namespace) -> int:
    try:
        config = _load_config_arg(args.config)
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = {
        "comm": args.comm,
        "grouping": args.grouping,
        "trials": args.trials,
        "rounds": args.rounds,
        "seed": args.seed,
        "mode": "live" if args.live else "mock",
        "out_dir": str(Path(args.out).resolve()),
        "config": config,
        "max_workers": args.max_workers,
    }
    payload = {k: v for k, v in payload.items() if v is not None}
    code, body = _post(args, "/pilot", payload)
    if code != EXIT_OK or body is None:
        return code
    for condition, row in sorted(body["summary"]["conditions"].items()):
        print(
            f"{condition}: {row['completed']} completed, {row['aborted']} aborted "
            f"of {row['requested']}"
        )
    print(f"summary: {body['summary_path']}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    payload = {
        "in_dir": str(Path(args.in_dir).resolve()),
        "out_dir": str(Path(args.out).resolve()),
    }
    code, body = _post(args, "/analyze", payload)
    if code != EXIT_OK or body is None:
        return code
    for row in body["conditions"]:
        pct = row["pct_vs_control"]
        pct_text = "--" if pct is None else f"{pct:+.1f}%"
        print(
            f"{row['condition']}: n={row['n_completed']} "
            f"mean={row['mean_payoff']:.1f} vs control {pct_text}"
        )
    for name in sorted(body["csv_files"].values()):
        print(f"wrote {Path(args.out) / name}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    payload = {"in_dir": str(Path(args.in_dir).resolve())}
    code, body = _post(args, "/validate", payload)
    if code != EXIT_OK or body is None:
        return code
    if body["ok"]:
        print(f"{body['checked_files']} trial files valid")
        return EXIT_OK
    print(
        f"{body['total_violations']} violations in {body['checked_files']} files "
        f"(first {len(body['violations'])}):",
        file=sys.stderr,
    )
    for violation in body["violations"]:
        print(f"  {violation}", file=sys.stderr)
    return EXIT_VIOLATIONS


def cmd_export(args: argparse.Namespace) -> int:
    payload = {
        "analysis_path": str(Path(args.analysis).resolve()),
        "out_dir": str(Path(args.out).resolve()),
    }
    code, body = _post(args, "/export", payload)
    if code != EXIT_OK or body is None:
        return code
    for name in sorted(body["csv_files"].values()):
        print(f"wrote {Path(args.out) / name}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _add_mode_flags(parser: argparse.ArgumentParser) -> None:
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--mock", action="store_true", default=True,
                      help="deterministic offline agents (default)")
    mode.add_argument("--live", action="store_true", default=False,
                      help="query live model endpoints")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dilemma-lab",
        description="Run and analyze multi-agent social-dilemma experiments.",
    )
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run curriculum conditions")
    run_p.add_argument("--condition", action="append",
                       help="condition name; repeatable (default: all four)")
    run_p.add_argument("--trials", type=int, default=30)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--config", help="JSON config file (pool, endpoints)")
    run_p.add_argument("--out", required=True, help="output batch directory")
    run_p.add_argument("--precursor-rounds", type=int, default=3)
    run_p.add_argument("--max-workers", type=int)
    _add_mode_flags(run_p)
    run_p.set_defaults(func=cmd_run)

    pilot_p = sub.add_parser("pilot", help="run the coordination-game pilot")
    comm = pilot_p.add_mutually_exclusive_group(required=True)
    comm.add_argument("--comm", dest="comm", action="store_true",
                      help="one-word broadcast before each round")
    comm.add_argument("--no-comm", dest="comm", action="store_false")
    pilot_p.add_argument("--grouping", choices=["hetero", "coalition"], default="hetero")
    pilot_p.add_argument("--trials", type=int, default=30)
    pilot_p.add_argument("--rounds", type=int, default=3)
    pilot_p.add_argument("--seed", type=int)
    pilot_p.add_argument("--config")
    pilot_p.add_argument("--out", required=True)
    pilot_p.add_argument("--max-workers", type=int)
    _add_mode_flags(pilot_p)
    pilot_p.set_defaults(func=cmd_pilot)

    analyze_p = sub.add_parser("analyze", help="compute metrics and CSVs from a batch")
    analyze_p.add_argument("--in", dest="in_dir", required=True)
    analyze_p.add_argument("--out", required=True)
    analyze_p.set_defaults(func=cmd_analyze)

    validate_p = sub.add_parser("validate", help="check event streams and payoffs")
    validate_p.add_argument("--in", dest="in_dir", required=True)
    validate_p.set_defaults(func=cmd_validate)

    export_p = sub.add_parser("export", help="re-emit CSVs from a saved analysis.json")
    export_p.add_argument("--analysis", required=True)
    export_p.add_argument("--out", required=True)
    export_p.set_defaults(func=cmd_export)

    serve_p = sub.add_parser("serve", help="run the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
