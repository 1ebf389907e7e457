"""Command-line client for the consensus-optimization service.

``run`` and ``compare`` build a request, execute it (in process by default,
or against a remote service with ``--server``), and write the returned CSV.
``serve`` starts the HTTP service.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from pydantic import ValidationError

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _add_run_flags(p: argparse.ArgumentParser, compare: bool) -> None:
    p.add_argument("--problem", default="sensor-allocation", help="problem family (default: %(default)s)")
    if compare:
        p.add_argument(
            "--algos",
            default="bfgs-aladin,reduced-aladin,admm-aggregate-first",
            help="comma-separated algorithms to race (default: %(default)s)",
        )
    else:
        p.add_argument("--algo", default="bfgs-aladin", help="algorithm (default: %(default)s)")
    p.add_argument("--N", type=int, default=20, help="number of agents (default: %(default)s)")
    p.add_argument("--n", type=int, default=10, help="problem dimension (default: %(default)s)")
    p.add_argument("--rho", type=float, default=100.0, help="penalty weight (default: %(default)s)")
    p.add_argument("--max-iter", type=int, default=200, help="round budget (default: %(default)s)")
    p.add_argument("--seed", type=int, default=42, help="instance seed (default: %(default)s)")
    p.add_argument(
        "--hessian-schedule",
        type=int,
        default=None,
        metavar="K",
        help="refresh curvature models only at rounds K, K^2, ... (default: every round)",
    )
    p.add_argument("--tol", type=float, default=1e-10, help="subproblem gradient tolerance (default: %(default)s)")
    p.add_argument(
        "--stop-tol",
        type=float,
        default=0.0,
        help="stop once the consensus residual drops below this (default: run the full budget)",
    )
    p.add_argument("--threads", type=int, default=None, help="concurrent agent solves (default: agents, capped at cores)")
    p.add_argument("--out", default="-", help="CSV output path, '-' for stdout (default: stdout)")
    p.add_argument("--server", default=None, metavar="URL", help="send the request to a running service instead")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-aladin",
        description="Distributed consensus optimization runs: ALADIN variants and ADMM baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one algorithm and write its per-round CSV trace")
    _add_run_flags(run_p, compare=False)

    cmp_p = sub.add_parser("compare", help="race several algorithms on one problem instance")
    _add_run_flags(cmp_p, compare=True)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)

    return parser


def _request_payload(args: argparse.Namespace, compare: bool) -> dict:
    payload = {
        "problem": args.problem,
        "N": args.N,
        "n": args.n,
        "rho": args.rho,
        "max_iter": args.max_iter,
        "seed": args.seed,
        "hessian_schedule": args.hessian_schedule,
        "tol": args.tol,
        "stop_tol": args.stop_tol,
        "threads": args.threads,
    }
    if compare:
        payload["algos"] = [a.strip() for a in args.algos.split(",") if a.strip()]
    else:
        payload["algo"] = args.algo
    return payload


def _write_output(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _remote(server: str, path: str, payload: dict) -> tuple[int, dict | str]:
    import httpx

    resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=600.0)
    if resp.status_code in (400, 422):
        return EXIT_CONFIG, resp.json().get("detail", resp.text)
    if resp.status_code >= 500:
        return EXIT_SOLVER, resp.json().get("detail", resp.text)
    return EXIT_OK, resp.json()


def _print_summary(summary: dict, label: str = "") -> None:
    prefix = f"{label}: " if label else ""
    sys.stderr.write(
        f"{prefix}rounds={summary['rounds']} final_residual={summary['final_residual']:.6e} "
        f"floats_up={summary['total_floats_up']} floats_down={summary['total_floats_down']}\n"
    )


def _cmd_run(args: argparse.Namespace) -> int:
    from .aladin import SubproblemFailure
    from .runner import ConfigError
    from .service import RunRequest, execute_run

    payload = _request_payload(args, compare=False)
    if args.server:
        code, body = _remote(args.server, "/run", payload)
        if code != EXIT_OK:
            sys.stderr.write(f"error: {json.dumps(body)}\n")
            return code
        _write_output(body["csv"], args.out)
        _print_summary(body["summary"])
        return EXIT_OK

    try:
        request = RunRequest(**payload)
        response = execute_run(request)
    except (ValidationError, ConfigError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except SubproblemFailure as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    _write_output(response.csv, args.out)
    _print_summary(response.summary.model_dump())
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    from .aladin import SubproblemFailure
    from .runner import ConfigError
    from .service import CompareRequest, execute_compare

    payload = _request_payload(args, compare=True)
    if args.server:
        code, body = _remote(args.server, "/compare", payload)
        if code != EXIT_OK:
            sys.stderr.write(f"error: {json.dumps(body)}\n")
            return code
        _write_output(body["csv"], args.out)
        for algo, summary in body["summaries"].items():
            _print_summary(summary, label=algo)
        return EXIT_OK

    try:
        request = CompareRequest(**payload)
        response = execute_compare(request)
    except (ValidationError, ConfigError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except SubproblemFailure as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    _write_output(response.csv, args.out)
    for algo, summary in response.summaries.items():
        _print_summary(summary.model_dump(), label=algo)
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "compare":
        return _cmd_compare(args)
    return _cmd_serve(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
