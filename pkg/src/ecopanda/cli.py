"""Command-line client for the HTTP service.

Every subcommand is a thin wrapper over one endpoint.  By default the
request is handled by an in-process application instance, so no server
needs to be running; pass ``--server`` to talk to a remote one instead
(files written by ``run`` then land on that host).

Exit codes: 0 on success, 2 on a validation error, 3 when every selected
method diverged.
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ALL_DIVERGED = 3

_TIMEOUT = httpx.Timeout(600.0)


async def _post_inprocess(path, payload):
    from .service import app

    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://service",
                                 timeout=_TIMEOUT) as client:
        return await client.post(path, json=payload)


def _post(server, path, payload):
    if server:
        with httpx.Client(base_url=server, timeout=_TIMEOUT) as client:
            return client.post(path, json=payload)
    return asyncio.run(_post_inprocess(path, payload))


def _fail_validation(resp):
    detail = resp.json().get("detail", resp.text)
    print(f"error: {detail}", file=sys.stderr)
    return EXIT_VALIDATION


def _read_config_text(path):
    if path is None:
        return ""
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _num(v, spec="%.6g"):
    return "n/a" if v is None else spec % v


def _cmd_run(args):
    try:
        text = _read_config_text(args.config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    payload = {"config_text": text}
    if args.out is not None:
        payload["output_dir"] = args.out
    resp = _post(args.server, "/run", payload)
    if resp.status_code == 422:
        return _fail_validation(resp)
    resp.raise_for_status()
    body = resp.json()

    print(f"wrote {len(body['manifest'])} files to {body['output_dir']}")
    for name in body["manifest"]:
        print(f"  {name}")
    print(f"measured mu={body['mu']:.6g} L={body['L']:.6g}")
    if body["window_b"] is not None:
        print(f"contracting window: b={body['window_b']} delta={body['window_delta']:.6g}")
    else:
        print("contracting window: none found up to length 50")
    print("method        lambda_emp  r_squared  final_rel_resid  iters_to_tol  scalars_to_tol")
    for s in body["summaries"]:
        tail = f"  diverged at {s['diverged_at']}" if s["diverged_at"] is not None else ""
        print("%-12s  %10s  %9s  %15s  %12s  %14s%s" % (
            s["method"], _num(s["lambda_emp"], "%.6f"), _num(s["r_squared"], "%.4f"),
            _num(s["final_relative_residual"], "%.3e"),
            "n/a" if s["iters_to_tol"] is None else s["iters_to_tol"],
            "n/a" if s["scalars_to_tol"] is None else s["scalars_to_tol"], tail))
    for message in body["warnings"]:
        print(f"warning: {message}", file=sys.stderr)
    for message in body["flags"]:
        print(f"flag: {message}", file=sys.stderr)

    ran = {s["method"] for s in body["summaries"]}
    if ran and set(body["diverged_methods"]) == ran:
        print("error: every method diverged", file=sys.stderr)
        return EXIT_ALL_DIVERGED
    return EXIT_OK


def _cmd_constants(args):
    payload = {"mu": args.mu, "L": args.L, "b": args.B, "delta": args.delta}
    if args.eta is not None:
        payload["eta"] = args.eta
    resp = _post(args.server, "/constants", payload)
    if resp.status_code == 422:
        return _fail_validation(resp)
    resp.raise_for_status()
    body = resp.json()
    for line in body["lines"]:
        print(line)
    for message in body["warnings"]:
        print(f"warning: {message}", file=sys.stderr)
    return EXIT_OK


def _cmd_verify_graph(args):
    try:
        text = _read_config_text(args.config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    resp = _post(args.server, "/verify-graph", {"config_text": text})
    if resp.status_code == 422:
        return _fail_validation(resp)
    resp.raise_for_status()
    body = resp.json()
    print(f"n={body['n']} horizon={body['horizon']} graph_sha256={body['graph_sha256']}")
    print("P1 decentralized support: %s (max violation %.3e)" % (
        "pass" if body["support_ok"] else "fail", body["max_support_violation"]))
    print("P2 doubly stochastic: %s (max violation %.3e)" % (
        "pass" if body["doubly_stochastic_ok"] else "fail", body["max_stochasticity_violation"]))
    if body["contracts"]:
        print("P3 joint spectrum: pass (B=%d delta=%.6g)" % (body["window_b"], body["window_delta"]))
    else:
        print("P3 joint spectrum: fail (no contracting window up to length 50)")
    return EXIT_OK


def _cmd_serve(args):
    import uvicorn

    uvicorn.run("ecopanda.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ecopanda",
        description="Decentralized dual-ascent solvers: run experiments, "
                    "evaluate rate-bound constants, verify mixing sequences.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment and write its output files")
    p.add_argument("--config", help="flat 'key = value' file; defaults apply when omitted")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--server", help="base URL of a running service; in-process when omitted")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("constants", help="print the rate-bound constants for given inputs")
    p.add_argument("--mu", type=float, required=True, help="strong convexity constant")
    p.add_argument("--L", type=float, required=True, help="gradient Lipschitz constant")
    p.add_argument("--eta", type=float, help="upper-bound curvature; defaults to 4L")
    p.add_argument("--B", type=int, required=True, help="contraction window length")
    p.add_argument("--delta", type=float, required=True, help="joint spectral contraction factor")
    p.add_argument("--server", help="base URL of a running service; in-process when omitted")
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("verify-graph",
                       help="check mixing-matrix properties of the configured graph sequence")
    p.add_argument("--config", help="flat 'key = value' file; defaults apply when omitted")
    p.add_argument("--server", help="base URL of a running service; in-process when omitted")
    p.set_defaults(func=_cmd_verify_graph)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main_entry():
    sys.exit(main())
