"""Command-line client for the mobility service.

Subcommands: estimate, bands, simulate, serve.  The first three build a
JSON request from flags plus CSV input and post it to the service; by
default the FastAPI app runs in-process (no daemon needed), and
``--server URL`` targets a remote instance instead.  Exit codes:
0 success, 2 usage/input problems, 3 estimation failures.
"""

from __future__ import annotations

import argparse
import sys
from types import SimpleNamespace

import httpx
import numpy as np

from .csvio import (
    read_income_csv,
    write_band_csv,
    write_curve_csv,
    write_metrics_csv,
    write_overlay_csv,
)
from .errors import InputError, MobilityError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ESTIMATION = 3


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process transport: same app, same schemas, no daemon required.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(args, path: str, payload: dict) -> dict:
    with _client(args.server) as client:
        response = client.post(path, json=payload)
    if response.status_code >= 500:
        _fail(response, EXIT_ESTIMATION)
    if response.status_code >= 400:
        _fail(response, EXIT_INPUT)
    return response.json()


def _fail(response, code: int):
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = response.text
    print(f"error: {detail}", file=sys.stderr)
    raise SystemExit(code)


def _rows_from_sample(sample) -> list:
    rows = []
    for i in range(sample.n):
        row = {
            "parent_income": float(sample.parent[i]),
            "child_income": float(sample.child[i]),
        }
        if sample.group is not None:
            row["group"] = str(sample.group[i])
        rows.append(row)
    return rows


def _grid_payload(text: str | None):
    if text is None:
        return None
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise InputError(
            f"bad grid spec {text!r}; expected start:stop[:step], e.g. 0.05:0.95:0.01"
        )
    try:
        numbers = [float(p) for p in parts]
    except ValueError:
        raise InputError(f"bad grid spec {text!r}: parts must be numbers") from None
    spec = {"start": numbers[0], "stop": numbers[1]}
    if len(numbers) == 3:
        spec["step"] = numbers[2]
    return spec


def _resolve_seed(seed: int | None) -> int:
    """Honor --seed; otherwise draw one from entropy and announce it."""
    if seed is not None:
        return seed
    drawn = int(np.random.SeedSequence().entropy % (2**32))
    print(f"seed: {drawn} (chosen from system entropy; pass --seed to reproduce)")
    return drawn


def _add_estimator_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--estimator", choices=("ebc", "beta", "dr"), default="beta")
    parser.add_argument(
        "--m",
        default=None,
        help="Bernstein order for --estimator ebc: an integer or 'sqrt-n'",
    )
    parser.add_argument("--link", choices=("logit", "probit"), default="logit")
    parser.add_argument("--design", choices=("linear", "quadratic"), default="linear")
    parser.add_argument("--tau", type=float, default=0.0)
    parser.add_argument("--grid", default=None, help="grid spec start:stop[:step]")


def _estimator_payload(args) -> dict:
    m = args.m
    if m is not None and m != "sqrt-n":
        try:
            m = int(m)
        except ValueError:
            raise InputError(f"--m must be an integer or 'sqrt-n', got {args.m!r}") from None
    return {
        "estimator": args.estimator,
        "m": m,
        "link": args.link,
        "design": args.design,
        "tau": args.tau,
        "grid": _grid_payload(args.grid),
    }


def cmd_estimate(args) -> int:
    sample = read_income_csv(args.input)
    payload = {"data": _rows_from_sample(sample), **_estimator_payload(args)}
    body = _post(args, "/estimate", payload)
    curve = SimpleNamespace(
        grid=np.array([p["s"] for p in body["points"]]),
        values=np.array([p["value"] for p in body["points"]]),
        tau=body["tau"],
        estimator=body["estimator"],
        n=body["n"],
    )
    write_curve_csv(args.out, curve)
    for warning in body.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {len(body['points'])} rows to {args.out}")
    return EXIT_OK


def cmd_bands(args) -> int:
    sample = read_income_csv(args.input)
    if (args.group_a is None) != (args.group_b is None):
        raise InputError("pass both --group-a and --group-b or neither")
    if args.group_a is not None and sample.group is None:
        raise InputError("input file has no group column")
    payload = {
        "data": _rows_from_sample(sample),
        **_estimator_payload(args),
        "n_boot": args.B,
        "alpha": args.alpha,
        "group_a": args.group_a,
        "group_b": args.group_b,
        "seed": _resolve_seed(args.seed),
    }
    body = _post(args, "/bands", payload)
    columns = {
        name: np.array([p[name] for p in body["points"]])
        for name in (
            "center",
            "pointwise_lo",
            "pointwise_hi",
            "uniform_lo",
            "uniform_hi",
            "sigma",
        )
    }
    band = SimpleNamespace(
        grid=np.array([p["s"] for p in body["points"]]),
        estimator=body["estimator"],
        tau=body["tau"],
        alpha=body["alpha"],
        n_boot=body["n_boot"],
        critical_value=body["critical_value"],
        redraws=body["redraws"],
        **columns,
    )
    dominance = None
    if body.get("dominance") is not None:
        dom = body["dominance"]
        dominance = SimpleNamespace(
            intervals=[tuple(pair) for pair in dom["intervals"]],
            any_dominance=dom["nonempty"],
            violation=dom["violation"],
        )
    write_band_csv(args.out, band, dominance)
    print(f"wrote {len(body['points'])} rows to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    reps = 200 if args.fast else args.reps
    payload = {
        "family": args.family,
        "theta": args.theta,
        "tau_k": args.tau_k,
        "n": args.n,
        "reps": reps,
        "tau": args.tau,
        "estimators": args.estimators.split(","),
        "seed": _resolve_seed(args.seed),
        "overlay_reps": args.overlay_reps if args.overlay_out else None,
    }
    body = _post(args, "/simulate", payload)
    theta = body["theta"]
    theta_text = "-" if theta is None else f"{theta:.3g}"
    print(
        f"family={body['family']} theta={theta_text} "
        f"kendall_tau={body['kendall_tau']:.3g} n={body['n']} reps={body['reps']} "
        f"tau={body['tau']:g} seed={body['seed_used']}"
    )
    for m in body["metrics"]:
        print(
            f"  {m['estimator']}: RISBx100={m['risb_x100']:.3f} "
            f"RIMSEx100={m['rimse_x100']:.3f} failures={m['failures']}"
        )

    result = SimpleNamespace(
        family=body["family"],
        n=body["n"],
        reps=body["reps"],
        tau=body["tau"],
        seed_used=body["seed_used"],
        metrics=[SimpleNamespace(**row) for row in body["metrics"]],
    )
    write_metrics_csv(args.out, result)
    print(f"wrote metrics to {args.out}")
    if args.overlay_out:
        write_overlay_csv(args.overlay_out, body["overlay"] or [])
        print(f"wrote overlay to {args.overlay_out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankmobility",
        description="Upward rank mobility curves, bands, and simulations.",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="URL of a running service; default runs the service in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="estimate a mobility curve from CSV data")
    p_est.add_argument("input", help="income CSV (parent_income,child_income[,group])")
    _add_estimator_flags(p_est)
    p_est.add_argument("--out", required=True, help="output curve CSV path")
    p_est.set_defaults(func=cmd_estimate)

    p_bands = sub.add_parser("bands", help="bootstrap confidence bands")
    p_bands.add_argument("input")
    _add_estimator_flags(p_bands)
    p_bands.add_argument("--B", type=int, default=500, help="bootstrap replications")
    p_bands.add_argument("--alpha", type=float, default=0.05)
    p_bands.add_argument("--group-a", default=None)
    p_bands.add_argument("--group-b", default=None)
    p_bands.add_argument("--seed", type=int, default=None)
    p_bands.add_argument("--out", required=True)
    p_bands.set_defaults(func=cmd_bands)

    p_sim = sub.add_parser("simulate", help="Monte Carlo experiment on a known copula")
    p_sim.add_argument(
        "--family",
        required=True,
        choices=("gaussian", "clayton", "gumbel", "independence"),
    )
    p_sim.add_argument("--theta", type=float, default=None)
    p_sim.add_argument("--tau-k", type=float, default=None)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--reps", type=int, default=1000)
    p_sim.add_argument("--fast", action="store_true", help="CI mode: reps=200")
    p_sim.add_argument("--tau", type=float, default=0.0)
    p_sim.add_argument(
        "--estimators",
        default="beta",
        help="comma-separated tags, e.g. beta,ebc-sqrt-n,dr-probit-linear",
    )
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--overlay-out", default=None, help="also write overlay rows")
    p_sim.add_argument("--overlay-reps", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MobilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
