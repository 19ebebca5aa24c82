"""Command-line client for the stability service.

The CLI is a thin HTTP client: it reads a YAML experiment config, posts a
request to the service (in-process by default, remote with --url), and
writes CSV/SVG outputs plus a run manifest next to them.  Experiments are
configured by file; flags only override (--delta, --grid-n, --r-max,
--seed, --strict, --format).

Exit codes: 0 success, 1 computation failure (or per-point issues under
--strict), 2 configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .charts import boundary_csv_text, emit_chart
from .config import load_config
from .errors import ConfigError
from .scan import BoundaryCurve, PointRecord, ScanNumerics, ScanResult


def _make_client(url: str | None):
    if url:
        import httpx

        return httpx.Client(base_url=url, timeout=None)
    # in-process transport against the bundled app; no server needed
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

        from .service.app import app

        return TestClient(app)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idestab",
        description="Stability analysis of integral delay equations x(t) = "
        "integral F(theta) x(t+theta) dtheta.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "fundamental": "compute the fundamental matrix K and dump it as CSV",
        "simulate": "solve an initial-value problem and dump the trajectory",
        "lyapunov": "build the delay Lyapunov matrix and its residual report",
        "test": "run the positive-definiteness stability test",
        "scan": "sweep a two-parameter family and emit chart data",
        "boundary": "trace D-subdivision boundary curves",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="YAML experiment configuration")
        p.add_argument("--url", help="remote service URL (default: in-process)")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--delta", type=float, help="grid step override")
        p.add_argument("--seed", type=int, help="random seed override")
        p.add_argument(
            "--strict",
            action="store_true",
            help="exit 1 when per-point nonfatal issues occurred",
        )
        p.add_argument(
            "--format",
            help="comma-separated chart formats (csv,svg)",
        )
        if name == "scan":
            p.add_argument("--grid-n", type=int, help="grid resolution override")
            p.add_argument("--workers", type=int, help="worker-pool size override")
        if name in ("test", "scan"):
            p.add_argument("--r-max", type=int, help="test r = 2..r_max")
    return parser


def _post(client, path: str, payload: dict):
    response = client.post(path, json=payload)
    if response.status_code == 422:
        print(f"config error: invalid request for {path}:", file=sys.stderr)
        print(json.dumps(response.json(), indent=2), file=sys.stderr)
        raise SystemExit(2)
    if response.status_code != 200:
        body = response.json()
        print(
            f"error: {body.get('error', response.status_code)}: "
            f"{body.get('detail', '')}",
            file=sys.stderr,
        )
        raise SystemExit(1)
    return response.json()


def _out_dir(cfg: dict, args) -> str:
    out = args.out or cfg.get("output", {}).get("directory", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _formats(cfg: dict, args) -> tuple[str, ...]:
    if args.format:
        return tuple(f.strip() for f in args.format.split(",") if f.strip())
    return tuple(cfg.get("output", {}).get("formats", ["csv", "svg"]))


def _basename(cfg: dict, default: str) -> str:
    return cfg.get("output", {}).get("basename", default)


def _numerics(cfg: dict, args) -> dict:
    numerics = dict(cfg.get("numerics", {}))
    if args.delta is not None:
        numerics["delta"] = args.delta
    if getattr(args, "seed", None) is not None:
        numerics["seed"] = args.seed
    return numerics


def _r_values(cfg: dict, args) -> list[int]:
    r_max = getattr(args, "r_max", None)
    if r_max is not None:
        return list(range(2, r_max + 1))
    return list(cfg.get("schedule", {}).get("r_values", [2, 3, 4, 5, 6]))


def _write_manifest(
    out_dir: str, basename: str, command: str, config_path: str,
    request: dict, outputs: list[str], seed,
) -> str:
    with open(config_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "command": command,
        "config": os.path.abspath(config_path),
        "config_sha256": digest,
        "request": request,
        "seed": seed,
        "versions": {
            "idestab": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "outputs": [os.path.basename(path) for path in outputs],
    }
    path = os.path.join(out_dir, f"{basename}.manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _grid_csv(payload: dict, path: str) -> None:
    samples = np.asarray(payload["samples"])
    count, rows, cols = samples.shape
    header = ["t"] + [f"entry_{a + 1}{b + 1}" for a in range(rows) for b in range(cols)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(count):
            t = payload["t0"] + i * payload["step"]
            vals = samples[i].reshape(-1)
            fh.write(",".join([f"{t:.17g}"] + [f"{v:.17g}" for v in vals]) + "\n")


def _kernel_section(cfg: dict) -> dict:
    if "kernel" not in cfg:
        raise ConfigError("config needs a kernel section")
    return cfg["kernel"]


def _cmd_fundamental(client, cfg, args) -> int:
    numerics = _numerics(cfg, args)
    request = {
        "kernel": _kernel_section(cfg),
        "horizon": numerics.get("horizon", 5.0 * cfg["kernel"]["h"]),
        "delta": numerics.get("delta", 1e-3),
        "derivative": bool(cfg.get("fundamental", {}).get("derivative", False)),
        "residuals": True,
    }
    body = _post(client, "/fundamental", request)
    out = _out_dir(cfg, args)
    base = _basename(cfg, "fundamental")
    outputs = []
    path = os.path.join(out, f"{base}.csv")
    _grid_csv(body["grid"], path)
    outputs.append(path)
    if body.get("derivative"):
        dpath = os.path.join(out, f"{base}_derivative.csv")
        _grid_csv(body["derivative"], dpath)
        outputs.append(dpath)
    res = body["residuals"]
    print(f"K on [0, {body['grid']['t1']:g}] at step {body['grid']['step']:g}")
    print(
        f"residuals: left {res['left_form']:.3e}  right {res['right_form']:.3e}  "
        f"jump {res['jump_identity']:.3e}"
    )
    outputs.append(
        _write_manifest(out, base, "fundamental", args.config, request, outputs,
                        numerics.get("seed"))
    )
    print("wrote " + ", ".join(outputs))
    return 0


def _cmd_simulate(client, cfg, args) -> int:
    if "phi" not in cfg:
        raise ConfigError("config needs a phi section for simulate")
    numerics = _numerics(cfg, args)
    request = {
        "kernel": _kernel_section(cfg),
        "phi": cfg["phi"],
        "horizon": numerics.get("horizon", 10.0 * cfg["kernel"]["h"]),
        "delta": numerics.get("delta", 1e-3),
    }
    body = _post(client, "/simulate", request)
    out = _out_dir(cfg, args)
    base = _basename(cfg, "trajectory")
    path = os.path.join(out, f"{base}.csv")
    _grid_csv(body["grid"], path)
    outputs = [path]
    samples = np.asarray(body["grid"]["samples"])
    print(
        f"trajectory on [0, {body['grid']['t1']:g}]; final norm "
        f"{np.linalg.norm(samples[-1]):.6g}"
    )
    outputs.append(
        _write_manifest(out, base, "simulate", args.config, request, outputs,
                        numerics.get("seed"))
    )
    print("wrote " + ", ".join(outputs))
    return 0


def _cmd_lyapunov(client, cfg, args) -> int:
    numerics = _numerics(cfg, args)
    section = cfg.get("lyapunov", {})
    request = {
        "kernel": _kernel_section(cfg),
        "weight": cfg.get("weight"),
        "method": section.get("method", "collocation"),
        "n_colloc": numerics.get("n_colloc", 100),
        "delta": numerics.get("delta", 1e-3),
        "horizon": numerics.get("horizon"),
        "residuals": bool(section.get("residuals", True)),
    }
    body = _post(client, "/lyapunov", request)
    out = _out_dir(cfg, args)
    base = _basename(cfg, "lyapunov")
    path = os.path.join(out, f"{base}.csv")
    _grid_csv(body["grid"], path)
    outputs = [path]
    print(f"U on [0, {body['grid']['t1']:g}] by {body['method']}")
    print("diagnostics: " + json.dumps(body["diagnostics"], sort_keys=True))
    if body.get("residuals"):
        print("residual report:")
        for key, val in body["residuals"].items():
            print(f"  {key:>18}: {val:.3e}")
        rpath = os.path.join(out, f"{base}_residuals.json")
        with open(rpath, "w", encoding="utf-8") as fh:
            json.dump(body["residuals"], fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(rpath)
    outputs.append(
        _write_manifest(out, base, "lyapunov", args.config, request, outputs,
                        numerics.get("seed"))
    )
    print("wrote " + ", ".join(outputs))
    return 0


def _cmd_test(client, cfg, args) -> int:
    numerics = _numerics(cfg, args)
    section = cfg.get("test", {})
    request = {
        "kernel": _kernel_section(cfg),
        "weight": cfg.get("weight"),
        "n_colloc": numerics.get("n_colloc", 100),
        "r_values": _r_values(cfg, args),
        "witness": bool(section.get("witness", True)),
        "delta": numerics.get("delta", 1e-3),
    }
    if "tolerance_scale" in numerics:
        request["tolerance_scale"] = numerics["tolerance_scale"]
    body = _post(client, "/test", request)
    for rec in body["records"]:
        print(
            f"r={rec['r']}: min eigenvalue {rec['min_eigenvalue']:+.6e} "
            f"(tolerance {rec['tolerance']:.1e}, asymmetry "
            f"{rec['asymmetry_defect']:.1e})"
        )
    verdict = body["outcome"]
    suffix = f" at r={body['r']}" if body.get("r") is not None else ""
    reason = f" ({body['reason']})" if body.get("reason") else ""
    print(f"verdict: {verdict}{suffix}{reason}")
    if verdict == "consistent-with-stability":
        print(
            "note: consistency up to the tested r is not a stability proof; "
            "instability at larger r remains possible in principle"
        )
    outputs = []
    if body.get("witness"):
        wit = body["witness"]
        print("instability witness:")
        print(f"  r                : {wit['r']}")
        print(f"  tau grid         : {[round(t, 6) for t in wit['taus']]}")
        print(f"  gamma            : {[round(g, 6) for g in wit['gamma']]}")
        print(f"  gamma^T K_r gamma: {wit['quadratic_value']:+.6e}")
        print(f"  v1(psi) quadrature: {wit['quadrature_value']:+.6e}")
        print(f"  relative gap     : {wit['relative_gap']:.2%}")
        out = _out_dir(cfg, args)
        base = _basename(cfg, "test")
        wpath = os.path.join(out, f"{base}_witness.json")
        with open(wpath, "w", encoding="utf-8") as fh:
            json.dump(wit, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(wpath)
        outputs.append(
            _write_manifest(out, base, "test", args.config, request, outputs,
                            numerics.get("seed"))
        )
        print("wrote " + ", ".join(outputs))
    return 0


def _rehydrate_scan(body: dict) -> ScanResult:
    records = tuple(
        PointRecord(
            index=rec["index"],
            p1=rec["p1"],
            p2=rec["p2"],
            verdict=rec["verdict"],
            verdict_r=rec.get("verdict_r"),
            min_eigenvalues={int(k): v for k, v in rec["min_eigenvalues"].items()},
            tolerance=rec["tolerance"],
            imag_margin=rec["imag_margin"] if rec.get("imag_margin") is not None
            else float("nan"),
            oracle=rec.get("oracle"),
            reason=rec.get("reason"),
            elapsed=rec["elapsed"],
        )
        for rec in body["records"]
    )
    return ScanResult(
        records=records,
        r_schedule=tuple(body["r_schedule"]),
        p1_name=body["p1_name"],
        p2_name=body["p2_name"],
        p1_values=np.asarray(body["p1_values"]),
        p2_values=np.asarray(body["p2_values"]),
        numerics=ScanNumerics(),
        with_oracle=body["with_oracle"],
        elapsed=body["elapsed"],
    )


def _scan_issues(result: ScanResult) -> int:
    return sum(
        1
        for rec in result.records
        if rec.reason is not None
        and not rec.reason.startswith("minimum eigenvalue")
    )


def _cmd_scan(client, cfg, args) -> int:
    if "family" not in cfg:
        raise ConfigError("config needs a family section for scan")
    numerics = _numerics(cfg, args)
    family = cfg["family"]
    if getattr(args, "grid_n", None):
        family = json.loads(json.dumps(family))
        family["p1"]["points"] = args.grid_n
        family["p2"]["points"] = args.grid_n
    request = {
        "kernel": _kernel_section(cfg),
        "family": family,
        "r_values": _r_values(cfg, args),
        "numerics": numerics,
        "oracle": bool(cfg.get("oracle", False)),
        "workers": getattr(args, "workers", None) or cfg.get("workers", 1),
    }
    body = _post(client, "/scan", request)
    result = _rehydrate_scan(body)

    curves = None
    if "boundary" in cfg:
        breq = {
            "kernel": _kernel_section(cfg),
            "family": {"p1": family["p1"], "p2": family["p2"]},
            "omega_max": cfg["boundary"].get("omega_max", 10.0),
            "omega_samples": cfg["boundary"].get("omega_samples", 200),
        }
        bbody = _post(client, "/boundary", breq)
        curves = [
            BoundaryCurve(
                kind=c["kind"], points=np.asarray(c["points"]), failures=c["failures"]
            )
            for c in bbody["curves"]
        ]

    out = _out_dir(cfg, args)
    base = _basename(cfg, "scan")
    outputs = emit_chart(
        result, out, formats=_formats(cfg, args), boundaries=curves, basename=base
    )
    counts: dict[str, int] = {}
    for rec in result.records:
        counts[rec.verdict] = counts.get(rec.verdict, 0) + 1
    print(
        f"{len(result.records)} points in {body['elapsed']:.1f}s: "
        + ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    )
    issues = _scan_issues(result)
    if issues:
        print(f"{issues} point(s) with nonfatal issues")
    outputs.append(
        _write_manifest(out, base, "scan", args.config, request, outputs,
                        numerics.get("seed", 0))
    )
    print("wrote " + ", ".join(outputs))
    return 1 if (args.strict and issues) else 0


def _cmd_boundary(client, cfg, args) -> int:
    if "family" not in cfg:
        raise ConfigError("config needs a family section for boundary")
    section = cfg.get("boundary", {})
    request = {
        "kernel": _kernel_section(cfg),
        "family": cfg["family"],
        "omega_max": section.get("omega_max", 10.0),
        "omega_samples": section.get("omega_samples", 200),
    }
    body = _post(client, "/boundary", request)
    curves = [
        BoundaryCurve(
            kind=c["kind"], points=np.asarray(c["points"]), failures=c["failures"]
        )
        for c in body["curves"]
    ]
    out = _out_dir(cfg, args)
    base = _basename(cfg, "boundary")
    path = os.path.join(out, f"{base}.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(boundary_csv_text(curves))
    print(f"{len(curves)} curve(s)")
    outputs = [path]
    outputs.append(
        _write_manifest(out, base, "boundary", args.config, request, outputs, None)
    )
    print("wrote " + ", ".join(outputs))
    return 0


_COMMANDS = {
    "fundamental": _cmd_fundamental,
    "simulate": _cmd_simulate,
    "lyapunov": _cmd_lyapunov,
    "test": _cmd_test,
    "scan": _cmd_scan,
    "boundary": _cmd_boundary,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    client = _make_client(args.url)
    try:
        return _COMMANDS[args.command](client, cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
