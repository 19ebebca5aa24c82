"""Experiment configuration: YAML loading and mapping -> core conversions.

The same converters serve the HTTP layer (pydantic-validated payloads)
and the CLI (YAML files), so the file grammar and the wire schema agree
by construction.  Conversion errors name the offending field; YAML
syntax errors keep the parser's line/column mark.
"""

from __future__ import annotations

import numpy as np
import yaml

from .errors import ConfigError
from .kernel import KernelSpec, Piece
from .scan import Injection, ParameterFamily, ParameterSlot, ScanNumerics


def load_config(path: str) -> dict:
    """Read a YAML experiment file into a plain mapping."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML error in {path}{where}: {exc.problem}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of sections")
    return data


def _matrix(entries, n: int, where: str) -> np.ndarray:
    try:
        flat = np.asarray(entries, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a flat list of numbers") from exc
    if flat.size != n * n:
        raise ConfigError(
            f"{where} must have {n * n} entries (row-major {n}x{n}), got {flat.size}"
        )
    return flat.reshape(n, n)


def kernel_from_mapping(m: dict) -> KernelSpec:
    for key in ("n", "h", "pieces"):
        if key not in m:
            raise ConfigError(f"kernel.{key} is required")
    n = int(m["n"])
    h = float(m["h"])
    pieces = []
    raw_pieces = m["pieces"]
    if not isinstance(raw_pieces, (list, tuple)) or not raw_pieces:
        raise ConfigError("kernel.pieces must be a nonempty list")
    for idx, pm in enumerate(raw_pieces):
        where = f"kernel.pieces[{idx}]"
        interval = pm.get("interval")
        if (
            not isinstance(interval, (list, tuple))
            or len(interval) != 2
        ):
            raise ConfigError(f"{where}.interval must be [a, b]")
        coeffs_raw = pm.get("coeffs")
        if not isinstance(coeffs_raw, (list, tuple)) or not coeffs_raw:
            raise ConfigError(
                f"{where}.coeffs must list one row-major matrix per power"
            )
        coeffs = np.stack(
            [
                _matrix(c, n, f"{where}.coeffs[{k}]")
                for k, c in enumerate(coeffs_raw)
            ]
        )
        pieces.append(
            Piece(lo=float(interval[0]), hi=float(interval[1]), coeffs=coeffs)
        )
    try:
        return KernelSpec(n=n, h=h, pieces=tuple(pieces))
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from exc


def weight_from_mapping(entries, n: int) -> np.ndarray | None:
    if entries is None:
        return None
    return _matrix(entries, n, "weight")


def _slot_from_mapping(m: dict, where: str) -> ParameterSlot:
    for key in ("name", "range", "points", "targets"):
        if key not in m:
            raise ConfigError(f"{where}.{key} is required")
    rng = m["range"]
    if not isinstance(rng, (list, tuple)) or len(rng) != 2:
        raise ConfigError(f"{where}.range must be [lo, hi]")
    targets = []
    for idx, t in enumerate(m["targets"]):
        twhere = f"{where}.targets[{idx}]"
        try:
            targets.append(
                Injection(
                    piece=int(t.get("piece", 0)),
                    power=int(t.get("power", 0)),
                    row=int(t.get("row", 0)),
                    col=int(t.get("col", 0)),
                    scale=float(t.get("scale", 1.0)),
                    offset=float(t.get("offset", 0.0)),
                )
            )
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"{twhere}: {exc}") from exc
    try:
        return ParameterSlot(
            name=str(m["name"]),
            lo=float(rng[0]),
            hi=float(rng[1]),
            points=int(m["points"]),
            targets=tuple(targets),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def family_from_mapping(base: KernelSpec, m: dict) -> ParameterFamily:
    if "p1" not in m or "p2" not in m:
        raise ConfigError("family.p1 and family.p2 are required")
    try:
        return ParameterFamily(
            base=base,
            p1=_slot_from_mapping(m["p1"], "family.p1"),
            p2=_slot_from_mapping(m["p2"], "family.p2"),
        )
    except ValueError as exc:
        raise ConfigError(f"family: {exc}") from exc


def numerics_from_mapping(m: dict | None) -> ScanNumerics:
    m = m or {}
    known = {
        "n_colloc", "delta", "horizon", "trials", "growth_band", "seed",
        "tolerance_scale", "imag_margin_tol", "omega_samples", "omega_max",
    }
    unknown = set(m) - known
    if unknown:
        raise ConfigError(f"numerics has unknown fields: {sorted(unknown)}")
    try:
        return ScanNumerics(**{k: v for k, v in m.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"numerics: {exc}") from exc
