"""Chart emission: CSV records and a static SVG scatter.

The CSV is the machine-readable contract (documented in the README) and
is byte-deterministic for a fixed configuration and seed: floats are
written with %.17g and no timestamps or timings appear.  The SVG is
presentation-only.
"""

from __future__ import annotations

import os

import numpy as np

from .scan import BoundaryCurve, ScanResult

_VERDICT_COLOR = {
    "consistent-with-stability": "#2e8b57",
    "certified-unstable": "#c0392b",
    "inconclusive": "#95a5a6",
}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def scan_csv_text(result: ScanResult) -> str:
    """One row per grid point; eigenvalue columns follow the r schedule."""
    cols = ["p1", "p2", "verdict", "verdict_r", "oracle", "imag_margin", "reason"]
    cols += [f"min_eig_r{r}" for r in result.r_schedule]
    lines = [",".join(cols)]
    for rec in result.records:
        row = [
            _fmt(rec.p1),
            _fmt(rec.p2),
            rec.verdict,
            str(rec.verdict_r) if rec.verdict_r is not None else "",
            rec.oracle or "",
            _fmt(rec.imag_margin) if np.isfinite(rec.imag_margin) else "",
            (rec.reason or "").replace(",", ";"),
        ]
        for r in result.r_schedule:
            val = rec.min_eigenvalues.get(r)
            row.append(_fmt(val) if val is not None else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def boundary_csv_text(curves: list[BoundaryCurve]) -> str:
    lines = ["curve,kind,omega,p1,p2"]
    for idx, curve in enumerate(curves):
        for p1, p2, omega in curve.points:
            lines.append(
                f"{idx},{curve.kind},{_fmt(omega)},{_fmt(p1)},{_fmt(p2)}"
            )
    return "\n".join(lines) + "\n"


def scan_svg_text(
    result: ScanResult,
    boundaries: list[BoundaryCurve] | None = None,
    size: int = 640,
) -> str:
    """Scatter of verdicts with boundary overlays."""
    margin = 60
    lo1, hi1 = float(result.p1_values[0]), float(result.p1_values[-1])
    lo2, hi2 = float(result.p2_values[0]), float(result.p2_values[-1])
    span1 = hi1 - lo1 or 1.0
    span2 = hi2 - lo2 or 1.0

    def sx(v: float) -> float:
        return margin + (v - lo1) / span1 * (size - 2 * margin)

    def sy(v: float) -> float:
        return size - margin - (v - lo2) / span2 * (size - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{size - 2 * margin}" '
        f'height="{size - 2 * margin}" fill="none" stroke="black"/>',
    ]
    radius = max(2.0, (size - 2 * margin) / max(len(result.p1_values), len(result.p2_values)) * 0.3)
    for rec in result.records:
        color = _VERDICT_COLOR.get(rec.verdict, "#2c3e50")
        parts.append(
            f'<circle cx="{sx(rec.p1):.2f}" cy="{sy(rec.p2):.2f}" '
            f'r="{radius:.2f}" fill="{color}"/>'
        )
    for curve in boundaries or []:
        pts = [
            (sx(a), sy(b))
            for a, b, _ in curve.points
            if lo1 - 0.02 * span1 <= a <= hi1 + 0.02 * span1
            and lo2 - 0.02 * span2 <= b <= hi2 + 0.02 * span2
        ]
        if len(pts) >= 2:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
            parts.append(
                f'<polyline points="{path}" fill="none" stroke="black" '
                'stroke-width="1.2"/>'
            )
        elif len(pts) == 1:
            parts.append(
                f'<circle cx="{pts[0][0]:.2f}" cy="{pts[0][1]:.2f}" r="1.5" fill="black"/>'
            )
    for v, anchor in ((lo1, "start"), (hi1, "end")):
        parts.append(
            f'<text x="{sx(v):.2f}" y="{size - margin + 20}" font-size="12" '
            f'text-anchor="{anchor}">{v:g}</text>'
        )
    for v in (lo2, hi2):
        parts.append(
            f'<text x="{margin - 8}" y="{sy(v):.2f}" font-size="12" '
            f'text-anchor="end">{v:g}</text>'
        )
    parts.append(
        f'<text x="{size / 2:.0f}" y="{size - margin + 40}" font-size="13" '
        f'text-anchor="middle">{result.p1_name}</text>'
    )
    parts.append(
        f'<text x="18" y="{size / 2:.0f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {size / 2:.0f})">{result.p2_name}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_chart(
    result: ScanResult,
    directory: str,
    formats=("csv", "svg"),
    boundaries: list[BoundaryCurve] | None = None,
    basename: str = "scan",
) -> list[str]:
    """Write the requested outputs; returns the created paths."""
    bad = set(formats) - {"csv", "svg"}
    if bad:
        raise ValueError(f"unknown chart formats: {sorted(bad)}")
    os.makedirs(directory, exist_ok=True)
    paths = []
    try:
        if "csv" in formats:
            path = os.path.join(directory, f"{basename}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(scan_csv_text(result))
            paths.append(path)
        if "svg" in formats:
            path = os.path.join(directory, f"{basename}.svg")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(scan_svg_text(result, boundaries))
            paths.append(path)
    except OSError as exc:
        raise IOError(f"failed writing chart output under {directory}: {exc}") from exc
    return paths
