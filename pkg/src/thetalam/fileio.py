"""Deterministic text outputs: JSON reports, CSV tables, solution files, SVG figures.

Nothing written here depends on the clock, the host or the thread count,
so reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .geom import HalfDiskGrid, MetricProfile
from .theta_pde import ThetaGraph

SOLUTION_COLUMNS = ("r", "z", "theta")


class SolutionFormatError(OSError):
    """A solution file that cannot be read back."""


# ---------------------------------------------------------------------------
# JSON / CSV


def to_jsonable(obj):
    """Plain Python structure with numpy scalars unwrapped and non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def write_json(path, obj) -> None:
    write_text(path, dumps_json(obj))


def format_float(x: float) -> str:
    """Shortest round-trip repr; empty for non-finite values."""
    x = float(x)
    return repr(x) if math.isfinite(x) else ""


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    write_text(path, csv_text(header, rows))


# ---------------------------------------------------------------------------
# solution files


def solution_header(g: ThetaGraph, version: str, extra: dict | None = None) -> dict:
    head = {
        "format": "thetalam-solution/1",
        "grid_n": g.grid.grid_n,
        "radius": g.grid.radius,
        "metric": g.metric.kind,
        "n_nodes": g.grid.n_nodes,
        "boundary_label": g.bc.label if g.bc is not None else None,
        "boundary_digest": g.bc.digest() if g.bc is not None else None,
        "iterations": g.iterations,
        "residual": g.residual,
        "energy": g.energy,
        "version": version,
    }
    head.update(extra or {})
    return to_jsonable(head)


def solution_text(g: ThetaGraph, version: str, extra: dict | None = None) -> str:
    """One JSON header line, then r,z,theta per node at 17 significant digits."""
    head = json.dumps(solution_header(g, version, extra), sort_keys=True, separators=(",", ":"))
    body = np.column_stack([g.grid.r, g.grid.z, g.theta])
    buf = io.StringIO()
    np.savetxt(buf, body, fmt="%.17g", delimiter=",", header=",".join(SOLUTION_COLUMNS), comments="")
    return head + "\n" + buf.getvalue()


def write_solution(path, g: ThetaGraph, version: str, extra: dict | None = None) -> None:
    write_text(path, solution_text(g, version, extra))


def read_solution(path, grid_cache: dict | None = None):
    """Read a solution file; returns (ThetaGraph, header).

    The mesh is rebuilt from grid_n and radius and checked node by node
    against the stored coordinates.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SolutionFormatError(f"{path}: not UTF-8 text") from exc
    first, _, rest = text.partition("\n")
    try:
        head = json.loads(first)
        grid_n, radius, kind = int(head["grid_n"]), float(head["radius"]), head["metric"]
    except (ValueError, KeyError, TypeError) as exc:
        raise SolutionFormatError(f"{path}: bad header line ({exc})") from None
    lines = rest.splitlines()
    if not lines or lines[0].strip() != ",".join(SOLUTION_COLUMNS):
        raise SolutionFormatError(f"{path}: expected column line {','.join(SOLUTION_COLUMNS)}")
    try:
        body = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as exc:
        raise SolutionFormatError(f"{path}: bad data row ({exc})") from None
    key = (grid_n, radius)
    cache = grid_cache if grid_cache is not None else {}
    if key not in cache:
        try:
            cache[key] = HalfDiskGrid.build(grid_n, radius)
        except ValueError as exc:
            raise SolutionFormatError(f"{path}: {exc}") from None
    grid = cache[key]
    if body.shape != (grid.n_nodes, 3) or not np.array_equal(body[:, :2], grid.nodes):
        raise SolutionFormatError(f"{path}: node table does not match a grid_n={grid_n} mesh")
    try:
        metric = MetricProfile(kind)
    except ValueError as exc:
        raise SolutionFormatError(f"{path}: {exc}") from None
    g = ThetaGraph(grid, body[:, 2].copy(), metric, iterations=int(head.get("iterations", 0)),
                   residual=float(head["residual"]) if head.get("residual") is not None else math.nan)
    return g, head


# ---------------------------------------------------------------------------
# SVG cross sections


def _f(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _polyline(P, color, width, extra=""):
    pts = " ".join(f"{_f(x)},{_f(-y)}" for x, y in P)
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'


def _section_traces(g: ThetaGraph, max_levels: int = 64):
    """Curves where the rotated graph meets the plane of the figure.

    The half-plane phi = 0 (drawn at r >= 0) meets the surface on theta = 0
    mod 2 pi; the half-plane phi = pi (drawn at r <= 0) on theta = pi mod 2 pi.
    """
    from .lam_sim import level_curves

    th = g.theta
    lo, hi = float(np.min(th)), float(np.max(th))
    ks = np.arange(math.ceil(lo / math.pi), math.floor(hi / math.pi) + 1)
    if ks.size > max_levels:
        ks = ks[np.linspace(0, ks.size - 1, max_levels).round().astype(int)]
    out = []
    for k in ks:
        sign = 1.0 if k % 2 == 0 else -1.0
        for pts, _, _ in level_curves(g.grid, th, float(k) * math.pi):
            out.append(pts * np.array([sign, 1.0]))
    return out


def cross_section_svg(estimate, size: int = 600) -> str:
    """Cross section of the limit picture in the plane through the axis.

    Draws the unit circle, every detected rotational leaf together with its
    mirror image across the axis, the blow-up points on the axis, and the
    traces of the last surface of the sequence.
    """
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="-1.050000 -1.050000 2.100000 2.100000">',
        '<circle cx="0.000000" cy="0.000000" r="1.000000" fill="none" stroke="black" stroke-width="0.004000"/>',
    ]
    sols = list(getattr(estimate, "solutions", []) or [])
    leaves = list(getattr(estimate, "rotational_leaves", []) or [])
    K = list(getattr(estimate, "blowup_K", []) or [])
    if sols:
        parts.append('<g id="traces">')
        for P in _section_traces(sols[-1]):
            parts.append(_polyline(P, "#9e9e9e", "0.002000"))
        parts.append("</g>")
    if leaves:
        parts.append('<g id="leaves">')
        for lf in leaves:
            color = "#1f4e9c" if lf.kind == "disk" else "#b3261e"
            for sign in (1.0, -1.0):
                parts.append(_polyline(lf.profile * np.array([sign, 1.0]), color, "0.006000",
                                       f' data-kind="{lf.kind}"'))
        parts.append("</g>")
    if K:
        parts.append('<g id="blowup">')
        for k in K:
            parts.append(f'<circle cx="0.000000" cy="{_f(-k)}" r="0.015000" fill="#000000"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_cross_section(estimate, path) -> str:
    """Write the cross-section SVG of a lamination estimate; returns the text."""
    text = cross_section_svg(estimate)
    write_text(path, text)
    return text
