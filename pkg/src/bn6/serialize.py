"""Deterministic artifact writers: CSV/JSON with provenance, atomic renames.

Numbers in CSV cells are printed with %.17g so that doubles round-trip
exactly; JSON numbers use Python's shortest round-trip representation.
Every artifact opens with the resolved configuration and the package
version, so a file is traceable to the run that produced it without any
timestamps (identical configuration must give identical bytes).
"""

from __future__ import annotations

import json
import math
import os
import tempfile

from . import __version__


def fmt(x) -> str:
    """One CSV cell: %.17g for floats, plain text otherwise."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def provenance_dict(config: dict | None) -> dict:
    return {"version": __version__,
            "config": {} if config is None else dict(config)}


def _provenance_lines(config: dict | None) -> list[str]:
    lines = [f"# bn6 {__version__}"]
    for key in sorted(config or {}):
        lines.append(f"# {key} = {fmt(config[key])}")
    return lines


def write_atomic(path: str, text: str) -> None:
    """Write text to path via a same-directory temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: str, rows, config: dict | None = None) -> str:
    """CSV with provenance comment lines above the exact pinned header."""
    lines = _provenance_lines(config)
    lines.append(header)
    ncols = header.count(",") + 1
    for row in rows:
        if len(row) != ncols:
            raise ValueError(f"row width {len(row)} != header width {ncols}")
        lines.append(",".join(fmt(cell) for cell in row))
    return "\n".join(lines) + "\n"


def _sanitize(obj):
    """Non-finite floats become strings; JSON has no tokens for them."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def json_text(payload: dict, config: dict | None = None) -> str:
    doc = {"provenance": provenance_dict(config)}
    doc.update(payload)
    return json.dumps(_sanitize(doc), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def radial_fn_rows(fn):
    return [(float(r), float(u), float(du))
            for r, u, du in zip(fn.grid.nodes, fn.values, fn.derivative)]


def write_radial_fn(path: str, fn, config: dict | None = None) -> None:
    write_atomic(path, csv_text("r,value,derivative",
                                radial_fn_rows(fn), config))


def branch_rows(branch):
    return [(float(p.amplitude), float(p.lam), float(p.residual))
            for p in branch.points]


def write_branch(path: str, branch, config: dict | None = None) -> None:
    write_atomic(path, csv_text("amplitude,lambda,residual",
                                branch_rows(branch), config))


def branch_point_dict(point) -> dict:
    return {"N": point.dimension, "lambda": point.lam,
            "amplitude": point.amplitude, "nodal_count": point.nodal_count,
            "residual": point.residual, "grid_n": point.grid_n}


def expansion_rows(report):
    return [(row.eps, row.mu, row.j_ansatz, row.j_base,
             row.e_pred, row.residual_l32) for row in report.rows]


def write_expansion(path: str, report, config: dict | None = None) -> None:
    write_atomic(path, csv_text("eps,mu_bar,J_quad,c0_quad,E_pred,residual_L32",
                                expansion_rows(report), config))


def rows_as_json(header: str, rows) -> list[dict]:
    """The same table a CSV would hold, as a list of objects."""
    names = header.split(",")
    return [dict(zip(names, row)) for row in rows]
