"""Artifact writers: JSON, CSV with round-trip precision, optional SVG."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence


def _fmt(v) -> str:
    if isinstance(v, (int, str)) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    return format(v, ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, obj) -> Path:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_band_svg(path: Path, x, mean, se, title: str = "", xlabel: str = "s") -> Path:
    """Line chart of mean with a +/- SE band."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    x, mean, se = map(np.asarray, (x, mean, se))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(x, mean - se, mean + se, alpha=0.3)
    ax.plot(x, mean, marker="o")
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_curve_svg(path: Path, points, title: str = "") -> Path:
    """Planar curve plot (real vs imaginary part)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    pts = np.asarray(points, dtype=complex)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(pts.real, pts.imag, lw=0.8)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
