"""Render fairdyn CSV artifacts into figures.

Consumes only the documented CSV schemas (phase fields, trajectories,
basin maps, and the equilibria overlay); there is no in-process coupling
to the producing package. Inputs are never mutated and output images are
written atomically (temp file, then rename).
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

PHASE_COLUMNS = ["mu_c", "mu_nc", "u", "v", "flag"]
TRAJECTORY_COLUMNS = ["t", "mu_c", "mu_nc", "theta_c", "theta_nc", "P_c", "P_nc", "eta"]
BASIN_COLUMNS = ["mu_c", "mu_nc", "attractor", "steps"]
EQUILIBRIA_COLUMNS = ["label", "mu_c", "mu_nc", "residual"]

KINDS = ("phase", "trajectory", "basin")

DEFAULT_ARROW_SCALE = 0.5
CIRCLE_RADIUS = 0.2


class RenderError(ValueError):
    """Bad input: schema mismatch, empty file, or unusable values."""


@dataclass(frozen=True)
class PlotJob:
    input_path: str
    kind: str
    out_path: str
    equilibria_path: str | None = None
    axis_limits: tuple[float, float, float, float] | None = None
    arrow_scale: float = DEFAULT_ARROW_SCALE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown kind {self.kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class RenderResult:
    kind: str
    rows: int
    drawn: int                      # arrows (phase), segments+1 (trajectory), cells (basin)
    circles: tuple[tuple[float, float], ...]
    out_path: str


def read_rows(path: str, columns: list[str]) -> list[dict]:
    """Load a CSV whose header must match the documented schema exactly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: no rows") from None
        if header != columns:
            missing = [c for c in columns if c not in header]
            extra = [c for c in header if c not in columns]
            if missing:
                raise RenderError(f"{path}: schema mismatch: missing column {missing[0]!r}")
            raise RenderError(
                f"{path}: schema mismatch: unexpected column "
                f"{extra[0]!r}" if extra else f"{path}: schema mismatch: column order {header}")
        rows = [dict(zip(columns, row)) for row in reader if row]
    if not rows:
        raise RenderError(f"{path}: no rows")
    return rows


def _floats(rows: list[dict], key: str) -> list[float]:
    try:
        return [float(r[key]) for r in rows]
    except ValueError as exc:
        raise RenderError(f"column {key!r}: {exc}") from exc


def _load_equilibria(path: str) -> list[tuple[str, float, float]]:
    rows = read_rows(path, EQUILIBRIA_COLUMNS)
    return [(r["label"], float(r["mu_c"]), float(r["mu_nc"])) for r in rows]


def _atomic_save(fig, out_path: str) -> None:
    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    suffix = os.path.splitext(out_path)[1] or ".png"
    fd, tmp = tempfile.mkstemp(suffix=suffix, dir=directory)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=150)
        os.replace(tmp, out_path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def render(job: PlotJob) -> RenderResult:
    """Draw the requested figure and save it atomically.

    Returns a summary with the number of drawn elements and the circle
    centers, so callers can verify the geometry contract.
    """
    circles = _load_equilibria(job.equilibria_path) if job.equilibria_path else []

    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        if job.kind == "phase":
            rows = read_rows(job.input_path, PHASE_COLUMNS)
            ok = [r for r in rows if r["flag"] == "ok"]
            x, y = _floats(ok, "mu_c"), _floats(ok, "mu_nc")
            u, v = _floats(ok, "u"), _floats(ok, "v")
            # scale divides arrow lengths; a factor of 0.5 means scale = 2
            ax.quiver(x, y, u, v, angles="xy", scale_units="xy",
                      scale=1.0 / job.arrow_scale, color="#4d7fb3", width=0.004)
            drawn = len(ok)
        elif job.kind == "trajectory":
            rows = read_rows(job.input_path, TRAJECTORY_COLUMNS)
            x, y = _floats(rows, "mu_c"), _floats(rows, "mu_nc")
            ax.plot(x, y, "-", color="#4d7fb3", linewidth=1.2)
            ax.plot(x[0], y[0], "o", color="#4d7fb3", markersize=4)
            ax.plot(x[-1], y[-1], "s", color="#b3544d", markersize=5)
            drawn = len(rows)
        else:
            rows = read_rows(job.input_path, BASIN_COLUMNS)
            x, y = _floats(rows, "mu_c"), _floats(rows, "mu_nc")
            labels = [r["attractor"] for r in rows]
            palette = plt.get_cmap("tab10")
            order = sorted(set(labels))
            color_of = {lab: palette(i % 10) for i, lab in enumerate(order)}
            for lab in order:
                xs = [a for a, l in zip(x, labels) if l == lab]
                ys = [b for b, l in zip(y, labels) if l == lab]
                ax.scatter(xs, ys, s=36, marker="s",
                           color=color_of[lab], label=lab, linewidths=0)
            ax.legend(loc="upper right", fontsize=7)
            drawn = len(rows)

        for _, cx, cy in circles:
            ax.add_patch(plt.Circle((cx, cy), CIRCLE_RADIUS, fill=False,
                                    color="#d9762b", linewidth=1.5))

        ax.set_xlabel(r"$\mu_c$")
        ax.set_ylabel(r"$\mu_{\neg c}$")
        if job.axis_limits is not None:
            xmin, xmax, ymin, ymax = job.axis_limits
            ax.set_xlim(xmin, xmax)
            ax.set_ylim(ymin, ymax)
        ax.set_aspect("equal", adjustable="box")
        _atomic_save(fig, job.out_path)
    finally:
        plt.close(fig)

    return RenderResult(
        kind=job.kind, rows=len(rows), drawn=drawn,
        circles=tuple((cx, cy) for _, cx, cy in circles),
        out_path=job.out_path,
    )
