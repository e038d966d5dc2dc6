"""Figure rendering for fairdyn CSV artifacts."""

from .render import (
    BASIN_COLUMNS,
    EQUILIBRIA_COLUMNS,
    PHASE_COLUMNS,
    TRAJECTORY_COLUMNS,
    PlotJob,
    RenderError,
    RenderResult,
    render,
)

__all__ = [
    "BASIN_COLUMNS",
    "EQUILIBRIA_COLUMNS",
    "PHASE_COLUMNS",
    "TRAJECTORY_COLUMNS",
    "PlotJob",
    "RenderError",
    "RenderResult",
    "render",
]
__version__ = "0.1.0"
