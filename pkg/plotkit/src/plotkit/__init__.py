from .binning import bin_edges, bin_series
from .data import SchemaError, read_episodes_csv, read_exchange_events, read_sweep_csv
from .render import FIGURE_KINDS, FigureSpec, RenderResult, render

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "RenderResult",
    "SchemaError",
    "bin_edges",
    "bin_series",
    "read_episodes_csv",
    "read_exchange_events",
    "read_sweep_csv",
    "render",
]
