"""Read-only plotting for hybridkvh run artifacts."""

__version__ = "0.1.0"

from .formats import FormatError, Snapshot, read_snapshot, read_table
from .plots import plot_drift, plot_heatmap, plot_loops, plot_series
