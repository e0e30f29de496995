"""livesum: grow a threaded discussion, shrink it into living summaries, and
iterate until the top-level summary is a consensus document that still links
back to every underlying comment."""

from .engine import EngineConfig, PageEngine, Service
from .errors import LivesumError
from .model import (
    BLUE_CIRCLE,
    HALF_SQUARE,
    ORANGE_SQUARE,
    YELLOW_CIRCLE,
    Citation,
    Node,
    Page,
)
from .richtext import RichText, as_richtext
from .view import DisplayItem, compute_default_view, sort_view

__version__ = "0.1.0"

__all__ = [
    "BLUE_CIRCLE",
    "Citation",
    "DisplayItem",
    "EngineConfig",
    "HALF_SQUARE",
    "LivesumError",
    "Node",
    "ORANGE_SQUARE",
    "Page",
    "PageEngine",
    "RichText",
    "Service",
    "YELLOW_CIRCLE",
    "as_richtext",
    "compute_default_view",
    "sort_view",
    "__version__",
]
