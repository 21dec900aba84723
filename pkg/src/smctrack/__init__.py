"""smctrack: two-stage similarity-matching multi-object tracker."""

__version__ = "0.1.0"
