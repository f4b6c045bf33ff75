"""Eigenfunctions on the sphere with prescribed nodal configurations, the
compatible metrics that realise them, and the supporting combinatorics."""

from .ovals import OvalConfig, format_config, is_equivalent, parse_config

__all__ = ["OvalConfig", "parse_config", "format_config", "is_equivalent"]
__version__ = "0.1.0"
