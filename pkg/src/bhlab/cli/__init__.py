"""Batch experiment runner (``bhlab solve|barrier-verify|estimate|sweep|report``).

Importing this package stays light (no numpy) so the thread cap can be set
before the numerical stack loads.
"""

from .config import ConfigError, load_config, validate_config

__all__ = ["ConfigError", "load_config", "validate_config"]
