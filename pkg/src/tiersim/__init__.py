"""Deterministic simulator of memory tiering under virtualization.

Models two-level address translation (guest 4 KB pages over host 2 MB
regions), hotness telemetry, guest-side consolidation of scattered hot
pages, and host-side tier placement policies.
"""

__version__ = "0.1.0"

from .driver import RunReport, Scenario, export, load_scenario, run

__all__ = ["RunReport", "Scenario", "export", "load_scenario", "run", "__version__"]
