"""Discrete-event simulator for a two-cell industrial TSN network under link faults."""

__version__ = "0.1.0"

from .network import Network, RunRecord, run_scenario  # noqa: E402

__all__ = ["Network", "RunRecord", "run_scenario", "__version__"]
