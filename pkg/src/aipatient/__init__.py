"""Simulated-patient system: EHR-derived knowledge graph, graph query engine,
six-agent interview workflow, and its evaluation framework."""

__version__ = "0.1.0"
