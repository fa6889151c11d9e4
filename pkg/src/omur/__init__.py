"""Link-level simulation and outage analysis of opportunistic reflection in multi-RIS uplinks."""

__version__ = "0.1.0"
