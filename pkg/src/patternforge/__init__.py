"""patternforge: reproducible benchmark toolkit for in-context image copy detection."""

__version__ = "0.1.0"
