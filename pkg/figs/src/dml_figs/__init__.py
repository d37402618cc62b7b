"""Publication-style figures from dml experiment CSVs."""

__version__ = "0.1.0"
