"""dockscore: graph-transformer surrogate models for molecular docking scores."""

__version__ = "0.1.0"
