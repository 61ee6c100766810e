"""Segmented CNN wildfire detection: engine, model, imaging, pipeline and cost model."""

__version__ = "0.1.0"
