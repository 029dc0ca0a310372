"""Workload Automation Engine: CDN edge container orchestration and PoP simulation."""

__version__ = "1.0.0"
