"""HTTP orchestration service wrapping the pipeline run manager."""

from .app import create_app

__all__ = ["create_app"]
