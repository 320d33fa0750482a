"""HTTP facade over the solver library and experiment harness."""

from .app import app, create_app

__all__ = ["app", "create_app"]
