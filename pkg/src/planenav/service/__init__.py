"""HTTP service wrapping the navigation stack."""

from .app import app, create_app

__all__ = ["app", "create_app"]
