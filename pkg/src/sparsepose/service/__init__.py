"""FastAPI service wrapping the synthesis engine."""

from .app import Engine, ServiceSettings, create_app

__all__ = ["Engine", "ServiceSettings", "create_app"]
