from .app import app_from_config, create_app
from .state import AppState, ServiceConfig

__all__ = ["AppState", "ServiceConfig", "app_from_config", "create_app"]
