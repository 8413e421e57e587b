from .app import ServiceConfig, create_app  # noqa: F401
from .store import Store  # noqa: F401
