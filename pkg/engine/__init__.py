from engine.config_dict import ConfigDict
from .config import Config

__all__ = ["ConfigDict", "Config"]
