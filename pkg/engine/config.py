import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import yaml

from core.errors import ConfigError
from engine.config_dict import ConfigDict

RESERVED_KEYS = ["filename", "text"]


class Config:
    """Settings of one run, read from a flat YAML or JSON mapping.

    Keys are read as attributes or items. ``validate_keys`` turns every key
    outside the allowed set into a ``ConfigError``.

    Examples:
        >>> cfg = Config(dict(model="flat", iters=100))
        >>> cfg.iters
        100
        >>> cfg = Config.fromfile("configs/sim1.yml")
        >>> cfg.preset
        'sim1'
    """

    def __init__(self, cfg_dict: Optional[dict] = None, filename: Optional[Union[str, Path]] = None):
        if cfg_dict is None:
            cfg_dict = {}
        elif not isinstance(cfg_dict, dict):
            raise ConfigError(f"Config must be a mapping, got {type(cfg_dict).__name__}")
        for key in cfg_dict:
            if key in RESERVED_KEYS:
                raise ConfigError(f"'{key}' is reserved and cannot be a config key")

        filename = str(filename) if filename is not None else None
        text = ""
        if filename and os.path.exists(filename):
            with open(filename, encoding="utf-8") as f:
                text = f.read()

        super().__setattr__("_cfg_dict", ConfigDict(cfg_dict))
        super().__setattr__("_filename", filename)
        super().__setattr__("_text", text)

    @staticmethod
    def fromfile(filename: Union[str, Path]) -> "Config":
        """Build a Config from a .yml/.yaml or .json file."""
        filename = str(filename)
        if not os.path.exists(filename):
            raise ConfigError(f"Config file '{filename}' not found")

        file_ext = os.path.splitext(filename)[1].lower()
        if file_ext not in (".json", ".yml", ".yaml"):
            raise ConfigError(f"Unsupported config file format: {file_ext}")
        try:
            with open(filename, "r", encoding="utf-8") as f:
                cfg_dict = json.load(f) if file_ext == ".json" else yaml.safe_load(f) or {}
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot parse config file '{filename}': {e}") from e

        return Config(cfg_dict, filename=filename)

    @property
    def filename(self) -> Optional[str]:
        return self._filename

    @property
    def text(self) -> str:
        return self._text

    def __repr__(self):
        return f"Config (path: {self.filename}): {self._cfg_dict.__repr__()}"

    def __len__(self):
        return len(self._cfg_dict)

    def __getattr__(self, name: str) -> Any:
        return getattr(self._cfg_dict, name)

    def __getitem__(self, name):
        return self._cfg_dict[name]

    def __contains__(self, name) -> bool:
        return name in self._cfg_dict

    def __iter__(self):
        return iter(self._cfg_dict)

    def get(self, key: str, default: Any = None) -> Any:
        value = self._cfg_dict.get(key, default)
        return value.to_dict() if isinstance(value, ConfigDict) else value

    def validate_keys(self, allowed: Iterable[str]) -> None:
        """Raise ConfigError naming every key outside ``allowed``."""
        unknown = sorted(set(self._cfg_dict) - set(allowed))
        if unknown:
            where = f"'{self.filename}'" if self.filename else "config"
            raise ConfigError(f"Unknown keys in {where}: {unknown}")

    def pick(self, keys: Iterable[str]) -> Dict[str, Any]:
        """The given keys that the file sets, as plain values."""
        return {key: self.get(key) for key in keys if key in self._cfg_dict}

    def to_dict(self) -> dict:
        return self._cfg_dict.to_dict()
