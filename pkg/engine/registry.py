"""
Registry of subclone models and simulation presets.
Entries register themselves through decorators when their module is imported.
"""

import importlib
import inspect
from typing import Any, Callable, Dict, List, Optional

from loguru import logger

from core.errors import ConfigError


class Registry:
    """
    Name -> class (or factory function) mapping with lazy module loading.
    """

    def __init__(
        self,
        name: str,
        build_func: Optional[Callable] = None,
        locations: List[str] = None,
    ):
        self._name = name
        self._module_dict: Dict[str, Any] = {}
        self._locations = locations or []
        self._imported = False
        self._build_func = build_func or self._default_build_func

    def register_module(self, name: Optional[str] = None, force: bool = False):
        """
        Registration decorator

        Args:
            name: Registration name, defaults to the object's __name__
            force: Whether to overwrite an existing registration
        """

        def _register(obj):
            module_name = name or obj.__name__

            if module_name in self._module_dict and not force:
                raise KeyError(f"'{module_name}' is already registered in {self._name}")

            self._module_dict[module_name] = obj
            return obj

        return _register

    def get(self, name: str) -> Optional[Any]:
        """
        Get a registered entry, importing the known locations first if needed.
        """
        if name not in self._module_dict:
            self._import_modules()
        return self._module_dict.get(name)

    def _import_modules(self):
        if self._imported:
            return

        for location in self._locations:
            try:
                importlib.import_module(location)
                logger.debug(f"Imported {location}")
            except ImportError as e:
                logger.warning(f"Failed to import {location}: {e}")

        self._imported = True

    def build(self, cfg: Dict[str, Any]) -> Any:
        """
        Build an object from a dictionary with a 'type' field.
        """
        return self._build_func(cfg, self)

    def _default_build_func(self, cfg: Dict[str, Any], registry: "Registry") -> Any:
        cfg = dict(cfg)

        if "type" not in cfg:
            raise ConfigError("Config must contain 'type' field")

        obj_type = cfg.pop("type")
        obj = registry.get(obj_type)

        if obj is None:
            raise ConfigError(
                f"'{obj_type}' not found in {self._name} registry. "
                f"Available: {registry.list_modules()}"
            )

        # Classes are filtered on __init__, factory functions on their own signature
        target = obj.__init__ if inspect.isclass(obj) else obj
        signature = inspect.signature(target)
        valid_params = {}
        takes_kwargs = False

        for param_name, param in signature.parameters.items():
            if param_name == "self":
                continue

            if param.kind == inspect.Parameter.VAR_KEYWORD:
                takes_kwargs = True
                continue

            if param_name in cfg:
                valid_params[param_name] = cfg.pop(param_name)
            elif param.default is inspect.Parameter.empty:
                raise ConfigError(
                    f"Required parameter '{param_name}' not provided for {obj_type}"
                )

        # **kwargs forwards what remains (subclass constructors pass it on to the base)
        if takes_kwargs:
            valid_params.update(cfg)
        elif cfg:
            logger.debug(f"Ignoring parameters {sorted(cfg)} for {obj_type}")

        return obj(**valid_params)

    def list_modules(self) -> List[str]:
        self._import_modules()
        return sorted(self._module_dict.keys())

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    def __len__(self) -> int:
        return len(self._module_dict)

    def __repr__(self) -> str:
        return f"Registry(name={self._name}, modules={len(self._module_dict)})"


MODELS = Registry(
    "model",
    locations=[
        "model.flat.flat",
        "model.purity.purity",
        "model.tree.tree",
    ],
)
PRESETS = Registry("preset", locations=["simulate.presets"])


def register_model(name: Optional[str] = None, force: bool = False):
    """Register model"""
    return MODELS.register_module(name, force)


def register_preset(name: Optional[str] = None, force: bool = False):
    """Register simulation preset"""
    return PRESETS.register_module(name, force)
