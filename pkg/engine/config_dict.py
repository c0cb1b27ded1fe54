from collections import OrderedDict

try:
    from addict import Dict
except ImportError:
    raise ImportError("addict is required. Install it with: pip install addict")


class ConfigDict(Dict):
    """Run settings with attribute access.

    Nested mappings become ``ConfigDict`` on assignment. Unlike a plain
    ``addict.Dict``, reading a key that is not there raises instead of
    creating an empty child, so a misspelt setting cannot pass silently.
    """

    def __missing__(self, name):
        raise KeyError(name)

    def __getattr__(self, name):
        try:
            return super().__getattr__(name)
        except KeyError:
            raise AttributeError(f"No setting '{name}'")

    @classmethod
    def _hook(cls, item):
        if type(item) in (dict, OrderedDict):
            return cls(item)
        if isinstance(item, (list, tuple)):
            return type(item)(cls._hook(elem) for elem in item)
        return item

    def __setattr__(self, name, value):
        super().__setattr__(name, self._hook(value))

    def __setitem__(self, name, value):
        super().__setitem__(name, self._hook(value))

    def to_dict(self) -> dict:
        """Plain dicts and lists all the way down, as YAML would give them."""

        def _plain(data):
            if isinstance(data, dict):
                return {key: _plain(value) for key, value in dict.items(data)}
            if isinstance(data, (list, tuple)):
                return type(data)(_plain(item) for item in data)
            return data

        return _plain(self)
