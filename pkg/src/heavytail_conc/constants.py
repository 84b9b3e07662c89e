"""Versioned registry of the numerical constants used by the bound formulas.

Each entry carries a value, a status (``derived``, ``fitted``, ``fixed`` or
``placeholder``) and a short provenance note.  Values can be overridden per
call through :func:`get` or globally with :func:`override`.
"""

from __future__ import annotations

import contextlib
import json
import threading
from dataclasses import dataclass
from importlib import resources


@dataclass(frozen=True)
class ConstantEntry:
    name: str
    value: float
    status: str
    note: str


def _load():
    text = resources.files("heavytail_conc").joinpath("data/constants.json").read_text()
    raw = json.loads(text)
    entries = {k: ConstantEntry(k, float(v["value"]), v["status"], v["note"])
               for k, v in raw["constants"].items()}
    return raw["version"], entries


VERSION, _DEFAULTS = _load()
_overrides: dict[str, float] = {}
_lock = threading.Lock()


def get(name: str, value: float | None = None) -> float:
    """Return ``value`` if given, else the active registry value for ``name``."""
    if value is not None:
        return float(value)
    if name not in _DEFAULTS:
        raise KeyError(f"unknown constant {name!r}")
    return _overrides.get(name, _DEFAULTS[name].value)


def entry(name: str) -> ConstantEntry:
    return _DEFAULTS[name]


def names():
    return sorted(_DEFAULTS)


def snapshot(keys=None) -> dict:
    """Current values as a plain dict (for reports)."""
    keys = names() if keys is None else keys
    return {k: get(k) for k in keys}


def set_override(name: str, value: float) -> None:
    if name not in _DEFAULTS:
        raise KeyError(f"unknown constant {name!r}")
    with _lock:
        _overrides[name] = float(value)


def clear_overrides() -> None:
    with _lock:
        _overrides.clear()


@contextlib.contextmanager
def override(**values):
    """Temporarily replace registry values inside a ``with`` block."""
    with _lock:
        saved = dict(_overrides)
    try:
        for k, v in values.items():
            set_override(k, v)
        yield
    finally:
        with _lock:
            _overrides.clear()
            _overrides.update(saved)
