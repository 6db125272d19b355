"""Built-in domains: fetch, nav, sr, explore and micro fixtures."""
from __future__ import annotations

import importlib

from ..core import Domain
from . import micro

BENCHMARKS = ("fetch", "nav", "sr", "explore")


def names() -> list[str]:
    return list(BENCHMARKS) + list(micro.BUILDERS)


def build(name: str, **params) -> Domain:
    """Build and validate a domain by name."""
    if name in BENCHMARKS:
        return importlib.import_module(f"{__name__}.{name}").build(**params)
    try:
        factory = micro.BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown domain {name!r}; choose from {names()}") from None
    return factory(**params)
