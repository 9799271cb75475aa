from __future__ import annotations

import logging
import re
from typing import Any

import yaml

logger = logging.getLogger(__name__)

# YAML 1.1 only resolves exponents with a dot and a signed exponent, so "1e-6" stays a string.
_EXPONENT_FLOAT = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)[eE][+-]?\d+")


def parse_list(value: Any, *, lower: bool = False) -> list[str]:
    """Parse a comma-separated string or an existing list into a list of strings.

    Strips whitespace from each item and filters empty strings.
    With lower=True each item is lowercased.
    """
    if value is None:
        return []
    if isinstance(value, list | tuple | set):
        items = [str(v).strip() for v in value if v is not None]
    else:
        items = [v.strip() for v in str(value).split(",")]
    items = [v for v in items if v]
    if lower:
        items = [v.lower() for v in items]
    return items


def parse_number_list(value: Any, cast=float) -> list:
    """Parse "10,50" or [10, 50] into a list of numbers using cast."""
    return [cast(v) for v in parse_list(value)]


def parse_override(value: str) -> tuple[list[str], Any]:
    """Split "section.key=value" into (["section", "key"], typed value).

    The value is parsed as YAML so "1e-5", "true" and "[10, 50]" get native types.
    """
    if "=" not in value:
        raise ValueError(f"override must be in key=value format, got: {value!r}")
    key, _, raw = value.partition("=")
    key = key.strip()
    if not key or not raw.strip():
        raise ValueError(f"override key and value must be non-empty, got: {value!r}")
    path = [part for part in key.split(".") if part]
    if not path:
        raise ValueError(f"override key is empty, got: {value!r}")
    try:
        parsed = yaml.safe_load(raw)
    except yaml.YAMLError:
        parsed = raw.strip()
    return path, _coerce_exponents(parsed)


def _coerce_exponents(value: Any) -> Any:
    if isinstance(value, str) and _EXPONENT_FLOAT.fullmatch(value.strip()):
        return float(value)
    if isinstance(value, list):
        return [_coerce_exponents(v) for v in value]
    if isinstance(value, dict):
        return {k: _coerce_exponents(v) for k, v in value.items()}
    return value


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Return a copy of raw with every "a.b=c" override written into nested mappings."""
    result = _deep_copy_mapping(raw)
    for override in overrides:
        path, value = parse_override(override)
        node = result
        for part in path[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
                node[part] = child
            elif not isinstance(child, dict):
                raise ValueError(f"cannot set {'.'.join(path)}: '{part}' is not a section")
            node = child
        node[path[-1]] = value
        logger.debug("Applied override %s=%r", ".".join(path), value)
    return result


def _deep_copy_mapping(raw: dict) -> dict:
    return {k: _deep_copy_mapping(v) if isinstance(v, dict) else v for k, v in (raw or {}).items()}
