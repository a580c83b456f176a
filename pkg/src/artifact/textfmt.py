"""Small text-formatting helpers shared by the file writers."""

from __future__ import annotations


def fmt9(value: float) -> str:
    """Format a number with 9 significant digits."""
    return format(float(value), ".9g")


def bool_str(value: bool) -> str:
    return "true" if value else "false"


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")
