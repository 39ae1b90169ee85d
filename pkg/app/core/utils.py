from __future__ import annotations

from typing import List


def coerce_bool(value, default: bool = True) -> bool:
    """Best-effort conversion of truthy configuration values to booleans."""

    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        normalized = value.strip().lower()
        if normalized in {"true", "1", "yes", "on"}:
            return True
        if normalized in {"false", "0", "no", "off"}:
            return False
        return default
    if value is None:
        return default
    try:
        return bool(int(value))
    except (TypeError, ValueError):
        return bool(value)


def parse_dims(text: str) -> List[int]:
    """Parse ``"2,4,8"`` or an inclusive range ``"2:6"`` into dimensions."""

    cleaned = (text or "").strip()
    if not cleaned:
        raise ValueError("dimension list is empty")
    if ":" in cleaned:
        start_text, _, stop_text = cleaned.partition(":")
        start, stop = int(start_text), int(stop_text)
        if stop < start:
            raise ValueError(f"dimension range {cleaned!r} is empty")
        dims = list(range(start, stop + 1))
    else:
        dims = [int(part) for part in cleaned.split(",") if part.strip()]
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"dimensions must be positive integers, got {cleaned!r}")
    return dims

