"""Canonical JSON byte form and RFC-3339 timestamp helpers.

Canonical form: object keys sorted, no insignificant whitespace, UTF-8,
floats in shortest round-trip repr, timestamps as UTC strings with a
trailing ``Z``. Equal values always produce identical bytes, so SHA-256
digests of canonical bytes are stable identities.
"""
from __future__ import annotations

import hashlib
import json
import re
from datetime import datetime, timezone
from typing import Any

ZERO_DIGEST = "0" * 64

# Exact surface form matters: hash chains recompute bodies from parsed
# values, so any accepted spelling must reformat to the identical string.
_RFC3339 = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d{1,6})?(?:Z|[+-]\d{2}:\d{2})\Z")
_FRACTION = re.compile(r"\.(\d+)")


def canonical_bytes(tree: Any) -> bytes:
    """Serialize a JSON tree to its canonical byte form."""
    return json.dumps(
        tree, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def digest(data: bytes) -> str:
    """Lowercase hex SHA-256 of raw bytes."""
    return hashlib.sha256(data).hexdigest()


def digest_tree(tree: Any) -> str:
    """Digest of a JSON tree's canonical bytes."""
    return digest(canonical_bytes(tree))


def format_timestamp(ts: datetime) -> str:
    """Render an aware datetime as an RFC-3339 UTC string with trailing Z."""
    if ts.tzinfo is None:
        raise ValueError("naive datetime cannot be canonicalized")
    ts = ts.astimezone(timezone.utc)
    base = ts.strftime("%Y-%m-%dT%H:%M:%S")
    if ts.microsecond:
        frac = f"{ts.microsecond:06d}".rstrip("0")
        base += f".{frac}"
    return base + "Z"


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC-3339 timestamp; accepts Z or an explicit UTC offset."""
    if not isinstance(text, str) or not _RFC3339.fullmatch(text):
        raise ValueError(f"not an RFC-3339 timestamp: {text!r}")
    normalized = text[:-1] + "+00:00" if text.endswith("Z") else text
    match = _FRACTION.search(normalized)
    if match:
        # fromisoformat on older interpreters wants exactly 3 or 6 digits.
        digits = match.group(1)
        normalized = f"{normalized[:match.start(1)]}{digits.ljust(6, '0')}{normalized[match.end(1):]}"
    parsed = datetime.fromisoformat(normalized)
    if parsed.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    return parsed.astimezone(timezone.utc)
