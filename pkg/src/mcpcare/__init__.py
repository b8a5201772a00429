"""Versioned clinical context documents with a hash-chained audit trail.

The package keeps one portable JSON document per patient episode, moves its
task plan through an approval-gated lifecycle, and records every transition
in an append-only ledger that replays to the same state it audits.
"""
from __future__ import annotations

__version__ = "0.1.0"
