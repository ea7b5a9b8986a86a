"""Deterministic seed fan-out: one top-level seed, one derived seed per stage."""

from __future__ import annotations

import hashlib


def stage_seed(seed: int, stage: str) -> int:
    """Derive a 31-bit stage seed from the run seed and the stage name."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % (2**31)
