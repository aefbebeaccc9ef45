"""Seed derivation and logging setup."""

from __future__ import annotations

import hashlib
import logging
import os

import numpy as np


def derive_seed(root: int, name: str) -> int:
    """Derive a stable stream seed from a root seed and a stream name.

    Stable across processes and platforms (unlike hash()).
    """
    digest = hashlib.sha256(f"{root}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def rng_stream(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(derive_seed(root, name)))


def configure_logging() -> None:
    level = os.environ.get("HIPLAN_LOG", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
