"""Small shared helpers: canonical JSON and seed derivation."""

from __future__ import annotations

import json
from typing import Any

import numpy as np


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def canonical_json(obj: Any) -> str:
    """Deterministic JSON encoding: sorted keys, no whitespace.

    Two structurally equal objects always produce byte-identical strings,
    which is what model fingerprints and bundle hashes rely on.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, default=_jsonable)


def derive_seed(master: int, stream: int) -> int:
    """Deterministically derive an independent child seed from a master seed.

    Each (master, stream) pair maps to a stable 63-bit integer, so sessions
    can hand distinct reproducible seeds to each explainer.
    """
    ss = np.random.SeedSequence(entropy=master, spawn_key=(stream,))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> 1)
