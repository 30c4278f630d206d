"""In-process and on-disk caching of class tables.

Set ``SETSHAPING_CACHE_DIR`` to persist tables between runs. Each table is
stored as one JSON document::

    {
      "format": "setshaping-class-table",
      "version": 1,
      "m": 3, "length": 10, "key_mode": "empirical",
      "probs": null | ["1/2", "0.3", ...],
      "groups": [[[10, 0, 0]], [[9, 1, 0]], ...],
      "sha256": "<hex digest of the document without this field>"
    }

``groups`` lists the members of every tie group in ascending information
order (sorted partitions in empirical mode, count vectors in model mode).
Sizes, offsets and information values are recomputed on load and the total
is checked against ``m**length``; a document with a bad checksum or
version is ignored and rebuilt.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .source_model import Ensemble
from .typeclasses import (
    DEFAULT_CAP,
    EMPIRICAL,
    ClassTable,
    build_class_table,
    table_from_members,
)

log = logging.getLogger(__name__)

CACHE_ENV = "SETSHAPING_CACHE_DIR"
FORMAT_NAME = "setshaping-class-table"
FORMAT_VERSION = 1

_memory: dict = {}
_lock = threading.Lock()


def _prob_str(p) -> str:
    return f"{p.numerator}/{p.denominator}" if isinstance(p, Fraction) else repr(p)


def _parse_prob(s: str):
    return Fraction(s) if "/" in s else float(s)


def _digest(doc: dict) -> str:
    body = json.dumps({k: v for k, v in doc.items() if k != "sha256"},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(body.encode()).hexdigest()


def table_to_document(table: ClassTable) -> dict:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "m": table.m,
        "length": table.length,
        "key_mode": table.key_mode,
        "probs": None if table.ensemble is None else [_prob_str(p) for p in table.ensemble.probs],
        "groups": [[list(v) for v in g.members] for g in table.groups],
    }
    doc["sha256"] = _digest(doc)
    return doc


def table_from_document(doc: dict) -> ClassTable:
    if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
        raise ValueError("unsupported class table document")
    if doc.get("sha256") != _digest(doc):
        raise ValueError("class table checksum mismatch")
    ensemble = None
    if doc["probs"] is not None:
        ensemble = Ensemble([_parse_prob(p) for p in doc["probs"]])
    return table_from_members(doc["m"], doc["length"], doc["key_mode"], ensemble, doc["groups"])


def _file_name(m, length, mode, ensemble) -> str:
    tag = "none" if ensemble is None else hashlib.sha256(
        ",".join(_prob_str(p) for p in ensemble.probs).encode()).hexdigest()[:16]
    return f"table-v{FORMAT_VERSION}-m{m}-n{length}-{mode}-{tag}.json"


def _load_or_build(m, length, mode, ensemble, cap) -> ClassTable:
    cache_dir = os.environ.get(CACHE_ENV)
    if not cache_dir:
        return build_class_table(m, length, mode, ensemble, cap)
    path = Path(cache_dir) / _file_name(m, length, mode, ensemble)
    if path.exists():
        try:
            return table_from_document(json.loads(path.read_text()))
        except (ValueError, KeyError, AssertionError) as exc:
            log.warning("ignoring cached table %s: %s", path, exc)
    table = build_class_table(m, length, mode, ensemble, cap)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(table_to_document(table), separators=(",", ":")))
    tmp.replace(path)
    return table


def get_class_table(
    m: int,
    length: int,
    mode: str = EMPIRICAL,
    ensemble: Optional[Ensemble] = None,
    cap: int = DEFAULT_CAP,
) -> ClassTable:
    """Return the (shared, immutable) table for ``(m, length, mode, ensemble)``."""
    if mode == EMPIRICAL:
        ensemble = None
    key = (m, length, mode, ensemble)
    table = _memory.get(key)
    if table is None:
        with _lock:
            table = _memory.get(key)
            if table is None:
                table = _load_or_build(m, length, mode, ensemble, cap)
                _memory[key] = table
    return table


def clear_memory_cache() -> None:
    _memory.clear()
