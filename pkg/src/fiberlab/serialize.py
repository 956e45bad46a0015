"""Deterministic JSON writer: sorted keys, 17-significant-digit floats,
LF newlines.  Reruns of the same computation must produce byte-identical
output, so formatting is pinned here rather than left to json.dumps
(whose float repr is shortest-roundtrip, not fixed-width)."""
from __future__ import annotations

import json
import math

__all__ = ["dumps_stable", "dump_stable"]


def _render(obj) -> str:
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, bool):  # pragma: no cover - caught above
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite float in JSON payload")
        return format(obj, ".17g")
    if isinstance(obj, dict):
        items = sorted(obj.items())
        inner = ",".join(f"{json.dumps(str(k))}:{_render(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_render(v) for v in obj) + "]"
    # numpy scalars and similar duck-typed numbers
    if hasattr(obj, "item"):
        return _render(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_stable(obj) -> str:
    return _render(obj) + "\n"


def dump_stable(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_stable(obj))
