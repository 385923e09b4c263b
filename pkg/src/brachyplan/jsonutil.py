"""Canonical JSON emission: fixed field order, floats at 9 significant digits.

Plans and reports must be byte-stable across export/import/export, so
floats are formatted with '%.9g' (decimal -> double -> decimal is the
identity at 9 digits) and objects serialize in insertion order.
"""
from __future__ import annotations

import json
import math

from .errors import InputError


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise InputError(f"non-finite float {x} cannot be serialized")
    if x == 0.0:
        return "0"  # negative zero would round-trip as integer 0 and lose its sign anyway
    text = f"{x:.9g}"
    # normalize the exponent's leading zeros away for cross-platform stability
    if "e" in text:
        mantissa, exp = text.split("e")
        sign = "-" if exp.startswith("-") else "+"
        text = f"{mantissa}e{sign}{int(exp.lstrip('+-')):d}"
    return text


def canonical_dumps(obj) -> str:
    out: list[str] = []
    _emit(obj, out)
    return "".join(out)


def canonical_bytes(obj) -> bytes:
    return (canonical_dumps(obj) + "\n").encode("utf-8")


def _emit(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if not isinstance(k, str):
                raise InputError(f"JSON object keys must be strings, got {type(k).__name__}")
            if i:
                out.append(",")
            out.append(json.dumps(k, ensure_ascii=True))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise InputError(f"cannot serialize {type(obj).__name__} to JSON")
