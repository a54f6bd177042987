"""Deterministic JSON/CSV float formatting shared by oracle and CLI output.

All numbers are written with 17 significant digits ('%.17g'), enough to
round-trip IEEE doubles exactly, so regression files diff cleanly and reruns
are byte-identical.
"""

from __future__ import annotations

import math


def format_float(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    return repr(x)


def to_json(obj, indent=0):
    """Minimal deterministic JSON emitter with .17g floats.

    Handles dict/list/tuple/str/bool/None/int/float, which covers every
    document this package writes.  Dict insertion order is preserved.
    """
    pad = " " * indent
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        items = [f'{to_json(str(k))}: {to_json(v, indent + 2)}' for k, v in obj.items()]
        inner = (",\n" + pad + "  ").join(items)
        return "{\n" + pad + "  " + inner + "\n" + pad + "}" if items else "{}"
    if isinstance(obj, (list, tuple)):
        items = [to_json(v, indent + 2) for v in obj]
        joined = ", ".join(items)
        if len(joined) <= 100:
            return "[" + joined + "]"
        inner = (",\n" + pad + "  ").join(items)
        return "[\n" + pad + "  " + inner + "\n" + pad + "]"
    # numpy scalars and arrays funnel through item()/tolist() before reaching
    # here; anything else is a programming error worth hearing about
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_json(obj))
        fh.write("\n")
