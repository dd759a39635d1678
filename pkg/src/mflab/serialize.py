"""Deterministic JSON/CSV emission.

Reports are written with sorted keys and floats at 17 significant digits,
so identical inputs produce byte-identical files.  Non-finite floats are
emitted as null (reports are expected to contain finite numbers only).
"""

import math
from pathlib import Path


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = f"{x:.17g}"
    # %.17g may emit bare integers; keep them valid JSON numbers as-is
    return s


def _encode_str(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def dumps(obj, indent: int = 2) -> str:
    """Serialize dicts/lists/scalars to deterministic JSON text."""
    pieces = []
    _write(obj, pieces, indent, 0)
    return "".join(pieces) + "\n"


def _write(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    pad_close = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, str):
        out.append(_encode_str(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj.keys())
        for i, k in enumerate(keys):
            out.append(pad)
            out.append(_encode_str(str(k)))
            out.append(": ")
            _write(obj[k], out, indent, level + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(pad_close + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _write(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad_close + "]")
    else:
        # numpy scalars and friends
        if hasattr(obj, "item"):
            _write(obj.item(), out, indent, level)
        else:
            raise TypeError(f"cannot serialize {type(obj)!r}")


def dump_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def dump_csv(path, header, rows) -> None:
    """Write rows of scalars; floats at 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, float):
                cells.append(_format_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
