"""Deterministic file output helpers."""
import json
import math
import os
import tempfile


def fmt(x) -> str:
    """Shortest round-trip decimal for a float (locale independent)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt(obj)
    return obj


def write_json(path, obj) -> None:
    # json uses repr for floats, which is already shortest round-trip
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header_lines, columns, rows) -> None:
    out = [f"# {h}" for h in header_lines]
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(out) + "\n")
