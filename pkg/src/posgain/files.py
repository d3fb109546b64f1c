"""System files (versioned JSON) and CSV reports."""

import csv
import io
import json
import os
import tempfile
from importlib import resources

import numpy as np

from .lti import StateSpace
from .rnn import RnnModel, RnnTemplate

__all__ = [
    "ParseError",
    "load_system",
    "loads_system",
    "dump_system",
    "write_system_file",
    "load_example",
    "load_expected",
    "write_csv",
    "format_number",
]

FORMAT_VERSION = 1
STATESPACE_KEYS = ("A", "B", "C", "D")
RNN_KEYS = ("Lambda", "Win", "Wout")


class ParseError(ValueError):
    """Malformed system file; the message names the offending location."""


def _matrix(doc, key, where, allow_empty=False):
    if key not in doc:
        raise ParseError(f"{where}: missing key {key!r}")
    val = doc[key]
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return np.array([[float(val)]])
    if not isinstance(val, list):
        raise ParseError(f"{where}.{key}: expected a nested array of numbers")
    if not val:
        if allow_empty:
            return np.zeros((0, 0))
        raise ParseError(f"{where}.{key}: empty array")
    rows = val if isinstance(val[0], list) else [val]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ParseError(f"{where}.{key}[{i}]: expected a row array")
        if len(row) != width:
            raise ParseError(f"{where}.{key}[{i}]: ragged row (length {len(row)}, expected {width})")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x):
                raise ParseError(f"{where}.{key}[{i}][{j}]: not a finite number: {x!r}")
    return np.array(rows, dtype=float).reshape(len(rows), width)


def loads_system(text, source="<string>"):
    """Parse a system document into a `StateSpace` or `RnnModel`.

    An RNN document may carry a ``template`` object with ``offset_at`` and
    ``replace_at`` index pairs; the result is then an `RnnTemplate`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"{source}: unsupported version {doc.get('version')!r}")
    kind = doc.get("type")
    try:
        if kind == "statespace":
            # A, B and C may be omitted for a static (feedthrough-only) system
            A, B, C = (_matrix(doc, k, source, allow_empty=True) if k in doc else None
                       for k in "ABC")
            D = _matrix(doc, "D", source)
            return StateSpace(np.zeros((0, 0)) if A is None else A, B, C, D)
        if kind == "rnn":
            L, Win, Wout = (_matrix(doc, k, source) for k in RNN_KEYS)
            if "template" in doc:
                t = doc["template"]
                return RnnTemplate(L, Win, Wout, tuple(t.get("offset_at", (0, 2))),
                                   tuple(t.get("replace_at", (2, 1))))
            return RnnModel(L, Win, Wout)
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from None
    raise ParseError(f"{source}: unknown type {kind!r} (expected 'statespace' or 'rnn')")


def load_system(path):
    with open(path, encoding="utf-8") as fh:
        return loads_system(fh.read(), str(path))


def dump_system(model, name=None, description=None):
    """Serialize a model to the versioned JSON document."""
    if isinstance(model, StateSpace):
        doc = {"type": "statespace", "version": FORMAT_VERSION}
        keys = STATESPACE_KEYS
    elif isinstance(model, (RnnModel, RnnTemplate)):
        doc = {"type": "rnn", "version": FORMAT_VERSION}
        keys = RNN_KEYS
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if name:
        doc["name"] = name
    if description:
        doc["description"] = description
    for k in keys:
        doc[k] = np.asarray(getattr(model, k)).tolist()
    if isinstance(model, RnnTemplate):
        doc["template"] = {"offset_at": list(model.offset_at),
                           "replace_at": list(model.replace_at)}
    return json.dumps(doc, indent=2)


def _atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_system_file(path, model, **meta):
    _atomic_write(path, dump_system(model, **meta) + "\n")


def format_number(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def write_csv(path, header, rows):
    """Write a CSV report atomically (LF endings, 12 significant digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(x) for x in row])
    text = buf.getvalue()
    if path is None or path == "-":
        return text
    _atomic_write(path, text)
    return text


def load_example(name):
    """Bundled example model: ``"lti_example"`` or ``"rnn_example"``."""
    ref = resources.files("posgain.data").joinpath(f"{name}.json")
    return loads_system(ref.read_text(encoding="utf-8"), name)


def load_expected(name):
    """Reference values recorded next to a bundled example."""
    ref = resources.files("posgain.data").joinpath(f"{name}.expected.json")
    return json.loads(ref.read_text(encoding="utf-8"))
