"""Text file formats.

Network-spec files (``.net``)::

    netid-format v1
    # comments and blank lines are ignored
    L = 6
    K = 6
    p = 4
    Lambda = [0.1, 0.2, 0.3, 0.4]          # diagonal, or a nested list
    G[1][4] = [0, 0.38, 0.24] / [1, -1.35, 0.54]
    H[1][1] = [1, 0.52] / [1, 0.41]
    R[1][1] = [1]

Indices are 1-based; coefficient lists are in ascending powers of q^-1 and
a missing denominator means 1. Datasets are CSV with the version line as a
``#`` comment followed by a header ``t,w1..wL,r1..rK[,e1..ep]``.
"""
from __future__ import annotations

import csv
import io
import json
import re
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, Tuple

import numpy as np

from .exceptions import FormatError, ModelError
from .netmodel import Dataset, NetworkModel, RationalTF

FORMAT_HEADER = "netid-format v1"

_ENTRY = re.compile(r"^([GHR])\s*\[\s*(\d+)\s*\]\s*\[\s*(\d+)\s*\]$")


def _json_value(text, path, lineno):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"cannot parse value {text!r}: {exc.msg}", path, lineno) from None


def _parse_tf(text, path, lineno) -> RationalTF:
    parts = text.split("/")
    if len(parts) > 2:
        raise FormatError("expected 'num' or 'num / den'", path, lineno)
    num = _json_value(parts[0].strip(), path, lineno)
    den = _json_value(parts[1].strip(), path, lineno) if len(parts) == 2 else [1.0]
    for c in (num, den):
        if not isinstance(c, list) or not c or not all(isinstance(x, (int, float)) for x in c):
            raise FormatError("coefficients must be a non-empty list of numbers", path, lineno)
    try:
        return RationalTF(num, den)
    except ModelError as exc:
        raise FormatError(str(exc), path, lineno) from None


def iter_records(text: str, path=None) -> Iterable[Tuple[int, str, str]]:
    """Yield ``(lineno, key, value)`` from a versioned ``key = value`` file."""
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip()), None)
    if first is None or lines[first].strip() != FORMAT_HEADER:
        raise FormatError(f"first line must be '{FORMAT_HEADER}'", path, (first or 0) + 1)
    for i, raw in enumerate(lines[first + 1:], start=first + 2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", path, i)
        key, value = line.split("=", 1)
        yield i, key.strip(), value.strip()


def parse_network(text: str, path=None) -> NetworkModel:
    scalars = {}
    lam = None
    entries = {"G": {}, "H": {}, "R": {}}
    where = {}
    name = ""
    for lineno, key, value in iter_records(text, path):
        m = _ENTRY.match(key)
        if m:
            kind, j, c = m.group(1), int(m.group(2)) - 1, int(m.group(3)) - 1
            if (j, c) in entries[kind]:
                raise FormatError(f"duplicate entry {key}", path, lineno)
            entries[kind][(j, c)] = _parse_tf(value, path, lineno)
            where[(kind, j, c)] = lineno
        elif key in ("L", "K", "p"):
            v = _json_value(value, path, lineno)
            if not isinstance(v, int) or v < 0:
                raise FormatError(f"{key} must be a non-negative integer", path, lineno)
            scalars[key] = v
        elif key == "Lambda":
            v = _json_value(value, path, lineno)
            try:
                arr = np.asarray(v, dtype=float)
            except (TypeError, ValueError):
                raise FormatError("Lambda must be a list or nested list of numbers", path, lineno) from None
            lam = np.diag(arr) if arr.ndim == 1 else arr
            where["Lambda"] = lineno
        elif key == "name":
            name = str(_json_value(value, path, lineno))
        else:
            raise FormatError(f"unknown key {key!r}", path, lineno)
    for key in ("L", "K", "p"):
        if key not in scalars:
            raise FormatError(f"missing required key {key!r}", path)
    L, K, p = scalars["L"], scalars["K"], scalars["p"]
    if lam is None:
        lam = np.eye(p)
    limits = {"G": L, "H": p, "R": K}
    for kind, d in entries.items():
        for (j, c) in d:
            if not (0 <= j < L and 0 <= c < limits[kind]):
                raise FormatError(f"{kind}[{j + 1}][{c + 1}] is out of range",
                                  path, where[(kind, j, c)])
    try:
        return NetworkModel(L, K, p, entries["G"], entries["H"], entries["R"], lam, name)
    except ModelError as exc:
        msg = str(exc)
        line = None
        hit = re.match(r"([GHR])\[(\d+)\]\[(\d+)\]", msg)
        if hit:
            line = where.get((hit.group(1), int(hit.group(2)) - 1, int(hit.group(3)) - 1))
        elif msg.startswith("Lambda"):
            line = where.get("Lambda")
        raise FormatError(msg, path, line) from None


def read_network(path) -> NetworkModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read network file: {exc.strerror}", path) from None
    return parse_network(text, path)


def _fmt_coeffs(c) -> str:
    return "[" + ", ".join(repr(float(x)) for x in c) + "]"


def format_network(model: NetworkModel, comment: str = "") -> str:
    out = [FORMAT_HEADER]
    for line in comment.splitlines():
        out.append(f"# {line}")
    if model.name:
        out.append(f"name = {json.dumps(model.name)}")
    out += [f"L = {model.L}", f"K = {model.K}", f"p = {model.p}"]
    out.append("Lambda = " + json.dumps(np.asarray(model.Lambda).tolist()))
    for kind, d in (("G", model.G), ("H", model.H), ("R", model.R)):
        for (j, c), tf in sorted(d.items()):
            out.append(f"{kind}[{j + 1}][{c + 1}] = {_fmt_coeffs(tf.num.coeffs)} / "
                       f"{_fmt_coeffs(tf.den.coeffs)}")
    return "\n".join(out) + "\n"


def write_network(model: NetworkModel, path, comment: str = "") -> None:
    Path(path).write_text(format_network(model, comment))


def format_dataset(data: Dataset, include_noise: bool = True) -> str:
    buf = io.StringIO()
    buf.write(f"# {FORMAT_HEADER}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = ["t"] + [f"w{i + 1}" for i in range(data.L)] + [f"r{k + 1}" for k in range(data.K)]
    blocks = [data.w, data.r]
    if include_noise and data.e_true is not None:
        header += [f"e{s + 1}" for s in range(data.e_true.shape[1])]
        blocks.append(data.e_true)
    writer.writerow(header)
    values = np.hstack(blocks)
    for t, row in enumerate(values):
        writer.writerow([t] + [repr(float(x)) for x in row])
    return buf.getvalue()


def write_dataset(data: Dataset, path, include_noise: bool = True) -> None:
    Path(path).write_text(format_dataset(data, include_noise))


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read dataset: {exc.strerror}", path) from None
    if not lines or lines[0].strip().lstrip("#").strip() != FORMAT_HEADER:
        raise FormatError(f"first line must be '# {FORMAT_HEADER}'", path, 1)
    if len(lines) < 2:
        raise FormatError("missing header row", path, 2)
    header = [h.strip() for h in lines[1].split(",")]
    if not header or header[0] != "t":
        raise FormatError("header must start with 't'", path, 2)
    cols: Dict[str, list] = {"w": [], "r": [], "e": []}
    for pos, h in enumerate(header[1:], start=1):
        m = re.fullmatch(r"([wre])(\d+)", h)
        if not m:
            raise FormatError(f"unexpected column {h!r}", path, 2)
        cols[m.group(1)].append((int(m.group(2)), pos))
    for kind, lst in cols.items():
        if [i for i, _ in lst] != list(range(1, len(lst) + 1)):
            raise FormatError(f"{kind} columns must be numbered 1..n in order", path, 2)
    if not cols["w"]:
        raise FormatError("dataset has no w columns", path, 2)
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(parts)}", path, lineno)
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise FormatError("non-numeric field", path, lineno) from None
    if not rows:
        raise FormatError("dataset has no samples", path)
    arr = np.asarray(rows)
    pick = lambda kind: arr[:, [pos for _, pos in cols[kind]]]  # noqa: E731
    e = pick("e") if cols["e"] else None
    return Dataset(pick("w"), pick("r"), e)


def dumps_json(obj) -> str:
    """JSON with the format tag, tolerant of numpy scalars and arrays."""

    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, (set, frozenset, tuple)):
            return list(o)
        raise TypeError(f"not JSON serializable: {type(o).__name__}")

    if isinstance(obj, dict):
        obj = {"format": FORMAT_HEADER, **obj}
    return json.dumps(obj, indent=2, default=default, allow_nan=True)


BUNDLED_NETWORKS = ("six_node", "six_node_rb")


def bundled_network_path(name: str) -> Path:
    if name not in BUNDLED_NETWORKS:
        raise ModelError(f"unknown bundled network {name!r}; choose from {BUNDLED_NETWORKS}")
    return Path(str(resources.files("netid") / "data" / f"{name}.net"))


def six_node_network(excitation: str = "all") -> NetworkModel:
    """The six-node benchmark network with rank-4 noise.

    ``excitation="all"`` excites every node (R = I, K = 6); ``"b"`` excites
    only nodes 5 and 6 (R = [0; I], K = 2).
    """
    name = {"all": "six_node", "b": "six_node_rb"}.get(excitation)
    if name is None:
        raise ModelError("excitation must be 'all' or 'b'")
    return read_network(bundled_network_path(name))
