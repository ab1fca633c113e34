"""CSV readers and writers for pools, rankings and logged rankings."""

from __future__ import annotations

import csv
import json
import math
import re
from collections import OrderedDict
from typing import IO, Iterable

import numpy as np

from .core import CandidatePool
from .errors import InputError, InvalidPool


def fmt(x) -> str:
    """Numbers with 10 significant digits; ints, bools and strings as they are."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0.0:
            return "0"
        return format(x, ".10g")
    if x is None:
        return ""
    return str(x)


def jsonable(obj):
    """Recursively round floats to 10 significant digits for stable JSON."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return 0.0 if x == 0.0 else float(format(x, ".10g"))
    return obj


def dump_json(obj, fh: IO[str]):
    json.dump(jsonable(obj), fh, indent=2, sort_keys=False)
    fh.write("\n")


def sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name)


def write_rows(fh: IO[str], header: list, rows: Iterable):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])


def _reader(fh: IO[str], required: tuple):
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        raise InputError("empty input: no header line")
    fields = [f.strip() for f in reader.fieldnames]
    reader.fieldnames = fields
    missing = [c for c in required if c not in fields]
    if missing:
        raise InputError(f"line 1: missing column(s) {', '.join(missing)}")
    return reader, fields


def _prob(raw: str, line: int) -> float:
    try:
        p = float(raw)
    except (TypeError, ValueError):
        raise InputError(f"line {line}: prob {raw!r} is not a number") from None
    if not (0.0 <= p <= 1.0):
        raise InputError(f"line {line}: prob {raw!r} outside [0, 1]")
    return p


def _label(raw: str, line: int) -> int:
    if raw not in ("0", "1"):
        raise InputError(f"line {line}: label {raw!r} must be 0 or 1")
    return int(raw)


def _labels_all_or_nothing(labels: list) -> list | None:
    given = [x is not None for x in labels]
    if not any(given):
        return None
    if not all(given):
        raise InputError("labels must be given for every row or for none")
    return labels


def _build_pool(rows: list) -> CandidatePool:
    """rows: (line, id, group, prob, label_or_None); groups indexed by first appearance."""
    names = OrderedDict()
    for _, _, g, _, _ in rows:
        names.setdefault(g, len(names))
    seen = {}
    for line, i, *_ in rows:
        if i in seen:
            raise InputError(f"line {line}: duplicate id {i!r} (first on line {seen[i]})")
        seen[i] = line
    labels = _labels_all_or_nothing([r[4] for r in rows])
    try:
        return CandidatePool(
            [r[1] for r in rows],
            [names[r[2]] for r in rows],
            [r[3] for r in rows],
            tuple(names),
            labels,
        )
    except InvalidPool as e:
        raise InputError(str(e)) from None


def read_pool(fh: IO[str]) -> CandidatePool:
    """Read ``id,group,prob[,label]``."""
    reader, fields = _reader(fh, ("id", "group", "prob"))
    has_label = "label" in fields
    rows = []
    for line, rec in enumerate(reader, start=2):
        if rec.get("id") in (None, "") or rec.get("group") in (None, ""):
            raise InputError(f"line {line}: empty id or group")
        lab = rec.get("label") if has_label else None
        lab = None if lab in (None, "") else _label(lab.strip(), line)
        rows.append((line, rec["id"].strip(), rec["group"].strip(), _prob(rec["prob"], line), lab))
    if not rows:
        raise InputError("input has a header but no candidates")
    return _build_pool(rows)


def write_pool(fh: IO[str], pool: CandidatePool):
    header = ["id", "group", "prob"] + (["label"] if pool.labels is not None else [])
    rows = []
    for i in range(pool.n):
        r = [pool.ids[i], pool.group_names[pool.groups[i]], float(pool.probs[i])]
        if pool.labels is not None:
            r.append(int(pool.labels[i]))
        rows.append(r)
    write_rows(fh, header, rows)


def read_logged(fh: IO[str]):
    """Read logged rankings as ``[(query_id, pool, order)]``.

    Accepts ``query_id,position,id,group,prob[,label]`` and also the output of
    ``rank`` (``rank`` as the position column, ``query_id`` optional).  The
    pool of each query lists candidates in position order, so the returned
    order is the identity.
    """
    reader, fields = _reader(fh, ("id", "group", "prob"))
    pos_col = "position" if "position" in fields else ("rank" if "rank" in fields else None)
    if pos_col is None:
        raise InputError("line 1: missing column position (or rank)")
    has_label = "label" in fields
    queries = OrderedDict()
    for line, rec in enumerate(reader, start=2):
        q = (rec.get("query_id") or "").strip()
        try:
            pos = int(rec[pos_col])
        except (TypeError, ValueError):
            raise InputError(f"line {line}: {pos_col} {rec[pos_col]!r} is not an integer") from None
        lab = rec.get("label") if has_label else None
        lab = None if lab in (None, "") else _label(lab.strip(), line)
        queries.setdefault(q, []).append((pos, line, rec["id"].strip(), rec["group"].strip(), _prob(rec["prob"], line), lab))
    out = []
    for q, rows in queries.items():
        rows.sort(key=lambda r: r[0])
        for a, b in zip(rows, rows[1:]):
            if a[0] == b[0]:
                raise InputError(f"line {b[1]}: duplicate position {b[0]} in query {q!r} (also line {a[1]})")
        pool = _build_pool([r[1:] for r in rows])
        out.append((q, pool, np.arange(pool.n)))
    if not out:
        raise InputError("input has a header but no rows")
    return out
