"""JSON/CSV persistence shared by the experiment reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1


def _fmt_num(v) -> str:
    # repr of a Python float is the shortest round-tripping form, hence reproducible
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(str(x) for x in v)
    return str(v)


def jsonable(obj):
    """Recursively convert numpy scalars, arrays, fractions and tuples for ``json``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([_fmt_num(v) for v in row])
    return buf.getvalue()


def json_text(payload: dict) -> str:
    return json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str) -> None:
    """Write then rename, so readers never see a partial file."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def file_stem(kind: str, system: str, sigma=None, t=None, n=None, seed=None) -> str:
    """``kind_system_s<sigma>_t<t>_n<n>_seed<seed>``, omitting absent fields."""
    parts = [kind, re.sub(r"[^A-Za-z0-9.-]+", "-", system)]
    for tag, val in (("s", sigma), ("t", t), ("n", n), ("seed", seed)):
        if val is None:
            continue
        if isinstance(val, (list, tuple)):
            val = "-".join(_short(v) for v in val)
        else:
            val = _short(val)
        parts.append(f"{tag}{val}")
    return "_".join(parts)


def _short(v) -> str:
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        return str(int(v))
    return str(v).replace("/", "o")


class ReportMixin:
    """Reports implement ``to_dict`` and ``csv_rows``; this adds persistence."""

    kind = "report"
    csv_header: tuple = ()

    def to_dict(self) -> dict:
        raise NotImplementedError

    def csv_rows(self) -> list:
        raise NotImplementedError

    def to_json(self, path=None) -> str:
        payload = {"schema_version": SCHEMA_VERSION, "kind": self.kind}
        payload.update(self.to_dict())
        text = json_text(payload)
        if path is not None:
            atomic_write(path, text)
        return text

    def to_csv(self, path=None) -> str:
        text = csv_text(self.csv_header, self.csv_rows())
        if path is not None:
            atomic_write(path, text)
        return text

    def stem(self) -> str:
        raise NotImplementedError

    def save(self, directory) -> dict:
        """Write ``<stem>.json`` and ``<stem>.csv`` into ``directory``."""
        stem = self.stem()
        os.makedirs(os.fspath(directory), exist_ok=True)
        jp = os.path.join(os.fspath(directory), stem + ".json")
        cp = os.path.join(os.fspath(directory), stem + ".csv")
        self.to_csv(cp)
        self.to_json(jp)
        return {"json": jp, "csv": cp}
