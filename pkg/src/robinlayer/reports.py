"""Artifact writers: atomic files, locale-free CSV, JSON and the run manifest."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def jsonable(obj):
    """Recursively convert complex numbers, numpy scalars and tuples for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "item") and not hasattr(obj, "__len__"):
        return jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def atomic_write(path, text: str):
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows):
    return atomic_write(path, csv_text(header, rows))


def write_json(path, obj):
    return atomic_write(path, json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")


class ArtifactSet:
    """Collects written files so the manifest can list every one of them."""

    def __init__(self, out_dir, formats=("csv", "json")):
        self.out = Path(out_dir)
        self.formats = set(formats)
        self.outputs: list[str] = []

    def _add(self, path):
        self.outputs.append(str(Path(path).relative_to(self.out)))

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            self._add(write_csv(self.out / name, header, rows))

    def json(self, name, obj, always=False):
        if always or "json" in self.formats:
            self._add(write_json(self.out / name, obj))

    def file(self, path):
        self._add(path)

    def manifest(self, **fields):
        fields["outputs"] = sorted(self.outputs)
        return write_json(self.out / "manifest.json", fields)
