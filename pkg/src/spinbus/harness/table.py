"""Result tables and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import PreconditionError


@dataclass
class ResultTable:
    kind: str
    columns: list
    units: list
    rows: list = field(default_factory=list)
    fingerprint: str = ""
    version: str = ""

    def __post_init__(self):
        if len(self.columns) != len(self.units):
            raise ValueError("columns and units must have equal length")

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def failed(self) -> int:
        if "status" not in self.columns:
            return 0
        return sum(1 for s in self.column("status") if s != "ok")

    def __len__(self):
        return len(self.rows)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def to_csv_text(table: ResultTable) -> str:
    if not table.rows:
        raise PreconditionError("cannot export an empty table")
    buf = io.StringIO()
    buf.write(f"# kind: {table.kind}\n")
    buf.write(f"# fingerprint: {table.fingerprint}\n")
    buf.write(f"# version: {table.version}\n")
    buf.write("# units: " + ",".join(table.units) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def export_csv(table: ResultTable, path) -> Path:
    path = Path(path)
    text = to_csv_text(table)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> ResultTable:
    meta = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [[_parse(v) for v in r] for r in reader]
    units = meta.get("units", "").split(",") if meta.get("units") else [""] * len(columns)
    return ResultTable(meta.get("kind", ""), columns, units, rows, meta.get("fingerprint", ""),
                       meta.get("version", ""))


def tables_equal(a: ResultTable, b: ResultTable) -> bool:
    if (a.kind, a.columns, a.units, a.fingerprint, a.version) != (b.kind, b.columns, b.units, b.fingerprint, b.version):
        return False
    if len(a.rows) != len(b.rows):
        return False
    for ra, rb in zip(a.rows, b.rows):
        for x, y in zip(ra, rb):
            if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
                continue
            if x != y:
                return False
    return True
