"""Trajectory records and their CSV/JSON persistence."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def format_float(x: float) -> str:
    """Shortest round-tripping text for a float; used by every CSV writer."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) if isinstance(v, float) else v for v in row])


def write_json(path: str | Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


@dataclass
class TrajectoryRecord:
    """Observations of one trajectory.

    ``columns`` maps a column name to an array aligned with ``t``. Column order is
    preserved when writing; ``t`` and ``tau`` always come first.
    """

    t: np.ndarray
    nu: float
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def tau(self) -> np.ndarray:
        return self.nu * np.asarray(self.t)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "t":
            return np.asarray(self.t)
        if name == "tau":
            return self.tau
        return self.columns[name]

    def header(self) -> list[str]:
        return ["t", "tau", *self.columns]

    def rows(self):
        cols = [np.asarray(self.t, dtype=float), self.tau.astype(float)]
        cols += [np.asarray(v, dtype=float) for v in self.columns.values()]
        for i in range(len(self.t)):
            yield [float(c[i]) for c in cols]

    def to_csv(self, path: str | Path) -> None:
        """Write ``<path>`` and the JSON sidecar ``<path minus .csv>.json``."""
        path = Path(path)
        write_csv(path, self.header(), self.rows())
        write_json(path.with_suffix(".json"), self.meta)

    @classmethod
    def from_csv(cls, path: str | Path) -> TrajectoryRecord:
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader], dtype=float).reshape(-1, len(header))
        meta_path = path.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        nu = float(meta.get("nu", 0.0))
        cols = {name: data[:, i] for i, name in enumerate(header) if name not in ("t", "tau")}
        return cls(t=data[:, 0], nu=nu, columns=cols, meta=meta)
