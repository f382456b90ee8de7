"""Grid-refinement studies of estimated constants."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .estimators import CSV_COLUMNS, ConstantEstimate, _clean

__all__ = ["StabilityReport", "refinement_study"]


@dataclass
class StabilityReport:
    """Estimates on three nested grids and their relative deviations.

    ``deviations[k] = |e[k+1] - e[k]| / |e[k+1]|``; ``passed`` compares the
    last one (the two finest grids) with ``threshold``.
    """

    hs: list
    estimates: list
    deviations: list
    threshold: float
    passed: bool
    results: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return _clean({"hs": self.hs, "estimates": self.estimates, "deviations": self.deviations,
                       "threshold": self.threshold, "pass": self.passed,
                       "results": [r.to_dict() for r in self.results]})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_rows(self) -> list:
        rows = []
        for k, (h, r) in enumerate(zip(self.hs, self.results)):
            dev = self.deviations[k - 1] if k > 0 else None
            ok = (dev < self.threshold) if dev is not None else None
            rows.append(r.csv_row(deviation=dev, passed=ok, grid=h))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.csv_rows():
            w.writerow(row)
        return buf.getvalue()


def refinement_study(invoke: Callable[[float], ConstantEstimate], hs: Sequence[float],
                     threshold: float = 0.2, key: Callable[[ConstantEstimate], float] | None = None):
    """Run ``invoke(h)`` on three nested grids (each halving h; the CFL rule
    then quarters the time step) and report the deviations.

    ``key`` selects the compared number (default: ``estimate``).
    """
    hs = list(hs)
    if len(hs) != 3:
        raise ValueError("series of 3 required")
    for a, b in zip(hs, hs[1:]):
        if abs(b - a / 2) > 1e-12 * a:
            raise ValueError("grids must be nested: each step halves h")
    key = key or (lambda e: e.estimate)
    results = [invoke(h) for h in hs]
    vals = [float(key(r)) for r in results]
    devs = [abs(vals[k + 1] - vals[k]) / abs(vals[k + 1]) if vals[k + 1] != 0 else float("inf")
            for k in range(2)]
    for r in results:
        r.grid_series = list(zip(hs, vals))
        r.stability = devs[-1]
    return StabilityReport(hs, vals, devs, threshold, bool(devs[-1] < threshold), results)
