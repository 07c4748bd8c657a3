"""Report records shared by every experiment.

All reports serialize to plain dicts (JSON-ready) in one versioned schema;
rows for the flat CSV tables come from :meth:`BoundReport.rows`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["BoundReport", "RATIO_FLOOR", "SCHEMA_VERSION", "safe_ratio", "to_jsonable"]

SCHEMA_VERSION = 1
RATIO_FLOOR = 1e-12


def safe_ratio(num, den):
    """num / den where |den| > RATIO_FLOOR, NaN elsewhere."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    ok = np.abs(den) > RATIO_FLOOR
    return np.where(ok, num / np.where(ok, den, 1.0), np.nan)


def to_jsonable(obj):
    """Recursively convert numpy containers and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


@dataclass
class BoundReport:
    """Empirical quantities side by side with bound values over a grid.

    ``grid_name`` is ``"p"`` for moment sweeps and ``"t"`` for tail sweeps.
    ``verdicts`` is per grid point (``None`` for report-only rows).
    """

    quantity: str
    grid_name: str
    grid: np.ndarray
    empirical: np.ndarray
    std_error: np.ndarray
    bound_upper: np.ndarray | None = None
    bound_lower: np.ndarray | None = None
    verdicts: list | None = None
    seeds: list = field(default_factory=list)
    n_samples: int = 0
    notes: list[str] = field(default_factory=list)
    columns: dict = field(default_factory=dict)
    column_docs: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.empirical = np.asarray(self.empirical, dtype=float)
        self.std_error = np.asarray(self.std_error, dtype=float)
        if self.std_error.shape != self.empirical.shape:
            raise ValueError("every empirical entry needs a std_error")
        for name in ("bound_upper", "bound_lower"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, np.asarray(val, dtype=float))

    @property
    def ratio_upper(self):
        return None if self.bound_upper is None else safe_ratio(self.empirical, self.bound_upper)

    @property
    def ratio_lower(self):
        return None if self.bound_lower is None else safe_ratio(self.empirical, self.bound_lower)

    @property
    def verdict(self) -> str:
        if self.failures:
            return "inconclusive"
        if not self.verdicts or all(v is None for v in self.verdicts):
            return "report"
        return "pass" if all(v is not False for v in self.verdicts) else "fail"

    def rows(self) -> tuple[list[str], list[list]]:
        header = [self.grid_name, "empirical", "std_error"]
        cols = [self.grid, self.empirical, self.std_error]
        for name in ("bound_upper", "bound_lower"):
            if getattr(self, name) is not None:
                header.append(name)
                cols.append(getattr(self, name))
        if self.bound_upper is not None:
            header.append("ratio_upper")
            cols.append(self.ratio_upper)
        if self.bound_lower is not None:
            header.append("ratio_lower")
            cols.append(self.ratio_lower)
        for name, col in self.columns.items():
            header.append(name)
            cols.append(np.asarray(col))
        if self.verdicts is not None:
            header.append("verdict")
            cols.append(["" if v is None else ("pass" if v else "fail") for v in self.verdicts])
        rows = [list(r) for r in zip(*cols)]
        return header, rows

    def column_descriptions(self) -> dict:
        docs = {
            self.grid_name: "grid value (moment order p or tail level t)",
            "empirical": f"estimate of {self.quantity}",
            "std_error": "standard error of the estimate (0 for exact values)",
            "bound_upper": "upper bound shape value",
            "bound_lower": "lower bound shape value",
            "ratio_upper": "empirical / bound_upper (blank when bound <= 1e-12)",
            "ratio_lower": "empirical / bound_lower (blank when bound <= 1e-12)",
            "verdict": "per-row pass/fail, blank for report-only rows",
        }
        docs.update(self.column_docs)
        header, _ = self.rows()
        return {h: docs.get(h, "") for h in header}

    def to_dict(self) -> dict:
        out = {
            "quantity": self.quantity,
            "grid_name": self.grid_name,
            "grid": self.grid,
            "empirical": self.empirical,
            "std_error": self.std_error,
            "bound_upper": self.bound_upper,
            "bound_lower": self.bound_lower,
            "ratio_upper": self.ratio_upper,
            "ratio_lower": self.ratio_lower,
            "verdicts": self.verdicts,
            "verdict": self.verdict,
            "seeds": self.seeds,
            "n_samples": self.n_samples,
            "notes": self.notes,
            "columns": self.columns,
            "failures": self.failures,
            "extras": self.extras,
        }
        return to_jsonable(out)
