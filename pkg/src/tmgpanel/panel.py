"""Balanced-panel data model and long-format ingestion.

A panel is strictly balanced: every unit is observed at every period.
Unbalanced input is rejected rather than silently dropped, because every
downstream formula assumes a common T.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateCellError,
    NonFiniteValueError,
    PanelInputError,
    TooFewPeriodsError,
    UnbalancedPanelError,
)


@dataclass(frozen=True)
class BalancedPanel:
    """n x T outcomes and n x T x k' regressors with unit/time labels.

    Arrays are row-major, sorted by (unit, time), and frozen after
    construction; all operations on a panel are pure.
    """

    y: np.ndarray
    x: np.ndarray
    unit_ids: tuple
    time_ids: tuple

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, :, None]
        if y.ndim != 2 or x.ndim != 3 or x.shape[:2] != y.shape:
            raise PanelInputError(
                f"shape mismatch: y {y.shape}, x {x.shape} (want (n,T) and (n,T,k'))"
            )
        n, T = y.shape
        k_prime = x.shape[2]
        if n < 2:
            raise PanelInputError(f"need at least 2 units, got {n}")
        if T < k_prime + 1:
            raise TooFewPeriodsError(f"T={T} < k'+1={k_prime + 1}")
        if not (np.isfinite(y).all() and np.isfinite(x).all()):
            raise NonFiniteValueError("panel contains NaN or infinite values")
        if len(self.unit_ids) != n or len(self.time_ids) != T:
            raise PanelInputError("label lengths do not match array dimensions")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "time_ids", tuple(self.time_ids))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def k_prime(self) -> int:
        return self.x.shape[2]

    @property
    def k(self) -> int:
        return self.k_prime + 1

    def design_tensor(self) -> np.ndarray:
        """Per-unit W_i = (1, X_i) stacked into an (n, T, k) array."""
        n, T = self.y.shape
        W = np.empty((n, T, self.k))
        W[:, :, 0] = 1.0
        W[:, :, 1:] = self.x
        return W


def _sort_key(v):
    try:
        return (0, float(v))
    except (TypeError, ValueError):
        return (1, str(v))


def load_panel(rows: Iterable[Mapping | Sequence]) -> BalancedPanel:
    """Assemble a BalancedPanel from long-format records.

    Each record is either a mapping with keys ``unit_id``, ``time_id``, ``y``,
    ``x1`` .. ``xk'`` or a flat sequence in that order. Rows may arrive in any
    order; the panel is sorted by (unit, time).
    """
    cells: dict[tuple, tuple[float, tuple[float, ...]]] = {}
    k_prime = None
    for row in rows:
        if isinstance(row, Mapping):
            unit, time = row["unit_id"], row["time_id"]
            yv = float(row["y"])
            if k_prime is None:
                k_prime = sum(1 for key in row if str(key).startswith("x"))
                if k_prime == 0:
                    raise PanelInputError("no regressor columns x1..xk' found")
            xv = tuple(float(row[f"x{j + 1}"]) for j in range(k_prime))
        else:
            seq = list(row)
            if len(seq) < 4:
                raise PanelInputError(f"row too short: {seq!r}")
            unit, time, yv = seq[0], seq[1], float(seq[2])
            if k_prime is None:
                k_prime = len(seq) - 3
            elif len(seq) - 3 != k_prime:
                raise PanelInputError("inconsistent regressor count across rows")
            xv = tuple(float(v) for v in seq[3:])
        key = (unit, time)
        if key in cells:
            raise DuplicateCellError(f"duplicate cell (unit={unit!r}, time={time!r})")
        cells[key] = (yv, xv)
    if not cells:
        raise PanelInputError("empty input")

    units = sorted({u for u, _ in cells}, key=_sort_key)
    times = sorted({t for _, t in cells}, key=_sort_key)
    n, T = len(units), len(times)
    if len(cells) != n * T:
        missing = [(u, t) for u in units for t in times if (u, t) not in cells]
        raise UnbalancedPanelError(
            f"{len(missing)} missing cells, e.g. {missing[:5]}"
        )
    y = np.empty((n, T))
    x = np.empty((n, T, k_prime))
    for i, u in enumerate(units):
        for t, tm in enumerate(times):
            yv, xv = cells[(u, tm)]
            y[i, t] = yv
            x[i, t, :] = xv
    return BalancedPanel(y=y, x=x, unit_ids=tuple(units), time_ids=tuple(times))


CSV_HEADER_PREFIX = ("unit_id", "time_id", "y")


def read_panel_csv(path_or_buf) -> BalancedPanel:
    """Read a long-format CSV with header ``unit_id,time_id,y,x1[,x2,...]``."""
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "r", encoding="utf-8", newline="") as fh:
            return _read_csv(fh)
    return _read_csv(path_or_buf)


def _read_csv(fh: io.TextIOBase) -> BalancedPanel:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise PanelInputError("empty CSV") from None
    header = [h.strip() for h in header]
    if tuple(header[:3]) != CSV_HEADER_PREFIX or len(header) < 4:
        raise PanelInputError(
            f"expected header unit_id,time_id,y,x1[,x2,...], got {header!r}"
        )
    expected_x = [f"x{j + 1}" for j in range(len(header) - 3)]
    if header[3:] != expected_x:
        raise PanelInputError(f"regressor columns must be {expected_x}, got {header[3:]!r}")

    def rows():
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise PanelInputError(f"line {lineno}: expected {len(header)} fields")
            try:
                yield (rec[0], rec[1], *map(float, rec[2:]))
            except ValueError as exc:
                raise PanelInputError(f"line {lineno}: {exc}") from None

    return load_panel(rows())
