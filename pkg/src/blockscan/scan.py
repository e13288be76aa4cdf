"""Moving-window sums and scan maxima via 2-D prefix sums.

Integer fields accumulate exactly in int64; floating-point fields run the
prefix pass in extended precision so window sums stay within 1e-9 relative
of the direct summation.  ``brute_*`` functions are the O(N^2 m^2) oracles
used by the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, IndexRangeError
from .fields import RandomField


@dataclass(frozen=True)
class ScanGeometry:
    """Scanning window sides (m1 columns wide, m2 rows tall)."""

    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise GeometryError("window sides must be >= 1")


@dataclass(frozen=True, eq=False)
class MovingSums:
    """Dense array of window sums, ``values[i2 - 1, i1 - 1]`` anchored at (i1, i2)."""

    values: np.ndarray
    m1: int
    m2: int

    @property
    def anchors_cols(self) -> int:
        return self.values.shape[1]

    @property
    def anchors_rows(self) -> int:
        return self.values.shape[0]


def window_sums_batch(arr: np.ndarray, m1: int, m2: int) -> np.ndarray:
    """Window sums over the trailing two axes of ``arr`` for an m1 x m2 window."""
    rows, cols = arr.shape[-2:]
    if not (1 <= m1 <= cols and 1 <= m2 <= rows):
        raise GeometryError(
            f"window {m1}x{m2} does not fit in {cols}x{rows} field"
        )
    integer = np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.bool_
    acc_dtype = np.int64 if integer else np.longdouble
    prefix = np.zeros(arr.shape[:-2] + (rows + 1, cols + 1), dtype=acc_dtype)
    prefix[..., 1:, 1:] = arr.cumsum(axis=-2, dtype=acc_dtype).cumsum(axis=-1)
    sums = (
        prefix[..., m2:, m1:]
        - prefix[..., :-m2, m1:]
        - prefix[..., m2:, :-m1]
        + prefix[..., :-m2, :-m1]
    )
    return sums if integer else sums.astype(np.float64)


def moving_sums(field: RandomField, m1: int, m2: int) -> MovingSums:
    """All m1 x m2 window sums of the field."""
    return MovingSums(values=window_sums_batch(field.values, m1, m2), m1=m1, m2=m2)


def scan_statistic(field: RandomField, m1: int, m2: int):
    """Largest m1 x m2 window sum over the whole field."""
    return moving_sums(field, m1, m2).values.max().item()


def sub_rectangle_scan_max(
    field: RandomField, m1: int, m2: int, i1_max: int, i2_max: int
):
    """Largest window sum over anchors with i1 <= i1_max and i2 <= i2_max."""
    sums = moving_sums(field, m1, m2)
    if not (1 <= i1_max <= sums.anchors_cols and 1 <= i2_max <= sums.anchors_rows):
        raise GeometryError(
            f"anchor range ({i1_max}, {i2_max}) exceeds available "
            f"({sums.anchors_cols}, {sums.anchors_rows})"
        )
    return sums.values[:i2_max, :i1_max].max().item()


def row_scan_max(field: RandomField, m1: int, k: int):
    """Largest 1-D moving sum of width m1 along row ``k`` (1-based)."""
    if not (1 <= k <= field.rows):
        raise IndexRangeError(f"row {k} outside [1, {field.rows}]")
    row = field.values[k - 1][None, :]
    return window_sums_batch(row, m1, 1).max().item()


def brute_moving_sums(values: np.ndarray, m1: int, m2: int) -> np.ndarray:
    """Direct per-window summation; the oracle for the prefix-sum path."""
    rows, cols = values.shape
    if not (1 <= m1 <= cols and 1 <= m2 <= rows):
        raise GeometryError(f"window {m1}x{m2} does not fit in {cols}x{rows} field")
    out = np.empty((rows - m2 + 1, cols - m1 + 1), dtype=np.float64)
    for j in range(rows - m2 + 1):
        for i in range(cols - m1 + 1):
            out[j, i] = values[j : j + m2, i : i + m1].sum(dtype=np.float64)
    if np.issubdtype(values.dtype, np.integer):
        return out.astype(np.int64)
    return out


def brute_scan_statistic(values: np.ndarray, m1: int, m2: int):
    return brute_moving_sums(values, m1, m2).max().item()
