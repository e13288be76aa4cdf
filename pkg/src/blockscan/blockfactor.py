"""Block-factor transforms: derive a dependent field from an i.i.d. source.

Each derived value is a fixed function of the configuration matrix, the
``c2 x c1`` window of source values around a site.  The built-in transforms
(minesweeper neighbour count, moving-average dot product, identity) are all
linear, which lets the batched code path run as a handful of shifted adds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GeometryError, IndexRangeError, ParameterError
from .fields import RandomField


@dataclass(frozen=True)
class LatticeGeometry:
    """Source lattice dimensions plus the window half-extents of the transform.

    ``source_cols``/``source_rows`` are the i.i.d. lattice sizes; the window
    reaches ``x1`` columns left, ``x2`` right, ``y1`` rows down, ``y2`` up.
    """

    source_cols: int
    source_rows: int
    x1: int = 0
    x2: int = 0
    y1: int = 0
    y2: int = 0

    def __post_init__(self):
        if self.source_cols < 1 or self.source_rows < 1:
            raise GeometryError("source dimensions must be >= 1")
        if min(self.x1, self.x2, self.y1, self.y2) < 0:
            raise GeometryError("window extents must be non-negative")
        if self.x1 + self.x2 > self.source_cols - 1:
            raise GeometryError("x1 + x2 must be <= source_cols - 1")
        if self.y1 + self.y2 > self.source_rows - 1:
            raise GeometryError("y1 + y2 must be <= source_rows - 1")

    @property
    def c1(self) -> int:
        return self.x1 + self.x2 + 1

    @property
    def c2(self) -> int:
        return self.y1 + self.y2 + 1

    @property
    def derived_cols(self) -> int:
        return self.source_cols - self.c1 + 1

    @property
    def derived_rows(self) -> int:
        return self.source_rows - self.c2 + 1

    def with_source(self, cols: int, rows: int) -> "LatticeGeometry":
        return LatticeGeometry(cols, rows, self.x1, self.x2, self.y1, self.y2)


@dataclass(frozen=True, eq=False)
class BlockFactorTransform:
    """A deterministic map from ``c2 x c1`` real matrices to reals.

    ``weights`` marks a linear transform ``T(C) = sum(weights * C)``; the
    batched field path requires it.  ``func`` is the scalar fallback for
    non-linear transforms.
    """

    name: str
    c1: int
    c2: int
    weights: np.ndarray | None = None
    func: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if self.weights is None and self.func is None:
            raise ParameterError("transform needs weights or a scalar function")
        if self.weights is not None and self.weights.shape != (self.c2, self.c1):
            raise ParameterError(
                f"weights shape {self.weights.shape} != ({self.c2}, {self.c1})"
            )

    def __call__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix)
        if matrix.shape != (self.c2, self.c1):
            raise GeometryError(
                f"configuration matrix shape {matrix.shape} != ({self.c2}, {self.c1})"
            )
        if self.weights is not None:
            return (self.weights * matrix).sum()
        return self.func(matrix)


def configuration_matrix(
    field: RandomField, i: int, j: int, geom: LatticeGeometry
) -> np.ndarray:
    """The ``c2 x c1`` window of source values indexed around site ``(i, j)``.

    Row ``k`` of the matrix holds source row ``j + y2 + 1 - k``, so matrix rows
    run top-down in lattice coordinates.
    """
    if not (geom.x1 + 1 <= i <= geom.source_cols - geom.x2):
        raise IndexRangeError(f"column {i} outside [{geom.x1 + 1}, {geom.source_cols - geom.x2}]")
    if not (geom.y1 + 1 <= j <= geom.source_rows - geom.y2):
        raise IndexRangeError(f"row {j} outside [{geom.y1 + 1}, {geom.source_rows - geom.y2}]")
    block = field.values[j - geom.y1 - 1 : j + geom.y2, i - geom.x1 - 1 : i + geom.x2]
    return block[::-1, :].copy()


def _result_dtype(src_dtype: np.dtype, transform: BlockFactorTransform) -> np.dtype:
    if (
        transform.weights is not None
        and np.issubdtype(src_dtype, np.integer)
        and np.issubdtype(transform.weights.dtype, np.integer)
    ):
        return np.dtype(np.int64)
    return np.dtype(np.float64)


def apply_block_factor_batch(
    source: np.ndarray, transform: BlockFactorTransform, geom: LatticeGeometry
) -> np.ndarray:
    """Vectorised transform of a ``(batch, rows, cols)`` stack of source lattices."""
    if source.shape[-2:] != (geom.source_rows, geom.source_cols):
        raise GeometryError(
            f"source shape {source.shape[-2:]} != ({geom.source_rows}, {geom.source_cols})"
        )
    if (transform.c1, transform.c2) != (geom.c1, geom.c2):
        raise GeometryError(
            f"transform window ({transform.c1}, {transform.c2}) != geometry "
            f"({geom.c1}, {geom.c2})"
        )
    n1, n2 = geom.derived_cols, geom.derived_rows
    if transform.weights is None:
        out = np.empty(source.shape[:-2] + (n2, n1))
        flat = out.reshape((-1, n2, n1))
        src = source.reshape((-1,) + source.shape[-2:])
        for b in range(src.shape[0]):
            for jj in range(n2):
                for ii in range(n1):
                    window = src[b, jj : jj + geom.c2, ii : ii + geom.c1][::-1, :]
                    flat[b, jj, ii] = transform.func(window)
        return out
    # derived[j, i] = sum_{s, t} weights[c2-1-s, t] * source[j+s, i+t]
    kernel = transform.weights[::-1, :]
    out = np.zeros(source.shape[:-2] + (n2, n1), dtype=_result_dtype(source.dtype, transform))
    for s in range(geom.c2):
        for t in range(geom.c1):
            w = kernel[s, t]
            if w != 0:
                out += w * source[..., s : s + n2, t : t + n1]
    return out


def apply_block_factor(
    field: RandomField, transform: BlockFactorTransform, geom: LatticeGeometry
) -> RandomField:
    """Derive the dependent field; output dims are the geometry's derived dims."""
    values = apply_block_factor_batch(field.values[None, ...], transform, geom)[0]
    return RandomField(values=values, provenance=f"{transform.name}({field.provenance})")


def minesweeper_transform() -> BlockFactorTransform:
    """Count of the 8 neighbours of the centre cell in a 3x3 window."""
    weights = np.ones((3, 3), dtype=np.int64)
    weights[1, 1] = 0
    return BlockFactorTransform(name="minesweeper", c1=3, c2=3, weights=weights)


def ma_transform(coeffs) -> BlockFactorTransform:
    """Dot product of a 1 x (q+1) configuration row with fixed coefficients."""
    a = np.asarray(coeffs, dtype=np.float64)
    if a.ndim != 1 or a.size < 1:
        raise ParameterError("moving-average coefficients must be a non-empty vector")
    if not np.any(a != 0.0):
        raise ParameterError("moving-average coefficients must not all be zero")
    return BlockFactorTransform(name="ma", c1=a.size, c2=1, weights=a[None, :])


def identity_transform() -> BlockFactorTransform:
    """The 1x1 window transform that reproduces the source field."""
    return BlockFactorTransform(name="identity", c1=1, c2=1, weights=np.ones((1, 1), dtype=np.int64))


def _build_minesweeper(**params) -> tuple[BlockFactorTransform, tuple[int, int, int, int]]:
    if params:
        raise ParameterError(f"minesweeper takes no parameters, got {sorted(params)}")
    return minesweeper_transform(), (1, 1, 1, 1)


def _build_ma(**params) -> tuple[BlockFactorTransform, tuple[int, int, int, int]]:
    coeffs = params.pop("coeffs", None)
    if params:
        raise ParameterError(f"unknown ma parameters {sorted(params)}")
    if coeffs is None:
        raise ParameterError("ma requires 'coeffs'")
    t = ma_transform(coeffs)
    return t, (0, t.c1 - 1, 0, 0)


def _build_identity(**params) -> tuple[BlockFactorTransform, tuple[int, int, int, int]]:
    if params:
        raise ParameterError(f"identity takes no parameters, got {sorted(params)}")
    return identity_transform(), (0, 0, 0, 0)


# Closed catalog: config files reference transforms by name only.
TRANSFORM_CATALOG = {
    "minesweeper": _build_minesweeper,
    "ma": _build_ma,
    "identity": _build_identity,
}


def catalog_transform(name: str, **params) -> tuple[BlockFactorTransform, tuple[int, int, int, int]]:
    """Build a named transform plus its (x1, x2, y1, y2) window extents."""
    try:
        builder = TRANSFORM_CATALOG[name]
    except KeyError:
        raise ParameterError(
            f"unknown transform {name!r}; catalog: {sorted(TRANSFORM_CATALOG)}"
        ) from None
    return builder(**params)
