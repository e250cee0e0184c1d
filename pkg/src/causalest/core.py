"""Shared data model and validation for all estimators.

Datasets are immutable after validation (the backing arrays are marked
read-only), so they can be shared freely across concurrent estimator calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    EmptyTreatmentArmError,
    LengthMismatchError,
    NonFiniteValueError,
)

BINARY = "binary"
MULTIVALUED = "multivalued"
CONTINUOUS = "continuous"
_TREATMENT_KINDS = (BINARY, MULTIVALUED, CONTINUOUS)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_column_vector(name: str, v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"column '{name}' contains non-finite values")
    return arr


def _as_matrix(name: str, m, n: int) -> np.ndarray:
    """Coerce to an (n, p) float matrix; None becomes a zero-width matrix."""
    if m is None:
        return np.empty((n, 0), dtype=float)
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise LengthMismatchError(f"'{name}' must be a vector or 2-d matrix")
    if arr.shape[0] != n:
        raise LengthMismatchError(
            f"'{name}' has {arr.shape[0]} rows, expected {n}"
        )
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"matrix '{name}' contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ObservationalDataset:
    """A validated cross-sectional dataset (outcome, treatment, covariates).

    Attributes:
        y: outcome vector, length n.
        d: treatment vector, length n.
        x: covariate matrix, shape (n, p); p may be 0.
        z: instrument matrix, shape (n, L), or None.
        treatment_kind: one of "binary", "multivalued", "continuous".
        levels: declared treatment levels (multivalued only).
    """

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    z: np.ndarray | None = None
    treatment_kind: str = BINARY
    levels: tuple[float, ...] | None = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservationalDataset):
            return NotImplemented
        same_z = (
            (self.z is None and other.z is None)
            or (self.z is not None and other.z is not None
                and np.array_equal(self.z, other.z))
        )
        return (
            np.array_equal(self.y, other.y)
            and np.array_equal(self.d, other.d)
            and np.array_equal(self.x, other.x)
            and same_z
            and self.treatment_kind == other.treatment_kind
            and self.levels == other.levels
        )

    def take(self, indices) -> "ObservationalDataset":
        """Return a new dataset restricted to (or resampled at) `indices`."""
        idx = np.asarray(indices, dtype=int)
        return ObservationalDataset(
            y=_readonly(self.y[idx].copy()),
            d=_readonly(self.d[idx].copy()),
            x=_readonly(self.x[idx].copy()),
            z=None if self.z is None else _readonly(self.z[idx].copy()),
            treatment_kind=self.treatment_kind,
            levels=self.levels,
        )


def validate(
    y,
    d,
    x=None,
    z=None,
    treatment_kind: str | None = None,
    levels: Sequence[float] | None = None,
) -> ObservationalDataset:
    """Validate raw columns into an :class:`ObservationalDataset`.

    Treatment kind is detected automatically — binary when all values lie in
    {0, 1}, continuous otherwise — unless `treatment_kind` overrides it.
    Multivalued treatments require an explicit `levels` set.

    Raises:
        LengthMismatchError: columns of differing length.
        NonFiniteValueError: NaN/inf anywhere.
        EmptyDatasetError: fewer than 2 rows.
    """
    yv = _as_column_vector("y", y)
    dv = _as_column_vector("d", d)
    n = yv.shape[0]
    if dv.shape[0] != n:
        raise LengthMismatchError(f"y has length {n} but d has length {dv.shape[0]}")
    if n < 2:
        raise EmptyDatasetError(f"need at least 2 rows, got {n}")
    xm = _as_matrix("x", x, n)
    zm = None if z is None else _as_matrix("z", z, n)

    is_01 = bool(np.all((dv == 0.0) | (dv == 1.0)))
    if treatment_kind is None:
        kind = BINARY if is_01 else CONTINUOUS
    else:
        kind = treatment_kind
        if kind not in _TREATMENT_KINDS:
            raise ValueError(f"unknown treatment_kind {kind!r}")
        if kind == BINARY and not is_01:
            raise ValueError("treatment_kind='binary' but d has values outside {0, 1}")
    lv: tuple[float, ...] | None = None
    if kind == MULTIVALUED:
        if levels is None:
            raise ValueError("multivalued treatment requires an explicit levels set")
        lv = tuple(float(v) for v in levels)
        if not np.all(np.isin(dv, lv)):
            raise ValueError("d has values outside the declared level set")
    return ObservationalDataset(
        y=_readonly(yv),
        d=_readonly(dv),
        x=_readonly(xm),
        z=None if zm is None else _readonly(zm),
        treatment_kind=kind,
        levels=lv,
    )


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """A validated panel: rows sorted by (unit, time), units contiguous.

    Attributes:
        unit: original unit identifiers (any dtype), length n.
        time: integer time index, length n.
        y, d: outcome / treatment vectors.
        x: covariate matrix (n, p).
        unit_codes: 0..N-1 integer codes aligned with rows.
        unit_counts: periods per unit, length N.
    """

    unit: np.ndarray
    time: np.ndarray
    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    unit_codes: np.ndarray
    unit_counts: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def n_units(self) -> int:
        return self.unit_counts.shape[0]

    def unit_means(self, v: np.ndarray) -> np.ndarray:
        """Per-unit means of a row-aligned vector, length N."""
        return np.bincount(self.unit_codes, weights=v) / self.unit_counts

    def broadcast_units(self, per_unit: np.ndarray) -> np.ndarray:
        """Expand a length-N per-unit vector back to row alignment."""
        return per_unit[self.unit_codes]

    def take_units(self, unit_index) -> "PanelDataset":
        """Rebuild a panel from whole units (used by the panel bootstrap).

        Repeated indices are allowed; each occurrence becomes a distinct new
        unit so resampled panels remain valid.
        """
        starts = np.concatenate([[0], np.cumsum(self.unit_counts)])
        rows = []
        new_unit = []
        for j, u in enumerate(np.asarray(unit_index, dtype=int)):
            block = np.arange(starts[u], starts[u + 1])
            rows.append(block)
            new_unit.append(np.full(block.shape[0], j))
        idx = np.concatenate(rows)
        return validate_panel(
            unit=np.concatenate(new_unit),
            time=self.time[idx],
            y=self.y[idx],
            d=self.d[idx],
            x=self.x[idx] if self.x.shape[1] else None,
        )


def validate_panel(unit, time, y, d, x=None) -> PanelDataset:
    """Validate raw panel columns into a :class:`PanelDataset`.

    Rows are sorted by (unit, time); duplicate (unit, time) pairs are
    rejected.
    """
    unit_arr = np.asarray(unit)
    time_arr = np.asarray(time)
    if time_arr.dtype.kind not in "iu":
        as_int = np.asarray(time_arr, dtype=float)
        if not np.all(np.isfinite(as_int)) or not np.all(as_int == np.round(as_int)):
            raise NonFiniteValueError("time must be an integer vector")
        time_arr = as_int.astype(int)
    yv = _as_column_vector("y", y)
    dv = _as_column_vector("d", d)
    n = yv.shape[0]
    for name, col in (("unit", unit_arr), ("time", time_arr), ("d", dv)):
        if col.shape[0] != n:
            raise LengthMismatchError(f"'{name}' has length {col.shape[0]}, expected {n}")
    if n < 2:
        raise EmptyDatasetError(f"need at least 2 rows, got {n}")
    xm = _as_matrix("x", x, n)

    # Sort by (unit, time); unit ids may be non-numeric, so sort via codes.
    uniq, codes = np.unique(unit_arr, return_inverse=True)
    order = np.lexsort((time_arr, codes))
    codes = codes[order]
    time_arr = time_arr[order]
    key_dupes = (codes[1:] == codes[:-1]) & (time_arr[1:] == time_arr[:-1])
    if np.any(key_dupes):
        raise LengthMismatchError("duplicate (unit, time) pairs in panel")
    counts = np.bincount(codes, minlength=uniq.shape[0])
    return PanelDataset(
        unit=_readonly(unit_arr[order].copy()),
        time=_readonly(time_arr.copy()),
        y=_readonly(yv[order].copy()),
        d=_readonly(dv[order].copy()),
        x=_readonly(xm[order].copy()),
        unit_codes=_readonly(codes.copy()),
        unit_counts=_readonly(counts),
    )


@dataclass
class CausalEstimate:
    """A point estimate of an average-potential-outcome or treatment effect.

    Attributes:
        estimand: "ATE" or "APO".
        method: identifier of the producing estimator.
        dose: treatment level the estimand refers to.
        ref_dose: reference level (ATE only).
        point: the estimate.
        variance: estimated sampling variance, when available.
        ci: (lo, hi) interval, when available.
        n_used: rows that actually entered the estimate.
        diagnostics: method-specific extras (JSON-serializable values).
    """

    estimand: str
    method: str
    dose: float
    point: float
    n_used: int
    ref_dose: float | None = None
    variance: float | None = None
    ci: tuple[float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ci is not None:
            lo, hi = self.ci
            if not (lo <= self.point <= hi):
                raise ValueError(
                    f"ci ({lo}, {hi}) does not bracket point {self.point}"
                )
        if self.variance is not None and self.variance < 0:
            raise ValueError("variance must be non-negative")

    def with_uncertainty(self, variance: float, ci: tuple[float, float]) -> "CausalEstimate":
        return replace(self, variance=variance, ci=ci)


def difference_in_means(ds: ObservationalDataset) -> CausalEstimate:
    """Mean outcome of treated units minus mean outcome of controls.

    Requires a binary treatment with both arms non-empty. The reported
    variance is the usual unpooled two-sample formula s1^2/n1 + s0^2/n0.
    """
    if ds.treatment_kind != BINARY:
        raise ValueError("difference_in_means requires a binary treatment")
    treated = ds.d == 1.0
    n1 = int(treated.sum())
    n0 = ds.n - n1
    if n1 == 0 or n0 == 0:
        raise EmptyTreatmentArmError(
            f"both arms required (treated={n1}, control={n0})"
        )
    y1 = ds.y[treated]
    y0 = ds.y[~treated]
    point = float(y1.mean() - y0.mean())
    var = None
    if n1 > 1 and n0 > 1:
        var = float(y1.var(ddof=1) / n1 + y0.var(ddof=1) / n0)
    return CausalEstimate(
        estimand="ATE",
        method="difference_in_means",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        variance=var,
        n_used=ds.n,
        diagnostics={"n_treated": n1, "n_control": n0},
    )
