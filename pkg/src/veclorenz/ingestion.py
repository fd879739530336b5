"""Loading, normalising, de-duplicating and combining weighted microdata."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ot_solver import SolverConfig, TransportFit, solve

REQUIRED_COLUMNS = ("x1", "x2", "weight")


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class Allocation:
    """Weighted bivariate sample.

    Parameters
    ----------
    points : ndarray, shape (n, 2)
    weights : ndarray, shape (n,)
        Positive, summing to one.
    means : tuple or None
        Weighted means before normalisation; None if never normalised.
    implicate : int or None
    """

    points: np.ndarray
    weights: np.ndarray
    means: tuple | None = None
    implicate: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise DataError("points and weights differ in length")
        if len(pts) == 0:
            raise DataError("allocation is empty")
        if np.any(~np.isfinite(pts)):
            raise DataError("points must be finite")
        if np.any(~(w > 0)):
            raise DataError("weights must be positive")
        object.__setattr__(self, "points", pts)
        total = w.sum()
        # already-normalised weights are kept bit-for-bit
        object.__setattr__(self, "weights", w if abs(total - 1.0) <= 4e-16 * len(w) else w / total)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def weighted_means(self) -> np.ndarray:
        return self.weights @ self.points

    def has_duplicates(self) -> bool:
        return len(np.unique(self.points, axis=0)) != len(self.points)


def _parse_float(text, row, column):
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise DataError(f"row {row}: column {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(val):
        raise DataError(f"row {row}: column {column!r} is not finite: {text!r}")
    return val


def load_csv(path) -> list:
    """Read ``x1,x2,weight[,implicate]`` rows, one :class:`Allocation` per implicate.

    Weights are renormalised to sum to one within each implicate.  Points are
    left in raw units; see :func:`normalize_unit_mean`.  Row numbers in error
    messages count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in header}
        has_imp = "implicate" in col
        groups: dict[int, list] = {}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(REQUIRED_COLUMNS):
                raise DataError(f"row {rownum}: expected at least 3 fields, got {len(row)}")
            cells = {name: (row[i].strip() if i < len(row) else "") for name, i in col.items()}
            x1 = _parse_float(cells["x1"], rownum, "x1")
            x2 = _parse_float(cells["x2"], rownum, "x2")
            w = _parse_float(cells["weight"], rownum, "weight")
            if w <= 0:
                raise DataError(f"row {rownum}: weight must be positive, got {w}")
            imp = 1
            if has_imp and cells["implicate"]:
                raw = _parse_float(cells["implicate"], rownum, "implicate")
                if raw != int(raw):
                    raise DataError(f"row {rownum}: implicate must be an integer")
                imp = int(raw)
            groups.setdefault(imp, []).append((x1, x2, w))
    if not groups:
        raise DataError(f"{path}: no data rows")
    out = []
    for imp in sorted(groups):
        arr = np.array(groups[imp], dtype=float)
        out.append(Allocation(arr[:, :2], arr[:, 2], None, imp))
    return out


def write_csv(path, allocation: Allocation, implicate: bool = False) -> None:
    """Write an allocation in the ingestion schema with ``repr`` floats."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x1", "x2", "weight"] + (["implicate"] if implicate else []))
        for (x1, x2), w in zip(allocation.points.tolist(), allocation.weights.tolist()):
            row = [repr(x1), repr(x2), repr(w)]
            if implicate:
                row.append(str(allocation.implicate or 1))
            writer.writerow(row)


def normalize_unit_mean(raw: Allocation) -> Allocation:
    """Divide each coordinate by its weighted mean, recording the means."""
    means = raw.weighted_means
    if np.any(~(means > 0)):
        raise DataError(f"weighted means must be positive, got {means.tolist()}")
    recorded = raw.means if raw.means is not None else tuple(float(m) for m in means)
    if raw.means is not None:
        recorded = tuple(float(a * b) for a, b in zip(raw.means, means))
    return replace(raw, points=raw.points / means, means=recorded)


def merge_duplicates(allocation: Allocation) -> Allocation:
    """Collapse repeated points into one atom carrying the summed weight."""
    uniq, inverse = np.unique(allocation.points, axis=0, return_inverse=True)
    if len(uniq) == len(allocation.points):
        return allocation
    w = np.bincount(inverse.ravel(), weights=allocation.weights, minlength=len(uniq))
    return replace(allocation, points=uniq, weights=w)


def _duplicate_mask(points):
    _, inverse, counts = np.unique(points, axis=0, return_inverse=True, return_counts=True)
    return counts[inverse.ravel()] > 1


def jitter_duplicates(allocation: Allocation, scale: float = 1e-6, seed: int = 0,
                      max_retries: int = 10) -> Allocation:
    """Separate repeated points with uniform noise of size ``scale`` per coordinate scale.

    Every member of a group of repeated points gets noise drawn from
    ``[0, scale * s_k)`` in coordinate ``k``, where ``s_k`` is the largest
    absolute value in that coordinate.  Coordinates are then rescaled so the
    weighted means are unchanged.  Weights are never modified.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    mask = _duplicate_mask(allocation.points)
    if not mask.any():
        return allocation
    if scale == 0:
        raise DataError("duplicate points and jitter scale 0")
    pts0 = allocation.points
    means0 = allocation.weighted_means
    coord_scale = np.abs(pts0).max(axis=0)
    coord_scale[coord_scale == 0] = 1.0
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        pts = pts0.copy()
        pts[mask] += rng.random((mask.sum(), 2)) * scale * coord_scale
        means = allocation.weights @ pts
        fix = np.ones(2)
        ok = (means0 > 0) & (means > 0)
        fix[ok] = means0[ok] / means[ok]
        pts = pts * fix
        if len(np.unique(pts, axis=0)) == len(pts):
            return replace(allocation, points=pts)
    raise DataError(f"could not separate duplicate points in {max_retries} attempts")


def prepare(allocation: Allocation, duplicates: str = "merge", jitter: float = 1e-6,
            seed: int = 0) -> Allocation:
    """Normalise to unit means and make points distinct.

    ``duplicates="merge"`` pools repeated points (same empirical measure);
    ``"jitter"`` separates them with :func:`jitter_duplicates` before
    normalising, as raw units are what the noise scale refers to.
    """
    if duplicates == "merge":
        return merge_duplicates(normalize_unit_mean(allocation))
    if duplicates == "jitter":
        return normalize_unit_mean(jitter_duplicates(allocation, jitter, seed))
    raise ValueError(f"unknown duplicates policy {duplicates!r}")


def fit_allocation(allocation: Allocation, config: SolverConfig | None = None,
                   duplicates: str = "merge", jitter: float = 1e-6,
                   seed: int = 0) -> TransportFit:
    """:func:`prepare` followed by the transport solve."""
    ready = prepare(allocation, duplicates, jitter, seed)
    return solve(ready.points, ready.weights, config)


def rii_average(results):
    """Average per-implicate estimates (scalars or equally shaped arrays / ILF grids)."""
    results = list(results)
    if not results:
        raise ValueError("no results to average")
    first = results[0]
    if hasattr(first, "values") and hasattr(first, "nodes"):
        shapes = {r.values.shape for r in results}
        if len(shapes) != 1:
            raise ValueError("ILF grids differ in shape")
        return replace(first, values=_mean_arrays([r.values for r in results]))
    arrs = [np.asarray(r, dtype=float) for r in results]
    if len({a.shape for a in arrs}) != 1:
        raise ValueError("results differ in shape")
    if arrs[0].ndim == 0:
        return math.fsum(float(a) for a in arrs) / len(arrs)
    return _mean_arrays(arrs)


def _mean_arrays(arrs):
    # deviations from the first entry, so equal inputs average to themselves exactly
    base = arrs[0]
    return base + np.sum(np.stack([a - base for a in arrs]), axis=0) / len(arrs)
