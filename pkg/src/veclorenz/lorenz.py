"""Lorenz maps, inverse Lorenz functions, alpha-curves and Gini indices.

A Lorenz evaluator is any callable mapping an array of ranks with shape
``(..., 2)`` to shares of the same shape.  :class:`FittedLorenz` wraps a
transport fit; closed forms live in :mod:`veclorenz.closed_forms`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from skimage.measure import find_contours

from .geometry import clip_to_rectangle, polygon_area
from .ot_solver import TransportFit

ILF_CHUNK = 1 << 16


class DomainError(ValueError):
    """A rank or share argument lies outside the unit square."""


def _check_unit(r, name="r", tol=1e-12) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 2:
        raise ValueError(f"{name} must have a trailing dimension of 2")
    if np.any(~np.isfinite(r)) or np.any(r < -tol) or np.any(r > 1 + tol):
        raise DomainError(f"{name} must lie in [0, 1]^2")
    return np.clip(r, 0.0, 1.0)


def lorenz_map(fit: TransportFit, r) -> np.ndarray:
    """Exact ``sum_i X_i * area(W_i cap [0, r1] x [0, r2])`` for a single rank."""
    r = _check_unit(r)
    areas = np.array([polygon_area(clip_to_rectangle(c, r)) for c in fit.cells])
    return areas @ fit.sites


def _positive_part_integral(xa, xb, length, a):
    """Integral of ``(x - a)_+`` for ``x`` linear from ``xa`` to ``xb``."""
    da = xa - a
    db = xb - a
    both = (da >= 0) & (db >= 0)
    out = np.where(both, length * (da + db) / 2.0, 0.0)
    denom = np.where(da == db, 1.0, da - db)
    first = (da > 0) & (db < 0)
    out = np.where(first, length * da * da / (2.0 * denom), out)
    second = (da < 0) & (db > 0)
    out = np.where(second, length * db * db / (-2.0 * denom), out)
    return out


class FittedLorenz:
    """Vectorised Lorenz map of a transport fit.

    Cells whose bounding box lies inside the rank rectangle contribute
    ``X_i * area_i``; cells straddling its boundary are integrated edge by
    edge with Green's formula ``area(P cap {x<=a, y<=b}) = oint min(x, a) 1{y<=b} dy``.
    """

    def __init__(self, fit: TransportFit, chunk: int = 2048):
        self.fit = fit
        self.chunk = chunk
        cells = fit.cells
        n = len(cells)
        kmax = max((len(c) for c in cells), default=0)
        kmax = max(kmax, 1)
        # padded edge table; padding edges are horizontal and contribute 0
        x0 = np.zeros((n, kmax))
        y0 = np.zeros((n, kmax))
        x1 = np.zeros((n, kmax))
        y1 = np.zeros((n, kmax))
        lo = np.full((n, 2), np.inf)
        hi = np.full((n, 2), -np.inf)
        for i, c in enumerate(cells):
            if c.is_empty:
                continue
            v = c.as_array()
            k = len(v)
            nxt = np.roll(v, -1, axis=0)
            x0[i, :k], y0[i, :k] = v[:, 0], v[:, 1]
            x1[i, :k], y1[i, :k] = nxt[:, 0], nxt[:, 1]
            lo[i] = v.min(axis=0)
            hi[i] = v.max(axis=0)
        self._edges = (x0, y0, x1, y1)
        self._lo = lo
        self._hi = hi
        self._mass = fit.sites * fit.areas[:, None]

    def __call__(self, r) -> np.ndarray:
        r = _check_unit(r)
        shape = r.shape
        flat = r.reshape(-1, 2)
        out = np.empty_like(flat)
        for start in range(0, len(flat), self.chunk):
            out[start:start + self.chunk] = self._eval(flat[start:start + self.chunk])
        return out.reshape(shape)

    def _eval(self, q: np.ndarray) -> np.ndarray:
        a = q[:, 0:1]
        b = q[:, 1:2]
        lo, hi = self._lo, self._hi
        full = (hi[None, :, 0] <= a) & (hi[None, :, 1] <= b)
        partial = (lo[None, :, 0] < a) & (lo[None, :, 1] < b) & ~full
        res = full.astype(float) @ self._mass
        qi, ci = np.nonzero(partial)
        if len(qi):
            x0, y0, x1, y1 = (e[ci] for e in self._edges)
            aa = q[qi, 0][:, None]
            bb = q[qi, 1][:, None]
            sign = np.sign(y1 - y0)
            ylo = np.minimum(y0, y1)
            yhi = np.minimum(np.maximum(y0, y1), bb)
            length = np.maximum(yhi - ylo, 0.0)
            dy = np.where(y1 == y0, 1.0, y1 - y0)
            slope = (x1 - x0) / dy
            xa = np.where(y1 >= y0, x0, x1)
            xb = xa + slope * length
            integral = length * (xa + xb) / 2.0 - _positive_part_integral(xa, xb, length, aa)
            area = (sign * integral).sum(axis=1)
            np.add.at(res, qi, area[:, None] * self.fit.sites[ci])
        return res


# --------------------------------------------------------------------------
# inverse Lorenz function


@dataclass(frozen=True)
class IlfGrid:
    """Empirical inverse Lorenz function on a regular grid.

    ``values[i, j]`` is the share of pseudo-draws ``L(U)`` with
    ``L1 <= nodes[i]`` and ``L2 <= nodes[j]``.
    """

    nodes: np.ndarray
    values: np.ndarray
    mc_samples: int
    seed: int

    @property
    def resolution(self) -> int:
        return len(self.nodes)

    def standard_error(self) -> np.ndarray:
        v = self.values
        return np.sqrt(v * (1.0 - v) / self.mc_samples)

    def at(self, z) -> float:
        """Value at the grid node nearest to ``z``."""
        z = _check_unit(z, "z")
        m = self.resolution - 1
        return float(self.values[int(round(z[0] * m)), int(round(z[1] * m))])


def pseudo_sample(m: int, seed: int) -> np.ndarray:
    """Uniform draws on the unit square, ``m`` rows.

    Chunk ``c`` of ``ILF_CHUNK`` rows comes from child ``c`` of
    ``SeedSequence(seed)``, so the draws do not depend on how chunks are
    scheduled and the same seed gives common random numbers across fits.
    """
    nchunks = -(-m // ILF_CHUNK)
    children = np.random.SeedSequence(seed).spawn(nchunks)
    parts = []
    for c, child in enumerate(children):
        size = min(ILF_CHUNK, m - c * ILF_CHUNK)
        parts.append(np.random.default_rng(child).random((size, 2)))
    return np.concatenate(parts) if parts else np.zeros((0, 2))


def ilf_from_shares(shares: np.ndarray, resolution: int, seed: int = 0) -> IlfGrid:
    nodes = np.linspace(0.0, 1.0, resolution)
    s = np.clip(shares, 0.0, 1.0)
    i = np.searchsorted(nodes, s[:, 0], side="left")
    j = np.searchsorted(nodes, s[:, 1], side="left")
    counts = np.zeros((resolution, resolution))
    np.add.at(counts, (i, j), 1.0)
    values = counts.cumsum(axis=0).cumsum(axis=1) / len(s)
    values[-1, -1] = 1.0
    return IlfGrid(nodes, values, len(s), seed)


def ilf(evaluator: Callable, resolution: int = 201, mc_samples: int = 100_000,
        seed: int = 0) -> IlfGrid:
    """Monte-Carlo inverse Lorenz function on a ``resolution`` x ``resolution`` grid."""
    if mc_samples < 1000:
        raise ValueError("mc_samples must be at least 1000")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    u = pseudo_sample(mc_samples, seed)
    return ilf_from_shares(np.asarray(evaluator(u)), resolution, seed)


# --------------------------------------------------------------------------
# alpha-Lorenz curves


@dataclass(frozen=True)
class AlphaCurve:
    alpha: float
    polylines: list = field(default_factory=list)


def alpha_curves(grid: IlfGrid, alphas) -> list:
    """Level sets of the ILF by marching squares, each ordered by increasing z1."""
    step = grid.nodes[1] - grid.nodes[0]
    out = []
    for alpha in alphas:
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        lines = []
        for c in find_contours(grid.values, alpha):
            z = grid.nodes[0] + c * step
            if z[0, 0] > z[-1, 0] or (z[0, 0] == z[-1, 0] and z[0, 1] < z[-1, 1]):
                z = z[::-1]
            lines.append(z)
        out.append(AlphaCurve(alpha, lines))
    return out


def identical_alpha_scale(alpha: float) -> float:
    """Corner ``m`` of the identical allocation's alpha-curve: ``m (1 - ln m) = alpha``."""
    from scipy.optimize import brentq

    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return brentq(lambda m: m * (1.0 - np.log(m)) - alpha, 1e-300, 1.0, xtol=1e-15)


# --------------------------------------------------------------------------
# Gini indices


def gini_weights(fit: TransportFit) -> np.ndarray:
    """``omega_i = 4 int_{W_i} (1 - u1)(1 - u2) du``; these sum to one."""
    return 4.0 * fit.diagram.moments("(1-u1)(1-u2)")


def gini(fit: TransportFit) -> float:
    """``1 - sum_i (X_i1 + X_i2) omega_i / 2``; not clamped to [0, 1]."""
    s = fit.sites.sum(axis=1)
    return float(1.0 - 0.5 * s @ gini_weights(fit))


def gini_social(fit: TransportFit) -> float:
    """Welfare form ``2 sum_i (X_i1 + X_i2) int_{W_i} (u1 + u2 - u1 u2) - 3``.

    Equal to :func:`gini` when the cell areas match the weights exactly.
    """
    s = fit.sites.sum(axis=1)
    return float(2.0 * s @ fit.diagram.moments("u1+u2-u1u2") - 3.0)


def alt_gini(fit: TransportFit) -> float:
    """``E[U . grad psi(U)] - 1`` from first moments of the cells."""
    m1 = fit.diagram.moments("u1")
    m2 = fit.diagram.moments("u2")
    x = fit.sites
    return float(x[:, 0] @ m1 + x[:, 1] @ m2 - 1.0)


def _gauss_panels(panels: int, order: int):
    t, wt = leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = (edges[:-1] + edges[1:]) / 2.0
    half = (edges[1:] - edges[:-1]) / 2.0
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * wt[None, :]).ravel()
    return nodes, weights


def alt_gini_from_lorenz(evaluator: Callable, panels: int = 64, order: int = 8) -> float:
    """``int_0^1 (p - L1(p, 1)) + (p - L2(1, p)) dp`` by composite Gauss-Legendre."""
    p, wt = _gauss_panels(panels, order)
    ones = np.ones_like(p)
    l1 = np.asarray(evaluator(np.column_stack([p, ones])))[:, 0]
    l2 = np.asarray(evaluator(np.column_stack([ones, p])))[:, 1]
    return float(wt @ (2.0 * p - l1 - l2))


def gini_from_lorenz(evaluator: Callable, panels: int = 16, order: int = 8) -> float:
    """``1 - 2 int int (L1 + L2) dr`` by tensor Gauss-Legendre."""
    p, wt = _gauss_panels(panels, order)
    r1, r2 = np.meshgrid(p, p, indexing="ij")
    w2 = np.outer(wt, wt)
    vals = np.asarray(evaluator(np.stack([r1, r2], axis=-1)))
    return float(1.0 - 2.0 * np.sum(w2 * (vals[..., 0] + vals[..., 1])))


def scalar_lorenz_curve(values, weights=None):
    """Knots ``(population share, resource share)`` of a weighted Lorenz curve."""
    x = np.asarray(values, dtype=float).ravel()
    w = np.full(len(x), 1.0 / len(x)) if weights is None else np.asarray(weights, dtype=float).ravel()
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order] / w.sum()
    mean = w @ x
    if mean <= 0:
        raise ValueError("mean must be positive")
    pop = np.concatenate([[0.0], np.cumsum(w)])
    share = np.concatenate([[0.0], np.cumsum(w * x) / mean])
    return pop, share


def scalar_gini(values, weights=None) -> float:
    """Exact Gini ``1 - 2 int L`` of the piecewise-linear weighted Lorenz curve."""
    pop, share = scalar_lorenz_curve(values, weights)
    return float(1.0 - np.sum(np.diff(pop) * (share[:-1] + share[1:])))


# --------------------------------------------------------------------------
# Lorenz maps from a potential


class PotentialLorenz:
    """Lorenz map of an allocation given by a potential ``psi(u1, u2)``.

    ``L1(r) = int_0^{r2} [psi(r1, u) - psi(0, u)] du`` and symmetrically for
    ``L2``, by Gauss-Legendre with ``order`` nodes on each of ``panels``.
    """

    def __init__(self, psi: Callable, order: int = 16, panels: int = 4):
        self.psi = psi
        t, wt = leggauss(order)
        edges = np.linspace(0.0, 1.0, panels + 1)
        # nodes on [0, 1], rescaled to [0, r] per query
        mid = (edges[:-1] + edges[1:]) / 2.0
        half = (edges[1:] - edges[:-1]) / 2.0
        self._t = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        self._w = (half[:, None] * wt[None, :]).ravel()

    def __call__(self, r) -> np.ndarray:
        r = _check_unit(r)
        shape = r.shape
        flat = r.reshape(-1, 2)
        r1 = flat[:, 0:1]
        r2 = flat[:, 1:2]
        u2 = r2 * self._t[None, :]
        l1 = r2[:, 0] * ((self.psi(np.broadcast_to(r1, u2.shape), u2)
                          - self.psi(np.zeros_like(u2), u2)) @ self._w)
        u1 = r1 * self._t[None, :]
        l2 = r1[:, 0] * ((self.psi(u1, np.broadcast_to(r2, u1.shape))
                          - self.psi(u1, np.zeros_like(u1))) @ self._w)
        return np.stack([l1, l2], axis=-1).reshape(shape)
