"""Grid-certified inequality orders and checks on potentials.

Conventions: ``lorenz_compare(A, B)`` returns ``"dominates"`` when the Lorenz
map of ``A`` lies above that of ``B`` at every grid rank, so ``B`` is the more
unequal allocation.  For inverse Lorenz functions the inequality flips:
``A`` dominates when ``l_A <= l_B`` everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from .closed_forms import EgalitarianSpec, egalitarian_from_second_derivative
from .lorenz import IlfGrid

RELATIONS = ("dominates", "dominated", "incomparable", "equal")


@dataclass(frozen=True)
class OrderingVerdict:
    """Outcome of a grid comparison.

    ``witness`` is the grid point with the worst violation and is set only for
    ``"incomparable"``.  ``max_violation`` is the largest amount by which the
    reported relation (or, if incomparable, the nearer of the two strict
    relations) is broken before slack is applied.
    """

    relation: str
    witness: tuple | None
    max_violation: float
    slack: float

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if (self.witness is not None) != (self.relation == "incomparable"):
            raise ValueError("witness must be given exactly for incomparable verdicts")


@dataclass(frozen=True)
class CheckResult:
    """Boolean outcome of a numerical check with its worst margin."""

    ok: bool
    margin: float

    def __bool__(self) -> bool:
        return bool(self.ok)


def _verdict(diff: np.ndarray, slack, points: np.ndarray) -> OrderingVerdict:
    # diff > 0 means A is above B; slack may be scalar or per-entry
    slack_arr = np.broadcast_to(np.asarray(slack, dtype=float), diff.shape)
    below = np.max(-diff - slack_arr)  # > 0 if A falls below B somewhere
    above = np.max(diff - slack_arr)
    neg = float(max(np.max(-diff), 0.0)) + 0.0  # avoid reporting -0.0
    pos = float(max(np.max(diff), 0.0)) + 0.0
    s = float(np.max(slack_arr))
    if below <= 0 and above <= 0:
        return OrderingVerdict("equal", None, max(neg, pos), s)
    if below <= 0:
        return OrderingVerdict("dominates", None, neg, s)
    if above <= 0:
        return OrderingVerdict("dominated", None, pos, s)
    # report the point that breaks the nearer relation the most
    if neg <= pos:
        flat = np.argmax((-diff - slack_arr).reshape(len(points), -1).max(axis=1))
        return OrderingVerdict("incomparable", tuple(map(float, points[flat])), neg, s)
    flat = np.argmax((diff - slack_arr).reshape(len(points), -1).max(axis=1))
    return OrderingVerdict("incomparable", tuple(map(float, points[flat])), pos, s)


def rank_grid(resolution: int) -> np.ndarray:
    """``(resolution^2, 2)`` array of ranks on a regular grid, ``r1`` slowest."""
    t = np.linspace(0.0, 1.0, resolution)
    r1, r2 = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([r1.ravel(), r2.ravel()])


def lorenz_compare(a: Callable, b: Callable, grid_resolution: int = 21,
                   slack: float = 1e-6) -> OrderingVerdict:
    """Compare two Lorenz evaluators componentwise on a rank grid."""
    pts = rank_grid(grid_resolution)
    la = np.asarray(a(pts))
    lb = np.asarray(b(pts))
    return _verdict(la - lb, slack, pts)


def ilf_slack(a: IlfGrid, b: IlfGrid, multiplier: float = 3.0) -> np.ndarray:
    """Per-node ``multiplier`` standard errors of ``l_A - l_B``."""
    va, vb = a.values, b.values
    return multiplier * np.sqrt(va * (1 - va) / a.mc_samples + vb * (1 - vb) / b.mc_samples)


def weak_lorenz_compare(a: IlfGrid, b: IlfGrid, slack=None) -> OrderingVerdict:
    """Pointwise comparison of two inverse Lorenz functions.

    ``"dominates"`` means ``l_A <= l_B`` on the grid, so ``B`` is weakly more
    unequal.  ``slack`` defaults to three Monte-Carlo standard errors per node.
    """
    if a.values.shape != b.values.shape or not np.allclose(a.nodes, b.nodes):
        raise ValueError("ILF grids differ in resolution")
    if slack is None:
        slack = ilf_slack(a, b)
    z1, z2 = np.meshgrid(a.nodes, a.nodes, indexing="ij")
    pts = np.column_stack([z1.ravel(), z2.ravel()])
    slack = np.broadcast_to(np.asarray(slack, dtype=float), a.values.shape).ravel()
    return _verdict((b.values - a.values).ravel(), slack, pts)


# --------------------------------------------------------------------------
# potentials on a grid


@dataclass(frozen=True)
class PotentialGrid:
    """Potential values and derivatives on the nodes ``linspace(0, 1, m)``.

    Derivatives come from ``np.gradient`` (central in the interior, one-sided
    at the edges) unless supplied.  Arrays are indexed ``[i1, i2]``.
    """

    nodes: np.ndarray
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d22: np.ndarray
    d12: np.ndarray

    @property
    def resolution(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_values(cls, values) -> "PotentialGrid":
        values = np.asarray(values, dtype=float)
        m = values.shape[0]
        nodes = np.linspace(0.0, 1.0, m)
        d1, d2 = np.gradient(values, nodes, nodes)
        d11 = np.gradient(d1, nodes, axis=0)
        d22 = np.gradient(d2, nodes, axis=1)
        d12 = 0.5 * (np.gradient(d1, nodes, axis=1) + np.gradient(d2, nodes, axis=0))
        return cls(nodes, values, d1, d2, d11, d22, d12)

    @classmethod
    def from_function(cls, psi: Callable, resolution: int = 33,
                      hessian: Callable | None = None,
                      gradient: Callable | None = None) -> "PotentialGrid":
        """Tabulate ``psi(u1, u2)``; optional callables give exact derivatives.

        ``hessian(u1, u2)`` returns ``(d11, d22, d12)`` and ``gradient(u1, u2)``
        returns ``(d1, d2)``.
        """
        nodes = np.linspace(0.0, 1.0, resolution)
        u1, u2 = np.meshgrid(nodes, nodes, indexing="ij")
        base = cls.from_values(np.broadcast_to(psi(u1, u2), u1.shape))
        d1, d2 = base.d1, base.d2
        d11, d22, d12 = base.d11, base.d22, base.d12
        if gradient is not None:
            d1, d2 = (np.broadcast_to(g, u1.shape).astype(float) for g in gradient(u1, u2))
        if hessian is not None:
            d11, d22, d12 = (np.broadcast_to(h, u1.shape).astype(float) for h in hessian(u1, u2))
        return cls(nodes, base.values, d1, d2, d11, d22, d12)

    @classmethod
    def from_fit(cls, fit, resolution: int = 33) -> "PotentialGrid":
        """Grid of the fitted max-affine potential ``max_i (u . X_i + h_i)``."""
        nodes = np.linspace(0.0, 1.0, resolution)
        u1, u2 = np.meshgrid(nodes, nodes, indexing="ij")
        u = np.column_stack([u1.ravel(), u2.ravel()])
        vals = (u @ fit.sites.T + fit.dual_weights).max(axis=1)
        return cls.from_values(vals.reshape(u1.shape))

    def __sub__(self, other: "PotentialGrid") -> "PotentialGrid":
        _same_resolution(self, other)
        return PotentialGrid(self.nodes, self.values - other.values, self.d1 - other.d1,
                             self.d2 - other.d2, self.d11 - other.d11,
                             self.d22 - other.d22, self.d12 - other.d12)

    def interpolator(self, field: str = "values") -> RegularGridInterpolator:
        return RegularGridInterpolator((self.nodes, self.nodes), getattr(self, field))

    def is_convex(self, tol: float = 1e-8) -> CheckResult:
        """Discrete Hessian positive semidefinite at interior nodes."""
        a = self.d11[1:-1, 1:-1]
        c = self.d22[1:-1, 1:-1]
        b = self.d12[1:-1, 1:-1]
        lam = (a + c) / 2.0 - np.sqrt(((a - c) / 2.0) ** 2 + b * b)
        worst = float(lam.min()) if lam.size else 0.0
        return CheckResult(worst >= -tol, worst)


def _same_resolution(a: PotentialGrid, b: PotentialGrid):
    if a.values.shape != b.values.shape:
        raise ValueError("potential grids differ in resolution")


def is_ultramodular(psi: PotentialGrid, tolerance: float = 1e-8) -> CheckResult:
    """Nonnegative ``d11``, ``d22`` and ``d12`` at all interior nodes."""
    if psi.resolution < 17:
        raise ValueError("ultramodularity check needs resolution >= 17")
    inner = (slice(1, -1), slice(1, -1))
    worst = float(min(psi.d11[inner].min(), psi.d22[inner].min(), psi.d12[inner].min()))
    return CheckResult(worst >= -tolerance, worst)


def _gradient_means(psi: PotentialGrid):
    # int d1 du = int [psi(1, u2) - psi(0, u2)] du2, and symmetrically
    t = psi.nodes
    m1 = trapezoid(psi.values[-1, :] - psi.values[0, :], t)
    m2 = trapezoid(psi.values[:, -1] - psi.values[:, 0], t)
    return float(m1), float(m2)


def is_mmps(psi_a: PotentialGrid, psi_b: PotentialGrid, tolerance: float = 1e-8) -> CheckResult:
    """Whether ``B`` is a monotone mean preserving spread of ``A``.

    The difference ``psi_B - psi_A`` must be ultramodular with a gradient that
    integrates to zero.
    """
    _same_resolution(psi_a, psi_b)
    diff = psi_b - psi_a
    ultra = is_ultramodular(diff, tolerance)
    m1, m2 = _gradient_means(diff)
    drift = max(abs(m1), abs(m2))
    ok = bool(ultra) and drift <= max(tolerance, 1e-10)
    return CheckResult(ok, min(ultra.margin, -drift))


def check_positive_regdep(psi: PotentialGrid, tolerance: float = 1e-8) -> CheckResult:
    """``E[d1 psi | U2 = u2]`` nondecreasing in ``u2`` and symmetrically.

    Weak monotonicity passes, so the identical allocation is accepted.
    """
    if psi.resolution < 33:
        raise ValueError("regression-dependence check needs resolution >= 33")
    c1 = psi.values[-1, :] - psi.values[0, :]
    c2 = psi.values[:, -1] - psi.values[:, 0]
    worst = float(min(np.diff(c1).min(), np.diff(c2).min()))
    return CheckResult(worst >= -tolerance, worst)


def _line_samples(p: float, z: np.ndarray, points: int):
    """Sample points of ``{p u1 - u2 = z} cap [0, 1]^2`` for each ``z``."""
    lo = np.maximum(0.0, z / p)
    hi = np.minimum(1.0, (z + 1.0) / p)
    t = np.linspace(0.0, 1.0, points)
    u1 = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    u2 = np.clip(p * u1 - z[:, None], 0.0, 1.0)
    return np.clip(u1, 0.0, 1.0), u2


def _line_extremes(psi: PotentialGrid, p: float, z: np.ndarray, points: int):
    u1, u2 = _line_samples(p, z, points)
    pts = np.stack([u1, u2], axis=-1)
    d11 = psi.interpolator("d11")(pts)
    d22 = psi.interpolator("d22")(pts)
    d12 = psi.interpolator("d12")(pts)
    sup_cross = np.max(-d12 / p, axis=1)
    inf_curv = np.min(np.minimum(d11 / p ** 2, d22), axis=1)
    return sup_cross, inf_curv


def check_egalitarian_assumption(psi: PotentialGrid, p: float, tolerance: float = 1e-8,
                                 z_points: int = 257, line_points: int = 257) -> CheckResult:
    """``sup -d12 / p <= inf min(d11 / p^2, d22)`` along every line ``p u1 - u2 = z``."""
    if not p > 0:
        raise ValueError("p must be positive")
    z = np.linspace(-1.0, p, z_points)
    sup_cross, inf_curv = _line_extremes(psi, p, z, line_points)
    margin = float(np.min(inf_curv - sup_cross))
    return CheckResult(margin >= -tolerance, margin)


def optimal_p(psi: PotentialGrid) -> float:
    """``sqrt(inf d11 / inf d22)``."""
    a = float(psi.d11.min())
    b = float(psi.d22.min())
    if a <= 0 or b <= 0:
        raise ValueError(f"optimal p needs positive curvature infima, got {a:.3g} and {b:.3g}")
    return float(np.sqrt(a / b))


def choose_p(psi: PotentialGrid, tolerance: float = 1e-8) -> float:
    """``optimal_p`` when it satisfies the assumption, else the best of a log grid on [1/8, 8]."""
    try:
        p = optimal_p(psi)
        if check_egalitarian_assumption(psi, p, tolerance):
            return p
    except ValueError:
        pass
    best, best_margin = None, -np.inf
    for p in np.geomspace(0.125, 8.0, 49):
        res = check_egalitarian_assumption(psi, float(p), tolerance)
        if res.margin > best_margin:
            best, best_margin = float(p), res.margin
    if best_margin < -tolerance:
        raise ValueError("no p in [1/8, 8] satisfies the egalitarian assumption")
    return best


def dominating_egalitarian(psi: PotentialGrid, p: float | None = None,
                           tolerance: float = 1e-8, z_points: int = 1025,
                           line_points: int = 257) -> EgalitarianSpec:
    """Egalitarian allocation whose Lorenz map lies above that of ``psi``.

    ``v''(z)`` is the infimum of ``min(d11 / p^2, d22)`` over the line
    ``p u1 - u2 = z``; ``v'`` is centred so ``E[v'(p U1 - U2)] = 0``.
    """
    if p is None:
        p = choose_p(psi, tolerance)
    check = check_egalitarian_assumption(psi, p, tolerance)
    if not check:
        raise ValueError(f"egalitarian assumption fails at p={p} (margin {check.margin:.3g})")
    if z_points % 2 == 0:
        z_points += 1
    z = np.linspace(-1.0, p, z_points)
    _, vpp = _line_extremes(psi, p, z, line_points)
    return egalitarian_from_second_derivative(np.maximum(vpp, 0.0), p, z)
