"""Closed-form reference allocations, their Lorenz maps and related functions.

Every bivariate evaluator takes ranks of shape ``(..., 2)`` and returns shares
of the same shape.  Ranks are not range-checked here; callers that need the
domain check go through :mod:`veclorenz.lorenz`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.stats import norm

# --------------------------------------------------------------------------
# scalar Lorenz curves


class ScalarLorenz:
    """A univariate Lorenz curve ``q -> L(q)`` with a numerical inverse."""

    def __init__(self, func: Callable, inverse: Callable | None = None, quantile: Callable | None = None):
        self._func = func
        self._inverse = inverse
        self.quantile = quantile

    def __call__(self, q):
        return self._func(np.asarray(q, dtype=float))

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self._inverse is not None:
            return self._inverse(y)
        return _bisect(self._func, y, 0.0, 1.0)


def _bisect(f, target, lo, hi, iters=80):
    target = np.asarray(target, dtype=float)
    a = np.full(target.shape, lo, dtype=float)
    b = np.full(target.shape, hi, dtype=float)
    for _ in range(iters):
        m = (a + b) / 2.0
        below = f(m) < target
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return (a + b) / 2.0


def scalar_lorenz_lognormal(q, sigma: float):
    """``Phi(Phi^{-1}(q) - sigma)``, the Lorenz curve of a lognormal law."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        return norm.cdf(norm.ppf(q) - sigma)


def lognormal_quantile(u, sigma: float):
    """Quantile of ``exp(sigma Z - sigma^2 / 2)``, a unit-mean lognormal."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.exp(sigma * norm.ppf(u) - sigma * sigma / 2.0)


def lognormal_lorenz(sigma: float) -> ScalarLorenz:
    return ScalarLorenz(
        lambda q: scalar_lorenz_lognormal(q, sigma),
        lambda y: norm.cdf(norm.ppf(y) + sigma),
        lambda u: lognormal_quantile(u, sigma),
    )


def identity_lorenz() -> ScalarLorenz:
    return ScalarLorenz(lambda q: q, lambda y: y, lambda u: np.ones_like(u))


def lognormal_gini(sigma: float) -> float:
    """Scalar Gini ``2 Phi(sigma / sqrt 2) - 1`` of a lognormal law."""
    return float(2.0 * norm.cdf(sigma / np.sqrt(2.0)) - 1.0)


# --------------------------------------------------------------------------
# bivariate examples


def _split(r):
    r = np.asarray(r, dtype=float)
    return r, r[..., 0], r[..., 1]


def identical_lorenz(r):
    """``(r1 r2, r1 r2)``: everyone holds ``(1, 1)``."""
    r, r1, r2 = _split(r)
    prod = r1 * r2
    return np.stack([prod, prod], axis=-1)


def identical_ilf(z):
    """``m (1 - ln m)`` with ``m = min(z1, z2)``, and 0 on the axes."""
    z = np.asarray(z, dtype=float)
    m = np.clip(np.minimum(z[..., 0], z[..., 1]), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(m > 0, m * (1.0 - np.log(np.where(m > 0, m, 1.0))), 0.0)
    return out


def independent_lorenz(l1: ScalarLorenz, l2: ScalarLorenz, r):
    """``(r2 L1(r1), r1 L2(r2))`` for independent marginals."""
    r, r1, r2 = _split(r)
    return np.stack([r2 * l1(r1), r1 * l2(r2)], axis=-1)


def independent_ilf(l1: ScalarLorenz, l2: ScalarLorenz, z) -> float:
    """Inverse Lorenz function of independent marginals by 1-D quadrature.

    ``l(z) = int_0^1 min{1, z1 / L1(u), L2^{-1}(min(z2 / u, 1))} du``.
    Assumes strictly increasing marginal quantiles.
    """
    z1, z2 = float(z[0]), float(z[1])
    if z1 <= 0 or z2 <= 0:
        return 0.0

    def integrand(u):
        a = l1(u)
        first = 1.0 if a <= z1 else z1 / a
        second = float(l2.inverse(min(z2 / u, 1.0))) if u > 0 else 1.0
        return min(1.0, first, second)

    val, _ = integrate.quad(integrand, 0.0, 1.0, limit=400, epsabs=1e-10, epsrel=1e-10)
    return float(min(max(val, 0.0), 1.0))


def comonotone_uniform_lorenz(r):
    """Lorenz map of ``(Y, Y)`` with ``Y`` uniform on ``[0, 2]``; both components agree."""
    r, r1, r2 = _split(r)
    s = r1 + r2
    low = r1 ** 3 * r2 / 3.0 + r1 * r2 ** 3 / 3.0 + r1 ** 2 * r2 ** 2 / 2.0
    high = (2.0 / 3.0 * s ** 3 - s ** 4 / 12.0 - s ** 2 - r1 ** 4 / 12.0 - r2 ** 4 / 12.0
            + 2.0 / 3.0 * s - 1.0 / 6.0)
    val = np.where(s <= 1.0, low, high)
    return np.stack([val, val], axis=-1)


def two_point_lorenz(kind: str, r):
    """Lorenz maps of the two atom pairs.

    ``kind="X"``: atoms ``(2, 0)`` and ``(0, 2)``.  ``kind="X_tilde"``: atoms
    ``(0, 0)`` and ``(2, 2)``.  Each atom has probability one half.
    """
    r, r1, r2 = _split(r)
    if kind == "X":
        m2 = np.minimum(r1, r2) ** 2
        return np.stack([m2 + 2.0 * r2 * np.maximum(r1 - r2, 0.0),
                         m2 + 2.0 * r1 * np.maximum(r2 - r1, 0.0)], axis=-1)
    if kind == "X_tilde":
        v = np.maximum(r1 + r2 - 1.0, 0.0) ** 2
        return np.stack([v, v], axis=-1)
    raise ValueError(f"unknown two-point kind {kind!r}; expected 'X' or 'X_tilde'")


TWO_POINT_ATOMS = {
    "X": np.array([[2.0, 0.0], [0.0, 2.0]]),
    "X_tilde": np.array([[0.0, 0.0], [2.0, 2.0]]),
}


def quadratic_potential(u1, u2):
    """``(u1 - u2)^2 / 2 + u1 + u2``."""
    return (u1 - u2) ** 2 / 2.0 + u1 + u2


def quadratic_potential_lorenz(r):
    """Lorenz map of the allocation with potential :func:`quadratic_potential`."""
    r, r1, r2 = _split(r)
    base = r1 * r2
    return np.stack([base * (r1 - r2) / 2.0 + base,
                     base * (r2 - r1) / 2.0 + base], axis=-1)


# --------------------------------------------------------------------------
# distribution of p U1 - U2


def _check_p(p):
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")


def h_p_cdf(z, p: float):
    """Cdf of ``Z = p U1 - U2`` for independent uniforms."""
    _check_p(p)
    z = np.asarray(z, dtype=float)
    hi = max(p - 1.0, 0.0)
    lo = min(p - 1.0, 0.0)
    conds = [
        z > p,
        (z > hi) & (z <= p),
        (z > 0) & (z <= hi),
        (z > lo) & (z <= 0),
        (z > -1) & (z <= lo),
    ]
    vals = [
        np.ones_like(z),
        1.0 - p / 2.0 + z - z * z / (2.0 * p),
        (1.0 + 2.0 * z) / (2.0 * p),
        1.0 - p / 2.0 + z,
        (0.5 + z + z * z / 2.0) / p,
    ]
    return np.select(conds, vals, default=0.0)


def h_p_pdf(z, p: float):
    _check_p(p)
    z = np.asarray(z, dtype=float)
    hi = max(p - 1.0, 0.0)
    lo = min(p - 1.0, 0.0)
    conds = [
        (z > hi) & (z <= p),
        (z > 0) & (z <= hi),
        (z > lo) & (z <= 0),
        (z > -1) & (z <= lo),
    ]
    vals = [1.0 - z / p, np.full_like(z, 1.0 / p), np.ones_like(z), (1.0 + z) / p]
    return np.select(conds, vals, default=0.0)


def h_p_ppf(q, p: float):
    """Quantile of ``p U1 - U2`` by bisection."""
    _check_p(p)
    return _bisect(lambda z: h_p_cdf(z, p), q, -1.0, p, iters=100)


# --------------------------------------------------------------------------
# egalitarian allocations: potential u1 + u2 + v(p u1 - u2)


def _simpson_weights(k: int) -> np.ndarray:
    if k % 2 == 0 or k < 3:
        raise ValueError("Simpson rule needs an odd number of nodes >= 3")
    w = np.ones(k)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * (k - 1))


@dataclass(frozen=True)
class EgalitarianSpec:
    """Convex profile ``v`` on ``[-1, p]`` given by its tabulated derivative.

    ``v'`` is interpolated by pchip, which keeps it nondecreasing, and ``v`` is
    its exact antiderivative with ``v(0) = 0``.  So ``v`` is convex and
    ``v_at`` and ``vprime_at`` are consistent to rounding.

    Parameters
    ----------
    p : float
        Relative price; ``X1 + p X2`` is constant.
    z : ndarray
        Tabulation grid on ``[-1, p]``.
    vprime : ndarray
        ``v'`` on ``z``.
    provenance : str
        ``"marginal"``, ``"dominating"`` or ``"given"``.
    """

    p: float
    z: np.ndarray
    vprime: np.ndarray
    provenance: str = "given"

    def __post_init__(self):
        _check_p(self.p)
        vp = PchipInterpolator(self.z, self.vprime, extrapolate=True)
        v = vp.antiderivative()
        v.c[-1] -= v(0.0)
        object.__setattr__(self, "_vp", vp)
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "_V", v.antiderivative())

    @classmethod
    def from_functions(cls, p, vprime: Callable, size: int = 4097):
        z = np.linspace(-1.0, p, size)
        return cls(p, z, vprime(z), "given")

    @property
    def v(self) -> np.ndarray:
        """``v`` on the tabulation grid."""
        return self._v(self.z)

    def v_at(self, z):
        return self._v(np.asarray(z, dtype=float))

    def vprime_at(self, z):
        return self._vp(np.asarray(z, dtype=float))

    def potential(self, u1, u2):
        return u1 + u2 + self.v_at(self.p * np.asarray(u1) - np.asarray(u2))

    def is_convex(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.diff(self.vprime) >= -tol))

    def integral(self, a, b):
        """Exact integral of the interpolated ``v`` over ``[a, b]``."""
        return self._V(np.asarray(b, dtype=float)) - self._V(np.asarray(a, dtype=float))

    def normalization_sides(self):
        """``(int_0^1 v(p - z) dz, int_0^1 v(-z) dz)``; equal for a valid profile.

        Equality is the same statement as ``E[v'(p U1 - U2)] = 0``.
        """
        return float(self.integral(self.p - 1.0, self.p)), float(self.integral(-1.0, 0.0))

    def mean_vprime(self) -> float:
        """``E[v'(p U1 - U2)]``, zero when the marginals have unit mean.

        Three-point Gauss-Legendre on the interpolation knots and the kinks of
        the density, which is exact for cubic ``v'`` times a linear density.
        """
        p = self.p
        edges = np.union1d(self.z, [min(0.0, p - 1.0), max(0.0, p - 1.0)])
        edges = edges[(edges >= -1.0) & (edges <= p)]
        t, wt = leggauss(3)
        mid = (edges[:-1] + edges[1:]) / 2.0
        half = (edges[1:] - edges[:-1]) / 2.0
        z = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        w = (half[:, None] * wt[None, :]).ravel()
        return float(w @ (self.vprime_at(z) * h_p_pdf(z, p)))

    def sample(self, u):
        """Allocation ``(1 + p v'(Z), 1 - v'(Z))`` at uniforms ``u``."""
        u = np.asarray(u, dtype=float)
        d = self.vprime_at(self.p * u[..., 0] - u[..., 1])
        return np.stack([1.0 + self.p * d, 1.0 - d], axis=-1)


def _profile_from_vprime(p, z, vp, provenance):
    # shifting v' by c shifts its pchip by c, v by c*z and the normalization gap by c*p
    left, right = EgalitarianSpec(p, z, vp, provenance).normalization_sides()
    return EgalitarianSpec(p, z, vp - (left - right) / p, provenance)


def egalitarian_from_marginal(quantile: Callable, p: float, size: int = 4097,
                              eps: float = 1e-12) -> EgalitarianSpec:
    """Egalitarian allocation whose first marginal has the given quantile.

    ``v'(z) = (F1^{-1}(H_p(z)) - 1) / p`` with ``H_p`` the cdf of ``p U1 - U2``.
    A constant shift of ``v'`` makes ``E[v'(Z)] = 0`` hold for the interpolant.
    """
    _check_p(p)
    if size % 2 == 0:
        size += 1
    z = np.linspace(-1.0, p, size)
    h = np.clip(h_p_cdf(z, p), eps, 1.0 - eps)
    q = np.asarray(quantile(h), dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("quantile function returned non-finite values")
    if np.any(np.diff(q) < -1e-12 * max(1.0, np.abs(q).max())):
        raise ValueError("quantile function must be nondecreasing")
    vp = (q - 1.0) / p
    return _profile_from_vprime(p, z, vp, "marginal")


def egalitarian_from_second_derivative(vpp, p: float, z=None) -> EgalitarianSpec:
    """Integrate ``v''`` twice with ``E[v'(p U1 - U2)] = 0`` and ``v(0) = 0``."""
    _check_p(p)
    vpp = np.asarray(vpp, dtype=float)
    z = np.linspace(-1.0, p, len(vpp)) if z is None else np.asarray(z, dtype=float)
    vp = integrate.cumulative_simpson(vpp, x=z, initial=0.0)
    return _profile_from_vprime(p, z, vp, "dominating")


def egalitarian_lorenz(spec: EgalitarianSpec, r, method: str = "exact", nodes: int = 1025):
    """Lorenz map of an egalitarian allocation.

    ``L1 = r1 r2 + int_0^{r2} [v(p r1 - u) - v(-u)] du`` and
    ``L2 = ((1 + p) r1 r2 - L1) / p``.  ``method="exact"`` integrates the
    interpolated ``v`` through its antiderivative.  ``method="simpson"`` uses
    composite Simpson and computes ``L2`` independently as
    ``r1 r2 - int_0^{r1} [v(p u) - v(p u - r2)] du``.
    """
    r = np.asarray(r, dtype=float)
    shape = r.shape
    flat = r.reshape(-1, 2)
    r1 = flat[:, 0]
    r2 = flat[:, 1]
    p = spec.p
    base = r1 * r2
    if method == "exact":
        l1 = base + spec.integral(p * r1 - r2, p * r1) - spec.integral(-r2, 0.0)
        l2 = ((1.0 + p) * base - l1) / p
    elif method == "simpson":
        t = np.linspace(0.0, 1.0, nodes)[None, :]
        w = _simpson_weights(nodes)
        u2 = r2[:, None] * t
        l1 = base + r2 * ((spec.v_at(p * r1[:, None] - u2) - spec.v_at(-u2)) @ w)
        u1 = r1[:, None] * t
        l2 = base - r1 * ((spec.v_at(p * u1) - spec.v_at(p * u1 - r2[:, None])) @ w)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.stack([l1, l2], axis=-1).reshape(shape)


def identical_egalitarian(p: float = 1.0, size: int = 4097) -> EgalitarianSpec:
    z = np.linspace(-1.0, p, size)
    return EgalitarianSpec(p, z, np.zeros(size), "given")
