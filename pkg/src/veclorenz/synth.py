"""Seeded samplers for the synthetic allocations and a weighted Kendall tau."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import kendalltau

from .closed_forms import TWO_POINT_ATOMS, EgalitarianSpec, lognormal_quantile
from .ingestion import Allocation

FAMILIES = ("lognormal_plackett", "two_point_X", "two_point_X_tilde", "identical",
            "comonotone_uniform", "egalitarian")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic allocation.

    ``kappa`` is the Plackett odds ratio; ``kappa = 1`` is independence.
    ``stratified`` places comonotone draws at the midpoints ``(i + 1/2) / n``.
    """

    family: str
    n: int
    seed: int = 0
    sigma1: float = 1.0
    sigma2: float = 1.0
    kappa: float = 1.0
    stratified: bool = True
    egalitarian: EgalitarianSpec | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("sigma must be nonnegative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.family == "egalitarian" and self.egalitarian is None:
            raise ValueError("egalitarian family needs an EgalitarianSpec")


def plackett_conditional_inverse(u, w, kappa: float):
    """Solve ``dC(u, v)/du = w`` for ``v`` in the Plackett copula."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if kappa == 1.0:
        return w.copy()
    a = w * (1.0 - w)
    b = kappa + a * (kappa - 1.0) ** 2
    c = 2.0 * a * (u * kappa ** 2 + 1.0 - u) + kappa * (1.0 - 2.0 * a)
    d = np.sqrt(kappa) * np.sqrt(kappa + 4.0 * a * u * (1.0 - u) * (1.0 - kappa) ** 2)
    return np.clip((c - (1.0 - 2.0 * w) * d) / (2.0 * b), 0.0, 1.0)


def plackett_copula(u, v, kappa: float):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if kappa == 1.0:
        return u * v
    s = 1.0 + (kappa - 1.0) * (u + v)
    return (s - np.sqrt(s * s - 4.0 * u * v * kappa * (kappa - 1.0))) / (2.0 * (kappa - 1.0))


def sample(spec: SynthSpec) -> Allocation:
    """Draw ``spec.n`` equally weighted points; unit means hold in expectation."""
    n = spec.n
    rng = np.random.default_rng(spec.seed)
    w = np.full(n, 1.0 / n)
    fam = spec.family
    if fam == "identical":
        pts = np.ones((n, 2))
    elif fam in ("two_point_X", "two_point_X_tilde"):
        atoms = TWO_POINT_ATOMS["X" if fam == "two_point_X" else "X_tilde"]
        pts = atoms[np.arange(n) % 2]
    elif fam == "comonotone_uniform":
        y = 2.0 * (np.arange(n) + 0.5) / n if spec.stratified else 2.0 * rng.random(n)
        pts = np.column_stack([y, y])
    elif fam == "lognormal_plackett":
        u = rng.random((n, 2))
        v = plackett_conditional_inverse(u[:, 0], u[:, 1], spec.kappa)
        pts = np.column_stack([lognormal_quantile(u[:, 0], spec.sigma1),
                               lognormal_quantile(v, spec.sigma2)])
    else:
        pts = spec.egalitarian.sample(rng.random((n, 2)))
    return Allocation(pts, w)


def kendall_tau(allocation: Allocation, block: int = 512) -> float:
    """Weighted Kendall rank correlation (tau-b form) of the two coordinates.

    ``sum w_i w_j sgn(dx) sgn(dy) / sqrt(sum w_i w_j [dx != 0] * sum w_i w_j [dy != 0])``
    over pairs; with equal weights this is scipy's tau-b.
    """
    x = allocation.points[:, 0]
    y = allocation.points[:, 1]
    w = allocation.weights
    n = len(x)
    if n < 2:
        raise ValueError("Kendall tau needs at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("Kendall tau is undefined for a constant coordinate")
    if np.allclose(w, w[0], rtol=0, atol=1e-15):
        return float(kendalltau(x, y).statistic)
    num = tx = ty = 0.0
    for start in range(0, n, block):
        sl = slice(start, start + block)
        sx = np.sign(x[sl, None] - x[None, :])
        sy = np.sign(y[sl, None] - y[None, :])
        ww = w[sl, None] * w[None, :]
        num += np.sum(ww * sx * sy)
        tx += np.sum(ww * (sx != 0))
        ty += np.sum(ww * (sy != 0))
    return float(num / np.sqrt(tx * ty))
