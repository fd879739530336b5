"""Independent reference computations shared by the test modules."""
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.stats import norm

from veclorenz.geometry import ConvexPolygon, clip_to_rectangle, polygon_area

GRID = 60


def grid_centres(g=GRID):
    c = (np.arange(g) + 0.5) / g
    a, b = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def discrete_ot(sites, weights, g=GRID):
    """Exact LP transport of ``g*g`` equal grid masses onto weighted sites.

    Returns the plan (squares x sites) and the dual weights of the site
    constraints, oriented like the semi-discrete ``h``.
    """
    u = grid_centres(g)
    k, n = len(u), len(sites)
    cost = -(u @ np.asarray(sites).T).ravel()
    a_rows = sp.kron(sp.eye(k), np.ones((1, n)))
    a_cols = sp.kron(np.ones((1, k)), sp.eye(n))
    res = linprog(cost, A_eq=sp.vstack([a_rows, a_cols]).tocsr(),
                  b_eq=np.r_[np.full(k, 1.0 / k), weights], bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return res.x.reshape(k, n), res.eqlin.marginals[k:]


def far_mass(fit, plan, g=GRID, reach=1):
    """Per site, LP mass coming from squares more than ``reach`` steps from its fitted cell."""
    u = grid_centres(g)
    half = 0.5 / g + reach / g
    out = np.zeros(plan.shape[1])
    for i, cell in enumerate(fit.cells):
        for k in np.nonzero(plan[:, i] > 0)[0]:
            lo = u[k] - half
            moved = ConvexPolygon(tuple((x - lo[0], y - lo[1]) for x, y in cell.vertices),
                                  cell.edge_labels)
            if polygon_area(clip_to_rectangle(moved, (2 * half, 2 * half))) <= 0.0:
                out[i] += plan[k, i]
    return out


def grid_ot_oracle(fit, g=GRID):
    """Per-site gaps between a transport fit and the discrete LP."""
    plan, _ = discrete_ot(fit.sites, fit.target_weights, g)
    return {
        "mass_gap": np.abs(plan.sum(axis=0) - fit.areas),
        "far_mass": far_mass(fit, plan, g),
    }


def mc_lorenz(sites_of, r, u):
    """Monte-Carlo Lorenz map: mean of ``X(U) 1{U <= r}`` over uniforms ``u``."""
    x = sites_of(u)
    inside = (u[:, 0] <= r[0]) & (u[:, 1] <= r[1])
    return (x * inside[:, None]).mean(axis=0)


# --------------------------------------------------------------------------
# potentials with exact derivatives


def base_potential():
    """``u1 + u2 + (u1 - 1/2)^2 / 2 + (u2 - 1/2)^2 / 2``: unit means, strictly convex."""
    def psi(u1, u2):
        return u1 + u2 + 0.5 * (u1 - 0.5) ** 2 + 0.5 * (u2 - 0.5) ** 2

    def hess(u1, u2):
        one = np.ones_like(u1)
        return one, one, 0.0 * one

    return psi, hess


def ultramodular_perturbation(rng):
    """Random ultramodular function whose gradient has mean zero, with its Hessian.

    Mixes ``a x^2 + b y^2 + d x y`` (``x = u1 - 1/2``, ``a, b >= d >= 0``),
    ``c (u1 + u2 - 1)^4`` and ``e [exp(k (u1 + u2)) - m (u1 + u2)]`` with ``m``
    the mean of ``k exp(k (u1 + u2))``.
    """
    d = rng.uniform(0.0, 1.0)
    a, b = d + rng.uniform(0.0, 1.0, size=2)
    c = rng.uniform(0.0, 1.0)
    e = rng.uniform(0.0, 0.3)
    k = rng.uniform(0.2, 1.5)
    m = (np.exp(k) - 1.0) ** 2 / k

    def phi(u1, u2):
        x, y, s = u1 - 0.5, u2 - 0.5, u1 + u2
        return (a * x * x + b * y * y + d * x * y + c * (s - 1.0) ** 4
                + e * (np.exp(k * s) - m * s))

    def hess(u1, u2):
        s = u1 + u2
        q = 12.0 * c * (s - 1.0) ** 2 + e * k * k * np.exp(k * s)
        return 2.0 * a + q, 2.0 * b + q, d + q

    return phi, hess


def add_potentials(first, second, scale=1.0):
    (f, fh), (g, gh) = first, second

    def psi(u1, u2):
        return f(u1, u2) + scale * g(u1, u2)

    def hess(u1, u2):
        return tuple(np.asarray(x) + scale * np.asarray(y) for x, y in zip(fh(u1, u2), gh(u1, u2)))

    return psi, hess


def lognormal_independent_potential(sigma, clip=1e-6):
    """``Lambda(u1) + Lambda(u2)`` with ``Lambda' `` the unit-mean lognormal quantile.

    Second derivatives are evaluated at ranks clipped to ``[clip, 1 - clip]``.
    """
    def lam(u):
        return norm.cdf(norm.ppf(u) - sigma)

    def qprime(u):
        u = np.clip(u, clip, 1.0 - clip)
        x = norm.ppf(u)
        return sigma * np.exp(sigma * x - sigma * sigma / 2.0) / norm.pdf(x)

    def psi(u1, u2):
        return lam(u1) + lam(u2)

    def hess(u1, u2):
        return qprime(u1), qprime(u2), 0.0 * np.asarray(u1, dtype=float)

    return psi, hess
