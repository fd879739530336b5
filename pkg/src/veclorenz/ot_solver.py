"""Semi-discrete quadratic transport from the uniform law on the unit square.

Given sites ``X_i`` with weights ``w_i``, find dual weights ``h`` such that the
cell ``W_i(h) = {u : u.X_i + h_i >= u.X_j + h_j for all j}`` has area ``w_i``.
The weights minimise the convex function

    f(h) = int max_i (u.X_i + h_i) du - sum_i w_i h_i,

whose gradient is ``area(W_i) - w_i``.  We run a damped Newton method on it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .geometry import PowerDiagram, build_power_diagram, check_distinct

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Newton iteration failed; ``residual`` holds the last max area error."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    """Newton solver settings.

    Parameters
    ----------
    tolerance : float
        Target for ``max_i |area_i - w_i|``, expressed relative to ``min_i w_i``.
    max_iterations : int
        Newton steps before giving up.
    damping_floor : float
        Smallest step fraction tried before declaring failure.
    """

    tolerance: float = 1e-7
    max_iterations: int = 100
    damping_floor: float = 2.0 ** -20

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.damping_floor <= 1:
            raise ValueError("damping_floor must lie in (0, 1]")


@dataclass(frozen=True)
class TransportFit:
    diagram: PowerDiagram
    target_weights: np.ndarray
    residual: float
    iterations: int
    objective_history: tuple = field(default=(), compare=False)

    @property
    def sites(self) -> np.ndarray:
        return self.diagram.sites

    @property
    def dual_weights(self) -> np.ndarray:
        return self.diagram.dual_weights

    @property
    def cells(self):
        return self.diagram.cells

    @property
    def areas(self) -> np.ndarray:
        return self.diagram.areas

    def gradient_map(self, u) -> np.ndarray:
        """The fitted vector quantile: the site of the cell containing ``u``."""
        return self.sites[self.diagram.locate(u)]


def _objective(diagram: PowerDiagram, w: np.ndarray) -> float:
    m = diagram.raw_moments
    x = diagram.sites
    h = diagram.dual_weights
    # on W_i the potential is u.X_i + h_i
    integral = np.sum(x[:, 0] * m[:, 1] + x[:, 1] * m[:, 2] + h * m[:, 0])
    return float(integral - w @ h)


def dual_value_and_gradient(sites, target_weights, h):
    """Dual objective and its gradient ``area(W_i(h)) - w_i``.

    Examples
    --------
    >>> v, g = dual_value_and_gradient([[2, 0], [0, 2]], [0.75, 0.25], [0, 0])
    >>> g.round(12).tolist()
    [-0.25, 0.25]
    """
    w = np.asarray(target_weights, dtype=float)
    diagram = build_power_diagram(sites, h)
    return _objective(diagram, w), diagram.areas - w


def _hessian(diagram: PowerDiagram) -> sp.csr_matrix:
    n = len(diagram.sites)
    ii, jj, lengths = diagram.shared_edges
    x = diagram.sites
    off = -lengths / np.linalg.norm(x[ii] - x[jj], axis=1)
    rows = np.concatenate([ii, jj])
    cols = np.concatenate([jj, ii])
    vals = np.concatenate([off, off])
    hess = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(hess.sum(axis=1)).ravel()
    return (hess + sp.diags(diag)).tocsr()


def _newton_direction(diagram: PowerDiagram, grad: np.ndarray) -> np.ndarray:
    n = len(grad)
    hess = _hessian(diagram)
    # the objective is invariant under h -> h + c; pin the last coordinate
    reduced = hess[:-1, :-1].tocsc()
    step = np.zeros(n)
    step[:-1] = spsolve(reduced, -grad[:-1])
    if not np.all(np.isfinite(step)):
        raise np.linalg.LinAlgError("singular Hessian")
    return step


def initial_weights(sites: np.ndarray) -> np.ndarray:
    """Dual weights whose diagram is a scaled Voronoi diagram of the sites.

    With ``Y_i = c + s X_i`` mapped into the square, ``h_i = -|Y_i|^2 / (2s)``
    makes the cells Voronoi cells of the ``Y_i``, so every site owns a
    nonempty cell.  Starting from ``h = 0`` leaves interior sites empty.
    """
    span = np.ptp(sites, axis=0).max()
    if span <= 0:
        return np.zeros(len(sites))
    s = 0.9 / span
    centre = np.array([0.5, 0.5]) - s * (sites.min(axis=0) + sites.max(axis=0)) / 2.0
    y = centre + s * sites
    # |u - Y_i|^2 is smallest where s u.X_i - |Y_i|^2 / 2 is largest
    h = -np.sum(y * y, axis=1) / (2.0 * s)
    return h - h.mean()


def _fill_empty_cells(sites, w, h, max_steps=200):
    # short gradient steps until every cell with positive target is nonempty
    for _ in range(max_steps):
        diagram = build_power_diagram(sites, h)
        if np.all(diagram.areas[w > 0] > 0):
            return h, diagram
        h = h - 0.5 * (diagram.areas - w) * np.ptp(sites, axis=0).max()
    raise ConvergenceError("could not find dual weights with nonempty cells",
                           float(np.abs(diagram.areas - w).max()), 0)


def _polish(x, w, h, diagram, grad):
    # one undamped Newton step past the tolerance, kept only if it helps
    try:
        h_new = h + _newton_direction(diagram, grad)
    except (np.linalg.LinAlgError, RuntimeError):
        return h, diagram
    cand = build_power_diagram(x, h_new)
    if np.abs(cand.areas - w).max() < np.abs(grad).max() and np.all(cand.areas > 0):
        return h_new, cand
    return h, diagram


def solve(sites, target_weights, config: SolverConfig | None = None, h0=None) -> TransportFit:
    """Damped Newton solve for the dual weights.

    Parameters
    ----------
    sites : array_like, shape (n, 2)
        Distinct points.
    target_weights : array_like, shape (n,)
        Positive weights summing to 1.
    config : SolverConfig, optional
    h0 : array_like, optional
        Warm start; defaults to :func:`initial_weights`.

    Returns
    -------
    TransportFit
        Dual weights are centred to sum to zero.

    Raises
    ------
    ConvergenceError
        If the residual target is not met within ``max_iterations`` or the
        step size falls below ``damping_floor``.
    """
    config = config or SolverConfig()
    x = np.asarray(sites, dtype=float).reshape(-1, 2)
    w = np.asarray(target_weights, dtype=float).reshape(-1)
    if len(x) != len(w):
        raise ValueError("sites and target_weights differ in length")
    if np.any(w <= 0):
        raise ValueError("target weights must be positive")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"target weights sum to {w.sum()!r}, expected 1")
    check_distinct(x)
    n = len(x)
    tol = config.tolerance * w.min()

    if n == 1:
        diagram = build_power_diagram(x, np.zeros(1))
        return TransportFit(diagram, w, 0.0, 0, (0.0,))

    h = initial_weights(x) if h0 is None else np.asarray(h0, dtype=float).copy()
    h, diagram = _fill_empty_cells(x, w, h)
    grad = diagram.areas - w
    value = _objective(diagram, w)
    history = [value]
    eps0 = 0.5 * min(w.min(), diagram.areas.min())
    residual = float(np.abs(grad).max())
    it = 0
    while residual > tol:
        if it >= config.max_iterations:
            raise ConvergenceError("Newton iteration did not converge", residual, it)
        try:
            direction = _newton_direction(diagram, grad)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise ConvergenceError(f"linear solve failed: {exc}", residual, it) from exc
        gnorm = np.linalg.norm(grad)
        tau = 1.0
        while True:
            h_new = h + tau * direction
            cand = build_power_diagram(x, h_new)
            g_new = cand.areas - w
            v_new = _objective(cand, w)
            ok = (cand.areas.min() >= eps0
                  and np.linalg.norm(g_new) <= (1.0 - tau / 2.0) * gnorm
                  and v_new <= value + 1e-14 * max(1.0, abs(value)))
            if ok:
                break
            tau /= 2.0
            if tau < config.damping_floor:
                raise ConvergenceError("damping fell below floor", residual, it)
        h, diagram, grad, value = h_new, cand, g_new, v_new
        history.append(value)
        residual = float(np.abs(grad).max())
        it += 1
        log.debug("newton %d: tau=%.3g residual=%.3e", it, tau, residual)

    if it > 0:
        h, diagram = _polish(x, w, h, diagram, grad)
    h = h - h.mean()
    diagram = build_power_diagram(x, h)
    residual = float(np.abs(diagram.areas - w).max())
    return TransportFit(diagram, w, residual, it, tuple(history))
