"""Convex polygons in the unit square and power diagrams built from them.

A power diagram here is the partition of ``[0, 1]^2`` induced by the
max-affine function ``u -> max_i (u . X_i + h_i)``: cell ``i`` collects the
points where the ``i``-th affine piece is the largest.  Cells are produced by
half-plane clipping of the unit square.  The candidate neighbours of each
site come from the lower convex hull of the lifted points ``(X_i, -h_i)``
(qhull), from a 1-D envelope when all sites are collinear, or from all other
sites as a last resort.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

EPS_GEOM = 1e-12
EPS_AREA = 1e-9

UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))

# Labels for the four sides of the unit square (bottom, right, top, left).
# Non-negative labels are site indices.
_SQUARE_LABELS = (-1, -2, -3, -4)

MOMENT_KINDS = ("1", "u1", "u2", "u1u2", "(1-u1)(1-u2)", "u1+u2-u1u2")


class DuplicateSitesError(ValueError):
    """Two or more sites coincide; the caller should jitter or merge them."""


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise convex polygon; ``vertices`` may be empty."""

    vertices: tuple = ()
    # label of the edge leaving each vertex: a site index or a square side
    edge_labels: tuple = ()

    @classmethod
    def unit_square(cls) -> "ConvexPolygon":
        return cls(UNIT_SQUARE, _SQUARE_LABELS)

    @classmethod
    def from_points(cls, points) -> "ConvexPolygon":
        pts = tuple((float(x), float(y)) for x, y in np.asarray(points, dtype=float).reshape(-1, 2))
        return cls(pts, tuple(-1 for _ in pts))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) < 3

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float).reshape(-1, 2)

    def contains(self, point, tol: float = EPS_GEOM) -> bool:
        if self.is_empty:
            return False
        x, y = float(point[0]), float(point[1])
        verts = self.vertices
        for k in range(len(verts)):
            x0, y0 = verts[k]
            x1, y1 = verts[(k + 1) % len(verts)]
            if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < -tol:
                return False
        return True


def _clip(vertices, labels, a1, a2, b, label):
    """Keep the part of a convex polygon where ``a1*x + a2*y <= b``.

    The new edge running along the clipping line gets ``label``; pieces of old
    edges keep theirs.
    """
    n = len(vertices)
    if n == 0:
        return vertices, labels
    s = [a1 * x + a2 * y - b for x, y in vertices]
    if max(s) <= 0.0:
        return vertices, labels
    if min(s) > 0.0:
        return (), ()
    out_v = []
    out_l = []
    for k in range(n):
        k1 = (k + 1) % n
        sk, sk1 = s[k], s[k1]
        if sk <= 0.0:
            out_v.append(vertices[k])
            out_l.append(labels[k])
            if sk1 > 0.0:
                t = sk / (sk - sk1)
                x0, y0 = vertices[k]
                x1, y1 = vertices[k1]
                out_v.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
                out_l.append(label)
        elif sk1 <= 0.0:
            t = sk / (sk - sk1)
            x0, y0 = vertices[k]
            x1, y1 = vertices[k1]
            out_v.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
            out_l.append(labels[k])
    return _merge_close(out_v, out_l)


def _merge_close(vertices, labels, tol=EPS_GEOM):
    # drop zero-length edges; the edge entering a dropped vertex survives
    n = len(vertices)
    if n < 2:
        return tuple(vertices), tuple(labels)
    keep_v = []
    keep_l = []
    for k in range(n):
        x0, y0 = vertices[k]
        x1, y1 = vertices[(k + 1) % n]
        if abs(x1 - x0) <= tol and abs(y1 - y0) <= tol:
            continue
        keep_v.append(vertices[k])
        keep_l.append(labels[k])
    if len(keep_v) < 3:
        return (), ()
    return tuple(keep_v), tuple(keep_l)


def _raw_moments(vertices):
    """Integrals of 1, x, y, xy over a CCW polygon by Green's theorem."""
    n = len(vertices)
    if n < 3:
        return 0.0, 0.0, 0.0, 0.0
    a = mx = my = mxy = 0.0
    for k in range(n):
        x0, y0 = vertices[k]
        x1, y1 = vertices[(k + 1) % n]
        c = x0 * y1 - x1 * y0
        a += c
        mx += (x0 + x1) * c
        my += (y0 + y1) * c
        mxy += (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0) * c
    return a / 2.0, mx / 6.0, my / 6.0, mxy / 24.0


def polygon_area(poly: ConvexPolygon) -> float:
    """Shoelace area; 0 for fewer than three vertices."""
    return max(_raw_moments(poly.vertices)[0], 0.0)


def polygon_moment(poly: ConvexPolygon, kind: str) -> float:
    """Exact integral of a low-degree polynomial over ``poly``.

    ``kind`` is one of ``"1"``, ``"u1"``, ``"u2"``, ``"u1u2"``,
    ``"(1-u1)(1-u2)"`` and ``"u1+u2-u1u2"``.
    """
    a, mx, my, mxy = _raw_moments(poly.vertices)
    if kind == "1":
        return a
    if kind == "u1":
        return mx
    if kind == "u2":
        return my
    if kind == "u1u2":
        return mxy
    if kind == "(1-u1)(1-u2)":
        return a - mx - my + mxy
    if kind == "u1+u2-u1u2":
        return mx + my - mxy
    raise ValueError(f"unknown moment kind {kind!r}; expected one of {MOMENT_KINDS}")


def clip_to_rectangle(poly: ConvexPolygon, r) -> ConvexPolygon:
    """Intersection of ``poly`` with the rank rectangle ``[0, r1] x [0, r2]``."""
    r1, r2 = float(r[0]), float(r[1])
    v, lab = poly.vertices, poly.edge_labels
    v, lab = _clip(v, lab, 1.0, 0.0, r1, -2)
    v, lab = _clip(v, lab, 0.0, 1.0, r2, -3)
    v, lab = _clip(v, lab, -1.0, 0.0, 0.0, -4)
    v, lab = _clip(v, lab, 0.0, -1.0, 0.0, -1)
    return ConvexPolygon(v, lab)


def power_cell(i, sites, dual_weights, neighbours) -> ConvexPolygon:
    """Cell ``i`` of the max-affine diagram, clipped against ``neighbours``.

    An empty neighbour list with more than one site means site ``i`` never
    attains the maximum, so the cell is empty.
    """
    if len(sites) > 1 and len(neighbours) == 0:
        return ConvexPolygon()
    xi, yi = sites[i]
    hi = dual_weights[i]
    v, lab = UNIT_SQUARE, _SQUARE_LABELS
    for j in neighbours:
        if j == i:
            continue
        # u.X_j + h_j <= u.X_i + h_i
        v, lab = _clip(v, lab, sites[j][0] - xi, sites[j][1] - yi, hi - dual_weights[j], int(j))
        if not v:
            break
    return ConvexPolygon(v, lab)


def _hull_neighbours(sites: np.ndarray, h: np.ndarray):
    lifted = np.column_stack([sites, -h])
    # rescale so qhull's precision heuristics see a well-proportioned cloud
    span = np.ptp(lifted, axis=0)
    span[span == 0.0] = 1.0
    hull = ConvexHull((lifted - lifted.min(axis=0)) / span, qhull_options="Qt")
    normals_z = hull.equations[:, 2] / span[2]
    norms = np.linalg.norm(hull.equations[:, :3] / span, axis=1)
    lower = normals_z / norms < 1e-9
    nbrs = [set() for _ in range(len(sites))]
    for a, b, c in hull.simplices[lower]:
        nbrs[a].update((b, c))
        nbrs[b].update((a, c))
        nbrs[c].update((a, b))
    return [sorted(s) for s in nbrs]


def _collinear_direction(sites: np.ndarray):
    centred = sites - sites.mean(axis=0)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    scale = max(s[0], 1e-300)
    if s.size > 1 and s[1] > 1e-12 * scale:
        return None
    return vt[0]


def _envelope_neighbours(sites: np.ndarray, h: np.ndarray, direction: np.ndarray):
    # collinear sites: the argmax depends on s = u . direction only, and the
    # envelope pieces are consecutive vertices of the lower hull of (t_i, -h_i)
    t = (sites - sites[0]) @ direction
    order = np.lexsort((-h, t))
    chain: list[int] = []
    for k in order:
        if chain and t[chain[-1]] == t[k]:
            continue
        while len(chain) >= 2:
            a, b = chain[-2], chain[-1]
            cross = (t[b] - t[a]) * (-h[k] + h[a]) - (-h[b] + h[a]) * (t[k] - t[a])
            if cross <= 0.0:
                chain.pop()
            else:
                break
        chain.append(int(k))
    nbrs = [[] for _ in range(len(sites))]
    for a, b in zip(chain[:-1], chain[1:]):
        nbrs[a].append(b)
        nbrs[b].append(a)
    return nbrs


def check_distinct(sites: np.ndarray) -> None:
    if len(np.unique(sites, axis=0)) != len(sites):
        raise DuplicateSitesError(
            "duplicate sites: merge them or separate them with jitter_duplicates()")


@dataclass(frozen=True)
class PowerDiagram:
    """Cells of ``max_i (u . X_i + h_i)`` over the unit square."""

    sites: np.ndarray
    dual_weights: np.ndarray
    cells: tuple
    method: str = field(default="hull", compare=False)

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([polygon_area(c) for c in self.cells])

    @cached_property
    def raw_moments(self) -> np.ndarray:
        """(n, 4) array of integrals of 1, u1, u2, u1*u2 over each cell."""
        if not self.cells:
            return np.zeros((0, 4))
        return np.array([_raw_moments(c.vertices) for c in self.cells])

    def moments(self, kind: str) -> np.ndarray:
        m = self.raw_moments
        table = {
            "1": m[:, 0],
            "u1": m[:, 1],
            "u2": m[:, 2],
            "u1u2": m[:, 3],
            "(1-u1)(1-u2)": m[:, 0] - m[:, 1] - m[:, 2] + m[:, 3],
            "u1+u2-u1u2": m[:, 1] + m[:, 2] - m[:, 3],
        }
        if kind not in table:
            raise ValueError(f"unknown moment kind {kind!r}; expected one of {MOMENT_KINDS}")
        return table[kind]

    @cached_property
    def shared_edges(self):
        """Shared edge lengths as arrays ``(i, j, length)`` with ``i < j``."""
        acc: dict[tuple[int, int], list[float]] = {}
        for i, cell in enumerate(self.cells):
            verts = cell.vertices
            n = len(verts)
            for k, j in enumerate(cell.edge_labels):
                if j < 0:
                    continue
                x0, y0 = verts[k]
                x1, y1 = verts[(k + 1) % n]
                length = float(np.hypot(x1 - x0, y1 - y0))
                key = (i, j) if i < j else (j, i)
                acc.setdefault(key, []).append(length)
        if not acc:
            empty = np.zeros(0, dtype=int)
            return empty, empty, np.zeros(0)
        keys = sorted(acc)
        ii = np.array([k[0] for k in keys], dtype=int)
        jj = np.array([k[1] for k in keys], dtype=int)
        # each edge is seen from both sides; average the two measurements
        lengths = np.array([sum(acc[k]) / 2.0 if len(acc[k]) > 1 else acc[k][0] for k in keys])
        return ii, jj, lengths

    def locate(self, points) -> np.ndarray:
        """Index of the cell containing each point (argmax of the affine pieces)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scores = pts @ self.sites.T + self.dual_weights
        return np.argmax(scores, axis=1)


def build_power_diagram(sites, dual_weights, method: str = "auto") -> PowerDiagram:
    """Cells ``{u in [0,1]^2 : u.X_i + h_i >= u.X_j + h_j for all j}``.

    ``method`` is ``"auto"`` (hull neighbours, collinear envelope, or brute
    force, whichever applies), or ``"brute"`` to clip every cell against every
    other site.
    """
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    h = np.asarray(dual_weights, dtype=float).reshape(-1)
    if len(sites) != len(h):
        raise ValueError("sites and dual_weights must have the same length")
    if not np.all(np.isfinite(h)) or not np.all(np.isfinite(sites)):
        raise ValueError("sites and dual weights must be finite")
    check_distinct(sites)
    n = len(sites)
    s_list = [tuple(p) for p in sites.tolist()]
    h_list = h.tolist()

    nbrs = None
    used = "brute"
    if method == "auto" and n > 1:
        direction = _collinear_direction(sites) if n > 2 else None
        if n == 2 or direction is not None:
            if n == 2:
                nbrs = [[1], [0]]
            else:
                nbrs = _envelope_neighbours(sites, h, direction)
            used = "envelope"
        else:
            try:
                nbrs = _hull_neighbours(sites, h)
                used = "hull"
            except QhullError:
                nbrs = None
    elif method not in ("auto", "brute"):
        raise ValueError(f"unknown method {method!r}")

    if nbrs is not None:
        cells = tuple(power_cell(i, s_list, h_list, nbrs[i]) for i in range(n))
        diagram = PowerDiagram(sites, h, cells, used)
        if abs(diagram.areas.sum() - 1.0) <= EPS_AREA:
            return diagram
    everyone = range(n)
    cells = tuple(power_cell(i, s_list, h_list, everyone) for i in range(n))
    return PowerDiagram(sites, h, cells, "brute")
