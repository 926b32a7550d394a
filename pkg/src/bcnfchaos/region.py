"""Polygonal regions, their images under g, forward-invariant closures,
trapping checks and the escape-time bounds (p_min, p_max, q_min, q_max).

Regions are lists of convex polygons.  Clipping against half-planes and
affine images are done here on vertex arrays; unions, containment and
boundary distances go through shapely.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely import STRtree
from shapely.geometry import Polygon
from shapely.ops import unary_union

from .bcnf import E1, BcnfParams, _side, eval_g
from .partition import NoEscapeError

SNAP_TOL = 1e-10
SLIVER = 1e-12  # clipped pieces below this fraction of the parent area are dropped
FATTEN = 1e-6


class RegionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    vertices: np.ndarray  # (n, 2), counter-clockwise

    @classmethod
    def from_points(cls, pts, tol: float = SNAP_TOL) -> "ConvexPolygon":
        v = _clean(np.asarray(pts, dtype=float), tol)
        if v is None:
            raise RegionError("degenerate polygon")
        if _signed_area(v) < 0:
            v = v[::-1]
        if not _is_convex(v, tol):
            raise RegionError("polygon is not convex")
        return cls(v)

    @classmethod
    def box(cls, x0, y0, x1, y1) -> "ConvexPolygon":
        return cls.from_points([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    @classmethod
    def regular(cls, center, radius, n: int = 32) -> "ConvexPolygon":
        t = 2 * np.pi * np.arange(n) / n
        c = np.asarray(center, dtype=float)
        return cls.from_points(c + radius * np.column_stack([np.cos(t), np.sin(t)]))

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cr.sum() / 2
        return np.array([((v[:, 0] + w[:, 0]) * cr).sum(), ((v[:, 1] + w[:, 1]) * cr).sum()]) / (6 * a)

    def clip(self, normal, offset: float, tol: float = SNAP_TOL):
        """Part where normal . x <= offset, or None if (nearly) empty."""
        n = np.asarray(normal, dtype=float)
        s = math.hypot(n[0], n[1])
        n, offset = n / s, offset / s
        v = self.vertices
        d = v @ n - offset
        d[np.abs(d) <= tol] = 0.0
        if (d <= 0).all():
            return self
        if (d >= 0).all():
            return None
        out = []
        m = len(v)
        for i in range(m):
            j = (i + 1) % m
            if d[i] <= 0:
                out.append(v[i])
            if d[i] * d[j] < 0:
                t = d[i] / (d[i] - d[j])
                out.append(v[i] + t * (v[j] - v[i]))
        w = _clean(np.array(out), tol)
        if w is None or _signed_area(w) <= SLIVER * self.area:
            return None
        return ConvexPolygon(w)

    def affine(self, M, t) -> "ConvexPolygon":
        M = np.asarray(M, dtype=float)
        w = _clean(self.vertices @ M.T + np.asarray(t, dtype=float), 0.0)
        if w is None:
            return None
        if np.linalg.det(M) < 0:
            w = w[::-1]
        return ConvexPolygon(w)

    def inflate(self, eps: float, mitre_limit: float = 2.0) -> "ConvexPolygon":
        """Outward offset of every edge by eps.  Corners are mitred, with
        the spike at sharp corners bevelled off at mitre_limit * eps."""
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        nrm = np.column_stack([e[:, 1], -e[:, 0]]) / np.hypot(e[:, 0], e[:, 1])[:, None]
        c = (nrm * v).sum(axis=1) + eps
        out = []
        m = len(v)
        for i in range(m):
            k = (i - 1) % m
            A = np.array([nrm[k], nrm[i]])
            out.append(np.linalg.solve(A, [c[k], c[i]]))
        P = ConvexPolygon.from_points(out)
        for i in range(m):
            b = nrm[i - 1] + nrm[i]
            b /= math.hypot(b[0], b[1])
            Q = P.clip(b, b @ v[i] + mitre_limit * eps, tol=0.0)
            P = P if Q is None else Q
        return P

    def fattened(self, eps: float) -> "ConvexPolygon":
        """Minkowski sum with the square [-eps, eps]^2; safe for slivers."""
        return _fat_hull(self.vertices, eps)

    def scaled(self, center, factor: float) -> "ConvexPolygon":
        c = np.asarray(center, dtype=float)
        return ConvexPolygon((self.vertices - c) * factor + c)

    def to_shapely(self) -> Polygon:
        return Polygon(self.vertices)

    def tolist(self) -> list:
        return self.vertices.tolist()


def _signed_area(v) -> float:
    w = np.roll(v, -1, axis=0)
    return float((v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]).sum() / 2)


def _clean(v, tol):
    """Drop repeated and collinear vertices; None if fewer than 3 remain."""
    if len(v) < 3:
        return None
    keep = [v[0]]
    for p in v[1:]:
        if np.abs(p - keep[-1]).max() > tol:
            keep.append(p)
    while len(keep) > 1 and np.abs(keep[0] - keep[-1]).max() <= tol:
        keep.pop()
    v = np.array(keep)
    changed = True
    while changed and len(v) >= 3:
        changed = False
        m = len(v)
        for i in range(m):
            a, b, c = v[i - 1], v[i], v[(i + 1) % m]
            cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            scale = max(np.abs(b - a).max() * np.abs(c - b).max(), 1e-300)
            if abs(cr) <= 1e-14 * scale:
                v = np.delete(v, i, axis=0)
                changed = True
                break
    if len(v) < 3 or abs(_signed_area(v)) == 0:
        return None
    return v


def _fat_hull(pts, eps: float) -> ConvexPolygon:
    """Convex hull of pts plus the square [-eps, eps]^2, for point sets that
    may be degenerate (collinear or coincident)."""
    sq = np.array([[-eps, -eps], [eps, -eps], [eps, eps], [-eps, eps]])
    pts = (np.asarray(pts, dtype=float)[:, None, :] + sq[None]).reshape(-1, 2)
    hull = shapely.MultiPoint(pts).convex_hull
    return ConvexPolygon.from_points(np.asarray(hull.exterior.coords)[:-1])


def _is_convex(v, tol) -> bool:
    m = len(v)
    for i in range(m):
        a, b, c = v[i - 1], v[i], v[(i + 1) % m]
        cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cr < -tol * max(1.0, np.abs(v).max()):
            return False
    return True


@dataclass
class RegionUnion:
    polygons: list
    meta: dict = field(default_factory=dict)
    _index: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.polygons:
            raise RegionError("a region needs at least one polygon")

    def __len__(self):
        return len(self.polygons)

    def __iter__(self):
        return iter(self.polygons)

    def to_shapely(self):
        """The merged union.  Overlay of many near-degenerate pieces is not
        robust, so containment checks use index() and local unions instead."""
        return unary_union([P.to_shapely() for P in self.polygons])

    def index(self):
        """(shapely pieces, STRtree over them)."""
        if getattr(self, "_index", None) is None:
            shapes = [P.to_shapely() for P in self.polygons]
            self._index = (shapes, STRtree(shapes))
        return self._index

    def local_union(self, geom, pad: float = 0.0):
        shapes, tree = self.index()
        if not pad:
            idx = tree.query(geom)
            return unary_union([shapes[i] for i in idx]) if len(idx) else None
        # clip to the padded window first; the window's own edges stay at
        # least pad away from geom
        box = geom.envelope.buffer(pad, join_style="mitre")
        idx = tree.query(box)
        if not len(idx):
            return None
        return unary_union(shapely.intersection(np.asarray(shapes, dtype=object)[idx], box))

    def distance(self, pts) -> np.ndarray:
        """Distance from each point to the region (0 inside)."""
        shapes, tree = self.index()
        geoms = shapely.points(np.asarray(pts, dtype=float))
        _, d = tree.query_nearest(geoms, return_distance=True, all_matches=False)
        return d

    def depth(self, pts, probe: float = 1e-2) -> np.ndarray:
        """Signed distance to the boundary, positive inside, capped at probe."""
        out = -self.distance(pts)
        for i in np.flatnonzero(out == 0):
            pt = shapely.Point(pts[i])
            loc = self.local_union(pt, probe)
            out[i] = min(loc.boundary.distance(pt), probe)
        return out

    @property
    def area(self) -> float:
        return float(self.to_shapely().area)

    def bbox(self):
        v = np.vstack([P.vertices for P in self.polygons])
        return v.min(axis=0), v.max(axis=0)

    def centroid(self) -> np.ndarray:
        c = self.to_shapely().centroid
        return np.array([c.x, c.y])

    def scaled(self, center, factor: float) -> "RegionUnion":
        return RegionUnion([P.scaled(center, factor) for P in self.polygons], dict(self.meta))

    def to_json(self) -> str:
        return json.dumps([P.tolist() for P in self.polygons])

    @classmethod
    def from_json(cls, text: str) -> "RegionUnion":
        data = json.loads(text)
        return cls([ConvexPolygon.from_points(p) for p in data])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["polygon", "x1", "x2"])
            for i, P in enumerate(self.polygons):
                for x1, x2 in P.vertices:
                    w.writerow([i, repr(float(x1)), repr(float(x2))])


def _half_points(v: np.ndarray, sign: float) -> np.ndarray:
    """Vertices of the part of a convex polygon with sign * x1 >= 0."""
    out = []
    m = len(v)
    for i in range(m):
        a, b = v[i], v[(i + 1) % m]
        if sign * a[0] >= 0:
            out.append(a)
        if a[0] * b[0] < 0:
            out.append(a + a[0] / (a[0] - b[0]) * (b - a))
    return np.array(out)


def map_polygon(params: BcnfParams, P: ConvexPolygon) -> list:
    """Images of the left and right parts of P.

    A part that degenerates numerically (a needle cut close to its tip) is
    not dropped: its image is replaced by the hull of its vertex images,
    fattened by FATTEN, so no points of P go missing.
    """
    out = []
    v = P.vertices
    left = P.clip((1.0, 0.0), 0.0)
    right = P.clip((-1.0, 0.0), 0.0)
    for piece, A, sign in ((left, params.A_L, -1.0), (right, params.A_R, 1.0)):
        Q = None if piece is None else piece.affine(A, E1)
        if Q is None and (sign * v[:, 0]).max() > SNAP_TOL:
            Q = _fat_hull(_half_points(v, sign) @ A.T + E1, FATTEN)
        if Q is not None:
            out.append(Q)
    return out


def map_region(params: BcnfParams, region: RegionUnion) -> RegionUnion:
    return RegionUnion([Q for P in region for Q in map_polygon(params, P)])


def _boundary_points(a: Polygon, per_edge: int) -> np.ndarray:
    c = np.asarray(a.exterior.coords)
    t = np.linspace(0.0, 1.0, per_edge, endpoint=False)[:, None]
    return (c[:-1, None, :] * (1 - t) + c[1:, None, :] * t).reshape(-1, 2)


def excess(a: Polygon, shapes, tree, per_edge: int = 16) -> float:
    """How far the convex piece a reaches outside the union of shapes.

    Probe points are the vertices of the overlay a - (local union) and
    points spread along the boundary of a.  Their distances are measured to
    the individual pieces, which stays reliable for slivers thinner than the
    overlay can resolve (such a sliver is essentially its own boundary).
    """
    idx = tree.query(a)
    if len(idx) == 0:
        return math.inf
    if len(tree.query(a, predicate="within")):
        return 0.0
    pts = shapely.points(_boundary_points(a, per_edge))
    _, dist = tree.query_nearest(pts, return_distance=True, all_matches=False)
    worst = float(dist.max())
    if worst > 0.0:
        return worst
    # only the parts of the candidates inside a matter for the overlay
    parts = shapely.intersection(np.asarray(shapes, dtype=object)[idx], a)
    d = a.difference(unary_union(parts))
    if d.is_empty:
        return 0.0
    _, dist = tree.query_nearest(shapely.points(shapely.get_coordinates(d)),
                                 return_distance=True, all_matches=False)
    return float(dist.max())


def _covered(Q, shapes, tree, strict: bool, tol: float) -> bool:
    Qs = Q.to_shapely()
    if strict:
        idx = tree.query(Qs)
        if len(idx) == 0:
            return False
        loc = unary_union([shapes[i] for i in idx])
        return loc.contains(Qs) and loc.boundary.distance(Qs) > tol
    return excess(Qs, shapes, tree) <= tol


def invariant_closure(params: BcnfParams, seed: RegionUnion, max_iter: int = 500,
                      inflate: float = 0.0, tol: float = SNAP_TOL, diameter_cap: float = 1e6) -> RegionUnion:
    """Accumulate images of the seed until they fall inside the union.

    Only pieces that are newly added get mapped again.  An image counts as
    covered when no point of it lies farther than tol outside the union;
    uncovered slivers are fattened by FATTEN before being stored.  With
    inflate > 0 every kept image is offset outwards by inflate, and an image
    is dropped only if it lies inside the union at distance above tol from
    its boundary.  Both together make the union map into its own interior,
    i.e. a trapping region.
    """
    strict = inflate > 0
    polys = list(seed.polygons)
    shapes = [P.to_shapely() for P in polys]
    frontier = list(polys)
    converged = False
    it = 0
    amin = SLIVER * sum(P.area for P in polys)
    for it in range(1, max_iter + 1):
        tree = STRtree(shapes)
        new = []
        for P in frontier:
            for Q in map_polygon(params, P):
                if strict and Q.area <= amin:
                    continue
                if _covered(Q, shapes, tree, strict, tol):
                    continue
                if strict:
                    Q = Q.inflate(inflate)
                elif Q.area <= amin:
                    # a sliver still carries points whose images may be
                    # stretched far; fatten it rather than drop it
                    Q = Q.fattened(FATTEN)
                new.append(Q)
        if not new:
            converged = True
            break
        polys.extend(new)
        shapes.extend(Q.to_shapely() for Q in new)
        frontier = new
        lo, hi = RegionUnion(new).bbox()
        lo0, hi0 = RegionUnion(polys).bbox()
        if np.hypot(*(np.maximum(hi, hi0) - np.minimum(lo, lo0))) > diameter_cap:
            raise RegionError("no bounded invariant region found from this seed")
    meta = {"iterations": it, "converged": converged, "inflate": inflate,
            "pieces": len(polys)}
    return RegionUnion(polys, meta)


def attractor_orbit(params: BcnfParams, n: int = 10_000, transient: int = 1000,
                    x0=(0.1, 0.1), blowup: float = 1e8) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    out = np.empty((n, 2))
    for i in range(transient + n):
        x = eval_g(params, x)
        if not np.all(np.abs(x) < blowup):
            raise RegionError(f"orbit from {tuple(x0)} diverges")
        if i >= transient:
            out[i - transient] = x
    return out


def bbox_seed(params: BcnfParams, n: int = 10_000, pad: float = 0.05, **kw) -> RegionUnion:
    """Bounding box of n attractor iterates, inflated by pad (relative)."""
    pts = attractor_orbit(params, n, **kw)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    m = pad * (hi - lo)
    return RegionUnion([ConvexPolygon.box(*(lo - m), *(hi + m))])


def patch_seed(params: BcnfParams, rel_size: float = 2.5e-3, n: int = 10_000, **kw) -> RegionUnion:
    """A small square centred on an attractor point, with half-width
    rel_size times the diameter of the sampled attractor."""
    pts = attractor_orbit(params, n, **kw)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    r = rel_size * float(np.hypot(*(hi - lo)))
    c = pts[0]
    return RegionUnion([ConvexPolygon.box(c[0] - r, c[1] - r, c[0] + r, c[1] + r)])


@dataclass
class PQBounds:
    p_min: int | None
    p_max: int | None
    q_min: int | None
    q_max: int | None
    values: dict = field(default_factory=dict)
    sampled: dict = field(default_factory=dict)

    def astuple(self):
        return (self.p_min, self.p_max, self.q_min, self.q_max)

    @property
    def complete(self) -> bool:
        return None not in self.astuple()

    @property
    def sampling_consistent(self) -> bool:
        for key, (lo, hi) in self.sampled.items():
            vals = self.values.get(key)
            if vals and (lo < min(vals) or hi > max(vals)):
                return False
        return True

    def to_dict(self) -> dict:
        return {"p_min": self.p_min, "p_max": self.p_max, "q_min": self.q_min,
                "q_max": self.q_max, "sampling_consistent": self.sampling_consistent}


_QUADRANT = {
    "Phi_L": [((1.0, 0.0), 0.0), ((0.0, 1.0), 0.0)],
    "Pi_L": [((1.0, 0.0), 0.0)],
    "Phi_R": [((-1.0, 0.0), 0.0), ((0.0, -1.0), 0.0)],
    "Pi_R": [((-1.0, 0.0), 0.0)],
}


def _restrict(region: RegionUnion, name: str) -> list:
    out = []
    for P in region:
        Q = P
        for n, c in _QUADRANT[name]:
            Q = Q.clip(n, c)
            if Q is None:
                break
        if Q is not None:
            out.append(Q)
    return out


def escape_cells(params: BcnfParams, P: ConvexPolygon, side: str, cap: int = 200,
                 rel_area: float = 1e-10) -> dict:
    """Split P (inside Pi_side) into the cells of constant escape time.

    The remainder after k steps is cut by the line g_side^{-k}(Sigma),
    written here as the zero set of the first row of the affine map
    g_side^k.  Returns {k: [cells]} for cells of non-negligible area.
    """
    side = _side(side)
    A = params.matrix(side)
    T = np.eye(2)
    t = np.zeros(2)
    rest = P
    cells = {}
    amin = rel_area * P.area
    for k in range(1, cap + 1):
        T = A @ T
        t = A @ t + E1
        row, off = T[0], t[0]
        # L escapes where row.x + off > 0, R where it is < 0
        s = 1.0 if side == "L" else -1.0
        esc = rest.clip(-s * row, s * off)
        if esc is not None and esc.area > amin:
            cells[k] = [esc]
        rest = rest.clip(s * row, -s * off)
        if rest is None or rest.area <= amin:
            return cells
    raise NoEscapeError(rest.vertices[0], cap)


def compute_pq_bounds(params: BcnfParams, region: RegionUnion, cap: int = 200,
                      samples: int = 10_000, seed: int = 0) -> PQBounds:
    """Exact extremes of chi_L / chi_R over the region, from the cells of
    the preimage-line arrangement, cross-checked by sampling."""
    values = {}
    for name, side in (("Phi_L", "L"), ("Pi_L", "L"), ("Phi_R", "R"), ("Pi_R", "R")):
        vals = set()
        for Q in _restrict(region, name):
            vals.update(escape_cells(params, Q, side, cap))
        values[name] = sorted(vals)

    def ext(name, f):
        return f(values[name]) if values[name] else None

    sampled = _sample_bounds(params, region, samples, seed, cap) if samples else {}
    return PQBounds(ext("Phi_L", min), ext("Pi_L", max), ext("Phi_R", min),
                    ext("Pi_R", max), values, sampled)


def sample_region(region: RegionUnion, n: int, rng) -> np.ndarray:
    """Uniform points in the union of convex polygons (overlaps are
    sampled proportionally more often, which is harmless here)."""
    areas = np.array([P.area for P in region])
    which = rng.choice(len(areas), size=n, p=areas / areas.sum())
    out = np.empty((n, 2))
    for i, k in enumerate(which):
        v = region.polygons[k].vertices
        # fan triangulation, pick a triangle by area then a point in it
        a, b, c = v[0], v[1:-1], v[2:]
        tri = np.abs((b[:, 0] - a[0]) * (c[:, 1] - a[1]) - (b[:, 1] - a[1]) * (c[:, 0] - a[0]))
        j = rng.choice(len(tri), p=tri / tri.sum())
        r1, r2 = rng.random(2)
        if r1 + r2 > 1:
            r1, r2 = 1 - r1, 1 - r2
        out[i] = a + r1 * (b[j] - a) + r2 * (c[j] - a)
    return out


def _sample_bounds(params, region, samples, seed, cap) -> dict:
    from .partition import escape_times

    rng = np.random.default_rng(seed)
    pts = sample_region(region, samples, rng)
    out = {}
    masks = {
        "Phi_L": (pts[:, 0] < 0) & (pts[:, 1] <= 0),
        "Pi_L": pts[:, 0] <= 0,
        "Phi_R": (pts[:, 0] > 0) & (pts[:, 1] >= 0),
        "Pi_R": pts[:, 0] >= 0,
    }
    for name, m in masks.items():
        if not m.any():
            continue
        chi, _ = escape_times(params, pts[m], name[-1], cap)
        if (chi < 0).any():
            raise NoEscapeError(pts[m][chi < 0][0], cap)
        out[name] = (int(chi.min()), int(chi.max()))
    return out


@dataclass
class TrappingReport:
    is_forward_invariant: bool
    is_trapping: bool
    margin: float
    pq_bounds: PQBounds | None
    outside_distance: float
    pq_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "is_forward_invariant": self.is_forward_invariant,
            "is_trapping": self.is_trapping,
            "margin": self.margin,
            "outside_distance": self.outside_distance,
            "pq_bounds": None if self.pq_bounds is None else self.pq_bounds.to_dict(),
            "pq_error": self.pq_error,
        }


def verify_trapping(params: BcnfParams, region: RegionUnion, shrink: float = 0.0,
                    cap: int = 200, tol: float = SNAP_TOL,
                    samples: int = 10_000, seed: int = 0, probe: float = 1e-2) -> TrappingReport:
    """Check g(region) inside region, and inside its interior.

    shrink > 0 first scales every polygon by (1 - shrink) about the centroid
    of the union.  Each image piece is compared with the union of the
    region's pieces near it.  Forward invariance allows the image to stick
    out by at most tol.  The margin is the distance from the image to the
    region's boundary (capped at probe), 0 unless the image is interior.
    """
    if shrink:
        region = region.scaled(region.centroid(), 1.0 - shrink)
    outside = 0.0
    margin = probe
    inside = True
    shapes, tree = region.index()
    for Q in map_region(params, region):
        qs = Q.to_shapely()
        outside = max(outside, excess(qs, shapes, tree))
        if outside > tol:
            inside = False
            break
        if not inside:
            continue
        loc = region.local_union(qs, probe)
        if loc.contains(qs):
            # boundary of the local union within probe of Q is boundary of
            # the region, so this is a valid lower bound
            margin = min(margin, loc.boundary.distance(qs))
        else:
            inside = False
    fi = outside <= tol
    trapping = fi and inside and margin > tol
    if not trapping:
        margin = 0.0
    pq, err = None, None
    try:
        pq = compute_pq_bounds(params, region, cap, samples, seed)
    except NoEscapeError as exc:
        err = str(exc)
    return TrappingReport(fi, trapping, margin, pq, outside, err)
