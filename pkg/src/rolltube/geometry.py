"""Exact polytope arithmetic in halfspace representation for low dimensions.

All sets used by the controller (state/input/disturbance constraints, tube
cross sections, terminal regions) are bounded convex polytopes in dimension
four or less.  This module keeps the halfspace form {x : N x <= c} primary
and enumerates vertices lazily by intersecting facet subsets, which is exact
and fast at these sizes.  Minkowski sums and affine images go through the
vertex representation; Pontryagin differences and containment checks go
through support functions.
"""

import itertools

import numpy as np
from scipy.spatial import ConvexHull, QhullError

# Facet satisfaction and vertex deduplication tolerances.  Double precision
# leaves ample headroom at the desk scales handled here.
FACET_TOL = 1e-9
VERTEX_TOL = 1e-8


class Polytope:
    """Bounded convex polytope {x : normals @ x <= offsets}.

    Rows of ``normals`` are scaled to unit length on construction, so offsets
    are geometric distances from the origin.  An explicitly flagged empty
    polytope is allowed (it arises from over-tightening); every other
    instance is assumed nonempty and bounded.
    """

    def __init__(self, normals, offsets, vertices=None, empty=False):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).ravel()
        if normals.shape[0] != offsets.shape[0]:
            raise ValueError(
                f"facet count mismatch: {normals.shape[0]} normals, {offsets.shape[0]} offsets"
            )
        if not empty:
            norms = np.linalg.norm(normals, axis=1)
            keep = norms > 1e-14
            normals = normals[keep] / norms[keep, None]
            offsets = offsets[keep] / norms[keep]
        self.normals = normals
        self.offsets = offsets
        self.normals.flags.writeable = False
        self.offsets.flags.writeable = False
        self.dim = normals.shape[1]
        self.is_empty = bool(empty)
        self._vertices = None
        if vertices is not None:
            self._vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
            self._vertices.flags.writeable = False

    # ---------------------------------------------------------------- ctors

    @classmethod
    def box(cls, lo, hi):
        """Axis-aligned box [lo, hi] (componentwise)."""
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal length")
        if np.any(hi < lo):
            raise ValueError("box requires lo <= hi componentwise")
        d = lo.size
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def point(cls, x):
        """Degenerate polytope containing exactly one point."""
        x = np.asarray(x, dtype=float).ravel()
        eye = np.eye(x.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([x, -x]),
                   vertices=x[None, :])

    @classmethod
    def empty(cls, dim):
        """Explicit empty-set value in ambient dimension ``dim``."""
        p = cls(np.zeros((0, dim)), np.zeros(0), empty=True)
        p._vertices = np.zeros((0, dim))
        return p

    @classmethod
    def from_vertices(cls, points):
        """Convex hull of a point cloud, kept in ambient dimension.

        Lower-dimensional hulls (points, segments, flat polygons) are
        represented with paired opposing facets along the orthogonal
        complement of their affine hull.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] == 0:
            raise ValueError("from_vertices needs at least one point")
        d = points.shape[1]
        points = _dedup_points(points)
        if points.shape[0] == 1:
            return cls.point(points[0])

        center = points.mean(axis=0)
        shifted = points - center
        _, svals, vt = np.linalg.svd(shifted, full_matrices=True)
        scale = max(1.0, float(svals[0]))
        rank = int(np.sum(svals > 1e-12 * scale))
        if rank == 0:
            return cls.point(center)

        basis = vt[:rank].T  # ambient -> affine-hull coordinates
        coords = shifted @ basis
        if rank == 1:
            lo, hi = float(coords.min()), float(coords.max())
            axis = basis[:, 0]
            face_n = [axis, -axis]
            face_c = [hi + axis @ center, -(lo + axis @ center)]
            verts = np.vstack([center + lo * axis, center + hi * axis])
        else:
            try:
                hull = ConvexHull(coords)
            except QhullError:
                hull = ConvexHull(coords, qhull_options="QJ")
            face_n = list(hull.equations[:, :-1] @ basis.T)
            face_c = [-hull.equations[i, -1] + face_n[i] @ center
                      for i in range(len(face_n))]
            verts = points[hull.vertices] if rank == d else center + coords[hull.vertices] @ basis.T
        # equality pairs pinning the affine hull
        for j in range(rank, d):
            u = vt[j]
            face_n.extend([u, -u])
            face_c.extend([u @ center, -(u @ center)])
        poly = cls(np.array(face_n), np.array(face_c), vertices=_dedup_points(verts))
        return poly

    @classmethod
    def from_json_dict(cls, data):
        """Parse {"normals": ..., "offsets": ...} or {"box": {"lo", "hi"}}."""
        if "box" in data:
            return cls.box(data["box"]["lo"], data["box"]["hi"])
        if "normals" not in data or "offsets" not in data:
            raise ValueError("polytope JSON needs 'normals'/'offsets' or 'box'")
        return cls(data["normals"], data["offsets"])

    def to_json_dict(self):
        return {"normals": self.normals.tolist(), "offsets": self.offsets.tolist()}

    # ------------------------------------------------------------- queries

    def vertices(self):
        """Vertex array (n_verts x dim), enumerated lazily and cached.

        Enumerates intersections of ``dim``-subsets of facets and keeps the
        feasible ones.  Exact for bounded polytopes at the facet counts that
        occur here (a few dozen at most).
        """
        if self._vertices is not None:
            return self._vertices
        if self.is_empty:
            self._vertices = np.zeros((0, self.dim))
            return self._vertices
        d = self.dim
        m = self.normals.shape[0]
        found = []
        for idx in itertools.combinations(range(m), d):
            sub = self.normals[list(idx)]
            try:
                x = np.linalg.solve(sub, self.offsets[list(idx)])
            except np.linalg.LinAlgError:
                continue
            if np.all(self.normals @ x <= self.offsets + FACET_TOL):
                found.append(x)
        verts = _dedup_points(np.array(found)) if found else np.zeros((0, d))
        verts.flags.writeable = False
        self._vertices = verts
        return verts

    def contains(self, x, tol=FACET_TOL):
        """Membership test for a single point."""
        if self.is_empty:
            return False
        x = np.asarray(x, dtype=float).ravel()
        return bool(np.all(self.normals @ x <= self.offsets + tol))

    def contains_origin(self, tol=FACET_TOL):
        return (not self.is_empty) and bool(np.all(self.offsets >= -tol))

    def bounding_box(self):
        v = self.vertices()
        if v.shape[0] == 0:
            raise ValueError("empty polytope has no bounding box")
        return v.min(axis=0), v.max(axis=0)

    def __eq__(self, other):
        if not isinstance(other, Polytope):
            return NotImplemented
        if self.is_empty or other.is_empty:
            return self.is_empty and other.is_empty and self.dim == other.dim
        return subset(self, other, VERTEX_TOL) and subset(other, self, VERTEX_TOL)

    def __hash__(self):  # identity-based; polytopes are used as values, not keys
        return id(self)

    def __repr__(self):
        if self.is_empty:
            return f"Polytope.empty({self.dim})"
        return f"Polytope(dim={self.dim}, facets={self.normals.shape[0]})"


def _dedup_points(points, tol=VERTEX_TOL):
    out = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    return np.array(out)


def support(p: Polytope, direction) -> float:
    """Support value max{direction . x : x in p}, exact via vertex maximization."""
    if p.is_empty:
        raise ValueError("support of empty polytope is undefined")
    direction = np.asarray(direction, dtype=float).ravel()
    v = p.vertices()
    if v.shape[0] == 0:
        raise ValueError("polytope has no vertices (unbounded or inconsistent)")
    return float(np.max(v @ direction))


def minkowski_sum(p: Polytope, q: Polytope) -> Polytope:
    """Minkowski sum p (+) q via pairwise vertex sums and their hull."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if p.is_empty or q.is_empty:
        raise ValueError("minkowski_sum requires nonempty operands")
    vp, vq = p.vertices(), q.vertices()
    sums = (vp[:, None, :] + vq[None, :, :]).reshape(-1, p.dim)
    return Polytope.from_vertices(sums)


def pontryagin_diff(p: Polytope, q: Polytope) -> Polytope:
    """Pontryagin difference {x : x (+) q is contained in p}.

    Each facet offset of p is tightened by the support of q along that
    facet's normal.  Returns the explicit empty-set value when the tightened
    inequalities become inconsistent, which signals that the subtrahend is
    too large for the constraint set.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if p.is_empty or q.is_empty:
        raise ValueError("pontryagin_diff requires nonempty operands")
    tightened = np.array([c - support(q, n) for n, c in zip(p.normals, p.offsets)])
    result = Polytope(p.normals, tightened)
    if result.vertices().shape[0] == 0:
        return Polytope.empty(p.dim)
    return result


def affine_image(m, p: Polytope) -> Polytope:
    """Image {m @ x : x in p}; rank-deficient maps yield degenerate hulls."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[1] != p.dim:
        raise ValueError(f"matrix has {m.shape[1]} columns, polytope dim is {p.dim}")
    if p.is_empty:
        raise ValueError("affine_image of empty polytope")
    return Polytope.from_vertices(p.vertices() @ m.T)


def subset(p: Polytope, q: Polytope, tol: float = FACET_TOL) -> bool:
    """True iff every vertex of p satisfies every facet of q within tol."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if p.is_empty:
        return True
    if q.is_empty:
        return False
    v = p.vertices()
    return bool(np.all(q.normals @ v.T <= q.offsets[:, None] + tol))


def intersect(p: Polytope, q: Polytope) -> Polytope:
    """Intersection by stacking facet systems (no pruning)."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if p.is_empty or q.is_empty:
        return Polytope.empty(p.dim)
    r = Polytope(np.vstack([p.normals, q.normals]),
                 np.concatenate([p.offsets, q.offsets]))
    if r.vertices().shape[0] == 0:
        return Polytope.empty(p.dim)
    return r


def prune(p: Polytope, tol: float = FACET_TOL) -> Polytope:
    """Drop facets not supported by any vertex, plus duplicate facets.

    Keeps degenerate (equality-pair) facets intact since those are supported
    by construction.
    """
    if p.is_empty:
        return p
    v = p.vertices()
    if v.shape[0] == 0:
        return Polytope.empty(p.dim)
    kept_n, kept_c = [], []
    for n, c in zip(p.normals, p.offsets):
        if np.max(v @ n) < c - 10 * tol:
            continue  # slack everywhere: redundant
        dup = any(np.max(np.abs(n - n2)) <= tol and abs(c - c2) <= tol
                  for n2, c2 in zip(kept_n, kept_c))
        if not dup:
            kept_n.append(n)
            kept_c.append(c)
    return Polytope(np.array(kept_n), np.array(kept_c), vertices=v)
