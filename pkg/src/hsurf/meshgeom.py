"""Oriented triangle meshes and the discrete integral identities on them."""

from __future__ import annotations

from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse

COT_LIMIT = 1e8


class MeshError(ValueError):
    pass


class NonManifold(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


class TriMesh:
    """Immutable oriented triangle mesh.

    The stored vertex order of each face defines its normal
    ``(b - a) x (c - a)``.  Construction checks that every edge is used
    by at most two faces, with opposite traversal when shared.
    """

    def __init__(self, vertices, faces, check: bool = True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must have shape (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshError("faces must have shape (m, 3)")
        if check:
            self._check()

    def _check(self):
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshError("face index out of range")
        he = self.halfedges
        _, counts = np.unique(he, axis=0, return_counts=True)
        if np.any(counts > 1):
            raise NonManifold("a directed edge occurs twice (inconsistent orientation or non-manifold)")
        und = np.sort(he, axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise NonManifold("an edge is shared by more than two faces")
        if np.any(self.face_areas <= 0):
            raise DegenerateTriangle("zero-area face")

    @property
    def halfedges(self) -> np.ndarray:
        F = self.faces
        return np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])

    @cached_property
    def _cross(self) -> np.ndarray:
        V, F = self.vertices, self.faces
        return np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        return self._cross / (2.0 * self.face_areas[:, None])

    @property
    def area(self) -> float:
        return float(np.sum(self.face_areas))

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Barycentric lumped areas."""
        A = np.zeros(len(self.vertices))
        np.add.at(A, self.faces.ravel(), np.repeat(self.face_areas / 3.0, 3))
        return A

    @cached_property
    def mixed_areas(self) -> np.ndarray:
        """Mixed Voronoi vertex areas (obtuse triangles split by halves/quarters)."""
        V, F = self.vertices, self.faces
        P = [V[F[:, k]] for k in range(3)]
        cot = np.stack([_corner_cot(P[k], P[(k + 1) % 3], P[(k + 2) % 3]) for k in range(3)])
        obtuse = np.any(cot < 0, axis=0)
        A = np.zeros(len(V))
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            vor = (np.sum((P[j] - P[k]) ** 2, axis=1) * cot[i]
                   + np.sum((P[i] - P[k]) ** 2, axis=1) * cot[j]) / 8.0
            part = np.where(cot[k] < 0, self.face_areas / 2.0, self.face_areas / 4.0)
            np.add.at(A, F[:, k], np.where(obtuse, part, vor))
        return A

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals."""
        N = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(N, self.faces[:, k], self._cross * 0.5)
        norm = np.linalg.norm(N, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return N / norm[:, None]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges, following the face orientation."""
        he = self.halfedges
        key = np.sort(he, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return he[counts[inv.ravel()] == 1]

    @property
    def closed(self) -> bool:
        return len(self.boundary_edges) == 0

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(len(self.vertices), dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    def boundary_loops(self) -> list[np.ndarray]:
        """Boundary vertex cycles."""
        nxt = {int(a): int(b) for a, b in self.boundary_edges}
        loops, seen = [], set()
        for start in nxt:
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                v = nxt.get(v)
                if v is None:
                    raise NonManifold("open boundary chain")
            loops.append(np.asarray(loop))
        return loops

    def flipped(self) -> "TriMesh":
        return TriMesh(self.vertices, self.faces[:, ::-1], check=False)

    def scaled(self, factor: float) -> "TriMesh":
        return TriMesh(self.vertices * factor, self.faces, check=False)

    # file io ----------------------------------------------------------
    def obj_text(self) -> str:
        """Wavefront OBJ with round-trip precision vertices."""
        lines = ["# hsurf mesh"]
        lines += ["v %.17g %.17g %.17g" % tuple(v) for v in self.vertices]
        lines += ["f %d %d %d" % tuple(f + 1) for f in self.faces]
        return "\n".join(lines) + "\n"

    def to_obj(self, path) -> None:
        Path(path).write_text(self.obj_text())

    @classmethod
    def from_obj(cls, path) -> "TriMesh":
        verts, faces = [], []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                if len(idx) < 3:
                    raise MeshError(f"line {lineno}: face with fewer than 3 vertices")
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
        return cls(np.asarray(verts).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def vector_area(mesh: TriMesh) -> np.ndarray:
    """``sum(area * normal)`` over faces; vanishes on closed meshes."""
    return 0.5 * mesh._cross.sum(axis=0)


def _apply(f, normals: np.ndarray) -> np.ndarray:
    if hasattr(f, "_value"):
        return np.asarray(f._value(normals), dtype=float)
    return np.broadcast_to(np.asarray(f(normals), dtype=float), normals.shape[:1])


def flux_integral(mesh: TriMesh, f, v) -> float:
    """``sum f(N) <N, v> area`` with face normals.

    ``f`` is a prescribed function or any vectorized callable on unit vectors.
    """
    v = np.asarray(v, dtype=float)
    N = mesh.face_normals
    return float(np.sum(_apply(f, N) * (N @ v) * mesh.face_areas))


def _corner_cot(o, a, b) -> np.ndarray:
    u, w = a - o, b - o
    return np.einsum("ij,ij->i", u, w) / np.linalg.norm(np.cross(u, w), axis=1)


def cotan_laplacian(mesh: TriMesh) -> sparse.csr_matrix:
    """Stiffness matrix ``L`` with ``(L p)_i = 1/2 sum (cot a + cot b)(p_j - p_i)``."""
    V, F = mesh.vertices, mesh.faces
    n = len(V)
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = F[:, (k + 1) % 3], F[:, (k + 2) % 3], F[:, k]
        cot = _corner_cot(V[o], V[i], V[j])
        if np.any(np.abs(cot) > COT_LIMIT):
            raise DegenerateTriangle("angle cotangent exceeds 1e8")
        rows += [i, j]
        cols += [j, i]
        vals += [0.5 * cot, 0.5 * cot]
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    W = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return W - sparse.diags(np.asarray(W.sum(axis=1)).ravel())


def discrete_mean_curvature(mesh: TriMesh) -> np.ndarray:
    """Per-vertex ``H`` from ``Delta p = 2 H N``; NaN on boundary vertices.

    The Laplacian is the cotangent stiffness divided by mixed Voronoi
    areas; ``H`` is the projection onto the area-weighted vertex normal.
    Sign convention: the unit sphere with inward normals has ``H = +1``.
    """
    lap = (cotan_laplacian(mesh) @ mesh.vertices) / mesh.mixed_areas[:, None]
    H = 0.5 * np.einsum("ij,ij->i", lap, mesh.vertex_normals)
    H[mesh.boundary_vertices] = np.nan
    return H


def hsurface_residual(mesh: TriMesh, f) -> tuple[np.ndarray, float]:
    """Per-vertex ``H - f(N)`` (NaN on the boundary) and its sup-norm over interior vertices."""
    H = discrete_mean_curvature(mesh)
    interior = ~mesh.boundary_vertices
    if not np.any(interior):
        raise MeshError("mesh has no interior vertices")
    res = np.full(len(H), np.nan)
    res[interior] = H[interior] - _apply(f, mesh.vertex_normals[interior])
    return res, float(np.max(np.abs(res[interior])))


# reference meshes ---------------------------------------------------------

def icosphere(subdivisions: int = 4, radius: float = 1.0) -> TriMesh:
    """Outward-oriented subdivided icosahedron."""
    t = (1.0 + 5**0.5) / 2.0
    V = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t],
                  [0, -1, -t], [0, 1, -t], [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], float)
    F = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
                  [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
                  [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    V /= np.linalg.norm(V, axis=1)[:, None]
    for _ in range(subdivisions):
        edges = np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.ravel()
        mid = V[uniq[:, 0]] + V[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1)[:, None]
        m = len(F)
        a, b, c = (inv[:m] + len(V), inv[m:2 * m] + len(V), inv[2 * m:] + len(V))
        V = np.vstack([V, mid])
        F = np.vstack([np.column_stack([F[:, 0], a, c]), np.column_stack([F[:, 1], b, a]),
                       np.column_stack([F[:, 2], c, b]), np.column_stack([a, b, c])])
    return TriMesh(V * radius, F)


def torus(R: float = 2.0, r: float = 0.5, n_major: int = 96, n_minor: int = 48) -> TriMesh:
    """Outward-oriented torus about the ``e3`` axis."""
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    U, Vv = np.meshgrid(u, v, indexing="ij")
    X = np.column_stack([((R + r * np.cos(Vv)) * np.cos(U)).ravel(),
                         ((R + r * np.cos(Vv)) * np.sin(U)).ravel(),
                         (r * np.sin(Vv)).ravel()])
    idx = lambda i, j: (i % n_major) * n_minor + (j % n_minor)
    I, J = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    I, J = I.ravel(), J.ravel()
    a, b, c, d = idx(I, J), idx(I + 1, J), idx(I + 1, J + 1), idx(I, J + 1)
    F = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(X, F)


def disc_mesh(radius: float = 1.0, n_boundary: int = 4096, n_rings: int = 32) -> TriMesh:
    """Flat disc in ``x3 = 0`` with upward orientation.

    Rings carry progressively more vertices so that triangles stay
    well-shaped; the outer ring has ``n_boundary`` vertices.
    """
    verts = [np.zeros((1, 3))]
    counts = [1]
    for k in range(1, n_rings + 1):
        m = max(6, int(round(n_boundary * k / n_rings)))
        a = 2 * np.pi * np.arange(m) / m
        rk = radius * k / n_rings
        verts.append(np.column_stack([rk * np.cos(a), rk * np.sin(a), np.zeros(m)]))
        counts.append(m)
    V = np.vstack(verts)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    faces = []
    m1 = counts[1]
    faces.append(np.column_stack([np.zeros(m1, int), 1 + np.arange(m1), 1 + (np.arange(m1) + 1) % m1]))
    for k in range(1, n_rings):
        inner = offsets[k] + np.arange(counts[k])
        outer = offsets[k + 1] + np.arange(counts[k + 1])
        ai = 2 * np.pi * np.arange(counts[k]) / counts[k]
        ao = 2 * np.pi * np.arange(counts[k + 1]) / counts[k + 1]
        # merge the two angular sequences (standard ring stitching)
        i = o = 0
        while i < counts[k] or o < counts[k + 1]:
            ni, no = (i + 1), (o + 1)
            next_inner = ai[ni] if ni < counts[k] else 2 * np.pi
            next_outer = ao[no] if no < counts[k + 1] else 2 * np.pi
            if o < counts[k + 1] and (i >= counts[k] or next_outer <= next_inner):
                faces.append([[inner[i % counts[k]], outer[o], outer[no % counts[k + 1]]]])
                o += 1
            else:
                faces.append([[inner[i], outer[o % counts[k + 1]], inner[ni % counts[k]]]])
                i += 1
    return TriMesh(V, np.vstack(faces))


# graph solutions -----------------------------------------------------------

_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
# direction of the arm running from corner k toward corner k+1 (E, N, W, S)
_EDGE_DIR = (0, 2, 1, 3)
_BACK_DIR = (1, 3, 0, 2)


def graph_to_mesh(sol) -> TriMesh:
    """Triangulate a graph solution with upward-oriented faces.

    Full interior cells give two triangles; cells cut by the boundary are
    walked counter-clockwise through their interior corners and the
    boundary intersection points on their edges, then fanned.
    """
    grid = sol.grid
    npts = grid.n
    V = [np.column_stack([grid.points, sol.u])]
    bkey = {}
    extra = []

    def bvertex(k, d):
        key = (int(k), d)
        if key not in bkey:
            p = grid.bpoint[d][k]
            bkey[key] = npts + len(extra)
            extra.append([p[0], p[1], sol.disc.bvalues[d][k]])
        return bkey[key]

    ids = grid.ids
    faces = []
    nx, ny = ids.shape
    for i in range(nx - 1):
        for j in range(ny - 1):
            c = [ids[i + di, j + dj] for di, dj in _CORNERS]
            if all(k < 0 for k in c):
                continue
            if all(k >= 0 for k in c) and all(grid.nbr[_EDGE_DIR[e]][c[e]] >= 0 for e in range(4)):
                faces.append([c[0], c[1], c[2]])
                faces.append([c[0], c[2], c[3]])
                continue
            poly = []
            for e in range(4):
                a, b = c[e], c[(e + 1) % 4]
                if a >= 0:
                    poly.append(a)
                    if grid.nbr[_EDGE_DIR[e]][a] < 0:
                        poly.append(bvertex(a, _EDGE_DIR[e]))
                if b >= 0 and grid.nbr[_BACK_DIR[e]][b] < 0:
                    poly.append(bvertex(b, _BACK_DIR[e]))
            for k in range(1, len(poly) - 1):
                faces.append([poly[0], poly[k], poly[k + 1]])
    if extra:
        V.append(np.asarray(extra))
    verts = np.vstack(V)
    F = np.asarray(faces, dtype=np.int64)
    # drop slivers where a boundary point coincides with a fan vertex
    P = verts[F]
    area = 0.5 * np.linalg.norm(np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), axis=1)
    return TriMesh(verts, F[area > 1e-14 * grid.h**2])
