"""Triangulations of the spacetime rectangle (0,T) x (0,1).

Vertices carry (t, x) coordinates.  Triangles are counterclockwise vertex
triples.  Every edge is stored with a direction (a, b) such that the "left"
triangle traverses a -> b in its CCW boundary; rotating the direction
clockwise then gives the unit normal pointing from the left triangle to the
right one (or out of the domain for boundary edges).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

# boundary tags (0 = interior edge)
INTERIOR, BOTTOM, TOP, LEFT, RIGHT = 0, 1, 2, 3, 4
TAG_NAMES = {BOTTOM: "bottom", TOP: "top", LEFT: "left", RIGHT: "right"}

SIDE_TOL = 1e-12


@dataclass(frozen=True)
class FacePair:
    """An interior edge together with its left/right triangle adjacency."""

    edge: int
    normal: np.ndarray  # Euclidean unit normal, left -> right
    left: int
    right: int

    def flipped(self) -> "FacePair":
        return FacePair(self.edge, -self.normal, self.right, self.left)


@dataclass
class Mesh:
    """Conforming triangulation of (0, T) x (0, 1), immutable after build."""

    T_final: float
    vertices: np.ndarray       # (nv, 2) float, columns (t, x)
    triangles: np.ndarray      # (nt, 3) int, CCW
    edges: np.ndarray = field(init=False)        # (ne, 2) int, directed a -> b
    edge_tris: np.ndarray = field(init=False)    # (ne, 2) int, (left, right/-1)
    edge_local: np.ndarray = field(init=False)   # (ne, 2, 2) local vertex ids of (a, b)
    boundary_tag: np.ndarray = field(init=False)  # (ne,) int
    h: float = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        self._build_edges()
        self._classify_boundary()
        self.h = float(self._edge_lengths().max())
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    # -- connectivity ----------------------------------------------------

    def _build_edges(self):
        first = {}
        edges, tris, local = [], [], []
        for it, tri in enumerate(self.triangles):
            for k in range(3):
                a, b = int(tri[k]), int(tri[(k + 1) % 3])
                key = (a, b) if a < b else (b, a)
                if key not in first:
                    first[key] = len(edges)
                    edges.append((a, b))
                    tris.append([it, -1])
                    local.append([[k, (k + 1) % 3], [-1, -1]])
                else:
                    ie = first[key]
                    if tris[ie][1] != -1:
                        raise ValueError(f"edge {key} shared by more than 2 triangles")
                    tris[ie][1] = it
                    # the right triangle traverses b -> a, so vertex a sits at
                    # local slot (k+1)%3 and b at slot k
                    local[ie][1] = [(k + 1) % 3, k]
        self.edges = np.array(edges, dtype=np.int32)
        self.edge_tris = np.array(tris, dtype=np.int32)
        self.edge_local = np.array(local, dtype=np.int32)

    def _classify_boundary(self):
        pa = self.vertices[self.edges[:, 0]]
        pb = self.vertices[self.edges[:, 1]]
        tag = np.zeros(len(self.edges), dtype=np.int32)
        on_boundary = self.edge_tris[:, 1] < 0
        for ie in np.nonzero(on_boundary)[0]:
            (ta, xa), (tb, xb) = pa[ie], pb[ie]
            if abs(ta) <= SIDE_TOL and abs(tb) <= SIDE_TOL:
                tag[ie] = BOTTOM
            elif abs(ta - self.T_final) <= SIDE_TOL and abs(tb - self.T_final) <= SIDE_TOL:
                tag[ie] = TOP
            elif abs(xa) <= SIDE_TOL and abs(xb) <= SIDE_TOL:
                tag[ie] = LEFT
            elif abs(xa - 1.0) <= SIDE_TOL and abs(xb - 1.0) <= SIDE_TOL:
                tag[ie] = RIGHT
            else:
                raise ValueError(f"boundary edge {ie} not on any rectangle side")
        self.boundary_tag = tag

    def _edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    # -- queries -----------------------------------------------------------

    def edge_normals(self) -> np.ndarray:
        """Unit normals per edge, oriented left triangle -> right triangle."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def face_pair(self, edge: int) -> FacePair:
        if self.edge_tris[edge, 1] < 0:
            raise ValueError(f"edge {edge} is a boundary edge")
        return FacePair(edge, self.edge_normals()[edge],
                        int(self.edge_tris[edge, 0]), int(self.edge_tris[edge, 1]))

    def interior_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_tris[:, 1] >= 0)[0]

    def boundary_edges(self, tag: int) -> np.ndarray:
        return np.nonzero(self.boundary_tag == tag)[0]

    def signed_areas(self) -> np.ndarray:
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))

    def content_hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]


def mesh_size(m: Mesh) -> float:
    """Max triangle diameter; the h used in every form scaling."""
    return m.h


def build_rect_mesh(T_final: float, nx: int, nt: int, pattern: str = "alternating",
                    jitter: float = 0.0, seed: int = 0) -> Mesh:
    """Structured triangulation of (0, T_final) x (0, 1).

    ``pattern`` picks the cell split: "alternating" flips the diagonal in a
    checkerboard, "crisscross" adds a center vertex and 4 triangles per cell.
    ``jitter`` displaces interior vertices by at most jitter*min(1/nx, T/nt)
    (seeded); boundary vertices only slide along their side, corners stay put.
    """
    if nx < 2:
        raise ValueError(f"nx must be >= 2, got {nx}")
    if nt < 2:
        raise ValueError(f"nt must be >= 2, got {nt}")
    if T_final <= 0:
        raise ValueError(f"T_final must be positive, got {T_final}")
    if not 0.0 <= jitter < 0.3:
        raise ValueError(f"jitter must lie in [0, 0.3), got {jitter}")
    if pattern not in ("alternating", "crisscross"):
        raise ValueError(f"unknown pattern {pattern!r}")

    tt = np.linspace(0.0, T_final, nt + 1)
    xx = np.linspace(0.0, 1.0, nx + 1)
    grid = np.array([(t, x) for t in tt for x in xx])  # id = i*(nx+1) + j

    def vid(i, j):
        return i * (nx + 1) + j

    tris = []
    centers = []
    if pattern == "alternating":
        for i in range(nt):
            for j in range(nx):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                if (i + j) % 2 == 0:
                    tris += [(v00, v10, v11), (v00, v11, v01)]
                else:
                    tris += [(v00, v10, v01), (v10, v11, v01)]
    else:
        nv_grid = len(grid)
        for i in range(nt):
            for j in range(nx):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                c = nv_grid + len(centers)
                centers.append(0.25 * (grid[v00] + grid[v10] + grid[v01] + grid[v11]))
                tris += [(v00, v10, c), (v10, v11, c), (v11, v01, c), (v01, v00, c)]

    verts0 = np.vstack([grid] + ([np.array(centers)] if centers else []))
    triangles = np.array(tris, dtype=np.int32)

    # classify vertices before any jitter: which coordinates may move
    t_free = (verts0[:, 0] > SIDE_TOL) & (verts0[:, 0] < T_final - SIDE_TOL)
    x_free = (verts0[:, 1] > SIDE_TOL) & (verts0[:, 1] < 1.0 - SIDE_TOL)

    rng = np.random.default_rng(seed)
    delta = jitter * min(1.0 / nx, T_final / nt)
    for attempt in range(10):
        verts = verts0.copy()
        if jitter > 0.0:
            disp = rng.uniform(-delta, delta, size=verts.shape)
            verts[:, 0] += np.where(t_free, disp[:, 0], 0.0)
            verts[:, 1] += np.where(x_free, disp[:, 1], 0.0)
        m = Mesh(T_final, verts, triangles)
        if m.signed_areas().min() > 1e-14:
            return m
        if jitter == 0.0:
            break
    raise ValueError("could not produce a non-inverted mesh after 10 jitter attempts")


# -- plain-text serialization (wavectrl-mesh v1) ---------------------------

def serialize(m: Mesh) -> str:
    lines = ["wavectrl-mesh v1", f"{m.T_final!r}", str(len(m.vertices))]
    lines += [f"{float(t)!r} {float(x)!r}" for t, x in m.vertices]
    lines.append(str(len(m.triangles)))
    lines += [f"{a} {b} {c}" for a, b, c in m.triangles]
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> Mesh:
    lines = text.strip().split("\n")
    if lines[0] != "wavectrl-mesh v1":
        raise ValueError(f"bad mesh header: {lines[0]!r}")
    T_final = float(lines[1])
    nv = int(lines[2])
    verts = np.array([[float(w) for w in ln.split()] for ln in lines[3:3 + nv]])
    ntri = int(lines[3 + nv])
    tris = np.array([[int(w) for w in ln.split()] for ln in lines[4 + nv:4 + nv + ntri]],
                    dtype=np.int32)
    m = Mesh(T_final, verts, tris)
    if m.signed_areas().min() <= 0:
        raise ValueError("mesh file contains inverted triangles")
    return m


def save_mesh(m: Mesh, path) -> None:
    with open(path, "w") as f:
        f.write(serialize(m))


def load_mesh(path) -> Mesh:
    with open(path) as f:
        return deserialize(f.read())
