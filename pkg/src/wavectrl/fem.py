"""Lagrange P1..P3 elements on affine triangles, quadrature, DOF management.

Reference triangle: {(s, r) : s, r >= 0, s + r <= 1} with vertices
(0,0), (1,0), (0,1).  Global coordinates are spacetime (t, x); gradients and
Hessians are pushed through the (constant-Jacobian) affine map per cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh, BOTTOM, TOP, LEFT, RIGHT, SIDE_TOL

REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
MAX_QUAD_DEGREE = 20


# -- quadrature -------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, 2) on the reference triangle, or (n,) on [0, 1]
    weights: np.ndarray  # (n,)
    degree: int


def _gauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def segment_quadrature(deg: int) -> QuadratureRule:
    """Gauss rule on [0, 1], exact for polynomials of degree <= deg."""
    if deg < 1:
        raise ValueError(f"quadrature degree must be >= 1, got {deg}")
    if deg > MAX_QUAD_DEGREE:
        raise ValueError(f"quadrature degree {deg} beyond tabulated maximum {MAX_QUAD_DEGREE}")
    s, w = _gauss01((deg + 2) // 2)
    return QuadratureRule(s, w, deg)


@lru_cache(maxsize=None)
def triangle_quadrature(deg: int) -> QuadratureRule:
    """Conical-product Gauss rule on the reference triangle, exact to deg."""
    if deg < 1:
        raise ValueError(f"quadrature degree must be >= 1, got {deg}")
    if deg > MAX_QUAD_DEGREE:
        raise ValueError(f"quadrature degree {deg} beyond tabulated maximum {MAX_QUAD_DEGREE}")
    # map (u, v) in [0,1]^2 to (u, v(1-u)); the Jacobian 1-u raises the
    # u-degree of the integrand by one
    nu = (deg + 3) // 2
    nv = (deg + 2) // 2
    u, wu = _gauss01(nu)
    v, wv = _gauss01(nv)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    return QuadratureRule(pts, W.ravel(), deg)


# -- reference element -------------------------------------------------------

def _lattice(p: int):
    """Node lattice with entity labels, vertices first, then edges, then cell.

    Entity labels: ("vertex", k), ("edge", local_edge, slot) with slot counted
    along the local direction k -> k+1, or ("cell", k).
    """
    nodes, entity = [], []
    for k in range(3):
        nodes.append(REF_VERTS[k])
        entity.append(("vertex", k))
    for e, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        for i in range(1, p):
            nodes.append(REF_VERTS[a] + (i / p) * (REF_VERTS[b] - REF_VERTS[a]))
            entity.append(("edge", e, i - 1))
    k = 0
    for i in range(1, p):
        for j in range(1, p - i):
            nodes.append(np.array([i / p, j / p]))
            entity.append(("cell", k))
            k += 1
    return np.array(nodes), entity


class ReferenceElement:
    """P_p basis represented by monomial coefficient tables."""

    def __init__(self, p: int):
        if p not in (1, 2, 3):
            raise ValueError(f"unsupported polynomial order {p}")
        self.p = p
        self.nodes, self.entity = _lattice(p)
        self.exps = [(a, b) for a in range(p + 1) for b in range(p + 1 - a)]
        V = np.array([[s ** a * r ** b for a, b in self.exps] for s, r in self.nodes])
        self.coeffs = np.linalg.inv(V)  # coeffs[m, i]: monomial m of basis i
        self.ndof = len(self.nodes)

    def _monomials(self, pts):
        pts = np.atleast_2d(pts)
        s, r = pts[:, 0], pts[:, 1]
        val = np.stack([s ** a * r ** b for a, b in self.exps], axis=1)
        ds = np.stack([a * s ** max(a - 1, 0) * r ** b for a, b in self.exps], axis=1)
        dr = np.stack([b * s ** a * r ** max(b - 1, 0) for a, b in self.exps], axis=1)
        dss = np.stack([a * (a - 1) * s ** max(a - 2, 0) * r ** b for a, b in self.exps], axis=1)
        dsr = np.stack([a * b * s ** max(a - 1, 0) * r ** max(b - 1, 0) for a, b in self.exps], axis=1)
        drr = np.stack([b * (b - 1) * s ** a * r ** max(b - 2, 0) for a, b in self.exps], axis=1)
        return val, ds, dr, dss, dsr, drr

    def tabulate(self, pts):
        """Values, gradients and Hessians of all basis functions at ref points.

        Returns (val (n, nd), grad (n, nd, 2), hess (n, nd, 2, 2)).
        """
        val, ds, dr, dss, dsr, drr = self._monomials(pts)
        C = self.coeffs
        v = val @ C
        g = np.stack([ds @ C, dr @ C], axis=2)
        H = np.empty((v.shape[0], self.ndof, 2, 2))
        H[:, :, 0, 0] = dss @ C
        H[:, :, 0, 1] = H[:, :, 1, 0] = dsr @ C
        H[:, :, 1, 1] = drr @ C
        return v, g, H


@lru_cache(maxsize=None)
def make_reference_element(p: int) -> ReferenceElement:
    return ReferenceElement(p)


def edge_ref_points(la: int, lb: int, s: np.ndarray) -> np.ndarray:
    """Reference coords along the cell edge from local vertex la to lb."""
    return REF_VERTS[la][None, :] * (1.0 - s[:, None]) + REF_VERTS[lb][None, :] * s[:, None]


# -- finite element space ----------------------------------------------------

class FeSpace:
    """Continuous P_p space on a mesh; optionally zero on the lateral boundary.

    DOFs are numbered by mesh entity (vertices, then per-edge interior nodes
    along the global edge direction, then cell bubbles).  When the lateral
    constraint is set, DOFs with x in {0, 1} are eliminated and the public
    numbering skips them.
    """

    def __init__(self, mesh: Mesh, p: int, lateral_constraint: bool = False):
        self.mesh = mesh
        self.p = p
        self.element = make_reference_element(p)
        self.lateral_constraint = lateral_constraint

        nv = len(mesh.vertices)
        ne = len(mesh.edges)
        ncell = len(mesh.triangles)
        per_edge = p - 1
        per_cell = (p - 1) * (p - 2) // 2
        self.nfull = nv + ne * per_edge + ncell * per_cell

        edge_of = {}
        for ie, (a, b) in enumerate(mesh.edges):
            edge_of[(min(a, b), max(a, b))] = ie

        coords = np.empty((self.nfull, 2))
        coords[:nv] = mesh.vertices
        for ie, (a, b) in enumerate(mesh.edges):
            va, vb = mesh.vertices[a], mesh.vertices[b]
            for slot in range(per_edge):
                coords[nv + ie * per_edge + slot] = va + ((slot + 1) / p) * (vb - va)

        cell_dofs = np.empty((ncell, self.element.ndof), dtype=np.int64)
        for it, tri in enumerate(mesh.triangles):
            for ln, ent in enumerate(self.element.entity):
                if ent[0] == "vertex":
                    cell_dofs[it, ln] = tri[ent[1]]
                elif ent[0] == "edge":
                    le, slot = ent[1], ent[2]
                    a_loc, b_loc = int(tri[le]), int(tri[(le + 1) % 3])
                    ie = edge_of[(min(a_loc, b_loc), max(a_loc, b_loc))]
                    # slot counted along global direction edges[ie] = (a, b)
                    gslot = slot if mesh.edges[ie, 0] == a_loc else per_edge - 1 - slot
                    cell_dofs[it, ln] = nv + ie * per_edge + gslot
                else:
                    cell_dofs[it, ln] = nv + ne * per_edge + it * per_cell + ent[1]
        for it, tri in enumerate(mesh.triangles):
            for ln, ent in enumerate(self.element.entity):
                if ent[0] == "cell":
                    v0 = mesh.vertices[tri[0]]
                    J = np.column_stack([mesh.vertices[tri[1]] - v0,
                                         mesh.vertices[tri[2]] - v0])
                    coords[cell_dofs[it, ln]] = v0 + J @ self.element.nodes[ln]

        self.coords_full = coords
        self.cell_dofs = cell_dofs

        on_lateral = (np.abs(coords[:, 1]) <= SIDE_TOL) | (np.abs(coords[:, 1] - 1.0) <= SIDE_TOL)
        keep = ~on_lateral if lateral_constraint else np.ones(self.nfull, dtype=bool)
        self.retained = np.nonzero(keep)[0]
        self.full_to_compact = -np.ones(self.nfull, dtype=np.int64)
        self.full_to_compact[self.retained] = np.arange(len(self.retained))
        self.ndof = len(self.retained)
        self.dof_coords = coords[self.retained]

        T = mesh.T_final
        self.slice_dofs = {
            BOTTOM: np.nonzero(np.abs(self.dof_coords[:, 0]) <= SIDE_TOL)[0],
            TOP: np.nonzero(np.abs(self.dof_coords[:, 0] - T) <= SIDE_TOL)[0],
            LEFT: np.nonzero(np.abs(self.dof_coords[:, 1]) <= SIDE_TOL)[0],
            RIGHT: np.nonzero(np.abs(self.dof_coords[:, 1] - 1.0) <= SIDE_TOL)[0],
        }

    def expand(self, coeffs: np.ndarray) -> np.ndarray:
        """Compact coefficient vector -> full vector (constrained DOFs = 0)."""
        full = np.zeros(self.nfull)
        full[self.retained] = coeffs
        return full

    def restrict_matrix(self, M):
        return M.tocsr()[self.retained][:, self.retained].tocsr() if self.lateral_constraint else M.tocsr()

    def restrict_vector(self, v: np.ndarray) -> np.ndarray:
        return v[self.retained]

    def cell_jacobians(self):
        v0 = self.mesh.vertices[self.mesh.triangles[:, 0]]
        v1 = self.mesh.vertices[self.mesh.triangles[:, 1]]
        v2 = self.mesh.vertices[self.mesh.triangles[:, 2]]
        J = np.stack([np.stack([v1[:, 0] - v0[:, 0], v2[:, 0] - v0[:, 0]], axis=1),
                      np.stack([v1[:, 1] - v0[:, 1], v2[:, 1] - v0[:, 1]], axis=1)], axis=1)
        detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJ = np.empty_like(J)
        invJ[:, 0, 0] = J[:, 1, 1] / detJ
        invJ[:, 0, 1] = -J[:, 0, 1] / detJ
        invJ[:, 1, 0] = -J[:, 1, 0] / detJ
        invJ[:, 1, 1] = J[:, 0, 0] / detJ
        return J, invJ, detJ, v0


def eval_on_cell(space: FeSpace, cell: int, coeffs: np.ndarray, ref_point):
    """Value, spacetime gradient and Hessian of an FE function on one cell."""
    if not 0 <= cell < len(space.mesh.triangles):
        raise IndexError(f"cell {cell} out of range")
    if len(coeffs) != space.ndof:
        raise ValueError("coefficient vector length does not match DOF count")
    full = space.expand(np.asarray(coeffs, dtype=float))
    local = full[space.cell_dofs[cell]]
    val, grad, hess = space.element.tabulate(np.atleast_2d(ref_point))
    tri = space.mesh.triangles[cell]
    v0 = space.mesh.vertices[tri[0]]
    J = np.column_stack([space.mesh.vertices[tri[1]] - v0, space.mesh.vertices[tri[2]] - v0])
    invJ = np.linalg.inv(J)
    u = float(val[0] @ local)
    g = invJ.T @ (grad[0].T @ local)
    H = invJ.T @ np.einsum("iab,i->ab", hess[0], local) @ invJ
    return u, g, H


def interpolate(space: FeSpace, f) -> np.ndarray:
    """Nodal interpolant: sample f(t, x) at the retained DOF coordinates."""
    vals = np.asarray(f(space.dof_coords[:, 0], space.dof_coords[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (space.ndof,)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("field is not finite at some DOF coordinates")
    return vals
