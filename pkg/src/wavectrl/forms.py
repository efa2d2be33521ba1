"""Assembly of every bilinear form and load of the control formulations.

Matrix convention: entry [i, j] pairs trial basis function j against test
basis function i, so a form value b(u, psi) is computed as psi @ M @ u.
All h-scalings are baked into the returned matrices:

    a_dist    h^2 [ g(du, dpsi)_M - (u, dnu psi)_{bottom+top} ]
    a_bd      h^2 [ g(du, dpsi)_M + (u, V psi)_M - (u, dnu psi)_{dM}
                    - (dnu u, psi)_{lateral} ]
    s_vol     h^4 sum_K (P u, P v)_K               with P = box + V
    s_jump    h^3 sum_F (jump dnu u, jump dnu v)_F
    e_slice   h (u, v)_slice + h^3 (dt u, dt v)_slice
    c_dist    (chi u, v)_M          ctilde_dist  (chi^2 u, v)_M
    rho_dist  -h^2 sum_K (box u, chi phi)_K
    b_gamma   h (u, v)_lateral
    c_bd      h^3 (chi dnu phi, dnu psi)_lateral
    ctilde_bd h^3 (chi^2 dnu phi, dnu psi)_lateral
    rho_bd    -h^2 (u, chi dnu phi)_lateral

Here dnu is the Minkowski conormal -N_t dt + N_x dx for the Euclidean unit
normal N, and box = dt^2 - dx^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import FeSpace, edge_ref_points, segment_quadrature, triangle_quadrature
from .mesh import BOTTOM, TOP, LEFT, RIGHT

EXP_GUARD = 1e-14


# -- cutoff weights ----------------------------------------------------------

@dataclass(frozen=True)
class Cutoff:
    """Spacetime control weight chi(t,x) = chi0(t) * chi1(x)^2.

    Modes: "smooth" (bump profiles in t and x), "indicator" (chi0 = 1,
    chi1 = 1_(a,b)), "one" (chi identically 1).  Boundary problems use the
    time-only trace chi(t) = chi0(t).
    """

    T: float
    a: float
    b: float
    mode: str = "smooth"

    def __post_init__(self):
        if self.mode not in ("smooth", "indicator", "one"):
            raise ValueError(f"unknown cutoff mode {self.mode!r}")
        if not (0.0 < self.a < self.b < 1.0):
            raise ValueError(f"need 0 < a < b < 1, got a={self.a}, b={self.b}")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def is_one(self) -> bool:
        return self.mode == "one"

    def chi0(self, t):
        t = np.asarray(t, dtype=float)
        if self.mode in ("indicator", "one"):
            return np.ones_like(t)
        inside = (t > EXP_GUARD) & (t < self.T - EXP_GUARD)
        ts = np.where(inside, t, 0.5 * self.T)
        val = np.exp(2.0 / self.T - 0.5 / ts - 0.5 / (self.T - ts))
        return np.where(inside, val, 0.0)

    def chi1(self, x):
        x = np.asarray(x, dtype=float)
        if self.mode == "one":
            return np.ones_like(x)
        if self.mode == "indicator":
            return np.where((x > self.a) & (x < self.b), 1.0, 0.0)
        inside = (x - self.a > EXP_GUARD) & (self.b - x > EXP_GUARD)
        xs = np.where(inside, x, 0.5 * (self.a + self.b))
        val = np.exp(4.0 / (5.0 * (self.b - self.a))
                     - 0.2 / (xs - self.a) - 0.2 / (self.b - xs))
        return np.where(inside, val, 0.0)

    def volume(self, t, x):
        """chi(t, x) for the distributed problem."""
        if self.mode == "one":
            return np.ones_like(np.asarray(t, dtype=float))
        return self.chi0(t) * self.chi1(x) ** 2

    def boundary(self, t):
        """Time-only chi(t) used on the lateral boundary."""
        if self.mode == "one":
            return np.ones_like(np.asarray(t, dtype=float))
        return self.chi0(t)


@dataclass
class FormMatrix:
    name: str
    mat: sp.csr_matrix
    row_space: FeSpace
    col_space: FeSpace
    h: float

    def form(self, test_vec: np.ndarray, trial_vec: np.ndarray) -> float:
        return float(test_vec @ (self.mat @ trial_vec))

    def quadratic(self, vec: np.ndarray) -> float:
        return self.form(vec, vec)


def _as_field(V):
    if V is None:
        return None
    if callable(V):
        return V
    v = float(V)
    if v == 0.0:
        return None
    return lambda t, x: np.full_like(np.asarray(t, dtype=float), v)


# -- assembly helpers --------------------------------------------------------

_CHUNK = 8192


def _restrict(M, test: FeSpace, trial: FeSpace):
    M = M.tocsr()
    if test.lateral_constraint:
        M = M[test.retained]
    if trial.lateral_constraint:
        M = M[:, trial.retained]
    return M.tocsr()


def _collect(shape, parts):
    rows = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, dtype=np.int64)
    cols = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=np.int64)
    vals = np.concatenate([p[2] for p in parts]) if parts else np.empty(0)
    return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()

def _scatter(loc, row_dofs, col_dofs):
    nc, ni, nj = loc.shape
    r = np.broadcast_to(row_dofs[:, :, None], (nc, ni, nj)).ravel()
    c = np.broadcast_to(col_dofs[:, None, :], (nc, ni, nj)).ravel()
    return r, c, loc.ravel()


def _phys_points(v0, J, ref_pts):
    return v0[:, None, :] + np.einsum("cab,qb->cqa", J, ref_pts)


def _grad_phys(invJ, gref):
    # grad_x = J^{-T} grad_ref: gx[a] = sum_b invJ[b, a] gref[b]
    return np.einsum("cba,qib->cqia", invJ, gref)


def _box_tab(invJ, href, val, Vfield, pts):
    K = (invJ[:, :, 0, None] * invJ[:, None, :, 0]
         - invJ[:, :, 1, None] * invJ[:, None, :, 1])
    box = np.einsum("cAB,qiAB->cqi", K, href)
    if Vfield is not None:
        box = box + Vfield(pts[:, :, 0], pts[:, :, 1])[:, :, None] * val[None, :, :]
    return box


def _volume_assemble(test, trial, deg, kernel):
    """Generic chunked cell-loop.  ``kernel(ctx) -> (nc, ni, nj)`` local blocks."""
    mesh = test.mesh
    if trial.mesh is not mesh:
        raise ValueError("trial and test spaces live on different meshes")
    rule = triangle_quadrature(deg)
    tabs_test = test.element.tabulate(rule.points)
    tabs_trial = tabs_test if trial.element is test.element else trial.element.tabulate(rule.points)
    J, invJ, detJ, v0 = test.cell_jacobians()
    adet = np.abs(detJ)
    parts = []
    ncell = len(mesh.triangles)
    for c0 in range(0, ncell, _CHUNK):
        c1 = min(c0 + _CHUNK, ncell)
        ctx = {
            "rule": rule,
            "J": J[c0:c1], "invJ": invJ[c0:c1], "v0": v0[c0:c1],
            "wdet": rule.weights[None, :] * adet[c0:c1, None],
            "tabs_test": tabs_test, "tabs_trial": tabs_trial,
        }
        loc = kernel(ctx)
        parts.append(_scatter(loc, test.cell_dofs[c0:c1], trial.cell_dofs[c0:c1]))
    return _collect((test.nfull, trial.nfull), parts)


def _boundary_tabs(space: FeSpace, edge_ids, s_nodes, need_grad=True):
    """One-sided traces on the given edges: values, physical gradients,
    physical points, scaled weights (per unit s-weight) and unit normals."""
    mesh = space.mesh
    cells = mesh.edge_tris[edge_ids, 0]
    la = mesh.edge_local[edge_ids, 0, 0]
    lb = mesh.edge_local[edge_ids, 0, 1]
    var = la * 3 + lb
    tabs = {}
    for v in np.unique(var):
        tabs[v] = space.element.tabulate(edge_ref_points(v // 3, v % 3, s_nodes))
    nq, nd = len(s_nodes), space.element.ndof
    val = np.empty((len(edge_ids), nq, nd))
    gref = np.empty((len(edge_ids), nq, nd, 2)) if need_grad else None
    for v, tab in tabs.items():
        mask = var == v
        val[mask] = tab[0]
        if need_grad:
            gref[mask] = tab[1]
    A = mesh.vertices[mesh.edges[edge_ids, 0]]
    B = mesh.vertices[mesh.edges[edge_ids, 1]]
    d = B - A
    lens = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lens[:, None]
    pts = A[:, None, :] + s_nodes[None, :, None] * d[:, None, :]
    gx = None
    if need_grad:
        _, invJ, _, _ = space.cell_jacobians()
        gx = np.einsum("eba,eqib->eqia", invJ[cells], gref)
    return cells, val, gx, pts, lens, normals


def _conormal(gx, normals):
    return -normals[:, None, None, 0] * gx[..., 0] + normals[:, None, None, 1] * gx[..., 1]


def _split_unit_interval(A, B, breaks):
    """Cut points of [0,1] where the segment A->B crosses an x = const break."""
    cuts = [0.0, 1.0]
    dx = B[1] - A[1]
    if abs(dx) > 1e-15:
        for xb in breaks:
            s = (xb - A[1]) / dx
            if 1e-12 < s < 1 - 1e-12:
                cuts.append(float(s))
    return sorted(cuts)


# -- volume forms ------------------------------------------------------------

def assemble_a_dist(trial: FeSpace, test: FeSpace, h: float) -> FormMatrix:
    """Distributed wave form: rows test, cols trial; only bottom/top boundary
    terms (the lateral trace is constrained away)."""
    pbar = max(trial.p, test.p)

    def kernel(ctx):
        gT = _grad_phys(ctx["invJ"], ctx["tabs_test"][1])
        gU = _grad_phys(ctx["invJ"], ctx["tabs_trial"][1])
        return h * h * (np.einsum("cq,cqi,cqj->cij", ctx["wdet"], gT[..., 1], gU[..., 1])
                        - np.einsum("cq,cqi,cqj->cij", ctx["wdet"], gT[..., 0], gU[..., 0]))

    M = _volume_assemble(test, trial, 2 * pbar, kernel)
    M = M + _a_time_boundary_term(trial, test, h)
    return FormMatrix("a_dist", _restrict(M, test, trial), test, trial, h)


def _a_time_boundary_term(trial, test, h):
    """- h^2 (u, dnu psi) over bottom and top edges."""
    mesh = test.mesh
    deg = 2 * max(trial.p, test.p)
    srule = segment_quadrature(deg)
    parts = []
    for tag in (BOTTOM, TOP):
        edges = mesh.boundary_edges(tag)
        if len(edges) == 0:
            continue
        _, valU, _, _, lens, _ = _boundary_tabs(trial, edges, srule.points, need_grad=False)
        _, _, gT, _, _, normals = _boundary_tabs(test, edges, srule.points)
        dnuT = _conormal(gT, normals)
        w = srule.weights[None, :] * lens[:, None]
        loc = -h * h * np.einsum("eq,eqi,eqj->eij", w, dnuT, valU)
        parts.append(_scatter(loc, test.cell_dofs[mesh.edge_tris[edges, 0]],
                              trial.cell_dofs[mesh.edge_tris[edges, 0]]))
    return _collect((test.nfull, trial.nfull), parts)


def assemble_s(space: FeSpace, h: float, V=None) -> tuple[FormMatrix, FormMatrix]:
    """Stabilizer pieces: elementwise h^4 (Pu, Pv) and face jump h^3."""
    Vf = _as_field(V)
    p = space.p

    def kernel(ctx):
        pts = _phys_points(ctx["v0"], ctx["J"], ctx["rule"].points)
        box = _box_tab(ctx["invJ"], ctx["tabs_test"][2], ctx["tabs_test"][0], Vf, pts)
        return h ** 4 * np.einsum("cq,cqi,cqj->cij", ctx["wdet"], box, box)

    deg = max(2 * p, 2) + (4 if Vf is not None else 0)
    s_vol = FormMatrix("s_vol", _restrict(_volume_assemble(space, space, deg, kernel),
                                          space, space), space, space, h)

    s_jump = FormMatrix("s_jump", _restrict(_assemble_jump(space, h), space, space),
                        space, space, h)
    return s_vol, s_jump


def _assemble_jump(space: FeSpace, h: float):
    mesh = space.mesh
    edges = mesh.interior_edges()
    srule = segment_quadrature(2 * space.p)
    s = srule.points
    _, invJ, _, _ = space.cell_jacobians()

    A = mesh.vertices[mesh.edges[edges, 0]]
    B = mesh.vertices[mesh.edges[edges, 1]]
    d = B - A
    lens = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lens[:, None]

    nd = space.element.ndof
    parts = []
    for e0 in range(0, len(edges), 32768):
        sub = edges[e0:e0 + 32768]
        nsub = len(sub)
        dnu = np.empty((nsub, len(s), 2 * nd))
        union = np.empty((nsub, 2 * nd), dtype=np.int64)
        for side, sign in ((0, 1.0), (1, -1.0)):
            cells = mesh.edge_tris[sub, side]
            la = mesh.edge_local[sub, side, 0]
            lb = mesh.edge_local[sub, side, 1]
            var = la * 3 + lb
            gref = np.empty((nsub, len(s), nd, 2))
            for v in np.unique(var):
                tab = space.element.tabulate(edge_ref_points(v // 3, v % 3, s))
                gref[var == v] = tab[1]
            gx = np.einsum("eba,eqib->eqia", invJ[cells], gref)
            nrm = normals[e0:e0 + nsub]
            dnu[:, :, side * nd:(side + 1) * nd] = sign * (
                -nrm[:, None, None, 0] * gx[..., 0] + nrm[:, None, None, 1] * gx[..., 1])
            union[:, side * nd:(side + 1) * nd] = space.cell_dofs[cells]
        w = srule.weights[None, :] * lens[e0:e0 + nsub, None]
        loc = h ** 3 * np.einsum("eq,eqi,eqj->eij", w, dnu, dnu)
        parts.append(_scatter(loc, union, union))
    return _collect((space.nfull, space.nfull), parts)


def jump_stabilizer_value(space: FeSpace, h: float, coeffs: np.ndarray) -> float:
    """S_jump(u) evaluated pointwise as a sum of squares.

    Algebraically equal to the s_jump quadratic form, but free of the
    cancellation that expanding (sum_i x_i jump_i)^2 through the matrix
    incurs; interpolants of global polynomials come out at roundoff^2.
    """
    mesh = space.mesh
    full = space.expand(np.asarray(coeffs, dtype=float))
    srule = segment_quadrature(2 * space.p)
    s = srule.points
    _, invJ, _, _ = space.cell_jacobians()
    total = 0.0
    edges = mesh.interior_edges()
    A = mesh.vertices[mesh.edges[edges, 0]]
    B = mesh.vertices[mesh.edges[edges, 1]]
    d = B - A
    lens = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lens[:, None]
    jump = np.zeros((len(edges), len(s)))
    for side, sign in ((0, 1.0), (1, -1.0)):
        cells = mesh.edge_tris[edges, side]
        la = mesh.edge_local[edges, side, 0]
        lb = mesh.edge_local[edges, side, 1]
        var = la * 3 + lb
        loc = full[space.cell_dofs[cells]]
        for v in np.unique(var):
            mask = var == v
            _, gref, _ = space.element.tabulate(edge_ref_points(v // 3, v % 3, s))
            gx = np.einsum("eba,qib->eqia", invJ[cells[mask]], gref)
            dnu = (-normals[mask, None, None, 0] * gx[..., 0]
                   + normals[mask, None, None, 1] * gx[..., 1])
            jump[mask] += sign * np.einsum("eqi,ei->eq", dnu, loc[mask])
    total = float(np.einsum("eq,q,e->", jump ** 2, srule.weights, lens))
    return h ** 3 * total


def assemble_e_slice(space: FeSpace, h: float, slice_tag: int) -> FormMatrix:
    """Initial/final slice energy: h (u, v) + h^3 (dt u, dt v) on the slice."""
    if slice_tag not in (BOTTOM, TOP):
        raise ValueError("slice must be BOTTOM or TOP")
    mesh = space.mesh
    edges = mesh.boundary_edges(slice_tag)
    srule = segment_quadrature(2 * space.p)
    cells, val, gx, _, lens, _ = _boundary_tabs(space, edges, srule.points)
    w = srule.weights[None, :] * lens[:, None]
    loc = h * np.einsum("eq,eqi,eqj->eij", w, val, val) \
        + h ** 3 * np.einsum("eq,eqi,eqj->eij", w, gx[..., 0], gx[..., 0])
    M = _collect((space.nfull, space.nfull), [_scatter(loc, space.cell_dofs[cells],
                                                       space.cell_dofs[cells])])
    return FormMatrix("e_slice", _restrict(M, space, space), space, space, h)


def _weighted_volume_mass(trial, test, weight, deg):
    def kernel(ctx):
        pts = _phys_points(ctx["v0"], ctx["J"], ctx["rule"].points)
        W = ctx["wdet"] * weight(pts[:, :, 0], pts[:, :, 1])
        return np.einsum("cq,qi,qj->cij", W, ctx["tabs_test"][0], ctx["tabs_trial"][0])

    return _volume_assemble(test, trial, deg, kernel)


def _chi_deg(trial_p, test_p, cutoff, extra=6):
    return 2 * max(trial_p, test_p) + (0 if cutoff.is_one else extra)


def assemble_c_dist(trial: FeSpace, test: FeSpace, h: float, cutoff: Cutoff) -> FormMatrix:
    M = _weighted_volume_mass(trial, test, cutoff.volume, _chi_deg(trial.p, test.p, cutoff))
    return FormMatrix("c_dist", _restrict(M, test, trial), test, trial, h)


def assemble_ctilde_dist(space: FeSpace, h: float, cutoff: Cutoff) -> FormMatrix:
    M = _weighted_volume_mass(space, space, lambda t, x: cutoff.volume(t, x) ** 2,
                              _chi_deg(space.p, space.p, cutoff))
    return FormMatrix("ctilde_dist", _restrict(M, space, space), space, space, h)


def assemble_rho_dist(u_space: FeSpace, phi_space: FeSpace, h: float,
                      cutoff: Cutoff) -> FormMatrix:
    """rho(u, phi) = -h^2 sum_K (box u, chi phi); rows phi, cols u."""

    def kernel(ctx):
        pts = _phys_points(ctx["v0"], ctx["J"], ctx["rule"].points)
        box_u = _box_tab(ctx["invJ"], ctx["tabs_trial"][2], ctx["tabs_trial"][0], None, pts)
        W = ctx["wdet"] * cutoff.volume(pts[:, :, 0], pts[:, :, 1])
        return -h * h * np.einsum("cq,qi,cqj->cij", W, ctx["tabs_test"][0], box_u)

    M = _volume_assemble(phi_space, u_space, _chi_deg(u_space.p, phi_space.p, cutoff), kernel)
    return FormMatrix("rho_dist", _restrict(M, phi_space, u_space), phi_space, u_space, h)


# -- boundary-control forms --------------------------------------------------

def assemble_a_bd(trial: FeSpace, test: FeSpace, h: float, V=None) -> FormMatrix:
    """Boundary-problem wave form: volume g-product plus potential term,
    (u, dnu psi) on the whole boundary and (dnu u, psi) on the lateral part."""
    Vf = _as_field(V)
    pbar = max(trial.p, test.p)

    def kernel(ctx):
        gT = _grad_phys(ctx["invJ"], ctx["tabs_test"][1])
        gU = _grad_phys(ctx["invJ"], ctx["tabs_trial"][1])
        loc = (np.einsum("cq,cqi,cqj->cij", ctx["wdet"], gT[..., 1], gU[..., 1])
               - np.einsum("cq,cqi,cqj->cij", ctx["wdet"], gT[..., 0], gU[..., 0]))
        if Vf is not None:
            pts = _phys_points(ctx["v0"], ctx["J"], ctx["rule"].points)
            W = ctx["wdet"] * Vf(pts[:, :, 0], pts[:, :, 1])
            loc = loc + np.einsum("cq,qi,qj->cij", W, ctx["tabs_test"][0], ctx["tabs_trial"][0])
        return h * h * loc

    deg = 2 * pbar + (4 if Vf is not None else 0)
    M = _volume_assemble(test, trial, deg, kernel)

    mesh = test.mesh
    srule = segment_quadrature(2 * pbar)
    parts = []
    for tag in (BOTTOM, TOP, LEFT, RIGHT):
        edges = mesh.boundary_edges(tag)
        if len(edges) == 0:
            continue
        cells = mesh.edge_tris[edges, 0]
        _, valU, gU, _, lens, normals = _boundary_tabs(trial, edges, srule.points)
        _, valT, gT, _, _, _ = _boundary_tabs(test, edges, srule.points)
        w = srule.weights[None, :] * lens[:, None]
        loc = -h * h * np.einsum("eq,eqi,eqj->eij", w, _conormal(gT, normals), valU)
        if tag in (LEFT, RIGHT):
            loc = loc - h * h * np.einsum("eq,eqi,eqj->eij", w, valT, _conormal(gU, normals))
        parts.append(_scatter(loc, test.cell_dofs[cells], trial.cell_dofs[cells]))
    M = M + _collect((test.nfull, trial.nfull), parts)
    return FormMatrix("a_bd", _restrict(M, test, trial), test, trial, h)


def _lateral_form(trial, test, h, kernel_kind, weight, deg, sides=(LEFT, RIGHT)):
    """Shared Gamma assembler: kernel_kind selects which traces are paired."""
    mesh = test.mesh
    srule = segment_quadrature(deg)
    parts = []
    for tag in sides:
        edges = mesh.boundary_edges(tag)
        if len(edges) == 0:
            continue
        cells = mesh.edge_tris[edges, 0]
        need_g = kernel_kind != "val-val"
        _, valU, gU, ptsU, lens, normals = _boundary_tabs(trial, edges, srule.points, need_grad=need_g)
        _, valT, gT, _, _, _ = _boundary_tabs(test, edges, srule.points, need_grad=need_g)
        w = srule.weights[None, :] * lens[:, None]
        if weight is not None:
            w = w * weight(ptsU[:, :, 0])
        if kernel_kind == "val-val":
            loc = np.einsum("eq,eqi,eqj->eij", w, valT, valU)
        elif kernel_kind == "dnu-dnu":
            loc = np.einsum("eq,eqi,eqj->eij", w, _conormal(gT, normals), _conormal(gU, normals))
        elif kernel_kind == "dnu-val":  # test conormal x trial value
            loc = np.einsum("eq,eqi,eqj->eij", w, _conormal(gT, normals), valU)
        else:
            raise ValueError(kernel_kind)
        parts.append(_scatter(loc, test.cell_dofs[cells], trial.cell_dofs[cells]))
    return _collect((test.nfull, trial.nfull), parts)


def assemble_boundary_family(u_space: FeSpace, phi_space: FeSpace, h: float,
                             cutoff: Cutoff, V=None) -> dict:
    """All Gamma-supported forms of the boundary formulation plus a_bd."""
    chi = None if cutoff.is_one else cutoff.boundary
    chi2 = None if cutoff.is_one else (lambda t: cutoff.boundary(t) ** 2)
    deg_b = 2 * u_space.p
    deg_c = _chi_deg(phi_space.p, phi_space.p, cutoff, extra=4)
    deg_r = _chi_deg(u_space.p, phi_space.p, cutoff, extra=4)
    fams = {
        "a_bd": assemble_a_bd(u_space, phi_space, h, V),
        "b_u": FormMatrix("b_gamma", _restrict(
            h * _lateral_form(u_space, u_space, h, "val-val", None, deg_b),
            u_space, u_space), u_space, u_space, h),
        "b_phi": FormMatrix("b_gamma", _restrict(
            h * _lateral_form(phi_space, phi_space, h, "val-val", None, 2 * phi_space.p),
            phi_space, phi_space), phi_space, phi_space, h),
        "c_bd": FormMatrix("c_bd", _restrict(
            h ** 3 * _lateral_form(phi_space, phi_space, h, "dnu-dnu", chi, deg_c),
            phi_space, phi_space), phi_space, phi_space, h),
        "ctilde_bd": FormMatrix("ctilde_bd", _restrict(
            h ** 3 * _lateral_form(phi_space, phi_space, h, "dnu-dnu", chi2, deg_c),
            phi_space, phi_space), phi_space, phi_space, h),
        # rho(u, phi) = -h^2 (u, chi dnu phi): rows phi (conormal), cols u (value)
        "rho_bd": FormMatrix("rho_bd", _restrict(
            -h * h * _lateral_form(u_space, phi_space, h, "dnu-val", chi, deg_r),
            phi_space, u_space), phi_space, u_space, h),
    }
    return fams


# -- loads -------------------------------------------------------------------

def assemble_load(space: FeSpace, h: float, kappa: float, data) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides on one test space.

    rhs_v  = h^(-kappa) [ h (u0, v) + h^3 (u1, dt v) ]   on the bottom slice,
    rhs_psi = h^2 (u1, psi) - h^2 (u0, dt psi)           on the bottom slice.
    """
    mesh = space.mesh
    deg = 2 * space.p + 8
    srule = segment_quadrature(min(deg, 20))
    breaks = sorted(set(getattr(data, "breaks", ())))
    rhs_v = np.zeros(space.nfull)
    rhs_psi = np.zeros(space.nfull)
    _, invJ, _, _ = space.cell_jacobians()
    for ie in mesh.boundary_edges(BOTTOM):
        cell = mesh.edge_tris[ie, 0]
        la, lb = mesh.edge_local[ie, 0]
        A = mesh.vertices[mesh.edges[ie, 0]]
        B = mesh.vertices[mesh.edges[ie, 1]]
        d = B - A
        length = float(np.hypot(*d))
        cuts = _split_unit_interval(A, B, breaks)
        dofs = space.cell_dofs[cell]
        for s0, s1 in zip(cuts[:-1], cuts[1:]):
            s = s0 + (s1 - s0) * srule.points
            w = srule.weights * (s1 - s0) * length
            val, gref, _ = space.element.tabulate(edge_ref_points(la, lb, s))
            gx = np.einsum("ba,qib->qia", invJ[cell], gref)
            x = A[1] + s * d[1]
            u0 = np.asarray(data.u0(x), dtype=float)
            u1 = np.asarray(data.u1(x), dtype=float)
            dt_v = gx[..., 0]
            np.add.at(rhs_v, dofs, h * (w * u0) @ val + h ** 3 * (w * u1) @ dt_v)
            np.add.at(rhs_psi, dofs, h * h * ((w * u1) @ val - (w * u0) @ dt_v))
    rhs_v *= h ** (-kappa)
    if not (np.all(np.isfinite(rhs_v)) and np.all(np.isfinite(rhs_psi))):
        raise ValueError("initial data produced non-finite load entries")
    return space.restrict_vector(rhs_v), space.restrict_vector(rhs_psi)
