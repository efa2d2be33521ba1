import numpy as np
import pytest

from wavectrl import fem
from wavectrl.mesh import build_rect_mesh


def ref_triangle_monomial_integral(a, b):
    # exact: int_T s^a r^b = a! b! / (a + b + 2)!
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)


class TestQuadrature:
    def test_weight_sums(self):
        for deg in range(1, 21):
            assert fem.triangle_quadrature(deg).weights.sum() == pytest.approx(0.5, rel=1e-14)
            assert fem.segment_quadrature(deg).weights.sum() == pytest.approx(1.0, rel=1e-14)

    def test_triangle_exactness(self):
        for deg in range(1, 21):
            rule = fem.triangle_quadrature(deg)
            s, r = rule.points[:, 0], rule.points[:, 1]
            for a in range(deg + 1):
                for b in range(deg + 1 - a):
                    got = float(rule.weights @ (s ** a * r ** b))
                    assert got == pytest.approx(ref_triangle_monomial_integral(a, b), rel=1e-13)

    def test_triangle_linear_example(self):
        rule = fem.triangle_quadrature(2)
        got = float(rule.weights @ (rule.points[:, 0] + rule.points[:, 1]))
        assert got == pytest.approx(1 / 6 + 1 / 6, rel=1e-14)

    def test_segment_exactness(self):
        for deg in range(1, 21):
            rule = fem.segment_quadrature(deg)
            for d in range(deg + 1):
                assert float(rule.weights @ rule.points ** d) == pytest.approx(1 / (d + 1), rel=1e-13)

    def test_segment_deg5_example(self):
        rule = fem.segment_quadrature(5)
        assert float(rule.weights @ rule.points ** 5) == pytest.approx(1 / 6, rel=1e-14)

    def test_degree_bounds(self):
        with pytest.raises(ValueError):
            fem.triangle_quadrature(21)
        with pytest.raises(ValueError):
            fem.segment_quadrature(21)
        with pytest.raises(ValueError):
            fem.triangle_quadrature(0)


class TestReferenceElement:
    def test_node_counts(self):
        assert fem.make_reference_element(1).ndof == 3
        assert fem.make_reference_element(2).ndof == 6
        assert fem.make_reference_element(3).ndof == 10
        with pytest.raises(ValueError):
            fem.make_reference_element(4)

    def test_p1_hessian_zero(self):
        el = fem.make_reference_element(1)
        _, _, H = el.tabulate(np.array([[0.3, 0.2], [0.1, 0.7]]))
        assert np.abs(H).max() == 0.0

    def test_partition_of_unity(self):
        rng = np.random.default_rng(0)
        for p in (1, 2, 3):
            el = fem.make_reference_element(p)
            pts = rng.dirichlet([1, 1, 1], size=10)[:, :2]
            v, g, H = el.tabulate(pts)
            assert np.abs(v.sum(axis=1) - 1).max() <= 1e-12
            assert np.abs(g.sum(axis=1)).max() <= 1e-12
            assert np.abs(H.sum(axis=1)).max() <= 1e-12
        el2 = fem.make_reference_element(2)
        v, _, _ = el2.tabulate(np.array([[1 / 3, 1 / 3]]))
        assert v.sum() == pytest.approx(1.0, rel=1e-14)

    def test_kronecker_property(self):
        for p in (1, 2, 3):
            el = fem.make_reference_element(p)
            v, _, _ = el.tabulate(el.nodes)
            assert np.abs(v - np.eye(el.ndof)).max() <= 1e-12

    def test_p3_hessian_vs_finite_differences(self):
        # oracle: central second differences of tabulated values
        el = fem.make_reference_element(3)
        rng = np.random.default_rng(42)
        pts = 0.1 + 0.25 * rng.random((3, 2))
        eps = 1e-4  # second differences are exact for cubics; eps only sets roundoff

        def val(q):
            return el.tabulate(np.atleast_2d(q))[0][0]

        for q in pts:
            _, _, H = el.tabulate(np.atleast_2d(q))
            e0, e1 = np.array([eps, 0.0]), np.array([0.0, eps])
            fd_ss = (val(q + e0) - 2 * val(q) + val(q - e0)) / eps ** 2
            fd_rr = (val(q + e1) - 2 * val(q) + val(q - e1)) / eps ** 2
            fd_sr = (val(q + e0 + e1) - val(q + e0 - e1)
                     - val(q - e0 + e1) + val(q - e0 - e1)) / (4 * eps ** 2)
            assert np.abs(H[0, :, 0, 0] - fd_ss).max() < 1e-6
            assert np.abs(H[0, :, 1, 1] - fd_rr).max() < 1e-6
            assert np.abs(H[0, :, 0, 1] - fd_sr).max() < 1e-6


class TestFeSpace:
    def test_dof_counts_euler(self):
        m = build_rect_mesh(2.0, 3, 4, jitter=0.1, seed=2)
        nv, ne, nc = len(m.vertices), len(m.edges), len(m.triangles)
        for p, expected in [(1, nv), (2, nv + ne), (3, nv + 2 * ne + nc)]:
            sp = fem.FeSpace(m, p)
            assert sp.ndof == expected

    def test_lateral_constraint_strips_sides(self):
        m = build_rect_mesh(2.0, 4, 4)
        for p in (1, 2, 3):
            sp = fem.FeSpace(m, p, lateral_constraint=True)
            x = sp.dof_coords[:, 1]
            assert np.all((x > 1e-12) & (x < 1 - 1e-12))
            free = fem.FeSpace(m, p)
            n_side = len(free.slice_dofs[3]) + len(free.slice_dofs[4])
            assert sp.ndof == free.ndof - n_side

    def test_constant_reproduction(self):
        m = build_rect_mesh(2.0, 3, 3, jitter=0.1, seed=7)
        sp = fem.FeSpace(m, 2)
        coeffs = fem.interpolate(sp, lambda t, x: 3.0 + 0 * t)
        for cell in (0, 5, 11):
            u, g, H = fem.eval_on_cell(sp, cell, coeffs, [0.25, 0.25])
            assert u == pytest.approx(3.0, rel=1e-13)
            assert np.abs(g).max() <= 1e-12

    def test_tsquared_hessian(self):
        m = build_rect_mesh(2.0, 3, 3, jitter=0.1, seed=8)
        sp = fem.FeSpace(m, 2)
        coeffs = fem.interpolate(sp, lambda t, x: t ** 2)
        for cell in range(len(m.triangles)):
            _, _, H = fem.eval_on_cell(sp, cell, coeffs, [0.2, 0.3])
            assert H[0, 0] == pytest.approx(2.0, abs=1e-12)
            assert abs(H[1, 1]) <= 1e-12

    def test_mixed_hessian(self):
        m = build_rect_mesh(2.0, 3, 3, jitter=0.05, seed=9)
        sp = fem.FeSpace(m, 2)
        coeffs = fem.interpolate(sp, lambda t, x: t * x)
        for cell in range(0, len(m.triangles), 3):
            _, _, H = fem.eval_on_cell(sp, cell, coeffs, [0.4, 0.1])
            assert H[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_polynomial_reproduction(self):
        # interpolate-then-evaluate is exact for global polys of degree <= p
        rng = np.random.default_rng(5)
        m = build_rect_mesh(1.0, 3, 3, jitter=0.1, seed=4)
        for p in (1, 2, 3):
            sp = fem.FeSpace(m, p)

            def f(t, x):
                acc = 0.0
                for a in range(p + 1):
                    for b in range(p + 1 - a):
                        acc = acc + ((a + 2 * b) % 3 - 1) * t ** a * x ** b
                return acc

            coeffs = fem.interpolate(sp, f)
            for _ in range(5):
                cell = int(rng.integers(len(m.triangles)))
                lam = rng.dirichlet([1, 1, 1])
                q = lam[:2]
                tri = m.triangles[cell]
                v0 = m.vertices[tri[0]]
                J = np.column_stack([m.vertices[tri[1]] - v0, m.vertices[tri[2]] - v0])
                pt = v0 + J @ q
                u, g, H = fem.eval_on_cell(sp, cell, coeffs, q)
                eps = 1e-6
                f0 = f(pt[0], pt[1])
                assert u == pytest.approx(f0, abs=1e-10)
                gt = (f(pt[0] + eps, pt[1]) - f(pt[0] - eps, pt[1])) / (2 * eps)
                gx = (f(pt[0], pt[1] + eps) - f(pt[0], pt[1] - eps)) / (2 * eps)
                assert g[0] == pytest.approx(gt, abs=1e-8)
                assert g[1] == pytest.approx(gx, abs=1e-8)

    def test_eval_errors(self):
        m = build_rect_mesh(2.0, 2, 2)
        sp = fem.FeSpace(m, 1)
        with pytest.raises(IndexError):
            fem.eval_on_cell(sp, 99, np.zeros(sp.ndof), [0.1, 0.1])
        with pytest.raises(ValueError):
            fem.eval_on_cell(sp, 0, np.zeros(3), [0.1, 0.1])

    def test_interpolate_zero_and_nonfinite(self):
        m = build_rect_mesh(2.0, 2, 2)
        sp = fem.FeSpace(m, 2)
        assert np.all(fem.interpolate(sp, lambda t, x: 0.0 * t) == 0)
        with pytest.raises(ValueError):
            fem.interpolate(sp, lambda t, x: t / (x - x))

    def test_interpolation_rate_sinpix(self):
        # L2(M) interpolation error should shrink at order p+1
        for p in (1, 2, 3):
            errs, hs = [], []
            for nx in (4, 8, 16):
                m = build_rect_mesh(1.0, nx, nx)
                sp = fem.FeSpace(m, p)
                coeffs = fem.interpolate(sp, lambda t, x: np.sin(np.pi * x))
                rule = fem.triangle_quadrature(2 * p + 4)
                val, _, _ = sp.element.tabulate(rule.points)
                J, _, detJ, v0 = sp.cell_jacobians()
                pts = v0[:, None, :] + np.einsum("cab,qb->cqa", J, rule.points)
                uh = np.einsum("qi,ci->cq", val, sp.expand(coeffs)[sp.cell_dofs])
                exact = np.sin(np.pi * pts[:, :, 1])
                err2 = np.einsum("cq,q,c->", (uh - exact) ** 2, rule.weights, np.abs(detJ))
                errs.append(np.sqrt(err2))
                hs.append(m.h)
            rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
            assert rate > p + 0.7
