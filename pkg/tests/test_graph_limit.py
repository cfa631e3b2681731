from __future__ import annotations

import numpy as np
import pytest

from wglimit import (
    ExpDecay,
    apply_resolvent,
    assemble,
    boundary_limits,
    decoupled_resolvent,
    kirchhoff_projector,
    kirchhoff_resolvent,
    limit_comparison,
    pi_theta_projector,
)
from wglimit.graph_limit import (
    KindMismatchError,
    apply_resolvent_grid,
    transverse_projection,
)
from wglimit.residual import chi_mode

from conftest import log_slope

Z = 1j
F1 = ExpDecay(rate=1.0)
SYM = kirchhoff_projector(1 / np.sqrt(2), 1 / np.sqrt(2))


def one_sided_derivative(res, f1, f2, edge, h=1e-4):
    x1 = apply_resolvent(res, f1, f2, h, edge)
    x2 = apply_resolvent(res, f1, f2, 2 * h, edge)
    x0 = apply_resolvent(res, f1, f2, 0.0, edge)
    return (-3 * x0 + 4 * x1 - x2) / (2 * h)


class TestApplyResolvent:
    def test_decoupled_dirichlet(self):
        res = decoupled_resolvent(Z)
        assert apply_resolvent(res, F1, None, 0.0, 1) == 0.0
        assert apply_resolvent(res, F1, None, 0.0, 2) == 0.0

    def test_construction_guards(self):
        with pytest.raises(ValueError):
            kirchhoff_resolvent(Z, None)
        from wglimit.graph_limit import GraphResolvent
        with pytest.raises(ValueError):
            GraphResolvent("decoupled", Z, SYM)
        with pytest.raises(ValueError):
            GraphResolvent("mixed", Z)

    def test_symmetric_kirchhoff(self):
        # equal weights, equal data: profiles coincide and the common
        # boundary derivative vanishes
        res = kirchhoff_resolvent(Z, SYM)
        for s in (0.0, 0.7, 2.3):
            x1 = apply_resolvent(res, F1, F1, s, 1)
            x2 = apply_resolvent(res, F1, F1, s, 2)
            assert x1 == pytest.approx(x2, abs=1e-12)
        d1 = one_sided_derivative(res, F1, F1, 1)
        assert abs(d1) < 1e-6

    def test_boundary_conditions(self):
        # Lam0perp x(0) = 0 and Lam0 x'(0) = 0 for mixed data
        res = kirchhoff_resolvent(Z, SYM)
        x0 = np.array([apply_resolvent(res, F1, None, 0.0, e) for e in (1, 2)])
        assert np.max(np.abs(SYM.lambda0_perp @ x0)) < 1e-9
        dx0 = np.array([one_sided_derivative(res, F1, None, e, h=1e-5) for e in (1, 2)])
        assert np.max(np.abs(SYM.lambda0 @ dx0)) < 1e-6

    def test_interior_equation(self):
        h = 5e-3
        for res in (decoupled_resolvent(Z), kirchhoff_resolvent(Z, SYM)):
            for s0 in (0.8, 2.0):
                vals = np.array([apply_resolvent(res, F1, None, s0 + k * h, 1)
                                 for k in (-2, -1, 0, 1, 2)])
                d2 = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3]
                      - vals[4]) / (12 * h**2)
                assert abs(-d2 - Z * vals[2] - F1(s0)) < 1e-6

    def test_grid_matches_scalar(self):
        res = kirchhoff_resolvent(Z, SYM)
        s = np.array([0.0, 0.4, 1.7, 5.0])
        grid_vals = apply_resolvent_grid(res, F1, None, s, 1)
        for sv, gv in zip(s, grid_vals):
            assert abs(gv - apply_resolvent(res, F1, None, float(sv), 1)) < 1e-9

    def test_edge_index_guard(self):
        with pytest.raises(ValueError):
            apply_resolvent(decoupled_resolvent(Z), F1, None, 0.0, 3)


class TestLimitComparison:
    def test_trivial_data(self, zero_profile):
        sol = assemble(zero_profile, 1, Z, 0.1, 0.01, None, None)
        res = kirchhoff_resolvent(Z, SYM)
        assert limit_comparison(sol, res) == 0.0

    def test_kind_mismatch(self, zero_profile, bump05):
        sol2 = assemble(zero_profile, 1, Z, 0.1, 0.01, F1, None)
        sol1 = assemble(bump05, 1, Z, 0.1, 0.01, F1, None)
        with pytest.raises(KindMismatchError):
            limit_comparison(sol2, decoupled_resolvent(Z))
        with pytest.raises(KindMismatchError):
            limit_comparison(sol1, kirchhoff_resolvent(Z, SYM))
        with pytest.raises(KindMismatchError):
            limit_comparison(sol1, decoupled_resolvent(2j))

    def test_reduction_matches_quadrature(self, zero_profile):
        # the analytic reduction equals a brute-force edge integral
        sol = assemble(zero_profile, 1, Z, 0.05, 0.005, F1, None)
        res = kirchhoff_resolvent(Z, SYM)
        value = limit_comparison(sol, res)
        s = np.linspace(0.0, 40.0, 160001)
        total = 0.0
        for edge in (1, 2):
            diff = sol.edge_profile(edge, s) - apply_resolvent_grid(res, F1, None, s, edge)
            total += np.trapezoid(np.abs(diff) ** 2, s)
        assert value == pytest.approx(np.sqrt(total), rel=1e-6)

    def test_case2_slope(self, zero_profile):
        eps = [2.0**-k for k in range(4, 11)]
        res = kirchhoff_resolvent(Z, SYM)
        vals = [limit_comparison(assemble(zero_profile, 1, Z, e, e**1.5, F1, None), res)
                for e in eps]
        assert abs(log_slope(eps[1:], vals[1:]) - 1.0) < 0.15

    def test_case1_slope(self, bump05):
        eps = [2.0**-k for k in range(6, 13)]
        res = decoupled_resolvent(Z)
        vals = [limit_comparison(assemble(bump05, 1, Z, e, e**1.5, F1, None), res)
                for e in eps]
        assert abs(log_slope(eps[1:], vals[1:]) - 1.0) < 0.15


class TestBoundaryLimits:
    def test_trivial_data(self, bump05):
        sol = assemble(bump05, 1, Z, 0.1, 0.01, None, None)
        lims = boundary_limits(sol)
        assert lims["value_defects"] == (0.0, 0.0)
        assert lims["derivative_defects"] == (0.0, 0.0)

    def test_case2_defects_shrink(self, zero_profile):
        eps = [2.0**-k for k in range(4, 11)]
        v, f = [], []
        for e in eps:
            lims = boundary_limits(assemble(zero_profile, 1, Z, e, e**1.5, F1, None))
            v.append(lims["kirchhoff_value_defect"])
            f.append(lims["kirchhoff_flux_defect"])
        assert log_slope(eps[1:], v[1:]) >= 0.9
        assert log_slope(eps[1:], f[1:]) >= 0.9

    def test_case1_defects_shrink(self, bump05):
        eps = [2.0**-k for k in range(6, 13)]
        cols = {k: [] for k in range(4)}
        for e in eps:
            lims = boundary_limits(assemble(bump05, 1, Z, e, e**1.5, F1, None))
            vals = lims["value_defects"] + lims["derivative_defects"]
            for k in range(4):
                cols[k].append(vals[k])
        for k in range(4):
            assert log_slope(eps[1:], cols[k][1:]) >= 0.9


class TestProjections:
    def test_pi_theta_two_edges_matches_complement(self):
        for a in ((1 / np.sqrt(2), 1 / np.sqrt(2)), (0.8, -0.6), (1.0, 0.0)):
            proj = kirchhoff_projector(*a)
            pi = pi_theta_projector(np.array(a))
            assert np.max(np.abs(pi.real - proj.lambda0_perp)) < 1e-12
            assert np.max(np.abs(pi.imag)) < 1e-12

    def test_pi_theta_general_projector(self, rng):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        pi = pi_theta_projector(a)
        assert np.max(np.abs(pi @ pi - pi)) < 1e-12
        assert np.max(np.abs(pi @ a)) < 1e-12

    def test_pi_theta_zero_vector(self):
        with pytest.raises(ValueError):
            pi_theta_projector(np.zeros(2))

    def test_transverse_projection_adjoint(self, rng):
        # ((g1,g2), P psi)_G == (P* (g1,g2), psi) with shared quadrature
        m = 63
        h_u = 1.0 / (m + 1)
        u = (np.arange(m) + 1) * h_u
        s = np.linspace(0.0, 5.0, 101)
        n = 2
        psi = [np.outer(np.exp(-s) * np.cos(3 * s), np.sin(np.pi * u))
               + 0.5 * np.outer(np.exp(-0.5 * s), np.sin(2 * np.pi * u))
               for _ in range(2)]
        g = [np.exp(-s), np.cos(s) * np.exp(-s)]
        lhs = sum(np.trapezoid(g[j] * transverse_projection(psi[j], u, n, h_u), s)
                  for j in range(2))
        chi = chi_mode(n, u)
        rhs = sum(np.trapezoid((g[j][:, None] * chi[None, :] * psi[j]).sum(axis=1) * h_u, s)
                  for j in range(2))
        assert lhs == pytest.approx(rhs, abs=1e-8)

    def test_transverse_projection_discrete_orthonormality(self):
        m = 31
        h_u = 1.0 / (m + 1)
        u = (np.arange(m) + 1) * h_u
        field = np.outer(np.ones(3), chi_mode(2, u))
        assert np.allclose(transverse_projection(field, u, 2, h_u), 1.0, atol=1e-12)
        assert np.allclose(transverse_projection(field, u, 1, h_u), 0.0, atol=1e-12)
