import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import order
from physvac.convergence import manufactured_elliptic
from physvac.degelliptic import (
    EllipticProblem,
    apply_G,
    bilinear_form,
    check_coercivity,
    pcg,
    regularity_gain,
    solve,
    weighted_inner,
)
from physvac.errors import ConfigurationError, ContractError, SolverFailure
from physvac.geometry import Grid
from physvac.weights import build_weight


def problem(dims=(8, 8, 32), preset="parabolic", gamma=2.0, **kw):
    g = Grid(*dims)
    return EllipticProblem(build_weight(preset, gamma, g), g, **kw)


def smooth_u(g, phase=0.0):
    return np.ascontiguousarray(np.broadcast_to(
        np.cos(2 * np.pi * (g.x1 + phase)) * np.sin(np.pi * g.x3) + 0.3 * np.sin(2 * np.pi * g.x2) * g.x3 ** 2, g.shape))


class TestApply:
    def test_constant(self):
        prob = problem()
        out = apply_G(np.full(prob.grid.shape, 2.5), prob)
        assert np.allclose(out, 25.0, rtol=0, atol=1e-12)

    def test_tangential_mode(self):
        errs = []
        for n in (8, 16, 32):
            prob = problem((n, 4, 16))
            g = prob.grid
            u = np.ascontiguousarray(np.broadcast_to(np.sin(2 * np.pi * g.x1), g.shape))
            errs.append(np.max(np.abs(apply_G(u, prob) - (4 * np.pi ** 2 + 10) * u)))
        assert order([1 / 8, 1 / 16, 1 / 32], errs) >= 3.8

    def test_linear_normal_profile_interior(self):
        # flux form with averaged face weights: second order at interior nodes
        errs = []
        for n in (32, 64, 128):
            prob = problem((4, 4, n))
            g = prob.grid
            u = np.ascontiguousarray(np.broadcast_to(g.x3, g.shape))
            exact = 10 * g.x3 - 2 * (1 - 2 * g.x3)
            inner = slice(n // 4, 3 * n // 4)
            errs.append(np.max(np.abs(apply_G(u, prob) - exact)[..., inner]))
        assert order([1 / 32, 1 / 64, 1 / 128], errs) >= 1.8

    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 1000))
    def test_linear(self, a, b, seed):
        prob = problem((4, 4, 12))
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal((2,) + prob.grid.shape)
        lhs = apply_G(a * u + b * v, prob)
        rhs = a * apply_G(u, prob) + b * apply_G(v, prob)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(lhs)))

    @given(seed=st.integers(0, 2 ** 31))
    def test_weighted_selfadjoint(self, seed):
        prob = problem((6, 6, 16), preset="sine", gamma=1.6)
        rng = np.random.default_rng(seed)
        u, v = rng.standard_normal((2,) + prob.grid.shape)
        a = weighted_inner(apply_G(u, prob), v, prob)
        b = weighted_inner(u, apply_G(v, prob), prob)
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))

    def test_coercive_samples(self):
        prob = problem()
        assert check_coercivity(prob)
        rng = np.random.default_rng(0)
        assert all(bilinear_form(v, v, prob) > 0 for v in rng.standard_normal((100,) + prob.grid.shape))

    def test_vector_componentwise(self):
        prob = problem((4, 4, 12))
        u = np.random.default_rng(1).standard_normal((3,) + prob.grid.shape)
        out = apply_G(u, prob)
        assert np.array_equal(out[1], apply_G(u[1], prob))


class TestSolve:
    def test_constant_rhs(self):
        prob = problem()
        u = solve(np.full(prob.grid.shape, 10 * 1.7), prob)
        assert np.max(np.abs(u - 1.7)) <= 1.7 * 1e-10

    @pytest.mark.parametrize("preset", ["parabolic", "sine"])
    def test_round_trip(self, preset):
        prob = problem(preset=preset, tol=1e-10)
        u_star = smooth_u(prob.grid)
        u = solve(apply_G(u_star, prob), prob)
        err = np.sqrt(weighted_inner(u - u_star, u - u_star, prob) / weighted_inner(u_star, u_star, prob))
        assert err <= 10 * prob.tol

    def test_residual_meets_tolerance(self):
        prob = problem(tol=1e-8)
        G = smooth_u(prob.grid)
        u, hist = solve(G, prob, return_history=True)
        r = apply_G(u, prob) - G
        assert np.sqrt(weighted_inner(r, r, prob) / weighted_inner(G, G, prob)) <= 1e-8
        assert hist[0][-1] <= 1e-8

    def test_unique_from_different_starts(self):
        prob = problem(tol=1e-10)
        G = smooth_u(prob.grid, 0.3)
        a = solve(G, prob)
        b = solve(G, prob, x0=np.random.default_rng(2).standard_normal(prob.grid.shape))
        assert np.sqrt(weighted_inner(a - b, a - b, prob) / weighted_inner(a, a, prob)) <= 10 * prob.tol

    def test_apply_after_solve(self):
        prob = problem(tol=1e-10)
        G = smooth_u(prob.grid, 0.1)
        r = apply_G(solve(G, prob), prob) - G
        assert np.sqrt(weighted_inner(r, r, prob) / weighted_inner(G, G, prob)) <= 1e-10

    def test_tangentially_varying_weight_uses_fallback(self):
        g = Grid(8, 8, 16)
        rho = (1 + 0.2 * np.sin(2 * np.pi * g.x1)) * g.x3 * (1 - g.x3) + 0 * g.x2
        prob = EllipticProblem(build_weight(rho, 2.0, g), g, tol=1e-10)
        assert not prob.symmetric
        u_star = smooth_u(g)
        u = solve(apply_G(u_star, prob), prob)
        assert np.max(np.abs(u - u_star)) <= 1e-7

    def test_manufactured_order(self):
        errs, hs = [], []
        for n in (32, 64, 128):
            g = Grid(n // 2, 4, n)
            wf = build_weight("parabolic", 2.0, g)
            prob = EllipticProblem(wf, g, 10.0, 1e-12)
            u_star, G = manufactured_elliptic(g, wf, 10.0)
            e = solve(G, prob) - u_star
            errs.append(np.sqrt(weighted_inner(e, e, prob) / weighted_inner(u_star, u_star, prob)))
            hs.append(1 / n)
        assert order(hs, errs) >= 1.8

    def test_nonconvergence_raises(self):
        prob = problem(max_iter=2)
        with pytest.raises(SolverFailure) as err:
            solve(smooth_u(prob.grid), prob)
        assert err.value.residual > 0 and err.value.iterations == 2

    def test_nonfinite_rhs(self):
        prob = problem()
        G = np.zeros(prob.grid.shape)
        G[0, 0, 0] = np.nan
        with pytest.raises(ContractError):
            solve(G, prob)

    @pytest.mark.parametrize("kw", [{"lam": 0.0}, {"lam": -1.0}, {"tol": 1e-3}, {"tol": 0.0}])
    def test_bad_parameters(self, kw):
        with pytest.raises(ConfigurationError):
            problem(**kw)

    def test_pcg_plain_spd(self):
        rng = np.random.default_rng(4)
        M = rng.standard_normal((20, 20))
        A = M @ M.T + 20 * np.eye(20)
        b = rng.standard_normal(20)
        res = pcg(lambda x: A @ x, b, np.diag(A), 1e-12, 200)
        assert np.allclose(A @ res.x, b, atol=1e-10)
        assert res.residuals[0] == 1.0


class TestRegularity:
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_constant(self, k):
        prob = problem()
        g = prob.grid
        rep = regularity_gain(np.ones(g.shape), np.full(g.shape, 10.0), prob, k)
        assert rep.ratio == pytest.approx(0.1, rel=1e-12)

    def test_zero_rhs(self):
        prob = problem()
        assert regularity_gain(prob.grid.zeros(), prob.grid.zeros(), prob, 0).ratio is None

    def test_manufactured_ratios_do_not_grow(self):
        ratios = {0: [], 1: []}
        for n in (32, 64, 128):
            g = Grid(n // 2, 4, n)
            wf = build_weight("parabolic", 2.0, g)
            prob = EllipticProblem(wf, g, 10.0, 1e-12)
            u_star, G = manufactured_elliptic(g, wf, 10.0)
            u = solve(G, prob)
            for k in ratios:
                ratios[k].append(regularity_gain(u, G, prob, k).ratio)
        for seq in ratios.values():
            assert seq[-1] <= seq[0] * 1.05
            assert max(seq) / min(seq) < 1.05
