import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import order, smooth_map
from physvac.errors import ContractError, DegenerateMapError
from physvac.geometry import (
    Grid,
    compute_kinematics,
    deformation_gradient,
    discrete_gradient,
    face_divergence,
    face_gradient,
    kinematic_rates,
    kinematics_of,
    lie_derivatives,
    partial,
    piola_divergence,
    quadrature_weights_x3,
    second_partial,
)

EYE = np.eye(3)[:, :, None, None, None]


def det_by_second_row(M):
    """Cofactor expansion along the middle row; independent of the adjugate code."""
    m = lambda i, j: M[i, j]
    return (-m(1, 0) * (m(0, 1) * m(2, 2) - m(0, 2) * m(2, 1))
            + m(1, 1) * (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0))
            - m(1, 2) * (m(0, 0) * m(2, 1) - m(0, 1) * m(2, 0)))


class TestGrid:
    def test_spacing_and_cell_centres(self):
        g = Grid(4, 8, 16)
        assert g.spacing == (0.25, 0.125, 0.0625)
        assert np.allclose(g.x3.ravel(), (np.arange(16) + 0.5) / 16)
        assert g.x3.min() > 0 and g.x3.max() < 1

    @pytest.mark.parametrize("dims", [(3, 8, 8), (8, 8, 2), (8, 4.5, 8)])
    def test_rejects_small_or_fractional(self, dims):
        with pytest.raises(ContractError):
            Grid(*dims)

    def test_shape_check(self):
        with pytest.raises(ContractError):
            Grid(4, 4, 8).check(np.zeros((4, 4, 9)))


class TestQuadrature:
    @pytest.mark.parametrize("k", range(6))
    def test_corrected_rule_exact_for_quintics(self, k):
        n = 20
        w = quadrature_weights_x3(n)
        x = (np.arange(n) + 0.5) / n
        assert np.sum(w * x ** k) / n == pytest.approx(1.0 / (k + 1), rel=1e-13)

    def test_weights_positive_and_symmetric(self):
        w = quadrature_weights_x3(32)
        assert np.all(w > 0)
        assert np.allclose(w, w[::-1])

    def test_small_grids_fall_back_to_midpoint(self):
        assert np.all(quadrature_weights_x3(8) == 1.0)
        assert np.all(quadrature_weights_x3(32, "midpoint") == 1.0)

    def test_integrate_sums_components(self):
        g = Grid(4, 4, 16)
        assert g.integrate(np.ones((3,) + g.shape)) == pytest.approx(3.0, rel=1e-14)


class TestDiscreteGradient:
    def test_constant_has_zero_gradient_exactly(self, small_grid):
        D = discrete_gradient(np.full(small_grid.shape, 3.7), small_grid)
        assert np.all(D == 0)

    def test_identity_map_gives_identity(self, small_grid):
        D = deformation_gradient(small_grid.zeros(3), small_grid)
        assert np.array_equal(D, np.broadcast_to(EYE, D.shape))

    def test_linear_in_x3_is_exact_including_boundary_rows(self):
        g = Grid(4, 4, 12)
        f = np.broadcast_to(3.0 * g.x3 - 1.0, g.shape)
        assert np.allclose(partial(f, 2, g), 3.0, atol=1e-12)

    def test_quartic_in_x3_exact_including_boundary_rows(self):
        g = Grid(4, 4, 12)
        f = np.broadcast_to(g.x3 ** 4 - g.x3 ** 3, g.shape)
        exact = np.broadcast_to(4 * g.x3 ** 3 - 3 * g.x3 ** 2, g.shape)
        assert np.allclose(partial(f, 2, g), exact, atol=1e-12)

    def test_coarse_normal_grid_falls_back_to_second_order(self):
        g = Grid(4, 4, 6)
        f = np.broadcast_to(g.x3 ** 2, g.shape)
        assert np.allclose(partial(f, 2, g), 2 * np.broadcast_to(g.x3, g.shape), atol=1e-12)

    def test_normal_fourth_order(self):
        errs, hs = [], []
        for n in (16, 32, 64):
            g = Grid(4, 4, n)
            f = np.broadcast_to(np.cos(3 * g.x3), g.shape)
            exact = -3 * np.sin(3 * g.x3)
            errs.append(np.max(np.abs(partial(f, 2, g) - exact)))
            hs.append(g.h3)
        assert order(hs, errs) >= 3.8

    def test_tangential_fourth_order(self):
        errs, hs = [], []
        for n in (8, 16, 32, 64):
            g = Grid(n, 4, 4)
            f = np.broadcast_to(np.sin(2 * np.pi * g.x1), g.shape)
            exact = 2 * np.pi * np.cos(2 * np.pi * g.x1)
            errs.append(np.max(np.abs(partial(f, 0, g) - exact)))
            hs.append(g.h1)
        assert order(hs, errs) >= 3.8

    def test_second_partial_fourth_order(self):
        errs, hs = [], []
        for n in (8, 16, 32):
            g = Grid(4, n, 4)
            f = np.broadcast_to(np.cos(2 * np.pi * g.x2), g.shape)
            errs.append(np.max(np.abs(second_partial(f, 1, g) + 4 * np.pi ** 2 * f)))
            hs.append(g.h2)
        assert order(hs, errs) >= 3.8

    def test_vector_layout(self, small_grid):
        g = small_grid
        F = np.stack(np.broadcast_arrays(g.x3 + 0 * g.x1, 0 * g.x3 + 0 * g.x2, 0 * g.x1 + 0 * g.x3))
        D = discrete_gradient(F, g)
        assert D.shape == (3, 3) + g.shape
        assert np.allclose(D[0, 2], 1.0) and np.allclose(D[2, 0], 0.0)

    def test_shape_mismatch(self, small_grid):
        with pytest.raises(ContractError):
            discrete_gradient(np.zeros((3, 4, 4, 4)), small_grid)


class TestKinematics:
    def test_identity(self, small_grid):
        kin = kinematics_of(small_grid.zeros(3), small_grid)
        assert np.all(kin.A == EYE) and np.all(kin.J == 1) and np.all(kin.a == EYE)

    def test_uniform_dilation(self, small_grid):
        kin = kinematics_of(small_grid.zeros(3), small_grid, 2 * np.eye(3))
        assert np.all(kin.J == 8)
        assert np.allclose(kin.A, 0.5 * EYE, rtol=0, atol=0)
        assert np.allclose(kin.a, 4 * EYE, rtol=0, atol=0)

    def test_random_matrices_against_independent_oracle(self):
        rng = np.random.default_rng(7)
        M = np.eye(3)[:, :, None] + rng.uniform(-0.1, 0.1, (3, 3, 5000))
        kin = compute_kinematics(M)
        assert np.max(np.abs(np.einsum("kr...,rs...->ks...", kin.A, M) - np.eye(3)[:, :, None])) <= 1e-12
        assert np.max(np.abs(kin.J - det_by_second_row(M))) <= 1e-13
        ref = np.linalg.inv(np.moveaxis(M, -1, 0))
        assert np.allclose(np.moveaxis(kin.A, -1, 0), ref, rtol=0, atol=1e-13)

    def test_cofactor_is_J_times_A(self, small_grid):
        kin = kinematics_of(smooth_map(small_grid), small_grid)
        assert np.array_equal(kin.a, kin.J * kin.A)

    def test_degenerate_map_reports_worst_node(self):
        M = np.broadcast_to(np.eye(3)[:, :, None, None, None], (3, 3, 2, 2, 2)).copy()
        M[2, 2, 1, 0, 1] = -0.5
        M[2, 2, 0, 1, 1] = -0.1
        with pytest.raises(DegenerateMapError) as err:
            compute_kinematics(M)
        assert err.value.index == (1, 0, 1)
        assert err.value.J == pytest.approx(-0.5)

    def test_nonfinite_is_degenerate(self):
        M = np.broadcast_to(np.eye(3)[:, :, None], (3, 3, 4)).copy()
        M[0, 0, 2] = np.nan
        with pytest.raises(DegenerateMapError):
            compute_kinematics(M)


class TestPiola:
    def test_identity_exact(self, small_grid):
        assert np.all(piola_divergence(kinematics_of(small_grid.zeros(3), small_grid), small_grid) == 0)

    def test_affine_exact(self, small_grid):
        M = np.array([[1.1, 0.2, 0.0], [-0.1, 0.9, 0.3], [0.05, 0.0, 1.2]])
        kin = kinematics_of(small_grid.zeros(3), small_grid, M)
        assert np.all(piola_divergence(kin, small_grid) == 0)

    def test_separable_map_is_exact(self):
        # each displacement component depends on its own coordinate only, so the
        # cofactor entries never vary along the direction they are differentiated in
        g = Grid(16, 16, 32)
        d = 0.05 * np.stack(np.broadcast_arrays(
            np.sin(2 * np.pi * g.x1) + 0 * g.x3, np.sin(2 * np.pi * g.x2) + 0 * g.x1, g.x3 * (1 - g.x3) + 0 * g.x1))
        assert np.max(np.abs(piola_divergence(kinematics_of(d, g), g))) <= 1e-13

    def test_refinement_order(self):
        errs, hs = [], []
        for n in (32, 64, 128):
            g = Grid(n // 2, n // 2, n)
            errs.append(np.max(np.abs(piola_divergence(kinematics_of(smooth_map(g), g), g))))
            hs.append(g.h3)
        assert order(hs, errs) >= 3.5


class TestLieDerivatives:
    def test_identity_reduces_to_plain_operators(self, small_grid):
        g = small_grid
        F = np.random.default_rng(1).standard_normal((3,) + g.shape)
        lie = lie_derivatives(F, kinematics_of(g.zeros(3), g), g)
        D = discrete_gradient(F, g)
        assert np.max(np.abs(lie.grad - D)) <= 1e-13
        assert np.max(np.abs(lie.div - (D[0, 0] + D[1, 1] + D[2, 2]))) <= 1e-13
        curl = np.stack([D[2, 1] - D[1, 2], D[0, 2] - D[2, 0], D[1, 0] - D[0, 1]])
        assert np.max(np.abs(lie.curl - curl)) <= 1e-13

    @given(seed=st.integers(0, 2 ** 31), eps=st.floats(0.0, 0.01))
    def test_curl_matrix_identities(self, seed, eps):
        g = Grid(4, 4, 6)
        rng = np.random.default_rng(seed)
        kin = kinematics_of(eps * rng.standard_normal((3,) + g.shape), g)
        lie = lie_derivatives(rng.standard_normal((3,) + g.shape), kin, g)
        assert np.array_equal(lie.Curl, -np.swapaxes(lie.Curl, 0, 1))
        assert np.all(np.diagonal(lie.Curl, axis1=0, axis2=1) == 0)
        lhs = np.sum(lie.Curl ** 2, axis=(0, 1))
        rhs = 2 * np.sum(lie.curl ** 2, axis=0)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=0)

    def test_rejects_scalar(self, small_grid):
        with pytest.raises(ContractError):
            lie_derivatives(small_grid.zeros(), kinematics_of(small_grid.zeros(3), small_grid), small_grid)

    def test_curl_of_lagrangian_gradient_converges(self):
        errs, hs = [], []
        for n in (32, 64, 128):
            g = Grid(n // 2, n // 2, n)
            kin = kinematics_of(smooth_map(g), g)
            h = np.broadcast_to(np.sin(2 * np.pi * g.x1) * np.cos(2 * np.pi * g.x2) * np.sin(np.pi * g.x3) ** 2, g.shape)
            F = np.einsum("ri...,r...->i...", kin.A, discrete_gradient(h, g))
            errs.append(np.max(np.abs(lie_derivatives(F, kin, g).curl)))
            hs.append(g.h3)
        assert order(hs, errs) >= 1.8


class TestKinematicRates:
    def test_zero_velocity(self, small_grid):
        kin = kinematics_of(smooth_map(small_grid), small_grid)
        dA, dJ = kinematic_rates(kin, np.zeros((3, 3) + small_grid.shape))
        assert np.all(dA == 0) and np.all(dJ == 0)

    def test_unit_velocity_gradient_at_identity(self, small_grid):
        g = small_grid
        kin = kinematics_of(g.zeros(3), g)
        dA, dJ = kinematic_rates(kin, np.broadcast_to(EYE, (3, 3) + g.shape))
        assert np.all(dA == -EYE) and np.all(dJ == 3)

    def test_matches_finite_difference(self, small_grid):
        g = small_grid
        rng = np.random.default_rng(3)
        kin = kinematics_of(smooth_map(g), g)
        Dv = discrete_gradient(smooth_map(g, 0.5, 0.3), g)
        eps = 1e-6
        fd_A = (compute_kinematics(kin.Deta + eps * Dv).A - kin.A) / eps
        fd_J = (compute_kinematics(kin.Deta + eps * Dv).J - kin.J) / eps
        dA, dJ = kinematic_rates(kin, Dv)
        assert np.max(np.abs(fd_A - dA)) <= 1e-5
        assert np.max(np.abs(fd_J - dJ)) <= 1e-5


class TestFaceOperators:
    def test_divergence_is_minus_transpose(self, small_grid):
        g = small_grid
        rng = np.random.default_rng(5)
        X = rng.standard_normal((3, 3) + g.shape[:2] + (g.n3 - 1,))
        G = rng.standard_normal((3,) + g.shape)
        lhs = g.pairing(face_divergence(X, g), G)
        rhs = -np.sum(X * face_gradient(G, g)) * g.cell_volume
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_face_gradient_exact_for_linear_normal_profile(self, small_grid):
        g = small_grid
        D = face_gradient(np.broadcast_to(2.0 * g.x3, g.shape), g)
        assert np.allclose(D[2], 2.0) and np.all(D[0] == 0) and np.all(D[1] == 0)
