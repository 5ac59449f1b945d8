import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings, strategies as st

from conftest import bump_density, random_affine_pencil
from eigencrit.derivatives import (combination_right_derivative, directional_derivative, lipschitz_probe,
                                   normalized_value_and_derivative, one_sided_derivatives)
from eigencrit.errors import ArgumentError, ConsistencyError, InvalidParameterError
from eigencrit.functionals import CombinationSpec, ScalingSpec
from eigencrit.geometry.generators import generate_domain
from eigencrit.geometry.pencils import ConformalLaplacePencil
from eigencrit.pencil import (AffinePencil, eigen_residuals, group_clusters, solve_spectrum,
                              solve_through)


def richardson_right(f, t):
    """Right derivative of f at 0 from one-sided differences at t and t/2."""
    f0 = f(0.0)
    d1 = (f(t) - f0) / t
    d2 = (f(t / 2) - f0) / (t / 2)
    return 2 * d2 - d1


def eig_k(pencil, x, k):
    return solve_spectrum(pencil, x, k - (1 - pencil.zero_modes) + 1).value(k)


class TestSolveSpectrum:
    def test_diagonal(self):
        p = AffinePencil(np.diag([0.0, 1.0, 2.0]), np.eye(3), param_dim=1)
        s = solve_spectrum(p, np.zeros(1), 3)
        assert np.allclose(s.values, [0, 1, 2])
        assert [c.size for c in s.clusters] == [1, 1, 1]

    @given(st.integers(0, 10_000), st.integers(2, 12))
    @settings(max_examples=40, deadline=None)
    def test_matches_scipy_generalized_eigh(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, n))
        K, M = A + A.T, B @ B.T + n * np.eye(n)
        p = AffinePencil(K, M, param_dim=1)
        s = solve_spectrum(p, np.zeros(1), n)
        ref = sl.eigh(K, M, eigvals_only=True)
        assert np.allclose(s.values, ref, rtol=1e-10, atol=1e-10)
        assert np.allclose(s.vectors.T @ M @ s.vectors, np.eye(n), atol=1e-10)
        assert eigen_residuals(s).max() < 1e-8

    def test_cluster_tolerance(self):
        cl = group_clusters(np.array([1.0, 1.0 + 1e-8, 2.0, 2.1]), 1e-6)
        assert [(c.start, c.stop) for c in cl] == [(1, 2), (3, 3), (4, 4)]

    def test_unresolved_last_cluster(self):
        p = AffinePencil(np.diag([1.0, 2.0, 2.0]), np.eye(3), param_dim=1)
        s = solve_spectrum(p, np.zeros(1), 2)
        assert not s.clusters[-1].resolved
        assert solve_through(p, np.zeros(1), 2).clusters[-1].size == 2

    def test_kmax_too_large(self):
        p = AffinePencil(np.eye(3), np.eye(3), param_dim=1)
        with pytest.raises(ArgumentError):
            solve_spectrum(p, np.zeros(1), 4)

    def test_non_spd_mass(self):
        p = AffinePencil(np.eye(2), np.eye(2), Ms=[-2 * np.eye(2)])
        with pytest.raises(InvalidParameterError, match="Cholesky"):
            solve_spectrum(p, np.ones(1), 2)

    def test_deterministic(self, sphere3_pencil):
        b = np.ones(sphere3_pencil.param_dim)
        s1, s2 = solve_spectrum(sphere3_pencil, b, 5), solve_spectrum(sphere3_pencil, b, 5)
        assert np.array_equal(s1.values, s2.values) and np.array_equal(s1.vectors, s2.vectors)

    def test_sphere_cluster(self, sphere3_pencil):
        s = solve_spectrum(sphere3_pencil, np.ones(sphere3_pencil.param_dim), 4)
        nz = s.nonzero_values()
        assert np.allclose(nz, 2.0, rtol=0.02) and s.clusters[1].size == 3

    def test_position(self):
        p = AffinePencil(np.diag([1.0, 3.0, 3.0, 3.0]), np.eye(4), param_dim=1)
        s = solve_spectrum(p, np.zeros(1), 4)
        assert [s.position(k) for k in (1, 2, 3, 4)] == [1, 1, 2, 3]


class TestDirectionalDerivative:
    def test_two_by_two_corner(self):
        # K(x) = diag(1, 1+x): lam_1 = min(1, 1+x), lam_2 = max(1, 1+x)
        p = AffinePencil(np.eye(2), np.eye(2), Ks=[np.diag([0.0, 1.0])])
        s = solve_spectrum(p, np.zeros(1), 2)
        nu = directional_derivative(p, np.zeros(1), s, np.ones(1), 0)
        assert np.allclose(nu, [0, 1])
        assert one_sided_derivatives(p, np.zeros(1), s, np.ones(1), 1) == (0.0, 1.0)
        assert one_sided_derivatives(p, np.zeros(1), s, np.ones(1), 2) == (1.0, 0.0)

    def test_zero_direction(self):
        p = AffinePencil(np.eye(2), np.eye(2), Ks=[np.diag([0.0, 1.0])])
        s = solve_spectrum(p, np.zeros(1), 2)
        assert np.array_equal(directional_derivative(p, np.zeros(1), s, np.zeros(1), 0), [0, 0])

    def test_stale_and_bad_index(self):
        p = AffinePencil(np.eye(2), np.eye(2), Ks=[np.diag([0.0, 1.0])])
        s = solve_spectrum(p, np.zeros(1), 2)
        with pytest.raises(ConsistencyError):
            directional_derivative(p, np.ones(1), s, np.ones(1), 0)
        with pytest.raises(ArgumentError):
            directional_derivative(p, np.zeros(1), s, np.ones(1), 3)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_negated_direction_reverses(self, seed):
        rng = np.random.default_rng(seed)
        p = random_affine_pencil(rng, 6, 3, double=True)
        x = np.zeros(3)
        s = solve_through(p, x, 3)
        h = rng.standard_normal(3)
        for i in range(len(s.clusters)):
            a = directional_derivative(p, x, s, h, i)
            b = directional_derivative(p, x, s, -h, i)
            assert np.allclose(b, -a[::-1], atol=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_linear_in_direction(self, seed):
        rng = np.random.default_rng(seed)
        p = random_affine_pencil(rng, 5, 2)
        x = np.zeros(2)
        h1, h2 = rng.standard_normal(2), rng.standard_normal(2)
        lhs = p.stiffness_dir(x, h1 + h2) - p.stiffness_dir(x, h1) - p.stiffness_dir(x, h2)
        assert np.abs(lhs).max() <= 1e-12 * np.abs(p.stiffness_dir(x, h1 + h2)).max()

    @pytest.mark.parametrize("seed", range(5))
    def test_simple_eigenvalue_fd(self, seed):
        rng = np.random.default_rng(seed)
        p = random_affine_pencil(rng, 8, 4)
        x, h = np.zeros(4), rng.standard_normal(4)
        s = solve_spectrum(p, x, 8)
        for k in (1, 4):
            right, left = one_sided_derivatives(p, x, s, h, k)
            fd = richardson_right(lambda t: eig_k(p, x + t * h, k), 1e-4)
            assert abs(fd - right) <= 1e-3 * max(1.0, abs(right))
            assert right == left

    def test_double_eigenvalue_corner(self):
        rng = np.random.default_rng(11)
        p = random_affine_pencil(rng, 6, 3, double=True)
        x, h = np.zeros(3), rng.standard_normal(3)
        s = solve_spectrum(p, x, 6)
        assert s.clusters[0].size == 2
        nu = directional_derivative(p, x, s, h, 0)
        for k in (1, 2):
            right, left = one_sided_derivatives(p, x, s, h, k)
            fd_r = richardson_right(lambda t: eig_k(p, x + t * h, k), 1e-4)
            fd_l = -richardson_right(lambda t: eig_k(p, x - t * h, k), 1e-4)
            assert abs(fd_r - right) <= 1e-3 * max(1.0, abs(right))
            assert abs(fd_l - left) <= 1e-3 * max(1.0, abs(left))
        assert one_sided_derivatives(p, x, s, h, 1)[0] == nu[0]
        assert one_sided_derivatives(p, x, s, h, 2)[1] == nu[0]

    def test_sphere_cluster_bump_direction(self, sphere3_pencil, sphere3):
        x = np.ones(sphere3.n_vertices)
        h = bump_density(sphere3) - 1.0
        s = solve_spectrum(sphere3_pencil, x, 5)
        nu = directional_derivative(sphere3_pencil, x, s, h, s.cluster_index(1))
        for k in (1, 2, 3):
            f = lambda t: eig_k(sphere3_pencil, x + t * h, k)
            fds = [(f(t) - f(0.0)) / t for t in (1e-3, 5e-4, 2.5e-4)]
            fd = 2 * fds[2] - fds[1]
            assert abs(fd - nu[k - 1]) <= 1e-3 * abs(nu).max()
        right, left = one_sided_derivatives(sphere3_pencil, x, s, h, 1)
        assert right < left


class TestScalingAndCombinations:
    @given(st.integers(0, 1000), st.floats(1.0, 4.0))
    @settings(max_examples=30, deadline=None)
    def test_density_lp_gradient_fd(self, seed, p):
        rng = np.random.default_rng(seed)
        w, x, h = rng.uniform(0.1, 1, 7), rng.uniform(0.5, 2, 7), rng.standard_normal(7)
        sc = ScalingSpec.density(w, p)
        t = 1e-6
        fd = (sc.value(x + t * h) - sc.value(x - t * h)) / (2 * t)
        assert abs(fd - sc.gradient(x) @ h) < 1e-8 * max(1.0, abs(fd))

    def test_volume_power_gradient(self):
        w, x = np.array([1.0, 2.0]), np.array([0.5, 1.5])
        sc = ScalingSpec("volume-power", w, q=0.5)
        assert abs(sc.value(x) - 3.5 ** 0.5) < 1e-15
        assert np.allclose(sc.gradient(x), 0.5 * 3.5 ** -0.5 * w)

    def test_bad_kind(self):
        with pytest.raises(ArgumentError):
            ScalingSpec("banana")

    @pytest.mark.parametrize("text", ["single:2", "sum:3", "inverse-sum:3", "linear:1,-2,0.5"])
    def test_partials_fd(self, text):
        c = CombinationSpec.parse(text)
        lam = np.linspace(1.0, 2.0, c.N) + 0.3
        g = c.partials(lam)
        for j in range(c.N):
            e = np.zeros(c.N)
            e[j] = 1e-6
            fd = (c.evaluate(lam + e) - c.evaluate(lam - e)) / 2e-6
            assert abs(fd - g[j]) <= 1e-8 * max(1.0, abs(fd))

    def test_parse_errors(self):
        with pytest.raises(ArgumentError):
            CombinationSpec.parse("max:3")
        with pytest.raises(ArgumentError):
            CombinationSpec.parse("sum:x")


class TestNormalized:
    def test_scale_invariance(self, sphere3_pencil):
        rng = np.random.default_rng(0)
        b = rng.uniform(0.5, 1.5, sphere3_pencil.param_dim)
        sc = sphere3_pencil.scaling()
        s1, s2 = solve_spectrum(sphere3_pencil, b, 4), solve_spectrum(sphere3_pencil, 2 * b, 4)
        for k in (1, 2, 3):
            assert abs(sc.value(2 * b) * s2.value(k) / (sc.value(b) * s1.value(k)) - 1) < 1e-10

    def test_round_sphere_value(self, sphere4_pencil):
        b = np.ones(sphere4_pencil.param_dim)
        s = solve_through(sphere4_pencil, b, 1)
        lam_bar, _ = normalized_value_and_derivative(sphere4_pencil, s, sphere4_pencil.scaling(), b,
                                                     np.zeros_like(b), 1)
        assert abs(lam_bar / (8 * np.pi) - 1) < 0.02

    def test_normalized_derivative_fd(self, sphere3, sphere3_pencil):
        rng = np.random.default_rng(4)
        b = bump_density(sphere3)
        h = rng.standard_normal(len(b))
        sc = sphere3_pencil.scaling()
        s = solve_spectrum(sphere3_pencil, b, 6)
        # labels 2 and 3 are split by only ~1e-5 at this density; use well-separated ones
        for k in (1, 4):
            _, d = normalized_value_and_derivative(sphere3_pencil, s, sc, b, h, k)
            f = lambda t: sc.value(b + t * h) * eig_k(sphere3_pencil, b + t * h, k)
            assert abs(richardson_right(f, 1e-4) - d) <= 1e-3 * abs(d)

    def test_cluster_sum_is_frame_independent(self, sphere3, sphere3_pencil):
        rng = np.random.default_rng(5)
        b = np.ones(sphere3.n_vertices)
        h = rng.standard_normal(len(b))
        sc = sphere3_pencil.scaling()
        s = solve_spectrum(sphere3_pencil, b, 5)
        i = s.cluster_index(1)
        c = s.clusters[i]
        D = sphere3_pencil.stiffness_dir(b, h) - c.mu * sphere3_pencil.mass_dir(b, h)
        expect = combination_right_derivative(sphere3_pencil, s, CombinationSpec.sum(3), sc, b, h)
        U = s.frame(i)
        for _ in range(100):
            R = np.linalg.qr(rng.standard_normal((3, 3)))[0]
            V = U @ R
            tr = np.trace(V.T @ (D @ V))
            got = sc.value(b) * tr + 3 * (sc.gradient(b) @ h) * c.mu
            assert abs(got - expect) <= 1e-10 * abs(expect)

    def test_single_combo_reduces(self, sphere3, sphere3_pencil):
        b = bump_density(sphere3)
        h = np.random.default_rng(6).standard_normal(len(b))
        sc = sphere3_pencil.scaling()
        s = solve_spectrum(sphere3_pencil, b, 4)
        _, d = normalized_value_and_derivative(sphere3_pencil, s, sc, b, h, 2)
        assert combination_right_derivative(sphere3_pencil, s, CombinationSpec.single(2), sc, b, h) == \
            pytest.approx(d, rel=1e-14)

    def test_hersch_combo_fd(self, sphere3, sphere3_pencil):
        b = bump_density(sphere3)
        h = np.random.default_rng(7).standard_normal(len(b))
        sc = sphere3_pencil.scaling()
        combo = CombinationSpec.inverse_sum(3)
        s = solve_through(sphere3_pencil, b, 3)
        d = combination_right_derivative(sphere3_pencil, s, combo, sc, b, h)

        def f(t):
            y = b + t * h
            sp = solve_through(sphere3_pencil, y, 3)
            return combo.evaluate(sc.value(y) * np.array([sp.value(k) for k in (1, 2, 3)]))
        assert abs(richardson_right(f, 1e-4) - d) <= 1e-3 * abs(d)


class TestLipschitzProbe:
    def test_constant_pencil(self):
        p = AffinePencil(np.diag([1.0, 2.0]), np.eye(2), param_dim=3)
        out = lipschitz_probe(p, ScalingSpec(), np.zeros(3), 0.1, 10, 2)
        assert np.all(out["estimates"] == 0)

    def test_disk_pencil_stable_under_halving(self):
        m = generate_domain("flat_disk", 2)
        p = ConformalLaplacePencil(m)
        b = np.ones(m.n_vertices)
        sc = p.scaling()
        e1 = lipschitz_probe(p, sc, b, 1e-2, 50, 3, seed=1)["estimates"]
        e2 = lipschitz_probe(p, sc, b, 5e-3, 50, 3, seed=1)["estimates"]
        nz = e1[1:]
        assert np.all(np.isfinite(e1)) and np.all(nz > 0)
        assert np.all(e2[1:] / nz < 2.0) and np.all(e2[1:] / nz > 0.5)

    def test_skips_inadmissible(self):
        p = AffinePencil(np.eye(2), np.eye(2), Ms=[np.eye(2)])
        out = lipschitz_probe(p, ScalingSpec(), np.array([-0.95]), 0.2, 20, 2)
        assert out["skipped"] > 0

    def test_consistent_with_directional_bounds(self, sphere3, sphere3_pencil):
        b = bump_density(sphere3)
        sc = sphere3_pencil.scaling()
        s = solve_spectrum(sphere3_pencil, b, 3)
        w = sphere3_pencil.param_weights()
        rng = np.random.default_rng(8)
        slopes = []
        for _ in range(20):
            h = rng.standard_normal(len(b))
            h /= np.sqrt(w @ h ** 2)
            slopes.append(abs(normalized_value_and_derivative(sphere3_pencil, s, sc, b, h, 1)[1]))
        est = lipschitz_probe(sphere3_pencil, sc, b, 1e-3, 20, 2, seed=8)["estimates"][1]
        # random pairs realize slopes of the same order as random directional derivatives
        assert 0.2 * np.mean(slopes) < est < 5 * max(slopes)

    def test_upper_semicontinuity_probe(self, sphere3_pencil):
        b = np.ones(sphere3_pencil.param_dim)
        lam = solve_spectrum(sphere3_pencil, b, 4).values
        rng = np.random.default_rng(9)
        h = rng.standard_normal(len(b))
        for t in (1e-2, 1e-4, 1e-6):
            y = b + t * h
            assert solve_spectrum(sphere3_pencil, y, 4).values[2] <= lam[2] + abs(t) * 100 + 1e-8
