import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize
from scipy.stats import ortho_group

from conftest import bump_density, random_affine_pencil
from eigencrit.derivatives import combination_right_derivative
from eigencrit.errors import ArgumentError
from eigencrit.functionals import CombinationSpec, ScalingSpec
from eigencrit.pencil import AffinePencil, solve_spectrum, solve_through
from eigencrit.subdiff import (HullModel, SearchBudget, SupportQuery, classical_subdiff_probe,
                               criticality_certificate, sorted_pairing, sorted_pairing_frame,
                               support_function, witness_fd_check)


def brute_force(weights, A, n_frames, rng):
    m = len(weights)
    vals = []
    for _ in range(n_frames):
        O = ortho_group.rvs(m, random_state=rng)
        vals.append(sum(w * O[:, k] @ A @ O[:, k] for k, w in enumerate(weights)))
    return max(vals), min(vals)


def polish(weights, A, sign):
    """Local optimum over frames via the Cayley-free parametrization expm(skew)."""
    from scipy.linalg import expm
    m = len(weights)
    iu = np.triu_indices(m, 1)

    def f(v):
        S = np.zeros((m, m))
        S[iu] = v
        O = expm(S - S.T)
        return -sign * sum(w * O[:, k] @ A @ O[:, k] for k, w in enumerate(weights))
    best = min((minimize(f, np.random.default_rng(s).standard_normal(len(iu[0])), method="BFGS",
                         options={"gtol": 1e-10}) for s in range(5)), key=lambda r: r.fun)
    return -sign * best.fun


class TestSortedPairing:
    def test_documented_values(self):
        assert sorted_pairing([2, 1], [5, 3], "max") == 13
        assert sorted_pairing([2, 1], [5, 3], "min") == 11
        assert sorted_pairing([1, -1], [4, 1], "max") == 3
        assert sorted_pairing([1, -1], [4, 1], "min") == -3

    def test_brute_force_two_by_two(self):
        rng = np.random.default_rng(0)
        A = np.diag([5.0, 3.0])
        hi, lo = brute_force([2.0, 1.0], A, 10_000, rng)
        # random sampling only approaches the extremes at O(angle gap^2)
        assert 13 - 1e-5 <= hi <= 13 + 1e-12
        assert 11 - 1e-12 <= lo <= 11 + 1e-5

    @given(st.integers(0, 10_000), st.sampled_from([2, 3]))
    @settings(max_examples=20, deadline=None)
    def test_bounds_brute_force(self, seed, m):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((m, m))
        A = B + B.T
        w = rng.standard_normal(m)
        lam = np.linalg.eigvalsh(A)
        hi, lo = brute_force(w, A, 300, rng)
        assert hi <= sorted_pairing(w, lam, "max") + 1e-12
        assert lo >= sorted_pairing(w, lam, "min") - 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_attained_three_by_three(self, seed):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((3, 3))
        A = B + B.T
        w = rng.standard_normal(3)
        lam = np.linalg.eigvalsh(A)
        assert abs(polish(w, A, +1) - sorted_pairing(w, lam, "max")) < 1e-6
        assert abs(polish(w, A, -1) - sorted_pairing(w, lam, "min")) < 1e-6

    def test_frame_attains_value(self):
        rng = np.random.default_rng(1)
        B = rng.standard_normal((4, 4))
        A = B + B.T
        w = np.array([0.3, -1.0, 2.0, 0.5])
        for ext in ("max", "min"):
            F = sorted_pairing_frame(w, A, ext)
            val = sum(w[k] * F[:, k] @ A @ F[:, k] for k in range(4))
            assert abs(val - sorted_pairing(w, np.linalg.eigvalsh(A), ext)) < 1e-12

    def test_bad_query(self):
        with pytest.raises(ArgumentError):
            SupportQuery(np.ones(2), "sup")
        with pytest.raises(ArgumentError):
            SupportQuery(np.array([np.inf]))


class TestSupportFunction:
    @pytest.fixture
    def double_setup(self):
        rng = np.random.default_rng(3)
        p = random_affine_pencil(rng, 6, 4, double=True)
        x = np.zeros(4)
        return p, x, solve_through(p, x, 3), ScalingSpec(), rng

    def test_singleton_equals_derivative(self):
        rng = np.random.default_rng(2)
        p = random_affine_pencil(rng, 5, 3)
        x = np.zeros(3)
        s = solve_spectrum(p, x, 5)
        sc = ScalingSpec()
        h = rng.standard_normal(3)
        combo = CombinationSpec.single(1)
        smax = support_function(p, s, combo, sc, x, SupportQuery(h, "max"))
        smin = support_function(p, s, combo, sc, x, SupportQuery(h, "min"))
        d = combination_right_derivative(p, s, combo, sc, x, h)
        assert smax == pytest.approx(smin, abs=1e-12) and smax == pytest.approx(d, abs=1e-12)

    def test_antisymmetry(self, double_setup):
        p, x, s, sc, rng = double_setup
        model = HullModel(p, s, CombinationSpec.linear([1.0, -0.5, 2.0]), sc, x)
        for _ in range(20):
            h = rng.standard_normal(4)
            assert abs(model.s_min(h) + model.s_max(-h)) < 1e-12

    def test_convexity(self, double_setup):
        p, x, s, sc, rng = double_setup
        model = HullModel(p, s, CombinationSpec.linear([1.0, 2.0, 0.5]), sc, x)
        for _ in range(20):
            a, b = rng.standard_normal(4), rng.standard_normal(4)
            assert model.s_max(0.5 * (a + b)) <= 0.5 * (model.s_max(a) + model.s_max(b)) + 1e-10
            assert model.s_min(0.5 * (a + b)) >= 0.5 * (model.s_min(a) + model.s_min(b)) - 1e-10

    def test_precomputed_matches_direct(self, double_setup):
        p, x, s, sc, rng = double_setup
        combo = CombinationSpec.inverse_sum(3)
        fast = HullModel(p, s, combo, sc, x)
        h = rng.standard_normal(4)
        assert fast.s_max(h) == pytest.approx(
            support_function(p, s, combo, sc, x, SupportQuery(h, "max")), abs=1e-12)

    def test_right_derivative_inside_hull(self, double_setup):
        p, x, s, sc, rng = double_setup
        combo = CombinationSpec.linear([2.0, 1.0, 0.5])
        model = HullModel(p, s, combo, sc, x)
        for _ in range(10):
            h = rng.standard_normal(4)
            d = combination_right_derivative(p, s, combo, sc, x, h)
            assert model.s_min(h) - 1e-12 <= d <= model.s_max(h) + 1e-12

    def test_constant_pencil(self):
        p = AffinePencil(np.diag([1.0, 2.0]), np.eye(2), param_dim=3)
        w = np.array([0.2, 0.3, 0.5])
        sc = ScalingSpec.density(w, 2.0)
        x = np.array([1.0, 2.0, 0.5])
        s = solve_spectrum(p, x, 2)
        combo = CombinationSpec.sum(2)
        h = np.array([0.3, -1.0, 0.2])
        S = 3.0
        expect = (sc.gradient(x) @ h) * S
        model = HullModel(p, s, combo, sc, x)
        assert model.s_max(h) == pytest.approx(expect) and model.s_min(h) == pytest.approx(expect)
        rep = criticality_certificate(p, x, combo, sc, SearchBudget(4, 10))
        assert rep.verdict == "noncritical-with-witness"
        rep0 = criticality_certificate(p, x, combo, ScalingSpec(), SearchBudget(4, 10))
        assert rep0.verdict == "no-witness-found"


class TestCriticality:
    def test_round_sphere_no_witness(self, sphere3_pencil):
        b = np.ones(sphere3_pencil.param_dim)
        rep = criticality_certificate(sphere3_pencil, b, CombinationSpec.single(1), sphere3_pencil.scaling(),
                                      SearchBudget(16, 30))
        assert rep.verdict == "no-witness-found" and rep.witness is None
        assert abs(rep.margin_min) <= 5e-3 * rep.scale
        assert rep.margin_max == -rep.margin_min

    def test_bump_has_witness(self, sphere3, sphere3_pencil):
        b = bump_density(sphere3)
        sc = sphere3_pencil.scaling()
        combo = CombinationSpec.single(1)
        rep = criticality_certificate(sphere3_pencil, b, combo, sc, SearchBudget(8, 30))
        assert rep.verdict == "noncritical-with-witness"
        s = solve_through(sphere3_pencil, b, 1)
        assert HullModel(sphere3_pencil, s, combo, sc, b).s_min(rep.witness) > rep.tol
        up, down = witness_fd_check(sphere3_pencil, b, combo, sc, rep.witness)
        assert up > 0 and down < 0

    def test_report_fields(self, sphere3, sphere3_pencil):
        b = bump_density(sphere3)
        rep = criticality_certificate(sphere3_pencil, b, CombinationSpec.single(1), sphere3_pencil.scaling(),
                                      SearchBudget(2, 5), seed=3)
        d = rep.to_dict()
        assert d["budget"] == {"n_random": 2, "n_steps": 5}
        assert len(d["param_hash"]) == 64 and d["combo"] == "single:1"

    def test_deterministic(self, sphere3, sphere3_pencil):
        b = bump_density(sphere3)
        args = (sphere3_pencil, b, CombinationSpec.single(1), sphere3_pencil.scaling(), SearchBudget(3, 10))
        assert criticality_certificate(*args, seed=5).margin_min == criticality_certificate(*args, seed=5).margin_min


class TestClassicalProbe:
    def test_simple_eigenvalue(self):
        rng = np.random.default_rng(0)
        p = random_affine_pencil(rng, 5, 3)
        x = np.zeros(3)
        s = solve_spectrum(p, x, 5)
        out = classical_subdiff_probe(p, s, ScalingSpec(), x, 2)
        assert out["hull_collapsed"] and out["cluster_size"] == 1
        assert out["gap_below"] > 0 and out["gap_above"] > 0

    def test_round_sphere_gradients_differ(self, sphere3_pencil):
        b = np.ones(sphere3_pencil.param_dim)
        s = solve_spectrum(sphere3_pencil, b, 5)
        out = classical_subdiff_probe(sphere3_pencil, s, sphere3_pencil.scaling(), b, 1)
        assert not out["hull_collapsed"]
        assert out["pairwise_distances"].min() > 0.1 * out["gradient_norms"].max()

    def test_forced_coincidence(self):
        # both eigenvectors see the same mass derivative profile
        p = AffinePencil(np.eye(2), np.zeros((2, 2)), Ms=[np.eye(2), np.eye(2)])
        x = np.array([0.5, 0.5])
        s = solve_spectrum(p, x, 2)
        out = classical_subdiff_probe(p, s, ScalingSpec(), x, 1)
        assert out["cluster_size"] == 2 and out["hull_collapsed"]
