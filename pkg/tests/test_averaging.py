"""Torus averages, averaged coefficients, slow-fast simulation and the defect diagnostic."""

import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kdvlab.averaging import (
    AveragingSystem,
    QuadratureConfig,
    averaged_coefficients,
    coefficients_from_closed_form,
    frequency_jacobian_det,
    haar_average,
    khasminskii_defect,
    kronecker_time_average,
    load_system,
    partial_average,
    rotating_ou,
    rotating_ou_averaged,
    simulate_fast_slow,
    simulate_whitham,
    symmetric_sqrt,
    twist_system,
)
from kdvlab.averaging.catalog import cir_mean, expression_system
from kdvlab.errors import BoundaryWarning, IndefiniteCovariance, NonFinite

Q3 = QuadratureConfig(nodes=3)


def cos1(I, phi):
    return np.cos(phi[..., 0]) + 0 * I[..., 0]


def constant_system(m=2, W=None, F=None, sigma=None):
    W = W or (lambda I: np.broadcast_to(np.arange(1.0, m + 1), np.shape(I)))
    F = F or (lambda I, phi: np.zeros(np.broadcast_shapes(np.shape(I), np.shape(phi))))
    sig = sigma if sigma is not None else np.zeros((m, m))

    def sigma_fn(I, phi):
        shape = np.broadcast_shapes(np.shape(I), np.shape(phi))
        return np.broadcast_to(sig, shape + (m,)).copy()

    return AveragingSystem(m=m, d=m, W=W, F=F, sigma=sigma_fn)


class TestHaarAverage:
    I = np.array([0.5, 1.0])

    def test_cosine(self):
        assert haar_average(cos1, self.I) == pytest.approx(0.0, abs=1e-15)

    def test_cosine_squared(self):
        f = lambda I, phi: np.cos(phi[..., 0]) ** 2  # noqa: E731
        assert haar_average(f, self.I) == pytest.approx(0.5, abs=1e-15)

    def test_angle_independent(self):
        f = lambda I, phi: I[..., 0] * I[..., 1] + 0 * phi[..., 0]  # noqa: E731
        assert haar_average(f, self.I) == pytest.approx(0.5)

    def test_batched_actions(self):
        f = lambda I, phi: I[..., 0] * np.sin(phi[..., 1]) ** 2  # noqa: E731
        I = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_allclose(haar_average(f, I), [0.5, 1.5, 2.5], atol=1e-14)

    def test_error_estimate_tensor(self):
        val, err = haar_average(cos1, self.I, return_error=True)
        assert err < 1e-14

    def test_quasi_monte_carlo_beyond_tensor_dim(self):
        f = lambda I, phi: np.cos(phi[..., 0] - phi[..., 5]) + np.sin(phi[..., 2]) ** 2  # noqa: E731
        val, err = haar_average(f, np.ones(6), return_error=True)
        assert val == pytest.approx(0.5, abs=1e-3)
        assert err < 1e-3

    @settings(max_examples=30)
    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
    def test_shift_invariance(self, shift):
        shift = np.array(shift)

        def f(I, phi):
            return np.cos(phi[..., 0] + 2 * phi[..., 1]) ** 2 + np.sin(phi[..., 2]) * np.cos(phi[..., 0])

        g = lambda I, phi: f(I, phi + shift)  # noqa: E731
        assert haar_average(g, np.ones(3)) == pytest.approx(haar_average(f, np.ones(3)), abs=1e-12)


class TestPartialAverage:
    def test_first_angle_only(self):
        f = lambda I, phi: np.cos(phi[..., 0]) + np.cos(phi[..., 1])  # noqa: E731
        g = partial_average(f, 1)
        phi = np.array([0.3, 1.1])
        assert g(np.ones(2), phi) == pytest.approx(np.cos(1.1), abs=1e-14)

    def test_all_angles_equal_haar(self):
        f = lambda I, phi: I[..., 0] * np.cos(phi[..., 0] - phi[..., 1]) ** 2  # noqa: E731
        g = partial_average(f, 2)
        for phi in ([0.0, 0.0], [1.0, 2.0]):
            assert g(np.array([2.0, 1.0]), np.array(phi)) == pytest.approx(haar_average(f, np.array([2.0, 1.0])))

    def test_too_many_angles(self):
        with pytest.raises(ValueError):
            partial_average(cos1, 3)(np.ones(2), np.zeros(2))
        with pytest.raises(ValueError):
            partial_average(cos1, -1)

    def test_truncation_bound(self):
        # f = sum_j j^-2 cos(phi_j): <f>_N - <f> = sum_{j>N} j^-2 cos(phi_j), at most 1/N
        m = 12
        j = np.arange(1, m + 1)
        f = lambda I, phi: np.sum(j**-2.0 * np.cos(phi), axis=-1)  # noqa: E731
        full = haar_average(f, np.ones(m))
        C = max(N * abs(partial_average(f, N)(np.ones(m), np.zeros(m)) - full) for N in range(1, m))
        assert C <= 1.0 + 1e-3


class TestKronecker:
    def test_single_cosine(self):
        for T in (1.0, 10.0, 100.0):
            val = kronecker_time_average(cos1, np.ones(1), np.zeros(1), np.ones(1), T)
            assert val == pytest.approx(np.sin(T) / T, abs=1e-10)

    def test_resonant_no_decay(self):
        f = lambda I, phi: np.cos(phi[..., 0] - phi[..., 1])  # noqa: E731
        phi0 = np.array([0.4, 1.5])
        for T in (10.0, 1000.0):
            val = kronecker_time_average(f, np.ones(2), phi0, np.ones(2), T)
            assert val == pytest.approx(np.cos(0.4 - 1.5), abs=1e-9)

    def test_nonresonant_rate(self):
        f = lambda I, phi: np.cos(phi[..., 0] - phi[..., 1])  # noqa: E731
        W = np.array([1.0, np.sqrt(2)])
        Ts = np.array([1e2, 1e3, 1e4])
        vals = np.array([abs(kronecker_time_average(f, np.ones(2), np.zeros(2), W, T)) for T in Ts])
        C = np.max(vals * Ts)
        # exact value sin((sqrt2-1)T)/((sqrt2-1)T), so C <= 1/(sqrt2-1)
        assert C <= 1 / (np.sqrt(2) - 1) + 1e-6

    def test_invalid_T(self):
        with pytest.raises(ValueError):
            kronecker_time_average(cos1, np.ones(1), np.zeros(1), np.ones(1), 0.0)


class TestAveragedCoefficients:
    def test_constant_sigma(self):
        S = np.array([[1.0, 0.5], [0.0, 2.0]])
        co = averaged_coefficients(constant_system(sigma=S), np.ones(2))
        np.testing.assert_allclose(co.A, S @ S.T, atol=1e-14)

    def test_sine_drift_averages_out(self):
        F = lambda I, phi: -I + 0.7 * np.sin(phi)  # noqa: E731
        co = averaged_coefficients(constant_system(F=F), np.array([0.3, 2.0]))
        np.testing.assert_allclose(co.F, [-0.3, -2.0], atol=1e-14)

    def test_rotating_ou_closed_form(self):
        sys_ = rotating_ou(perturbation=0.3)
        b = np.array(sys_.params["b"])
        I = np.random.default_rng(0).uniform(0.1, 2, size=(20, 3))
        co = averaged_coefficients(sys_, I, Q3)
        avg_F, avg_A = rotating_ou_averaged(b)
        np.testing.assert_allclose(co.F, avg_F(I), atol=1e-13)
        np.testing.assert_allclose(co.A, avg_A(I), atol=1e-13)

    @pytest.mark.parametrize("make", [rotating_ou, twist_system])
    def test_sigma0_root_properties(self, make):
        sys_ = make()
        I = np.random.default_rng(1).uniform(0.05, 3, size=(20, sys_.m))
        co = averaged_coefficients(sys_, I)
        np.testing.assert_allclose(co.sigma0, np.swapaxes(co.sigma0, -1, -2), atol=1e-15)
        np.testing.assert_allclose(co.sigma0 @ np.swapaxes(co.sigma0, -1, -2), co.A, atol=1e-10)

    def test_symmetric_sqrt_of_full_matrix(self):
        M = np.random.default_rng(2).standard_normal((4, 4))
        A = M @ M.T
        R = symmetric_sqrt(A)
        np.testing.assert_allclose(R @ R, A, atol=1e-10)
        np.testing.assert_allclose(R, R.T, atol=1e-14)

    def test_indefinite_rejected(self):
        with pytest.raises(IndefiniteCovariance):
            symmetric_sqrt(np.diag([1.0, -1e-3]))
        # tiny negative rounding is clamped
        R = symmetric_sqrt(np.diag([1.0, -1e-13]))
        assert R[1, 1] == 0.0

    def test_nondegeneracy_away_from_boundary(self):
        for sys_ in (rotating_ou(), twist_system()):
            I = np.random.default_rng(3).uniform(0.2, 3, size=(200, sys_.m))
            lam = np.linalg.eigvalsh(averaged_coefficients(sys_, I, Q3).A)
            assert lam.min() > 0.05

    def test_rotating_ou_degenerates_linearly(self):
        sys_ = rotating_ou()
        eps = np.array([1e-2, 1e-3, 1e-4])
        I = np.array([[e, 1.0, 1.0] for e in eps])
        lam = np.linalg.eigvalsh(averaged_coefficients(sys_, I, Q3).A)[:, 0]
        np.testing.assert_allclose(lam / eps, 2 * sys_.params["b"][0] ** 2, rtol=1e-10)


@pytest.mark.filterwarnings("ignore::kdvlab.errors.BoundaryWarning")
class TestFastSlow:
    def test_pure_kronecker_flow(self):
        sys_ = constant_system(m=2)
        nu, dt = 0.5, 0.01
        path = simulate_fast_slow(sys_, nu, [0.3, 0.7], [0.1, 0.2], 1.0, dt, np.random.default_rng(0))
        np.testing.assert_allclose(path.I[-1, 0], [0.3, 0.7])
        expected = np.mod(np.array([0.1, 0.2]) + np.array([1.0, 2.0]) * 1.0 / nu, 2 * np.pi)
        np.testing.assert_allclose(path.phi[-1, 0], expected, atol=1e-12)

    def test_same_seed_same_path(self):
        sys_ = rotating_ou()
        a = simulate_fast_slow(sys_, 0.2, [0.5] * 3, [0] * 3, 0.2, 0.01, np.random.default_rng(5), n_paths=4)
        b = simulate_fast_slow(sys_, 0.2, [0.5] * 3, [0] * 3, 0.2, 0.01, np.random.default_rng(5), n_paths=4)
        assert np.array_equal(a.I, b.I) and np.array_equal(a.phi, b.phi)

    def test_preconditions(self):
        sys_ = rotating_ou()
        with pytest.raises(ValueError):
            simulate_fast_slow(sys_, 0.1, [0.5] * 3, [0] * 3, 1.0, 0.02, np.random.default_rng(0))
        with pytest.raises(ValueError):
            simulate_fast_slow(sys_, 0.1, [0.5, 0.0, 0.5], [0] * 3, 1.0, 0.01, np.random.default_rng(0))

    def test_clamping_counted_and_warned(self):
        sys_ = constant_system(m=1, F=lambda I, phi: np.full(np.broadcast_shapes(np.shape(I), np.shape(phi)), -5.0))
        with pytest.warns(BoundaryWarning):
            path = simulate_fast_slow(sys_, 1.0, [0.01], [0.0], 1.0, 0.01, np.random.default_rng(0))
        assert path.clamp_events[0] == 100
        assert np.all(path.I >= 0)

    def test_non_finite(self):
        sys_ = constant_system(m=1, F=lambda I, phi: np.full(np.broadcast_shapes(np.shape(I), np.shape(phi)), np.inf))
        with pytest.raises(NonFinite):
            simulate_fast_slow(sys_, 1.0, [0.5], [0.0], 0.1, 0.01, np.random.default_rng(0))

    def test_rotating_ou_action_is_cir(self):
        sys_ = rotating_ou()
        b = np.array(sys_.params["b"])
        path = simulate_fast_slow(sys_, 0.1, [0.5] * 3, [0] * 3, 1.0, 0.01, np.random.default_rng(8),
                                  n_paths=4000, record_every=100)
        I = path.final_I
        se = I.std(axis=0, ddof=1) / np.sqrt(I.shape[0])
        assert np.all(np.abs(I.mean(axis=0) - cir_mean(0.5, b, 1.0)) < 3 * se)

    def test_matches_cartesian_brute_force(self):
        """Oracle: simulate the 2-D vectors v_k directly and compare action laws."""
        sys_ = rotating_ou()
        b = np.array(sys_.params["b"])
        nu, dt, n = 0.1, 0.005, 4000
        g = np.random.default_rng(21)
        v = np.zeros((n, 3, 2))
        v[..., 0] = 1.0  # I = 1/2
        for _ in range(200):
            I = 0.5 * (v**2).sum(-1)
            w = (np.arange(1, 4) + I) / nu
            # exact rotation, then an Euler step of the damping and forcing
            c, s = np.cos(w * dt), np.sin(w * dt)
            v = np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], axis=-1)
            v = v - v * dt + b[:, None] * np.sqrt(dt) * g.standard_normal((n, 3, 2))
        I_cart = 0.5 * (v**2).sum(-1)
        path = simulate_fast_slow(sys_, nu, [0.5] * 3, [0] * 3, 1.0, dt, np.random.default_rng(22),
                                  n_paths=n, record_every=200)
        for k in range(3):
            assert stats.ks_2samp(I_cart[:, k], path.final_I[:, k]).pvalue > 0.01


class TestWhitham:
    def test_zero_coefficients_constant(self):
        prov = coefficients_from_closed_form(lambda I: 0 * I, lambda I: np.zeros(np.shape(I) + (np.shape(I)[-1],)))
        path = simulate_whitham(prov, [0.4, 0.9], 1.0, 0.1, np.random.default_rng(0), n_paths=3)
        assert np.all(path.I == np.array([0.4, 0.9]))

    def test_linear_decay(self):
        prov = coefficients_from_closed_form(lambda I: -I, lambda I: np.zeros(np.shape(I) + (np.shape(I)[-1],)))
        dt = 1e-3
        path = simulate_whitham(prov, [1.0], 1.0, dt, np.random.default_rng(0))
        # explicit Euler: (1 - dt)^n vs exp(-1), error about dt/2 * e^-1
        assert path.final_I[0, 0] == pytest.approx(np.exp(-1.0), abs=dt)

    def test_rotating_ou_stationary_mean(self):
        b = np.array([1.0, 0.8, 0.6])
        prov = coefficients_from_closed_form(*rotating_ou_averaged(b))
        path = simulate_whitham(prov, [0.5] * 3, 4.0, 4e-3, np.random.default_rng(3), n_paths=4000, record_every=1000)
        I = path.final_I
        se = I.std(axis=0, ddof=1) / np.sqrt(I.shape[0])
        assert np.all(np.abs(I.mean(axis=0) - b**2 / 2) < 4 * se)


class TestJacobianAndDefect:
    def test_twist_map(self):
        sys_ = constant_system(m=3, W=lambda I: np.asarray(I))
        assert frequency_jacobian_det(sys_, np.array([0.3, 1.0, 2.0])) == pytest.approx(1.0, abs=1e-8)

    def test_constant_frequencies(self):
        assert frequency_jacobian_det(constant_system(m=3), np.ones(3)) == 0.0

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_quadratic(self, m):
        sys_ = constant_system(m=m, W=lambda I: np.arange(1, m + 1) + np.asarray(I) ** 2)
        assert frequency_jacobian_det(sys_, np.ones(m)) == pytest.approx(2.0**m, rel=1e-8)

    def test_angle_free_drift_has_no_defect(self):
        sys_ = constant_system(m=2, F=lambda I, phi: -I + 0 * phi, sigma=0.3 * np.eye(2))
        path = simulate_fast_slow(sys_, 0.1, [1.0, 1.0], [0, 0], 0.5, 0.005, np.random.default_rng(0), n_paths=20)
        d = khasminskii_defect(path, sys_)
        assert np.all(d.value < 1e-12)

    def test_zero_horizon(self):
        sys_ = twist_system()
        path = simulate_fast_slow(sys_, 0.1, [1.0] * 3, [0] * 3, 0.0, 0.005, np.random.default_rng(0), n_paths=5)
        assert np.all(khasminskii_defect(path, sys_).value == 0)

    @pytest.mark.filterwarnings("ignore::kdvlab.errors.BoundaryWarning")
    def test_decreasing_for_perturbed_rotating_ou(self):
        sys_ = rotating_ou(perturbation=0.3)
        vals = []
        for j, nu in enumerate((0.2, 0.1, 0.05)):
            path = simulate_fast_slow(sys_, nu, [0.5] * 3, [0] * 3, 1.0, nu / 20, np.random.default_rng(40 + j),
                                      n_paths=300)
            vals.append(khasminskii_defect(path, sys_, Q3).total)
        assert vals[0] > vals[1] > vals[2]


class TestSystemSpecs:
    def test_catalog_by_name(self):
        assert load_system("twist", {"kappa": 0.2}).params["kappa"] == 0.2
        assert load_system("rotating-ou").d == 6

    def test_expression_system_matches_catalog(self, tmp_path):
        spec = {
            "m": 2, "d": 2,
            "W": ["1 + I1", "2 + I2"],
            "F": ["1 - I1*(1 + 0.5*cos(phi1))", "1 - I2*(1 + 0.5*cos(phi2))"],
            "sigma": [["0.3", "0"], ["0", "0.3"]],
        }
        path = tmp_path / "sys.json"
        path.write_text(json.dumps(spec))
        expr = load_system(str(path))
        cat = twist_system(c=(1.0, 1.0), s=(0.3, 0.3))
        g = np.random.default_rng(0)
        I, phi = g.uniform(0.1, 2, (7, 2)), g.uniform(0, 6, (7, 2))
        np.testing.assert_allclose(expr.F(I, phi), cat.F(I, phi), atol=1e-14)
        np.testing.assert_allclose(expr.W(I), cat.W(I), atol=1e-14)
        np.testing.assert_allclose(expr.sigma(I, phi), cat.sigma(I, phi), atol=1e-14)
        assert frequency_jacobian_det(expr, np.ones(2)) == pytest.approx(1.0)

    def test_named_json(self, tmp_path):
        path = tmp_path / "named.json"
        path.write_text(json.dumps({"name": "rotating-ou", "params": {"b": [1.0, 0.5]}}))
        assert load_system(str(path)).m == 2

    def test_expression_system_direct(self):
        sys_ = expression_system({"m": 1, "d": 1, "W": ["1"], "F": ["-I1"], "sigma": [["0.1"]]})
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            path = simulate_fast_slow(sys_, 0.5, [1.0], [0.0], 0.5, 0.05, np.random.default_rng(0), n_paths=3)
        assert path.I.shape == (11, 3, 1)
