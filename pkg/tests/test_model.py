import cmath
import math

import numpy as np
import pytest

from qnet.errors import ConfigError, RegimeError
from qnet.model import (
    InnerModel,
    blaschke_s,
    choose_beta00,
    factor_group_s,
    factorize_and_complement,
    fit_jump_start,
    fit_model,
    krein_function,
    krein_sum,
    mirror_resonances,
    model_s_matrix,
    resonance_continuation,
    scalar_model_s,
    with_beta00,
)
from qnet.scattering import s_essential, s_one_pole


def scalar_model(k2=1.0, beta01=1.0, beta00=0.0):
    return InnerModel(np.array([k2]), np.eye(1), np.array([[beta01]]),
                      np.array([[beta00]]))


class TestKreinFunction:
    def test_scalar_values(self):
        m = scalar_model(k2=2.0)
        assert krein_function(m, 1.0)[0, 0] == pytest.approx(3.0, rel=1e-14)
        assert krein_function(m, 0.0)[0, 0] == pytest.approx(0.5, rel=1e-14)

    def test_herglotz_scalar(self):
        m = scalar_model(k2=2.0)
        assert krein_function(m, 1.0 + 0.1j)[0, 0].imag > 0

    def test_herglotz_random_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(6):
            n = int(rng.integers(2, 7))
            k2 = rng.uniform(0.5, 9.0, size=n)
            d = int(rng.integers(1, n + 1))
            frame = np.linalg.qr(rng.normal(size=(n, d)))[0]
            model = InnerModel(k2, frame, rng.normal(size=(2, d)), np.zeros((2, 2)))
            for _ in range(20):
                lam = complex(rng.uniform(0.0, 10.0), rng.uniform(0.05, 2.0))
                m = krein_function(model, lam)
                xi = rng.normal(size=d) + 1j * rng.normal(size=d)
                val = np.vdot(xi, m @ xi)
                assert val.imag > 0

    def test_pole_error(self):
        with pytest.raises(RegimeError):
            krein_function(scalar_model(k2=2.0), 2.0)


class TestModelSMatrix:
    def test_decoupled_identity(self):
        m = InnerModel(np.array([1.0]), np.eye(1), np.zeros((2, 1)), np.zeros((2, 2)))
        sm = model_s_matrix(m, np.array([2.0, 3.0]), 2.0)
        np.testing.assert_allclose(sm.s, np.eye(2), rtol=0)

    def test_scalar_reference_value(self):
        m = with_beta00(scalar_model())
        assert m.beta00[0, 0] == pytest.approx(-1.0, rel=1e-14)
        s = model_s_matrix(m, np.array([math.sqrt(2.0)]), 2.0).s[0, 0]
        assert s == pytest.approx(-(1 + 2 * math.sqrt(2) * 1j) / 3, rel=1e-13)
        assert abs(s) == pytest.approx(1.0, rel=1e-13)

    def test_decoupling_limit(self):
        vals = []
        for scale in (1e-2, 1e-4):
            m = with_beta00(scalar_model(beta01=scale))
            vals.append(abs(model_s_matrix(m, np.array([1.4]), 2.0).s[0, 0] - 1.0))
        assert vals[1] < 1e-4 * vals[0] ** 0  # tends to identity
        assert vals[1] < vals[0]

    def test_unitary_sweep(self):
        rng = np.random.default_rng(4)
        model = fit_model([12.0, 15.0], [rng.normal(size=2), rng.normal(size=2)])
        for lam in np.linspace(10.0, 20.0, 200):
            sm = model_s_matrix(model, np.array([2.0, 2.0]), lam)
            assert sm.unitarity_defect <= 1e-12


class TestChooseBeta00:
    def test_zero_coupling(self):
        m = scalar_model(beta01=0.0)
        assert choose_beta00(m)[0, 0] == 0.0

    def test_scalar_value(self):
        assert choose_beta00(scalar_model())[0, 0] == pytest.approx(-1.0, rel=1e-14)

    def test_reduction_identity(self):
        # the boundary-parameter form and the Krein-sum form coincide
        rng = np.random.default_rng(9)
        model = fit_model([11.0, 14.0, 17.5],
                          [rng.normal(size=3) for _ in range(3)])
        kp = np.array([1.5, 2.0, 2.5])
        for lam in np.linspace(9.0, 19.0, 60):
            sa = model_s_matrix(model, kp, lam).s
            ks = krein_sum(model, lam)
            sb = np.linalg.solve(1j * np.diag(kp) + ks, 1j * np.diag(kp) - ks)
            assert np.max(np.abs(sa - sb)) < 1e-13


class TestFitModel:
    def test_one_pole_equals_one_pole_s(self):
        phi = np.array([0.8, -0.5])
        model = fit_model([15.0], [phi])
        kp = np.array([2.0, 3.0])
        # even count keeps the grid off the Krein-function pole at 15
        for lam in np.linspace(13.0, 17.0, 40):
            sm = model_s_matrix(model, kp, lam).s
            s0 = s_one_pole(15.0, phi, kp, lam).s
            assert np.max(np.abs(sm - s0)) < 1e-12

    def test_trivial_model_is_identity(self):
        m = InnerModel(np.array([1.0]), np.eye(1), np.zeros((2, 1)), np.zeros((2, 2)))
        sm = model_s_matrix(m, np.array([2.0, 3.0]), 5.0)
        np.testing.assert_allclose(sm.s, np.eye(2), rtol=0)
        se = s_essential([], np.array([2.0, 3.0]), 5.0)
        np.testing.assert_allclose(se.s, np.eye(2), rtol=0)

    def test_three_poles_match_essential(self):
        rng = np.random.default_rng(3)
        poles = [12.0, 15.5, 18.0]
        vecs = [rng.normal(size=3) for _ in poles]
        model = fit_model(poles, vecs)
        kp = np.array([2.0, 2.4, 2.8])
        for lam in np.linspace(10.0, 20.0, 80):
            sm = model_s_matrix(model, kp, lam).s
            se = s_essential(list(zip(poles, vecs)), kp, lam).s
            assert np.max(np.abs(sm - se)) < 1e-11

    def test_energy_shift(self):
        phi = np.array([0.8, -0.5])
        with pytest.raises(ConfigError):
            fit_model([-2.0], [phi])
        model = fit_model([-2.0], [phi], energy_shift=10.0)
        kp = np.array([2.0, 3.0])
        for lam in (-3.5, -1.0):
            sm = model_s_matrix(model, kp, lam).s
            s0 = s_one_pole(-2.0, phi, kp, lam).s
            assert np.max(np.abs(sm - s0)) < 1e-12

    def test_rank_deficient_reduces_with_warning(self):
        phi = np.array([0.8, -0.5])
        with pytest.warns(UserWarning, match="rank deficient"):
            model = fit_model([12.0, 14.0], [phi, 2.0 * phi])
        assert model.d == 1


class TestScalarModel:
    def test_decoupled(self):
        for p in (0.5, 1.7, 3.0):
            assert scalar_model_s(0.0, np.array([1.0]), np.array([1.0]), p) == 1.0

    def test_reference_value(self):
        s = scalar_model_s(1.0, np.array([1.0]), np.array([1.0]), math.sqrt(2.0))
        assert s == pytest.approx(-(1 + 2 * math.sqrt(2) * 1j) / 3, rel=1e-13)

    def test_large_p_limit(self):
        s = scalar_model_s(1.0, np.array([1.0]), np.array([1.0]), 1e6)
        assert s == pytest.approx(1.0, abs=1e-5)

    def test_removable_pole(self):
        s = scalar_model_s(1.0, np.array([1.0]), np.array([1.0]), 1.0)
        assert s == -1.0


class TestResonanceContinuation:
    def test_zero_coupling(self):
        assert resonance_continuation(1.0, 0.0) == 1.0

    def test_against_direct_root(self):
        k0 = resonance_continuation(1.0, 0.1)
        # direct zero of i p (1 - p^2) - 0.01 * 2 = 0
        roots = np.roots([-1j, 0, 1j, -0.02])
        direct = min(roots, key=lambda r: abs(r - k0))
        assert abs(k0 - direct) < 1e-11
        assert k0.imag > 0

    def test_mirror_symmetry(self):
        k0 = resonance_continuation(1.0, 0.12)

        def numerator(p):
            return 1j * p - 0.12**2 * 2.0 / (1.0 - p * p)

        assert abs(numerator(k0)) < 1e-10
        assert abs(numerator(-np.conj(k0))) < 1e-10

    def test_quadratic_imaginary_part(self):
        betas = np.array([0.05, 0.1, 0.2])
        ims = np.array([resonance_continuation(1.0, b).imag for b in betas])
        assert np.all(ims >= 0)
        slope = np.polyfit(np.log(betas), np.log(ims), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.05)


class TestBlaschke:
    def test_empty_product(self):
        assert blaschke_s([], 1.3) == 1.0

    def test_factor_group_form(self):
        # the mirror pair collapses to a rational function of the two real
        # parameters Im k and |k|^2 only
        k = 1.1 + 0.2j
        im, mod2 = k.imag, abs(k) ** 2
        for p in (0.3, 1.0, 2.2):
            want = (p * p - 2j * im * p - mod2) / (p * p + 2j * im * p - mod2)
            assert factor_group_s(k, p) == pytest.approx(want, rel=1e-13)
            # the sign of Re k does not enter the pair
            assert factor_group_s(-np.conj(k), p) == pytest.approx(
                factor_group_s(k, p), rel=1e-13)

    def test_multiplicative(self):
        ks1 = [1.0 + 0.1j, -1.0 + 0.1j]
        ks2 = [2.0 + 0.05j]
        for p in np.linspace(0.2, 3.0, 9):
            prod = blaschke_s(ks1, p) * blaschke_s(ks2, p)
            assert prod == pytest.approx(blaschke_s(ks1 + ks2, p), rel=1e-13)

    def test_unimodular_and_infinity_limit(self):
        ks = mirror_resonances([1.0 + 0.1j, 2.0 + 0.3j])
        for p in np.linspace(0.1, 4.0, 17):
            assert abs(blaschke_s(ks, p)) == pytest.approx(1.0, rel=1e-13)
        assert blaschke_s(ks, 1e8) == pytest.approx(1.0, abs=1e-7)

    def test_lower_half_plane_rejected(self):
        with pytest.raises(ConfigError):
            blaschke_s([1.0 - 0.1j], 0.5)


class TestJumpStart:
    def test_purely_imaginary_resonance(self):
        js = fit_jump_start(1j)
        assert js.kappa2 == pytest.approx(1.0, rel=1e-14)
        ps = np.linspace(0.1, 5.0, 80)
        assert np.max(np.abs(js.model_s(ps) - js.target_s(ps))) < 1e-12
        # explicit factor: -(p - i)^2 / (p + i)^2
        for p in (0.4, 1.3):
            want = -((p - 1j) ** 2) / ((p + 1j) ** 2)
            assert js.target_s(p) == pytest.approx(want, rel=1e-13)

    def test_generic_resonance(self):
        js = fit_jump_start(1.0 + 0.1j)
        assert js.kappa2 > 0 and js.beta01_sq > 0 and js.beta11 > 0
        assert math.isfinite(js.beta00)
        ps = np.linspace(0.2, 4.0, 120)
        assert np.max(np.abs(js.model_s(ps) - js.target_s(ps))) < 1e-12
        # derived closed forms of the matching equations
        mod2, im = abs(1.0 + 0.1j) ** 2, 0.1
        assert js.beta00 == pytest.approx(mod2 / im, rel=1e-13)
        assert js.beta01_sq == pytest.approx((1 + mod2**2) / (2 * im), rel=1e-13)

    def test_divergence_along_weak_coupling(self):
        betas = (0.2, 0.1, 0.05)
        prods = []
        for b in betas:
            k0 = resonance_continuation(1.0, b)
            js = fit_jump_start(k0)
            prods.append(js.beta00 * k0.imag)
        # beta00 ~ |k0|^2 / Im k0: the product stays bounded near |k0|^2 = 1
        np.testing.assert_allclose(prods, abs(resonance_continuation(1.0, 0.1)) ** 2,
                                   rtol=0.05)
        assert fit_jump_start(resonance_continuation(1.0, 0.05)).beta00 > \
            fit_jump_start(resonance_continuation(1.0, 0.2)).beta00

    def test_real_resonance_rejected(self):
        with pytest.raises(RegimeError):
            fit_jump_start(1.0 + 0j)


class TestFactorization:
    def full_set(self, beta=0.15):
        levels = np.array([1.0, 4.0])
        weights = np.array([0.6, 0.4])
        ks = [resonance_continuation(math.sqrt(l), beta, levels, weights)
              for l in levels]
        return mirror_resonances(ks), ks

    def test_factor_everything(self):
        full, _ = self.full_set()
        fac, comp = factorize_and_complement(full, full)
        for p in (0.3, 1.2, 2.5):
            assert comp(p) == pytest.approx(1.0, rel=1e-13)
            assert fac(p) == pytest.approx(blaschke_s(full, p), rel=1e-13)

    def test_factor_nothing(self):
        full, _ = self.full_set()
        fac, comp = factorize_and_complement(full, [])
        for p in (0.3, 1.2, 2.5):
            assert fac(p) == pytest.approx(1.0, rel=1e-13)
            assert comp(p) == pytest.approx(blaschke_s(full, p), rel=1e-13)

    def test_product_reconstructs(self):
        full, ks = self.full_set()
        group = [ks[0], -np.conj(ks[0])]
        fac, comp = factorize_and_complement(full, group)
        for p in np.linspace(0.2, 3.0, 33):
            assert fac(p) * comp(p) == pytest.approx(blaschke_s(full, p), rel=1e-12)

    def test_complement_derivative_bounded(self):
        beta = 0.04
        full, ks = self.full_set(beta)
        k0 = ks[0]
        group = [k0, -np.conj(k0)]
        _, comp = factorize_and_complement(full, group)
        h = 1e-6
        p0 = k0.real

        def deriv(f):
            return abs(f(p0 + h) - f(p0 - h)) / (2 * h)

        d_full = deriv(lambda p: blaschke_s(full, p))
        d_comp = deriv(comp)
        assert d_full > 0.2 / k0.imag          # grows like 1/Im k0(beta)
        assert d_comp < 0.05 * d_full

    def test_unknown_factor_rejected(self):
        full, _ = self.full_set()
        with pytest.raises(ConfigError):
            factorize_and_complement(full, [5.0 + 1.0j])


class TestModelExport:
    def test_round_trip(self):
        from qnet.model import model_from_dict, model_to_dict
        rng = np.random.default_rng(8)
        model = fit_model([12.0, 15.5], [rng.normal(size=2), rng.normal(size=2)],
                          energy_shift=1.0)
        back = model_from_dict(model_to_dict(model))
        kp = np.array([2.0, 3.0])
        for lam in (11.3, 14.8, 16.9):
            np.testing.assert_allclose(model_s_matrix(back, kp, lam).s,
                                       model_s_matrix(model, kp, lam).s, atol=1e-14)
