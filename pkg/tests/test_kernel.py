"""Thermal weights and 2x2 block spectra/occupations."""
import numpy as np
import pytest

from hfphases import kernel
from oracles import block_reference


class TestFermi:
    def test_moderate_values(self):
        x = np.array([-2.0, 0.0, 1.5])
        want = 1.0 / (1.0 + np.exp(5.0 * x))
        assert np.allclose(kernel.fermi(x, 5.0), want, rtol=1e-14)

    def test_extreme_arguments_saturate_without_overflow(self):
        assert kernel.fermi(800.0, 1e5) == 0.0
        assert kernel.fermi(-800.0, 1e5) == 1.0
        assert np.isfinite(kernel.fermi(1e300, 1.0))

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            kernel.fermi(0.0, 0.0)


class TestGrandTerm:
    def test_equals_log_occupation_factor(self):
        x = np.array([-1.2, 0.3, 2.5])
        beta = 7.0
        want = np.log1p(np.exp(-beta * x)) / beta
        assert np.allclose(kernel.grand_term(x, beta), want, rtol=1e-13)

    def test_negative_branch_linear_asymptote(self):
        # for beta*x << 0 the term approaches -x (occupied level energy)
        val = kernel.grand_term(-50.0, 1e5)
        assert val == pytest.approx(50.0, abs=1e-12)

    def test_positive_branch_vanishes(self):
        assert kernel.grand_term(50.0, 1e5) == 0.0


class TestBlockSpectrum:
    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            ap, am = rng.normal(0, 3, size=2)
            b = complex(rng.normal(0, 2), rng.normal(0, 2))
            spec = kernel.spectrum(ap, am, b)
            e_lo, e_hi, *_ = block_reference(ap, am, b, 1.0)
            assert spec.e_minus == pytest.approx(e_lo, abs=1e-12)
            assert spec.e_plus == pytest.approx(e_hi, abs=1e-12)

    def test_vectorized_shapes(self):
        ap = np.ones((3, 4))
        spec = kernel.spectrum(ap, 2.0 * ap, (1.0 + 1.0j) * ap)
        assert spec.e_plus.shape == (3, 4)
        assert np.all(spec.e_plus >= spec.e_minus)


class TestBlockOccupation:
    def test_matches_dense_fermi_function(self):
        rng = np.random.default_rng(11)
        for beta in (0.5, 5.0, 1e5):
            for _ in range(25):
                ap, am = rng.normal(0, 3, size=2)
                b = complex(rng.normal(0, 2), rng.normal(0, 2))
                occ = kernel.occupation(ap, am, b, beta)
                _, _, th, th_bar, th_tilde = block_reference(ap, am, b, beta)
                assert occ.theta == pytest.approx(th, abs=1e-10)
                assert occ.theta_bar == pytest.approx(th_bar, abs=1e-10)
                assert occ.theta_tilde.real == pytest.approx(
                    th_tilde.real, abs=1e-10)
                assert occ.theta_tilde.imag == pytest.approx(
                    th_tilde.imag, abs=1e-10)

    def test_occupations_in_unit_interval(self):
        rng = np.random.default_rng(12)
        ap = rng.normal(0, 4, size=200)
        am = rng.normal(0, 4, size=200)
        b = rng.normal(0, 2, size=200) + 1j * rng.normal(0, 2, size=200)
        occ = kernel.occupation(ap, am, b, 3.0)
        for arr in (occ.theta, occ.theta_bar):
            assert np.all(arr > -1e-12) and np.all(arr < 1.0 + 1e-12)

    def test_trace_identity(self):
        # Theta + Theta_bar = f(e+) + f(e-)
        rng = np.random.default_rng(13)
        ap = rng.normal(0, 4, size=100)
        am = rng.normal(0, 4, size=100)
        b = rng.normal(0, 2, size=100) + 1j * rng.normal(0, 2, size=100)
        spec = kernel.spectrum(ap, am, b)
        occ = kernel.occupation(ap, am, b, 2.5, spec)
        lhs = occ.theta + occ.theta_bar
        rhs = kernel.fermi(spec.e_plus, 2.5) + kernel.fermi(spec.e_minus, 2.5)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_degenerate_block_is_diagonal_limit(self):
        # b -> 0 with a+ = a-: W -> 0; occupations must stay finite and equal
        occ = kernel.occupation(0.7, 0.7, 0.0, 10.0)
        f = kernel.fermi(0.7, 10.0)
        assert occ.theta == pytest.approx(f, abs=1e-14)
        assert occ.theta_bar == pytest.approx(f, abs=1e-14)
        assert occ.theta_tilde == 0.0

    def test_zero_temperature_half_filled_degenerate_point(self):
        # both eigenvalues at zero: each state half occupied
        occ = kernel.occupation(0.0, 0.0, 0.0, 1e5)
        assert occ.theta == pytest.approx(0.5)
        assert occ.theta_bar == pytest.approx(0.5)
