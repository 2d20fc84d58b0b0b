"""Momentum grids, dispersions and vertex functions."""
import numpy as np
import pytest

from hfphases import grids


class TestFullZone:
    def test_count_and_window(self):
        g = grids.build_bz(6)
        assert g.count == 36
        assert np.all(g.k1 > -np.pi) and np.all(g.k1 < np.pi)
        assert np.all(g.k2 > -np.pi) and np.all(g.k2 < np.pi)

    def test_antiperiodic_offsets(self):
        # k_j = (2 pi / L)(n_j + 1/2): no point sits at 0 or on the zone axes
        g = grids.build_bz(8)
        frac = g.k1 * 8 / (2.0 * np.pi) - 0.5
        assert np.allclose(frac, np.rint(frac), atol=1e-12)
        assert np.abs(g.k1).min() > 1e-12
        assert np.abs(g.k2).min() > 1e-12

    def test_weight_normalizes_to_one(self):
        g = grids.build_bz(10)
        assert g.weight * g.count == pytest.approx(1.0)

    def test_rejects_odd_and_nonpositive_sizes(self):
        for bad in (0, -2, 7):
            with pytest.raises(ValueError):
                grids.build_bz(bad)


class TestHalfZone:
    def test_pairing_covers_full_zone(self):
        # {k} union {k + Q} reproduces the full zone exactly once
        L = 6
        half = grids.build_half_bz(L)
        assert half.count == L * L // 2
        full = grids.build_bz(L)

        def wrap(k):
            return (k + np.pi) % (2.0 * np.pi) - np.pi

        ks = {(round(a, 12), round(b, 12))
              for a, b in zip(half.k1, half.k2)}
        kqs = {(round(a, 12), round(b, 12))
               for a, b in zip(wrap(half.k1 + np.pi), wrap(half.k2 + np.pi))}
        alls = {(round(a, 12), round(b, 12)) for a, b in zip(full.k1, full.k2)}
        assert ks.isdisjoint(kqs)
        assert ks | kqs == alls


class TestDispersion:
    def test_band_extrema_nearest_neighbor_only(self):
        ks = np.linspace(-np.pi, np.pi, 201)
        K1, K2 = np.meshgrid(ks, ks)
        e = grids.eps(K1, K2, t=1.0, t_prime=0.0)
        assert e.min() == pytest.approx(-4.0, abs=1e-3)
        assert e.max() == pytest.approx(4.0, abs=1e-3)

    def test_inversion_symmetry(self):
        rng = np.random.default_rng(0)
        k = rng.uniform(-np.pi, np.pi, size=(2, 50))
        a = grids.eps(k[0], k[1], 1.0, -0.3)
        b = grids.eps(-k[0], -k[1], 1.0, -0.3)
        assert np.allclose(a, b, atol=1e-14)

    def test_shift_by_q_flips_sign_when_tp_zero(self):
        rng = np.random.default_rng(1)
        k = rng.uniform(-np.pi, np.pi, size=(2, 50))
        a = grids.eps(k[0], k[1], 1.0, 0.0)
        b = grids.eps(k[0] + np.pi, k[1] + np.pi, 1.0, 0.0)
        assert np.allclose(a, -b, atol=1e-13)

    def test_spot_value(self):
        # eps(pi/3, pi/4; t=1, t'=-0.2) = -2(cos pi/3 + cos pi/4)
        #                                 + 0.8 cos pi/3 cos pi/4
        want = -2.0 * (0.5 + np.sqrt(0.5)) + 0.8 * 0.5 * np.sqrt(0.5)
        got = grids.eps(np.pi / 3, np.pi / 4, 1.0, -0.2)
        assert got == pytest.approx(want, abs=1e-14)


class TestVertex:
    def test_vertex_u_spot(self):
        assert grids.vertex_u(0.0, 0.0) == pytest.approx(2.0)
        assert grids.vertex_u(np.pi, np.pi) == pytest.approx(-2.0)

    def test_basis_flips_under_q_shift(self):
        rng = np.random.default_rng(2)
        k = rng.uniform(-np.pi, np.pi, size=(2, 40))
        u = grids.vertex_basis(k[0], k[1])
        uq = grids.vertex_basis(k[0] + np.pi, k[1] + np.pi)
        assert u.shape == (4, 40)
        assert np.allclose(uq, -u, atol=1e-13)


class TestAntinodalGrid:
    def test_count_weight_and_window(self):
        # per-axis count kappa*L/sqrt(2) must be an even integer
        kappa = 0.8
        L = 10.0 * np.sqrt(2.0) / kappa  # axis count 10
        g = grids.build_antinodal_grid(L, kappa)
        assert g.count == 100
        assert g.weight * 2.0 * g.count == pytest.approx(kappa ** 2)
        s_plus = g.k1 + g.k2
        s_minus = g.k1 - g.k2
        assert np.abs(s_plus).max() < kappa * np.pi
        assert np.abs(s_minus).max() < kappa * np.pi

    def test_rotated_offsets_antiperiodic(self):
        kappa = 0.6
        L = 8.0 * np.sqrt(2.0) / kappa
        g = grids.build_antinodal_grid(L, kappa)
        step = 2.0 * np.sqrt(2.0) * np.pi / L
        frac = (g.k1 + g.k2) / step - 0.5
        assert np.allclose(frac, np.rint(frac), atol=1e-9)

    def test_odd_axis_count_rejected(self):
        with pytest.raises(ValueError):
            grids.build_antinodal_grid(10.0, 0.7071067811865476)  # N = 5

    def test_from_count_rounds_to_even_axis(self):
        g = grids.antinodal_grid_from_count(6400, 0.8)
        assert g.count == 6400
        assert grids.antinodal_axis_count(g.L, 0.8) == pytest.approx(80.0)

    def test_weight_matches_one_over_l_squared(self):
        g = grids.antinodal_grid_from_count(64, 0.5)
        assert g.weight == pytest.approx(1.0 / g.L ** 2)


class TestAntinodalBands:
    def test_taylor_matches_full_to_fourth_order(self):
        # expanding around the saddle of each flavor, full - quadratic = O(k^4)
        t, tp = 1.0, -0.25
        for r in (+1, -1):
            s1, s2 = grids.SADDLE_POINT[r]
            errs = []
            for rad in (0.1, 0.05):
                d1, d2 = rad * 0.8, rad * 0.6
                full = grids.band_antinodal(r, d1, d2, t, tp, "full")
                tay = grids.band_antinodal(r, d1, d2, t, tp, "taylor")
                errs.append(abs(full - tay))
            # halving the radius must reduce the error by ~16
            assert errs[1] < errs[0] / 8.0

    def test_full_variant_equals_shifted_dispersion(self):
        rng = np.random.default_rng(3)
        t, tp = 1.0, 0.15
        d = rng.uniform(-0.5, 0.5, size=(2, 30))
        for r in (+1, -1):
            s1, s2 = grids.SADDLE_POINT[r]
            want = grids.eps(s1 + d[0], s2 + d[1], t, tp) - grids.eps(
                s1, s2, t, tp)
            got = grids.band_antinodal(r, d[0], d[1], t, tp, "full")
            assert np.allclose(got, want, atol=1e-13)

    def test_flavors_map_into_each_other_under_axis_swap(self):
        rng = np.random.default_rng(4)
        d = rng.uniform(-0.4, 0.4, size=(2, 30))
        a = grids.band_antinodal(+1, d[0], d[1], 1.0, 0.1, "taylor")
        b = grids.band_antinodal(-1, d[1], d[0], 1.0, 0.1, "taylor")
        assert np.allclose(a, b, atol=1e-13)
