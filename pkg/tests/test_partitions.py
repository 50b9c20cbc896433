import numpy as np
import pytest

from memloss import errors
from memloss import sequences as seqs
from memloss.maps import grossmann_horner, lsv, pikovsky
from memloss.partitions import (
    TailTable,
    default_fit_window,
    fit_power_law,
    gh_endpoints,
    lsv_preimage_points,
    mc_zscores,
    pikovsky_endpoints,
    return_time_tail,
    return_time_tail_mc,
)


class TestFitPowerLaw:
    def test_exact_square(self):
        n = np.arange(0, 101, dtype=float)
        vals = np.concatenate([[1.0], 1.0 / n[1:] ** 2])
        fit = fit_power_law(TailTable(values=vals, label="r"), 1, 100)
        assert fit.slope == pytest.approx(-2.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_prefactor(self):
        n = np.arange(1, 200, dtype=float)
        vals = np.concatenate([[10.0], 5.0 * n ** -1.3])
        fit = fit_power_law(TailTable(values=vals, label="mc"), 1, 150)
        assert fit.slope == pytest.approx(-1.3, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(5.0), abs=1e-12)

    def test_bounded_perturbation(self):
        n = np.arange(1, 1001, dtype=float)
        vals = np.concatenate([[1.5], n ** -2 * (1 + 0.1 * np.sin(n))])
        fit = fit_power_law(TailTable(values=vals, label="mc"), 10, 1000)
        assert -2.05 <= fit.slope <= -1.95

    def test_nonpositive(self):
        vals = np.array([1.0, 0.5, 0.0, 0.0])
        with pytest.raises(errors.NonPositiveValue):
            fit_power_law(TailTable(values=vals, label="r"), 1, 3)

    def test_default_window(self):
        lo, hi = default_fit_window(10_000)
        assert 11 <= lo < hi <= 10_000


class TestLsvEndpoints:
    @pytest.mark.parametrize("gamma", [0.3, 0.5, 0.8])
    def test_first_points(self, gamma):
        ep = lsv_preimage_points(seqs.constant(lsv(gamma)), 1, 5)
        assert ep.x[0] == 1.0 and ep.y[0] == 1.0
        assert ep.x[1] == pytest.approx(0.5, abs=1e-14)
        assert ep.y[1] == pytest.approx(1.0, abs=1e-14)

    def test_monotone_limits(self):
        ep = lsv_preimage_points(seqs.constant(lsv(0.5)), 1, 500)
        assert np.all(np.diff(ep.x) < 0)
        assert np.all(np.diff(ep.y[1:]) < 0)
        assert ep.x[-1] < 1e-4 and ep.y[-1] - 0.5 < 1e-4

    def test_stationary_slope(self):
        ep = lsv_preimage_points(seqs.constant(lsv(0.5)), 1, 1000)
        t = TailTable(values=np.minimum.accumulate(np.minimum(ep.x, 1.0)), label="r")
        fit = fit_power_law(t, 50, 1000)
        assert fit.slope == pytest.approx(-2.0, abs=0.15)

    def test_nonstationary_matches_manual_pullback(self):
        from memloss.maps import Branch, inverse_branch

        s = seqs.periodic([lsv(0.5), lsv(0.8)])
        ep = lsv_preimage_points(s, 1, 4)
        # x_3(1) = g_1 g_2 g_3 (1), gamma cycle 0.5, 0.8, 0.5
        v = inverse_branch(lsv(0.5), Branch.LEFT, 1.0)
        v = inverse_branch(lsv(0.8), Branch.LEFT, v)
        v = inverse_branch(lsv(0.5), Branch.LEFT, v)
        assert ep.x[3] == pytest.approx(v, abs=1e-13)

    def test_iid_window_uses_triangle(self):
        s = seqs.iid([lsv(0.5), lsv(0.8)], [0.5, 0.5], seed=1)
        ep = lsv_preimage_points(s, 1, 60)
        assert np.all(np.diff(ep.x) < 0)

    def test_family_guard(self):
        with pytest.raises(errors.ParamError):
            lsv_preimage_points(seqs.constant(pikovsky(1.5)), 1, 10)


class TestPikovskyEndpoints:
    def test_first_points(self):
        ep = pikovsky_endpoints(seqs.constant(pikovsky(1.5)), 1, 10)
        assert ep.x_plus[0] == 0.0
        assert ep.x_plus[1] == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_symmetry_is_structural(self):
        # left endpoints are negatives of right endpoints by oddness of the
        # map; the chain stores the right side only.
        ep = pikovsky_endpoints(seqs.constant(pikovsky(2.0)), 1, 50)
        assert np.all(np.diff(ep.x_plus) > 0)

    def test_stationary_gap_slope(self):
        ep = pikovsky_endpoints(seqs.constant(pikovsky(2.0)), 1, 1000)
        t = TailTable(values=np.minimum.accumulate(np.minimum(ep.u[:1001], 1.0)), label="r")
        fit = fit_power_law(t, 50, 1000)
        assert fit.slope == pytest.approx(-1.0, abs=0.1)


class TestGhEndpoints:
    def test_reference_cell(self):
        ep = gh_endpoints(seqs.constant(grossmann_horner()), 1, 10)
        # g_minus(0) = -1/4: solve 1 - 2 sqrt(x) = 0, mirror to the left
        assert tuple(ep.big_minus[0]) == (-0.25, 0.0)

    def test_nesting_toward_neutral_point(self):
        ep = gh_endpoints(seqs.constant(grossmann_horner()), 1, 300)
        sup = ep.big_minus[:, 1]
        assert np.all(np.diff(sup) < 0)
        assert sup[-1] == pytest.approx(-1.0, abs=0.02)

    def test_partition_complement_is_exact(self):
        n_max = 400
        ep = gh_endpoints(seqs.constant(grossmann_horner()), 1, n_max)
        total = float(
            np.sum(ep.big_minus[:, 1] - ep.big_minus[:, 0])
            + np.sum(ep.big_plus[:, 1] - ep.big_plus[:, 0])
        )
        unresolved_minus = 1.0 + ep.big_minus[n_max, 0]
        unresolved_plus = 1.0 - ep.big_plus[n_max, 1]
        assert total + unresolved_minus + unresolved_plus == pytest.approx(2.0, abs=1e-12)

    def test_truncation_report(self):
        ep = gh_endpoints(seqs.constant(grossmann_horner()), 1, 100)
        assert ep.truncated_mass <= 1e-15


class TestReturnTimeTail:
    @pytest.mark.parametrize(
        "seq,base",
        [
            (seqs.constant(lsv(0.5)), "m_k"),
            (seqs.constant(lsv(0.5)), "lebesgue"),
            (seqs.constant(pikovsky(2.0)), "m_k"),
            (seqs.constant(pikovsky(2.0)), "lebesgue"),
            (seqs.constant(grossmann_horner()), "m_k"),
            (seqs.constant(grossmann_horner()), "lebesgue"),
        ],
        ids=["lsv-m", "lsv-leb", "pik-m", "pik-leb", "gh-m", "gh-leb"],
    )
    def test_starts_at_one_and_monotone(self, seq, base):
        t = return_time_tail(seq, 1, 200, base=base)
        assert t.values[0] == 1.0 and t.values[1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(t.values) <= 1e-12)

    def test_lsv_mk_slope_matches_endpoint_order(self):
        # the reference-measure tail follows the endpoint decay n**(-1/gamma)
        t = return_time_tail(seqs.constant(lsv(0.5)), 1, 1500, base="m_k")
        fit = fit_power_law(t, 100, 1500)
        assert fit.slope == pytest.approx(-2.0, abs=0.2)

    def test_pikovsky_lebesgue_slope(self):
        t = return_time_tail(seqs.constant(pikovsky(2.0)), 1, 1500, base="lebesgue")
        assert fit_power_law(t, 100, 1500).slope == pytest.approx(-1.0, abs=0.15)

    def test_gh_slopes(self):
        s = seqs.constant(grossmann_horner())
        assert fit_power_law(return_time_tail(s, 1, 1500, "m_k"), 100, 1500).slope == pytest.approx(-2.0, abs=0.2)
        assert fit_power_law(return_time_tail(s, 1, 1500, "lebesgue"), 100, 1500).slope == pytest.approx(-1.0, abs=0.15)

    def test_lsv_tail_two_ways(self):
        # cell-sum recomputation: t(n) = 1 - sum of resolved cell masses
        s = seqs.periodic([lsv(0.5), lsv(0.7)])
        n_max = 300
        t = return_time_tail(s, 1, n_max, base="m_k")
        ep = lsv_preimage_points(s, 1, n_max)
        cells = 2.0 * (ep.y[1:] - np.concatenate([ep.y[2:], [0.5]]))  # |[y_{n+1}, y_n]| * 2
        resolved = np.concatenate([[0.0], np.cumsum(cells[:-1])])
        two_way = 1.0 - resolved
        assert np.max(np.abs(t.values[1:] - two_way)) <= 1e-12

    def test_shift_identity(self):
        s = seqs.periodic([lsv(0.5), lsv(0.7), lsv(0.6)])
        for k in (2, 3, 5):
            direct = return_time_tail(s, k, 100, base="m_k")
            via_shift = return_time_tail(seqs.shifted(s, k - 1), 1, 100, base="m_k")
            assert np.allclose(direct.values, via_shift.values, atol=1e-14)

    def test_monotone_domination(self):
        t1 = return_time_tail(seqs.constant(lsv(0.4)), 1, 200, "m_k")
        t2 = return_time_tail(seqs.constant(lsv(0.6)), 1, 200, "m_k")
        assert np.all(t1.values[2:] <= t2.values[2:] + 1e-15)

    def test_bad_base(self):
        with pytest.raises(errors.ParamError):
            return_time_tail(seqs.constant(lsv(0.5)), 1, 10, base="nope")


class TestReturnTimeTailMc:
    def test_full_return_toy(self):
        # reference sets covering the whole interval force tau = 1
        s = seqs.constant(lsv(0.5))
        sets = [[(0.0, 1.0)]] * 11
        t = return_time_tail_mc(s, 1, 10, 2000, seed=1, reference_sets=sets)
        assert t.values[1] == 1.0 and t.values[2] == 0.0

    def test_lsv_against_exact(self):
        s = seqs.constant(lsv(0.5))
        exact = return_time_tail(s, 1, 200, "m_k")
        mc = return_time_tail_mc(s, 1, 200, 20_000, seed=3, base="m_k")
        z = mc_zscores(exact, mc)
        assert np.nanmax(np.abs(z)) <= 4.0

    def test_pikovsky_against_exact(self):
        s = seqs.constant(pikovsky(2.0))
        exact = return_time_tail(s, 1, 100, "lebesgue")
        mc = return_time_tail_mc(s, 1, 100, 20_000, seed=5, base="lebesgue")
        z = mc_zscores(exact, mc)
        assert np.nanmax(np.abs(z)) <= 4.0

    def test_seeds_differ_but_both_pass(self):
        s = seqs.constant(lsv(0.5))
        exact = return_time_tail(s, 1, 100, "m_k")
        a = return_time_tail_mc(s, 1, 100, 10_000, seed=11)
        b = return_time_tail_mc(s, 1, 100, 10_000, seed=12)
        assert not np.array_equal(a.values, b.values)
        assert np.nanmax(np.abs(mc_zscores(exact, a))) <= 4.0
        assert np.nanmax(np.abs(mc_zscores(exact, b))) <= 4.0


class TestTailTable:
    def test_depth_error(self):
        t = TailTable(values=np.array([1.0, 1.0, 0.5]), label="h_k")
        with pytest.raises(errors.DepthError):
            t.value(3)

    def test_monotonicity_enforced(self):
        with pytest.raises(errors.ParamError):
            TailTable(values=np.array([1.0, 1.0, 0.5, 0.7]), label="h_k")

    def test_t1_enforced_for_return_tails(self):
        with pytest.raises(errors.ParamError):
            TailTable(values=np.array([1.0, 0.8, 0.5]), label="h_k")
