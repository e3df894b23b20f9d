import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from waveguide_loc.model import SystemParams, build_hamiltonian, sample_disorder
from waveguide_loc.spectrum import (
    R_GOE,
    R_POISSON,
    ComplexSpectrum,
    eigenvalues,
    filter_valid_pairs,
    gap_ratios,
    gap_statistics,
    mean_gap_ratio,
    sort_spectrum,
)


class TestEigenvalues:
    def test_all_ones(self):
        spec = eigenvalues(build_hamiltonian(SystemParams(5, 0.0)))
        ev = spec.eigenvalues
        k = np.argmin(ev.imag)
        assert abs(ev[k] + 5j) < 1e-12
        assert np.max(np.abs(np.delete(ev, k))) < 1e-12

    def test_two_atom_quarter_wave(self):
        # H = [[-i, 1], [1, -i]] -> -i +- 1
        ev = eigenvalues(build_hamiltonian(SystemParams(2, math.pi / 2))).eigenvalues
        np.testing.assert_allclose(ev, [-1 - 1j, 1 - 1j], atol=1e-12)

    def test_sorted_and_provenance(self):
        p = SystemParams(41, math.pi / 8, 0.2)
        spec = eigenvalues(build_hamiltonian(p, sample_disorder(p, 8)))
        assert len(spec) == 41
        assert np.all(np.diff(spec.energies) >= 0)
        assert spec.source["seed"] == 8
        assert spec.source["params"]["n_atoms"] == 41

    @given(st.integers(2, 60), st.floats(0, 2 * math.pi), st.floats(0, math.pi),
           st.floats(0.2, 3), st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_sum_rule_and_decay(self, n, xi, w, gamma, seed):
        p = SystemParams(n, xi, w, gamma)
        ev = eigenvalues(build_hamiltonian(p, sample_disorder(p, seed))).eigenvalues
        assert abs(ev.sum() - (-1j * n * gamma)) < 1e-8 * max(1, n * gamma)
        assert ev.imag.max() <= 1e-10 * max(1, n * gamma)

    def test_tie_break_by_imag(self):
        np.testing.assert_array_equal(sort_spectrum([1 - 1j, 0 - 2j, 1 - 3j]), [0 - 2j, 1 - 3j, 1 - 1j])


class TestFilter:
    def test_real_spectrum_all_valid(self):
        np.testing.assert_array_equal(filter_valid_pairs(np.array([0.0, 1.0, 2.5, 4.0])), [0, 1, 2])

    def test_broad_pair_invalid(self):
        assert len(filter_valid_pairs(np.array([0 - 0.6j, 1 - 0.6j]))) == 0

    def test_narrow_pair_valid(self):
        np.testing.assert_array_equal(filter_valid_pairs(np.array([0 - 0.1j, 0.3 - 0.1j])), [0])

    def test_degenerate_counted(self):
        idx, n_deg = filter_valid_pairs(np.array([0.0, 0.0, 1.0]), return_degenerate=True)
        np.testing.assert_array_equal(idx, [1])
        assert n_deg == 1

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            filter_valid_pairs(np.array([1.0, 0.0]))

    @given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-3, 0)), min_size=3, max_size=60),
           st.floats(0.01, 2), st.floats(0, 2))
    @settings(max_examples=80, deadline=None)
    def test_threshold_monotone(self, pts, thr, extra):
        ev = sort_spectrum([complex(a, b) for a, b in pts])
        low = set(filter_valid_pairs(ev, thr).tolist())
        high = set(filter_valid_pairs(ev, thr + extra).tolist())
        assert low <= high


class TestGapRatios:
    def test_equal_spacing(self):
        g = gap_ratios(np.arange(5.0))
        np.testing.assert_array_equal(g.ratios, [1, 1, 1])
        assert g.r_a == 1 and g.v_I == 0

    def test_three_levels(self):
        g = gap_ratios(np.array([0.0, 1.0, 3.0]))
        np.testing.assert_array_equal(g.ratios, [0.5])

    def test_sectors_do_not_straddle(self):
        levels = np.array([0.0, 1.0, 3.0, 4.0, 6.0, 7.0])  # spacings 1,2,1,2,1
        g = gap_ratios(levels, [0, 1, 3, 4])
        np.testing.assert_allclose(g.ratios, [0.5, 0.5])

    def test_broad_level_breaks_run(self):
        ev = np.array([0, 1, 3, 4, 6, 7], dtype=complex)
        ev[2] -= 5j
        np.testing.assert_array_equal(filter_valid_pairs(ev), [0, 3, 4])
        np.testing.assert_allclose(gap_statistics(ev).ratios, [0.5])

    def test_empty_flagged(self):
        g = gap_ratios(np.array([0.0, 1.0]))
        assert g.empty and math.isnan(g.r_a)

    def test_raw_variance(self):
        g = gap_ratios(np.array([0.0, 1.0, 3.0, 4.0, 8.0]))
        r = np.array([0.5, 0.5, 0.25])
        assert g.v_I_raw == pytest.approx(np.sum((r - r.mean()) ** 2))
        assert g.v_I == pytest.approx(np.var(r))

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=80, unique=True),
           st.floats(-50, 50), st.floats(0.01, 100))
    @settings(max_examples=80, deadline=None)
    def test_scale_shift_invariance(self, levels, shift, scale):
        ev = np.sort(np.array(levels))
        if np.min(np.diff(ev)) < 1e-6:
            return
        a = gap_ratios(ev)
        b = gap_ratios(ev * scale + shift)
        np.testing.assert_allclose(a.ratios, b.ratios, rtol=1e-8, atol=1e-9)
        assert np.all((a.ratios >= 0) & (a.ratios <= 1))
        assert 0 <= a.v_I <= 0.25
        assert a.v_I == pytest.approx(np.mean((a.ratios - a.r_a) ** 2), abs=1e-12)


class TestReferenceValues:
    def test_poisson_constant_by_quadrature(self):
        mean, _ = quad(lambda r: r * 2 / (1 + r) ** 2, 0, 1)
        assert R_POISSON == pytest.approx(mean, rel=1e-12)
        assert R_POISSON == pytest.approx(0.3863, abs=1e-4)
        assert R_POISSON == pytest.approx(0.39, abs=0.005)
        assert R_GOE == pytest.approx(0.53, abs=0.005)

    def test_poisson_monte_carlo(self):
        rng = np.random.default_rng(12345)
        levels = np.cumsum(rng.exponential(size=1_000_001))
        g = gap_statistics(levels)
        assert g.n_valid == 999_999
        assert abs(g.r_a - (2 * math.log(2) - 1)) < 0.005


class TestMeanGapRatio:
    def test_single(self):
        g = gap_ratios(np.array([0.0, 1.0, 3.0, 4.0]))
        s = mean_gap_ratio([g])
        assert s.r_mean == g.r_a and s.r_stderr == 0.0 and s.n_samples == 1

    def test_skips_empty(self):
        a = gap_ratios(np.arange(5.0))
        b = gap_ratios(np.array([0.0, 1.0, 3.0]))
        e = gap_ratios(np.array([0.0, 1.0]))
        s = mean_gap_ratio([a, e, b])
        assert s.n_samples == 2
        assert s.r_mean == pytest.approx(0.75)
        assert s.r_stderr == pytest.approx(np.std([1, 0.5], ddof=1) / math.sqrt(2))

    def test_all_empty(self):
        with pytest.raises(ValueError):
            mean_gap_ratio([gap_ratios(np.array([0.0, 1.0]))])

    def test_spectrum_object(self):
        spec = ComplexSpectrum(np.arange(6.0))
        assert gap_statistics(spec).r_a == 1.0
