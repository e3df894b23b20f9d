import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waveguide_loc.dynamics import initial_state, propagate
from waveguide_loc.ensemble import (
    EnsembleError,
    EnsembleSpec,
    Moments,
    _realize,
    _TreeReducer,
    central_cut,
    realization_seed,
    run_ensemble,
    sweep,
)
from waveguide_loc.entanglement import entropy_from_amplitudes
from waveguide_loc.model import SystemParams, build_hamiltonian, sample_disorder
from waveguide_loc.spectrum import eigenvalues, gap_statistics

ALL = {"populations", "total_population", "entropy", "localization_fit", "gap_statistics"}
SHORT_GRID = tuple(np.linspace(0, 150, 31))


def failing_source(params, seed):
    if seed % 3 == 0:
        raise np.linalg.LinAlgError("synthetic failure")
    return np.arange(params.n_atoms, dtype=float)


def sometimes_failing_source(params, seed):
    if seed == realization_seed(0, 5):
        raise np.linalg.LinAlgError("synthetic failure")
    return np.arange(params.n_atoms, dtype=float)


def small_spec(**kw):
    base = dict(params=SystemParams(15, math.pi / 8, 0.05 * math.pi), n_realizations=12,
                master_seed=3, observables=ALL, time_grid=SHORT_GRID,
                fit_times=(50.0, 150.0))
    base.update(kw)
    return EnsembleSpec(**base)


class TestSeeds:
    def test_deterministic_and_distinct(self):
        seeds = [realization_seed(42, i) for i in range(1000)]
        assert seeds == [realization_seed(42, i) for i in range(1000)]
        assert len(set(seeds)) == 1000
        assert realization_seed(43, 0) != realization_seed(42, 0)
        assert all(0 <= s < 2**64 for s in seeds)


class TestSpecValidation:
    def test_unknown_observable(self):
        with pytest.raises(ValueError):
            small_spec(observables={"magnetization"})

    def test_bad_count(self):
        with pytest.raises(ValueError):
            small_spec(n_realizations=0)

    def test_even_chain_dynamics(self):
        with pytest.raises(ValueError):
            small_spec(params=SystemParams(14, 0.3))

    def test_even_chain_spectrum_ok(self):
        spec = small_spec(params=SystemParams(14, 0.3, 0.1), observables={"gap_statistics"})
        assert run_ensemble(spec).gap_summary.n_samples == 12

    def test_pickles(self):
        spec = small_spec()
        assert pickle.loads(pickle.dumps(spec)) == spec


class TestMoments:
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200))
    @settings(max_examples=100, deadline=None)
    def test_stream_and_tree_match_batch(self, xs):
        x = np.array(xs)
        stream = Moments.leaf(x[0])
        for v in x[1:]:
            stream = stream.push(v)
        tree = _TreeReducer()
        for v in x:
            tree.push({"x": Moments.leaf(v)})
        tree = tree.result()["x"]
        scale = max(1.0, np.abs(x).max())
        for m in (stream, tree):
            assert m.n == len(x)
            assert abs(m.mean - x.mean()) <= 1e-12 * scale
            if len(x) > 1:
                assert abs(m.var - x.var(ddof=1)) <= 1e-12 * scale**2
            else:
                assert m.var == 0

    def test_missing_entries(self):
        m = Moments.leaf([1.0, np.nan]).push([3.0, 2.0])
        np.testing.assert_array_equal(m.n, [2, 1])
        np.testing.assert_array_equal(m.mean, [2.0, 2.0])


class TestRunEnsemble:
    def test_clean_has_no_spread(self):
        res = run_ensemble(small_spec(params=SystemParams(15, math.pi / 8)))
        for key in ("populations", "total_population", "entropy", "r_a", "v_I"):
            assert np.all(res.std[key] == 0), key
            assert np.all(res.stderr[key] == 0), key

    def test_single_realization(self):
        res = run_ensemble(small_spec(n_realizations=1))
        assert res.single_sample
        assert np.all(res.stderr["total_population"] == 0)
        spec = small_spec(n_realizations=1)
        _, seed, out, _ = _realize(spec, 0)
        np.testing.assert_array_equal(res.mean["total_population"], out["total_population"])

    def test_realization_depends_only_on_its_seed(self):
        spec = small_spec()
        index, seed, out, err = _realize(spec, 7)
        assert err is None and seed == realization_seed(3, 7)
        p = spec.params
        h = build_hamiltonian(p, sample_disorder(p, seed))
        traj = propagate(h, initial_state(p), spec.times)
        np.testing.assert_array_equal(out["populations"], traj.populations)
        np.testing.assert_array_equal(out["entropy"], entropy_from_amplitudes(traj.amplitudes, central_cut(15)))
        g = gap_statistics(eigenvalues(h))
        assert out["r_a"] == g.r_a and out["v_I"] == g.v_I

    def test_mean_matches_direct_average(self):
        spec = small_spec()
        res = run_ensemble(spec)
        outs = [_realize(spec, i)[2] for i in range(spec.n_realizations)]
        pt = np.array([o["total_population"] for o in outs])
        np.testing.assert_allclose(res.mean["total_population"], pt.mean(0), rtol=1e-12)
        np.testing.assert_allclose(res.std["total_population"], pt.std(0, ddof=1), rtol=1e-9, atol=1e-15)
        r = np.array([o["r_a"] for o in outs])
        assert res.gap_summary.r_mean == pytest.approx(r.mean(), rel=1e-12)
        assert res.gap_summary.r_stderr == pytest.approx(r.std(ddof=1) / math.sqrt(12), rel=1e-9)
        assert [rec["seed"] for rec in res.records] == [realization_seed(3, i) for i in range(12)]

    def test_bounds_and_fits(self):
        res = run_ensemble(small_spec())
        pops = res.mean["populations"]
        assert pops.min() >= 0 and pops.max() <= 1
        lo, hi = res.band("total_population")
        assert np.all(lo <= res.mean["total_population"]) and np.all(hi >= lo)
        assert set(res.fits) == {50.0, 150.0}
        assert res.provenance["master_seed"] == 3

    def test_workers_bit_identical(self):
        spec = small_spec()
        a = run_ensemble(spec, workers=1, batch_size=3)
        b = run_ensemble(spec, workers=3, batch_size=5)
        for key in a.mean:
            assert a.mean[key].tobytes() == b.mean[key].tobytes(), key
            assert a.std[key].tobytes() == b.std[key].tobytes(), key

    def test_env_workers(self, monkeypatch):
        monkeypatch.setenv("WAVEGUIDE_LOC_WORKERS", "2")
        spec = small_spec(observables={"gap_statistics"})
        a = run_ensemble(spec)
        monkeypatch.setenv("WAVEGUIDE_LOC_WORKERS", "0")
        with pytest.raises(ValueError):
            run_ensemble(spec)
        monkeypatch.delenv("WAVEGUIDE_LOC_WORKERS")
        assert run_ensemble(spec).mean["r_a"].tobytes() == a.mean["r_a"].tobytes()

    def test_failure_budget_exceeded(self):
        spec = small_spec(observables={"gap_statistics"}, spectrum_source=failing_source,
                          n_realizations=30)
        with pytest.raises(EnsembleError, match="failed"):
            run_ensemble(spec)

    def test_failure_recorded(self):
        spec = small_spec(observables={"gap_statistics"}, master_seed=0,
                          spectrum_source=sometimes_failing_source, n_realizations=200)
        res = run_ensemble(spec)
        assert len(res.failures) == 1
        assert res.failures[0]["seed"] == realization_seed(0, 5)
        assert res.gap_summary.n_samples == 199

    def test_disorder_lifts_total_population(self):
        # late-time excitation is retained better with weak disorder than without
        grid = tuple(np.linspace(0, 1500, 31))
        p = SystemParams(101, math.pi / 8, 0.01 * math.pi)
        obs = {"total_population"}
        dis = run_ensemble(EnsembleSpec(p, 200, 0, obs, grid))
        clean = run_ensemble(EnsembleSpec(p.replace(disorder_width=0.0), 1, 0, obs, grid))
        assert dis.mean["total_population"][-1] > clean.mean["total_population"][-1]
        assert np.all(np.diff(dis.mean["total_population"]) <= 1e-12)


class TestSweep:
    def test_empty(self):
        with pytest.raises(ValueError):
            sweep(small_spec(), values=())

    def test_values(self):
        spec = small_spec(observables={"gap_statistics"}, sweep=(0.0, 0.5), n_realizations=4)
        out = sweep(spec)
        assert [v for v, _ in out] == [0.0, 0.5]
        assert out[0][1].params.disorder_width == 0.0
        assert out[1][1].params.disorder_width == 0.5

    def test_xi_key(self):
        spec = small_spec(observables={"gap_statistics"}, sweep_key="xi", n_realizations=2)
        out = sweep(spec, values=[0.1, 0.2])
        assert [r.params.xi for _, r in out] == [0.1, 0.2]

    def test_invalid_value(self):
        with pytest.raises(ValueError):
            small_spec(sweep=(-1.0,))
