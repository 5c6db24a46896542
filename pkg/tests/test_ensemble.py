import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorcool import make_params
from mirrorcool import analytic as an
from mirrorcool.ensemble import (
    EnsembleSpec, EstimationError, fit_quadratic_scaling, fit_steady_state,
    initial_conditions, measurement_window, run_ensemble,
)
from mirrorcool.sde import NoiseSpec, SDEModel


@pytest.fixture(scope="module")
def noisy():
    return SDEModel.build(make_params(), dt=2e-3)


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(n_traj=8)
    with pytest.raises(ValueError):
        EnsembleSpec(n_traj=8, p0=1.0, init_temperature=1.0)
    with pytest.raises(ValueError):
        EnsembleSpec(n_traj=1, p0=1.0)
    with pytest.raises(ValueError):
        EnsembleSpec(n_traj=8, init_temperature=-1.0)


def test_measurement_window(noisy):
    assert measurement_window(noisy, 10.0) == (1.5, 10.0)
    assert measurement_window(noisy, 100.0)[1] == pytest.approx(0.8 * 2 * math.pi / 0.1)
    with pytest.raises(EstimationError):
        measurement_window(noisy, 1.0)


def test_thermal_initial_conditions_have_target_variance(noisy):
    x, p = initial_conditions(noisy, EnsembleSpec(n_traj=4096, init_temperature=10.0))
    assert np.all(x == noisy.trap.center)
    assert np.var(p) / noisy.params.mass == pytest.approx(10.0, rel=0.01)


def test_phase_spread_initial_conditions_share_amplitude(noisy):
    x, p = initial_conditions(noisy, EnsembleSpec(n_traj=16, p0=90.0))
    mw = noisy.params.mass * noisy.trap.omega
    assert np.allclose(p**2 + (mw * (x - noisy.trap.center)) ** 2, 90.0**2)


def test_cold_noiseless_ensemble_does_not_heat():
    p = make_params({"trap_offset": 0.0})
    m = SDEModel.build(p, dt=2e-3, noise=NoiseSpec.off())
    s = run_ensemble(m, EnsembleSpec(n_traj=4, p0=0.0, t_end=5.0, sample_every=50))
    assert abs(s.rate) < 1e-12 and s.rate_se < 1e-12


def test_pump_off_conserves_energy():
    p = make_params({"pump_rate": 0.0})
    m = SDEModel.build(p, dt=2e-3, noise=NoiseSpec.off())
    s = run_ensemble(m, EnsembleSpec(n_traj=8, p0=60.0, t_end=8.0, sample_every=50))
    assert np.allclose(s.mean_pamp2, 3600.0, rtol=1e-6)
    assert abs(s.rate) < 1e-6 * 3600


def test_standard_error_shrinks_as_root_n(noisy):
    ratios = []
    for seed in range(4):
        se = [run_ensemble(noisy, EnsembleSpec(n_traj=n, init_temperature=10.0, t_end=6.0,
                                               master_seed=seed, batch_size=256)).rate_se
              for n in (128, 256)]
        ratios.append(se[0] / se[1])
    assert np.mean(ratios) == pytest.approx(math.sqrt(2), rel=0.2)


def test_control_variate_reduces_scatter(noisy):
    kw = dict(n_traj=64, init_temperature=10.0, t_end=6.0, master_seed=5)
    with_cv = run_ensemble(noisy, EnsembleSpec(**kw))
    without = run_ensemble(noisy, EnsembleSpec(control_variate=False, **kw))
    assert with_cv.rate_se < without.rate_se
    assert np.array_equal(with_cv.mean_p2, without.mean_p2)


def test_result_independent_of_batching(noisy):
    kw = dict(n_traj=24, init_temperature=8.0, t_end=4.0, master_seed=2)
    a = run_ensemble(noisy, EnsembleSpec(batch_size=24, **kw))
    b = run_ensemble(noisy, EnsembleSpec(batch_size=5, **kw))
    assert a.rate == b.rate and np.array_equal(a.mean_pamp2, b.mean_pamp2)


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(12))))
def test_summary_statistics_permutation_invariant(perm):
    rng = np.random.default_rng(0)
    temps = np.linspace(5, 15, 12)
    rates = -0.02 * (temps - 9.0) + rng.normal(0, 1e-3, 12)
    ses = np.full(12, 1e-3)
    base = fit_steady_state(temps, rates, ses)
    p = np.array(perm)
    other = fit_steady_state(temps[p], rates[p], ses[p])
    assert other.t_ss == pytest.approx(base.t_ss, rel=1e-12)
    assert other.t_ss_se == pytest.approx(base.t_ss_se, rel=1e-9)


def _curve(t):
    return -0.004 * (t - 9.0) - 1e-4 * (t - 9.0) ** 2


def test_fit_steady_state_recovers_root():
    temps = np.array([5.0, 7.5, 10.0, 12.5, 15.0])
    res = fit_steady_state(temps, _curve(temps), np.full(5, 1e-4))
    assert res.t_ss == pytest.approx(9.0, rel=1e-9)
    assert res.slope_at_root == pytest.approx(-0.004, rel=1e-9)
    assert res.cooling_time == pytest.approx(250.0, rel=1e-9)


def test_fit_steady_state_delta_method_matches_scatter():
    temps = np.array([5.0, 7.5, 10.0, 12.5, 15.0])
    se = np.full(5, 2e-3)
    rng = np.random.default_rng(8)
    roots = []
    for _ in range(2000):
        roots.append(fit_steady_state(temps, _curve(temps) + rng.normal(0, 2e-3, 5), se).t_ss)
    predicted = fit_steady_state(temps, _curve(temps), se).t_ss_se
    assert np.std(roots) == pytest.approx(predicted, rel=0.1)


def test_fit_steady_state_rejects_out_of_range_root():
    temps = np.array([5.0, 7.5, 10.0, 12.5, 15.0])
    with pytest.raises(EstimationError, match="outside"):
        fit_steady_state(temps, -0.004 * (temps - 20.0), np.full(5, 1e-4))
    with pytest.raises(EstimationError, match="no stable"):
        fit_steady_state(temps, 0.004 * temps, np.full(5, 1e-4))


def test_quadratic_scaling_fit():
    w = np.array([0.1, 0.2, 0.3, 0.5])
    c, r2 = fit_quadratic_scaling(w, 3.0 * w**2)
    assert c == pytest.approx(3.0) and r2 == pytest.approx(1.0)


def test_steady_state_scan_guards(noisy):
    from mirrorcool.ensemble import steady_state_scan
    spec = EnsembleSpec(n_traj=4, init_temperature=1.0)
    with pytest.raises(ValueError, match="five"):
        steady_state_scan(noisy, [1, 2, 3], spec)
    with pytest.raises(ValueError, match="noise"):
        steady_state_scan(noisy.with_(noise=NoiseSpec.off()), [1, 2, 3, 4, 5], spec)


def test_noiseless_friction_sign_at_cooling_position():
    from mirrorcool.ensemble import friction_curve
    p = make_params({"trap_freq": 0.3})
    m = SDEModel.build(p, dt=2e-3)
    pts = friction_curve(m, [100.0], EnsembleSpec(n_traj=8, p0=1.0, t_end=20.0))
    assert pts[0].rate < 0 and pts[0].analytic < 0
