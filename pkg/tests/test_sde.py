import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrorcool import analytic as an
from mirrorcool import make_params, sde
from mirrorcool.sde import NoiseSpec, SDEModel, SimulationError, SystemState

from conftest import X_BEST


@pytest.fixture(scope="module")
def model():
    return SDEModel.build(make_params(), dt=1e-3, noise=NoiseSpec.off())


def test_mode_grid(model):
    g = model.grid
    assert g.n_modes == 256 and g.spacing == 0.1
    assert g.detunings[g.pump_index] == 0.0
    assert g.recurrence_time == pytest.approx(2 * math.pi / 0.1)
    assert g.max_detuning == pytest.approx(12.8)
    # symmetric up to the one unpaired mode of an even grid
    assert np.allclose(g.detunings[1:], -g.detunings[1:][::-1])
    assert np.allclose(g.wavenumbers, 1 - g.detunings / g.omega0)


def test_mode_function_at_mirror_and_antinode(model):
    k = np.arange(model.grid.n_modes)
    assert np.all(sde.mode_function(model.grid, k, 0.0, absolute=True) == 0.0)
    pump = model.grid.pump_index
    n = 12345679
    assert abs(sde.mode_function(model.grid, pump, math.pi / 2 + n * math.pi, absolute=True)) == pytest.approx(1.0, abs=1e-9)


def test_mode_function_absolute_matches_extended_precision(model):
    mp.mp.dps = 50
    g = model.grid
    x = g.node_position + X_BEST
    for k in (0, 37, g.pump_index, 200, 255):
        exact = mp.sin(mp.mpf(x) * (1 - mp.mpf(float(g.detunings[k])) / mp.mpf(g.omega0)))
        assert sde.mode_function(g, k, x, absolute=True) == pytest.approx(float(exact), abs=1e-12)


def test_mode_function_phase_offset(model):
    g = model.grid
    n = g.node_index
    xi = X_BEST
    tau_n = n * math.pi / g.omega0
    for k in (3, 90, 180):
        absolute = sde.mode_function(g, k, n * math.pi + xi, absolute=True)
        d = g.detunings[k]
        expected = (-1) ** n * math.sin(xi - d * tau_n - d / g.omega0 * xi)
        # n*pi itself carries a few 1e-9 of rounding at this n
        assert absolute == pytest.approx(expected, abs=2e-8)
        assert sde.mode_function(g, k, xi) == pytest.approx((-1) ** n * absolute, abs=2e-8)


def test_total_field_single_mode_and_empty(model):
    st_ = model.initial_state(x=0.77)
    e, _ = sde.total_field(st_, model.grid)
    assert abs(e) ** 2 == pytest.approx(625 * math.sin(0.77) ** 2, rel=1e-12)
    empty = SystemState(0.3, 0.0, np.zeros(model.grid.n_modes, complex))
    assert sde.total_field(empty, model.grid) == (0j, 0j)


def test_total_field_gradient_finite_difference(model):
    rng = np.random.default_rng(4)
    a = rng.normal(size=256) + 1j * rng.normal(size=256)
    h = 1e-6
    for x in (-1.1, 0.4, 2.0):
        _, grad = sde.total_field(SystemState(x, 0.0, a), model.grid)
        ep, _ = sde.total_field(SystemState(x + h, 0.0, a), model.grid)
        em, _ = sde.total_field(SystemState(x - h, 0.0, a), model.grid)
        fd = (ep - em) / (2 * h)
        assert abs(grad - fd) / abs(grad) < 1e-6


def test_drift_pump_only(model):
    x = 0.9
    st_ = model.initial_state(x=x)
    dx, dp, _ = sde.drift(st_, model)
    kt = model.params.mass * model.trap.omega**2
    expected = -model.u0 * 625 * math.sin(2 * x) - kt * (x - model.trap.center)
    assert dx == 0.0
    assert dp == pytest.approx(expected, rel=1e-12)


def test_drift_free_rotation_conserves_photons(model):
    m0 = model.with_(u0=0.0, gamma_sc=0.0)
    rng = np.random.default_rng(1)
    a = rng.normal(size=256) + 1j * rng.normal(size=256)
    _, _, da = sde.drift(SystemState(0.3, 1.0, a), m0)
    assert np.allclose(da, 1j * m0.grid.detunings * a)
    assert abs(np.sum(2 * (np.conj(a) * da).real)) < 1e-10


def test_drift_at_node_fixed_point():
    p = make_params({"trap_offset": 0.0})
    m = SDEModel.build(p, noise=NoiseSpec.off())
    dx, dp, da = sde.drift(m.initial_state(), m)
    assert dx == 0.0 and abs(dp) < 1e-12
    assert np.all(da == 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.integers(0, 2**31))
def test_momentum_drift_is_real(x, seed):
    m = SDEModel.build(make_params(), noise=NoiseSpec.off())
    rng = np.random.default_rng(seed)
    a = 10 * (rng.normal(size=256) + 1j * rng.normal(size=256))
    sde.drift(SystemState(x, 0.0, a), m)  # raises on a non-negligible imaginary residue


def test_field_noise_covariance_is_rank_one_psd(model):
    f = sde.mode_function(model.grid, np.arange(256), 0.4)
    cov = NoiseSpec.field_covariance(model.gamma_sc, f)
    ev = np.linalg.eigvalsh(cov)
    assert ev.min() > -1e-15
    assert np.sum(ev > 1e-12 * ev.max()) == 1
    with pytest.raises(ValueError):
        NoiseSpec(cross_correlation=0.1)


def test_dt_bound_names_max_detuning(model):
    with pytest.raises(SimulationError, match="12.8"):
        model.with_(dt=0.01)
    with pytest.raises(SimulationError):
        model.with_(dt=0.0)


def test_trap_energy_conserved_over_one_period():
    m = SDEModel.build(make_params(), dt=1e-3, noise=NoiseSpec.off(), u0=0.0, gamma_sc=0.0)
    period = 2 * math.pi / m.trap.omega
    res = sde.simulate_batch(m, [m.trap.center + 0.3], [50.0], period, 1)
    mw = m.params.mass * m.trap.omega
    energy = res.p[0] ** 2 + (mw * (res.x[0] - m.trap.center)) ** 2
    assert np.max(np.abs(energy / energy[0] - 1)) < 1e-6
    # one full period returns to the start
    assert res.x[0, -1] == pytest.approx(m.trap.center + 0.3, abs=1e-3)


def test_photon_number_conserved_without_scattering():
    m = SDEModel.build(make_params(), dt=1e-3, noise=NoiseSpec.off(), gamma_sc=0.0)
    res = sde.simulate_batch(m, [m.trap.center], [120.0], 50.0, 1000)
    assert np.max(np.abs(res.photons[0] / 625 - 1)) < 1e-9


def test_scattering_only_removes_photons():
    m = SDEModel.build(make_params(), dt=1e-3, noise=NoiseSpec.off())
    res = sde.simulate_batch(m, [m.trap.center], [120.0], 20.0, 200)
    assert np.all(np.diff(res.photons[0]) <= 1e-9)


def test_single_step_force_matches_static_force():
    p = make_params({"trap_omega": 0.0})
    m = SDEModel.build(p, dt=1e-3, noise=NoiseSpec.off())
    for x in (0.3, X_BEST, 1.2):
        new = sde.step(m.initial_state(x=x), m)
        force = new.p / m.dt
        expected = an.static_force(p, x).breakdown["pump_interaction"]
        assert force == pytest.approx(expected, rel=1e-6)


def test_noiseless_runs_ignore_seed():
    m = SDEModel.build(make_params(), dt=2e-3, noise=NoiseSpec.off())
    a = sde.run_trajectory(m, m.initial_state(p=80.0), 5.0, 50, seed=1)
    b = sde.run_trajectory(m, m.initial_state(p=80.0), 5.0, 50, seed=2)
    assert np.array_equal(a.rows(), b.rows())


def test_trajectory_reproducible_bytes(tmp_path):
    m = SDEModel.build(make_params(), dt=2e-3)
    for name in ("a.csv", "b.csv"):
        sde.run_trajectory(m, m.initial_state(p=30.0), 4.0, 20, seed=99).to_csv(tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    c = sde.run_trajectory(m, m.initial_state(p=30.0), 4.0, 20, seed=100)
    assert not np.array_equal(c.p, sde.Trajectory.from_csv(tmp_path / "a.csv").p)


def test_trajectory_csv_round_trip(tmp_path):
    m = SDEModel.build(make_params(), dt=2e-3)
    tr = sde.run_trajectory(m, m.initial_state(p=30.0), 1.0, 50, seed=5)
    tr.to_csv(tmp_path / "t.csv")
    back = sde.Trajectory.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.rows(), tr.rows())
    assert back.seed == 5 and back.metadata["noise"]["approximation"]
    assert (tmp_path / "t.csv").read_text().splitlines()[1].startswith("t[1/Gamma],x[1/k0]")


def test_zero_length_trajectory():
    m = SDEModel.build(make_params(), noise=NoiseSpec.off())
    tr = sde.run_trajectory(m, m.initial_state(p=10.0), 0.0, 10)
    assert len(tr.t) == 1 and tr.p[0] == 10.0 and tr.photons[0] == pytest.approx(625)


def test_recurrence_cap_warns():
    m = SDEModel.build(make_params(), dt=5e-3, noise=NoiseSpec.off(), u0=0.0, gamma_sc=0.0)
    with pytest.warns(sde.RecurrenceWarning):
        res = sde.simulate_batch(m, [m.trap.center], [0.0], 100.0, 100)
    assert res.t[-1] < m.grid.recurrence_time


def test_blow_up_reports_step():
    m = SDEModel.build(make_params(), noise=NoiseSpec.off(), u0=-1e305)
    with pytest.raises(SimulationError) as exc:
        sde.run_trajectory(m, m.initial_state(x=0.3), 1.0, 10)
    assert exc.value.step is not None and exc.value.step >= 0


def test_noiseless_envelope_decay_matches_orbit_average():
    p = make_params({"trap_freq": 0.3})
    m = SDEModel.build(p, dt=2e-3, noise=NoiseSpec.off())
    p0 = 150.0
    res = sde.simulate_batch(m, [m.trap.center], [p0], 50.0, 100)
    mw = p.mass * p.trap_omega
    e = res.p[0] ** 2 + (mw * (res.x[0] - m.trap.center)) ** 2
    sel = res.t >= 2 * p.delay_tau + 1
    slope = np.polyfit(res.t[sel], e[sel], 1)[0]
    assert slope == pytest.approx(an.heating_rate_avg(p, None, p0), rel=0.2)


@pytest.mark.parametrize("tau", [0.25, 0.5])
def test_retarded_force_arrives_after_round_trip(tau):
    # a very heavy free atom stays put; its force is read off dp/dt
    p = make_params({"delay_tau": tau, "trap_omega": 0.0, "mass": 1e15})
    m = SDEModel.build(p, dt=1e-3, noise=NoiseSpec.off())
    res = sde.simulate_batch(m, [X_BEST], [0.0], 1.5 + 2 * tau, 1)
    force = np.diff(res.p[0]) / m.dt
    t = res.t[1:]
    slope = np.gradient(force, t)
    late = t > 2 * tau - 0.25
    t_star = t[late][np.argmin(slope[late])]
    resolution = 2 * math.pi / (m.grid.n_modes * m.grid.spacing)
    assert abs(t_star - 2 * tau) < resolution
    # before the echo can return, the force has settled to its prompt value
    early = (t > 0.3) & (t < 2 * tau - 0.3)
    if early.any():
        assert np.ptp(force[early]) < 0.5 * np.ptp(force)


def test_pinned_diffusion_quick():
    p = make_params({"trap_offset": 0.0})
    m = SDEModel.build(p, dt=1e-3, noise=NoiseSpec(True, False), pinned=True)
    n, t_end = 2000, 2.0
    res = sde.simulate_batch(m, np.full(n, 0.0), np.zeros(n), t_end, 2000, master_seed=3)
    var = np.var(res.p[:, -1])
    assert var == pytest.approx(2 * an.diffusion_coefficient(p, 0.0) * t_end, rel=0.15)


def test_backends_agree():
    m = SDEModel.build(make_params(), dt=2e-3)
    kw = dict(t_end=2.0, sample_every=50, master_seed=11)
    a = sde.simulate_batch(m, [m.trap.center] * 3, [10.0, -40.0, 80.0], backend="numba", **kw)
    b = sde.simulate_batch(m, [m.trap.center] * 3, [10.0, -40.0, 80.0], backend="numpy", **kw)
    assert np.allclose(a.data, b.data, rtol=1e-9, atol=1e-9)


def test_batch_composition_does_not_change_trajectories():
    m = SDEModel.build(make_params(), dt=2e-3)
    both = sde.simulate_batch(m, [m.trap.center] * 2, [5.0, 9.0], 1.0, 10, 7, [0, 1])
    second = sde.simulate_batch(m, [m.trap.center], [9.0], 1.0, 10, 7, [1])
    assert np.array_equal(both.data[1], second.data[0])
