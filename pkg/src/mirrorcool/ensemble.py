"""Trajectory ensembles and the rate, capture-range and steady-state estimators.

Energy bookkeeping uses the oscillation amplitude
p_amp^2 = p^2 + (m omega_t (x - x_t))^2, whose rate of change is 2 p F and
whose phase average is 2 <p^2>.  The reported temperature is therefore
<p_amp^2>/(2m), i.e. <p^2>/m for an ensemble spread over the oscillation
phase.

With momentum noise on, each trajectory also carries M, the martingale part
of its p^2 increments.  M has zero mean, so subtracting it leaves the
estimand unchanged while removing most of the Brownian scatter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtri

from . import analytic
from .sde import SDEModel, init_rng, simulate_batch


class EstimationError(RuntimeError):
    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


@dataclass(frozen=True)
class EnsembleSpec:
    n_traj: int = 64
    init_temperature: float | None = None
    p0: float | None = None
    t_end: float | None = None
    sample_every: int = 100
    master_seed: int = 0
    control_variate: bool = True
    stratified: bool = True
    batch_size: int = 64
    window_start: float | None = None

    def __post_init__(self):
        if self.n_traj < 2:
            raise ValueError("n_traj must be at least 2")
        if (self.init_temperature is None) == (self.p0 is None):
            raise ValueError("give exactly one of init_temperature and p0")
        if self.init_temperature is not None and self.init_temperature < 0:
            raise ValueError("init_temperature must be non-negative")
        if self.p0 is not None and self.p0 < 0:
            raise ValueError("p0 must be non-negative")


@dataclass(eq=False)
class EnsembleStats:
    t: np.ndarray
    mean_p2: np.ndarray
    mean_pamp2: np.ndarray
    temperature: np.ndarray
    rate: float
    rate_se: float
    dTdt: float
    dTdt_se: float
    t_measured: float
    window: tuple[float, float]
    cooled: np.ndarray
    slopes: np.ndarray = field(repr=False)
    n_traj: int = 0

    @property
    def p2_rate(self) -> float:
        """d<p^2>/dt under equipartition (half the amplitude rate)."""
        return 0.5 * self.rate


def measurement_window(model: SDEModel, t_end: float, start: float | None = None):
    lo = 2 * model.params.delay_tau + 1.0 if start is None else start
    hi = min(t_end, 0.8 * model.grid.recurrence_time)
    if hi <= lo:
        raise EstimationError(f"empty measurement window [{lo:g}, {hi:g}]")
    return lo, hi


def default_t_end(model: SDEModel) -> float:
    return 0.8 * model.grid.recurrence_time


def initial_conditions(model: SDEModel, spec: EnsembleSpec):
    n = spec.n_traj
    m = model.params.mass
    xt = model.trap.center
    i = np.arange(n)
    if spec.p0 is not None:
        if not spec.stratified:
            return np.full(n, xt), np.full(n, float(spec.p0))
        # oscillation phases spread evenly, starting from the cosine phase
        phase = 2 * math.pi * i / n
        wt = model.trap.omega
        xm = spec.p0 / (m * wt) if wt > 0 else 0.0
        return xt + xm * np.sin(phase), spec.p0 * np.cos(phase)
    u = np.array([init_rng(spec.master_seed, int(k)).random() for k in i])
    q = (i + u) / n if spec.stratified else u
    return np.full(n, xt), math.sqrt(m * spec.init_temperature) * ndtri(q)


def _ols_slopes(t: np.ndarray, y: np.ndarray):
    tc = t - t.mean()
    slopes = (y - y.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)
    return slopes, y.mean(axis=1)


def _mean(v) -> float:
    return math.fsum(np.asarray(v, dtype=float).tolist()) / len(v)


def _se(v: np.ndarray, paired: bool) -> float:
    n = len(v)
    if paired and n % 2 == 0:
        d = v[0::2] - v[1::2]
        return math.sqrt(math.fsum((d * d).tolist())) / n
    mu = _mean(v)
    return math.sqrt(math.fsum(((v - mu) ** 2).tolist()) / (n - 1) / n)


def run_ensemble(model: SDEModel, spec: EnsembleSpec, backend: str | None = None) -> EnsembleStats:
    """Run ``spec.n_traj`` trajectories and estimate the initial energy rate.

    The rate is the mean of per-trajectory least-squares slopes of
    p_amp^2(t) over the measurement window (equal to the slope of the
    ensemble mean).
    """
    t_end = default_t_end(model) if spec.t_end is None else spec.t_end
    x0, p0 = initial_conditions(model, spec)
    m = model.params.mass
    wt = model.trap.omega
    xt = model.trap.center
    blocks = []
    for s in range(0, spec.n_traj, spec.batch_size):
        idx = np.arange(s, min(s + spec.batch_size, spec.n_traj))
        res = simulate_batch(model, x0[idx], p0[idx], t_end, spec.sample_every,
                             spec.master_seed, idx, backend=backend)
        blocks.append(res)
    t = blocks[0].t
    p = np.concatenate([b.p for b in blocks])
    x = np.concatenate([b.x for b in blocks])
    mart = np.concatenate([b.martingale for b in blocks])
    pamp2 = p * p + (m * wt * (x - xt)) ** 2 if wt > 0 and not model.trap.pinned else p * p
    y = pamp2 - mart if spec.control_variate else pamp2

    lo, hi = measurement_window(model, t[-1], spec.window_start)
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 3:
        raise EstimationError("fewer than three samples in the measurement window")
    slopes, levels = _ols_slopes(t[sel], y[:, sel])
    paired = spec.stratified
    rate = _mean(slopes)
    rate_se = _se(slopes, paired)
    mean_p2 = np.array([_mean(c) for c in (p * p).T])
    mean_pamp2 = np.array([_mean(c) for c in pamp2.T])
    return EnsembleStats(
        t=t, mean_p2=mean_p2, mean_pamp2=mean_pamp2, temperature=mean_pamp2 / (2 * m),
        rate=rate, rate_se=rate_se, dTdt=rate / (2 * m), dTdt_se=rate_se / (2 * m),
        t_measured=_mean(levels) / (2 * m), window=(lo, hi),
        cooled=pamp2[:, -1] <= pamp2[:, 0], slopes=slopes, n_traj=spec.n_traj,
    )


# -- friction curves and capture range ---------------------------------------

@dataclass(frozen=True)
class FrictionPoint:
    p0: float
    rate: float
    rate_se: float
    analytic: float


def friction_curve(model: SDEModel, p0_grid, spec: EnsembleSpec,
                   backend: str | None = None) -> list[FrictionPoint]:
    """d(p_amp^2)/dt against the initial peak momentum, noise off."""
    if model.noise.enabled:
        model = model.with_(noise=replace(model.noise, momentum=False, field=False))
    out = []
    for p0 in p0_grid:
        st = run_ensemble(model, replace(spec, p0=float(p0), init_temperature=None), backend)
        an = analytic.heating_rate_avg(model.params, model.trap.center, float(p0), model.trap.omega)
        out.append(FrictionPoint(float(p0), st.rate, st.rate_se, an))
    return out


@dataclass(frozen=True)
class CapturePoint:
    omega_t: float
    p_capture: float
    t_capture: float
    p_analytic: float
    t_analytic: float
    bounded: bool


def _model_at(model: SDEModel, omega_t: float) -> SDEModel:
    params = replace(model.params, trap_omega=omega_t)
    return model.with_(params=params, trap=replace(model.trap, omega=omega_t))


def capture_momentum(model: SDEModel, spec: EnsembleSpec, backend: str | None = None,
                     factors=(0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0),
                     rtol: float = 2e-3) -> float:
    """Smallest peak momentum at which the simulated rate turns positive (nan if none)."""
    if model.noise.enabled:
        model = model.with_(noise=replace(model.noise, momentum=False, field=False))
    p_ref = analytic.capture_range(model.params, model.trap.omega, model.trap.center)
    cache: dict[float, float] = {}

    def rate(p0):
        if p0 not in cache:
            cache[p0] = run_ensemble(model, replace(spec, p0=p0, init_temperature=None),
                                     backend).rate
        return cache[p0]

    prev = None
    for f in factors:
        p0 = f * p_ref
        r = rate(p0)
        if r >= 0:
            if prev is None:
                raise EstimationError("rate already non-negative at the smallest trial momentum",
                                      p0=p0, rate=r)
            return brentq(rate, prev, p0, rtol=rtol, xtol=1e-9 * p_ref)
        prev = p0
    return math.nan


def capture_scan(model: SDEModel, omega_grid, spec: EnsembleSpec,
                 backend: str | None = None) -> list[CapturePoint]:
    out = []
    for wt in omega_grid:
        mw = _model_at(model, float(wt))
        pc = capture_momentum(mw, spec, backend)
        pa = analytic.capture_range(mw.params, float(wt), mw.trap.center)
        out.append(CapturePoint(
            float(wt), pc, analytic.capture_temperature(pc, mw.params), pa,
            analytic.capture_temperature(pa, mw.params), math.isfinite(pc)))
    return out


def fit_quadratic_scaling(omega, temps) -> tuple[float, float]:
    """Least-squares c in T = c omega^2 and the coefficient of determination."""
    w2 = np.asarray(omega, float) ** 2
    y = np.asarray(temps, float)
    c = float(w2 @ y / (w2 @ w2))
    resid = y - c * w2
    r2 = 1 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    return c, r2


# -- steady state -------------------------------------------------------------

@dataclass(frozen=True)
class SteadyStateResult:
    t_ss: float
    t_ss_se: float
    coeffs: tuple[float, float, float]
    coeff_cov: np.ndarray
    slope_at_root: float
    points: list

    @property
    def cooling_time(self) -> float:
        """1/e time of temperature relaxation near the root (1/Gamma)."""
        return 1.0 / abs(self.slope_at_root)


def ensemble_seed(master_seed: int, j: int) -> int:
    return int(np.random.SeedSequence([master_seed, j]).generate_state(1, np.uint64)[0])


def fit_steady_state(temps, rates, ses) -> SteadyStateResult:
    """Weighted quadratic fit of dT/dt against T and its stable root.

    The stable root is the smallest positive root with negative slope; its
    standard error comes from the fit covariance by linearisation.
    """
    temps = np.asarray(temps, float)
    rates = np.asarray(rates, float)
    ses = np.asarray(ses, float)
    coeffs, cov = np.polyfit(temps, rates, 2, w=1.0 / ses, cov="unscaled")
    a, b, c = coeffs
    roots = np.roots(coeffs) if a != 0 else np.array([-c / b])
    good = [float(r.real) for r in roots
            if abs(r.imag) < 1e-12 and r.real > 0 and 2 * a * r.real + b < 0]
    points = list(zip(temps.tolist(), rates.tolist(), ses.tolist()))
    if not good:
        raise EstimationError("no stable positive root of the fitted dT/dt curve",
                              coeffs=tuple(coeffs), points=points)
    r = min(good)
    if not temps.min() <= r <= temps.max():
        raise EstimationError(f"fitted root {r:g} lies outside the sampled range",
                              coeffs=tuple(coeffs), points=points)
    slope = 2 * a * r + b
    jac = -np.array([r * r, r, 1.0]) / slope
    se = float(math.sqrt(jac @ cov @ jac))
    return SteadyStateResult(r, se, tuple(float(v) for v in coeffs), cov, float(slope), points)


def steady_state_scan(model: SDEModel, t0_grid, spec: EnsembleSpec,
                      backend: str | None = None) -> tuple[SteadyStateResult, list[EnsembleStats]]:
    """Initial dT/dt for thermal ensembles at each T0 and the fitted equilibrium.

    The abscissa is the measured temperature over the window, not T0: atoms
    start at the trap centre, so equipartition halves the initial kinetic T0.
    """
    if len(t0_grid) < 5:
        raise ValueError("steady-state scan needs at least five initial temperatures")
    if not model.noise.momentum:
        raise ValueError("steady-state scan requires momentum noise")
    stats = []
    for j, t0 in enumerate(t0_grid):
        sp = replace(spec, init_temperature=float(t0), p0=None,
                     master_seed=ensemble_seed(spec.master_seed, j))
        stats.append(run_ensemble(model, sp, backend))
    res = fit_steady_state([s.t_measured for s in stats], [s.dTdt for s in stats],
                           [s.dTdt_se for s in stats])
    return res, stats
