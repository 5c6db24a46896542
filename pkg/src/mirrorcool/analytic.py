"""Closed-form forces, friction, capture range and temperatures.

All positions ``x0`` are node-relative: the distance (in 1/k0) from the pump
node nearest to c*tau.  The absolute distance to the mirror is
``n*pi + x0`` with ``n = round(omega0*tau/pi)``; every trigonometric factor
below is invariant under that shift of n*pi, so only the delay-independent
term of the full friction force needs the absolute value.

Units: hbar = k0 = 1, rates in Gamma, temperatures in hbar*Gamma/k_B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy.optimize import brentq, minimize_scalar

from .core import PhysicalParams, derive, temperature_to_si
from .specfun import J1_FIRST_ZERO, sinc, spatial_average_integral


class AnalyticError(ValueError):
    pass


@dataclass(frozen=True)
class ForceResult:
    value: float
    breakdown: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TemperatureResult:
    t_mirror: float
    t_doppler: float
    t_combined: float
    valid: bool
    t_mirror_approx: float = math.nan
    reason: str = ""

    def to_si(self, params: PhysicalParams) -> dict[str, float]:
        return {k: temperature_to_si(getattr(self, k), params)
                for k in ("t_mirror", "t_doppler", "t_combined", "t_mirror_approx")}


def _sum_result(**terms: float) -> ForceResult:
    return ForceResult(value=math.fsum(terms.values()), breakdown=dict(terms))


def _pos(params: PhysicalParams, x0: float | None) -> float:
    return params.trap_center if x0 is None else float(x0)


def node_index(params: PhysicalParams) -> int:
    return round(params.omega0 * params.delay_tau / math.pi)


def absolute_position(params: PhysicalParams, x0: float | None = None) -> float:
    return node_index(params) * math.pi + _pos(params, x0)


def _gd(params: PhysicalParams) -> float:
    """g^2 D(Delta), the light shift per unit continuum intensity."""
    return params.coupling_g**2 * derive(params).d_delta


def static_force(params: PhysicalParams, x0: float | None = None) -> ForceResult:
    """Time-independent force of the pump standing wave and its reflection.

    The first term is minus the gradient of the dipole potential
    g^2 D |A|^2 sin^2(k0 x); the second is the lowest-order correction from the
    atom's own scattered field.
    """
    x = _pos(params, x0)
    gd = _gd(params)
    a2 = params.pump_amplitude_sq
    s1 = math.sin(x)
    return _sum_result(
        pump_interaction=-a2 * gd * math.sin(2 * x),
        back_action=a2 * gd * 0.5 * math.pi * gd * s1 * s1 * (4 * math.cos(x) ** 2 - 1),
    )


def friction_coefficient(params: PhysicalParams, x0: float | None = None,
                         tau: float | None = None) -> float:
    """beta in F = -beta*v for the delay-dominated friction force."""
    x = _pos(params, x0)
    tau = params.delay_tau if tau is None else tau
    return 2 * math.pi * tau * params.pump_amplitude_sq * _gd(params) ** 2 * math.sin(4 * x)


def friction_longitudinal(params: PhysicalParams, x0: float | None = None,
                          v: float = 1.0, approx: bool = True) -> ForceResult:
    """Velocity-linear friction along the mirror axis.

    ``approx=True`` keeps only the delay term.  Otherwise the non-delay term
    2*pi*v*|A|^2 (g^2 D)^2 sin^2(2 k0 x0)/omega0 is reported as well.
    """
    x = _pos(params, x0)
    delay = -friction_coefficient(params, x) * v
    if approx:
        return _sum_result(delay=delay)
    non_delay = (2 * math.pi * v * params.pump_amplitude_sq * _gd(params) ** 2
                 * math.sin(2 * x) ** 2 / params.omega0)
    return _sum_result(non_delay=non_delay, delay=delay)


def friction_familiar(params: PhysicalParams, x0: float | None = None,
                      v: float = 1.0) -> ForceResult:
    """Far-detuned form written with s, the cross-section and the waist."""
    x = _pos(params, x0)
    d = derive(params)
    value = (-4 * v * d.saturation_s * params.gamma * d.sigma_a
             / (math.pi * params.waist**2) * params.delay_tau * math.sin(4 * x))
    return _sum_result(delay=value)


def friction_transverse(params: PhysicalParams, x0: float | None = None,
                        v: float = 1.0, r0: float = 0.0) -> ForceResult:
    """Friction perpendicular to the axis for a Gaussian mode g(r) = g exp(-r^2/w^2)."""
    x = _pos(params, x0)
    w = params.waist
    g_r = params.coupling_g * math.exp(-(r0 / w) ** 2)
    dg_r = -2 * r0 / w**2 * g_r
    d = derive(params).d_delta
    value = (-4 * math.pi * v * params.delay_tau * params.pump_amplitude_sq
             * (2 * g_r * dg_r * d) ** 2 * math.sin(x) ** 3 * math.cos(x))
    return _sum_result(delay=value)


def effective_delay(params: PhysicalParams, omega_t: float) -> float:
    """tau * sinc(2 omega_t tau): the delay seen by an oscillating atom."""
    return params.delay_tau * sinc(2 * omega_t * params.delay_tau)


def friction_trapped(params: PhysicalParams, x0: float | None = None,
                     v_m: float = 1.0, omega_t: float | None = None) -> ForceResult:
    if omega_t is None:
        omega_t = params.trap_omega
    if omega_t < 0:
        raise AnalyticError("omega_t must be non-negative")
    beta = friction_coefficient(params, x0, tau=effective_delay(params, omega_t))
    return _sum_result(delay=-beta * v_m)


def heating_coefficient(params: PhysicalParams, x0: float | None = None) -> float:
    """Upsilon in dp^2/dt = Upsilon p^2 for a free atom (negative cools)."""
    return -2 * friction_coefficient(params, x0) / params.mass


def cooling_time(params: PhysicalParams, x0: float | None = None) -> float:
    """1/e time of the momentum amplitude, 2/|Upsilon|, in 1/Gamma."""
    ups = heating_coefficient(params, x0)
    return math.inf if ups == 0 else 2.0 / abs(ups)


def heating_rate_avg(params: PhysicalParams, x0: float | None = None,
                     p0: float = 0.0, omega_t: float | None = None) -> float:
    """Rate of change of p0^2 averaged over one trap oscillation.

    p0 is the oscillation's peak momentum and x_m = p0/(m omega_t) its
    amplitude.  For x_m -> 0 this is half the free-atom rate Upsilon*p0^2.
    """
    if omega_t is None:
        omega_t = params.trap_omega
    if p0 < 0:
        raise AnalyticError("p0 must be non-negative")
    if p0 == 0:
        return 0.0
    if omega_t <= 0:
        raise AnalyticError("unbounded excursion: omega_t must be positive for p0 > 0")
    x = _pos(params, x0)
    x_m = p0 / (params.mass * omega_t)
    avg = spatial_average_integral(4 * x, 4 * x_m)
    return (-(2 * p0**2 / params.mass) * effective_delay(params, omega_t)
            * params.pump_amplitude_sq * _gd(params) ** 2 * avg)


def capture_range(params: PhysicalParams, omega_t: float | None = None,
                  x0: float | None = None) -> float:
    """Largest peak momentum still cooled by the orbit-averaged force."""
    if omega_t is None:
        omega_t = params.trap_omega
    if omega_t <= 0:
        raise AnalyticError("omega_t must be positive")
    x = _pos(params, x0)
    scale = params.mass * omega_t
    if abs(math.cos(4 * x)) < 1e-12 and math.sin(4 * x) > 0:
        return J1_FIRST_ZERO / 4 * scale

    def rate(p):
        return heating_rate_avg(params, x, p, omega_t) / p**2

    lo, hi = 1e-6, 20 * scale
    if not rate(lo) < 0:
        raise AnalyticError("no finite capture range at this position")
    n = 400
    prev = lo
    for i in range(1, n + 1):
        p = lo + (hi - lo) * i / n
        if rate(p) >= 0:
            return brentq(rate, prev, p, xtol=1e-12 * scale, rtol=1e-14)
        prev = p
    raise AnalyticError("no finite capture range at this position")


def capture_temperature(p0: float, params: PhysicalParams) -> float:
    """Temperature equivalent p0^2/(2m) of an oscillation with peak momentum p0."""
    return p0**2 / (2 * params.mass)


def diffusion_coefficient(params: PhysicalParams, x: float | None = None) -> float:
    """Momentum diffusion constant to lowest order in s."""
    x = _pos(params, x)
    s = derive(params).saturation_s
    return params.gamma * s * (math.cos(x) ** 2 + 0.4 * math.sin(x) ** 2)


def doppler_temperature(params: PhysicalParams) -> float:
    """-Gamma(Delta^2+Gamma^2)/(2 Delta); negative (heating) for blue detuning."""
    d, g = params.detuning, params.gamma
    if d == 0:
        return math.inf
    return -g * (d * d + g * g) / (2 * d)


def mirror_temperature(params: PhysicalParams, x0: float | None = None,
                       omega_t: float | None = None) -> float:
    """Equilibrium of mirror friction against lowest-order diffusion.

    Written with omega_t/sin(2 omega_t tau) = 1/(2 tau sinc(2 omega_t tau)) so
    that omega_t = 0 is the free-atom limit.  Returns +-inf where the
    friction vanishes.
    """
    if omega_t is None:
        omega_t = params.trap_omega
    x = _pos(params, x0)
    g2 = params.coupling_g**2
    phase = 2 * omega_t * params.delay_tau
    s4 = math.sin(4 * x)
    num = params.gamma / g2 * (2 + 3 * math.cos(x) ** 2) / (5 * math.pi)
    # treat rounding-level zeros of either factor as exact zeros
    if abs(s4) < 1e-12 or (phase > 0 and abs(math.sin(phase)) < 1e-12):
        return math.inf
    return num / (2 * params.delay_tau * sinc(phase) * s4)


def steady_state_temperatures(params: PhysicalParams, x0: float | None = None,
                              omega_t: float | None = None) -> TemperatureResult:
    t_m = mirror_temperature(params, x0, omega_t)
    t_d = doppler_temperature(params)
    d = derive(params)
    t_approx = math.pi * params.waist**2 / (8 * d.sigma_a * params.delay_tau)
    if not math.isfinite(t_m):
        return TemperatureResult(t_m, t_d, math.nan, False, t_approx,
                                 "mirror friction vanishes at this position or trap frequency")
    if t_m <= 0 or t_d <= 0:
        return TemperatureResult(t_m, t_d, math.nan, False, t_approx,
                                 "heating region: a temperature is negative")
    t_c = 1.0 / (1.0 / t_m + 1.0 / t_d)
    return TemperatureResult(t_m, t_d, t_c, True, t_approx)


def minimum_mirror_temperature(params: PhysicalParams,
                               omega_t: float | None = None) -> tuple[float, float]:
    """(x0, T_M) minimising the mirror temperature over one half wavelength."""
    best = (math.nan, math.inf)
    # the two cooling intervals where sin(4 x0) > 0
    for lo, hi in ((-math.pi / 2, -math.pi / 4), (0.0, math.pi / 4)):
        res = minimize_scalar(lambda x: mirror_temperature(params, x, omega_t),
                              bounds=(lo + 1e-9, hi - 1e-9), method="bounded",
                              options={"xatol": 1e-10})
        if res.fun < best[1]:
            best = (float(res.x), float(res.fun))
    return best


def at_detuning(params: PhysicalParams, detuning: float) -> PhysicalParams:
    """Same saturation parameter at a different detuning (pump rescaled)."""
    g2 = params.gamma**2
    scale = (detuning**2 + g2) / (params.detuning**2 + g2)
    return replace(params, detuning=detuning, pump_rate=params.pump_rate * scale)


def crossover_detuning(params: PhysicalParams, x0: float | None = None,
                       omega_t: float | None = None,
                       window: tuple[float, float] = (1.0, 100.0)) -> float:
    """|Delta| (red side, fixed s) where the mirror and Doppler temperatures meet."""
    x = _pos(params, x0)

    def diff(mag):
        q = at_detuning(params, -mag * params.gamma)
        return mirror_temperature(q, x, omega_t) - doppler_temperature(q)

    lo, hi = (w * params.gamma for w in window)
    f_lo, f_hi = diff(lo / params.gamma), diff(hi / params.gamma)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise AnalyticError(f"no crossing in |detuning| window {window}")
    return brentq(diff, window[0], window[1], xtol=1e-12)
