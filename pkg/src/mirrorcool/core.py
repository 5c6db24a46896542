"""Parameters, unit system and SI conversions.

Simulation units: hbar = 1, time in 1/Gamma, length in 1/k0, momentum in
hbar*k0, energy (and k_B*T) in hbar*Gamma.  Gamma is the atomic half-linewidth
(the population decay rate is 2*Gamma).

Pump normalisation
------------------
``pump_rate`` is the photon flux of the pump beam (photons per 1/Gamma).  The
force and friction formulas are written in terms of the squared amplitude of
the delta-function pump in the frequency continuum, ``|A|^2 = 2*pi*pump_rate``
(see :attr:`PhysicalParams.pump_amplitude_sq`).  A discrete mode grid of
spacing ``dw`` carries the same flux when the pump mode holds
``|alpha|^2 = 2*pi*pump_rate/dw`` photons.
"""

from __future__ import annotations

import ast
import dataclasses
import json
import math
import operator
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

HBAR = 1.054571817e-34
KB = 1.380649e-23
AMU = 1.66053906660e-27
C_LIGHT = 299792458.0


class ParameterError(ValueError):
    """Invalid or missing parameter; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(message)
        self.field = field_name


class AdiabaticityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SIReference:
    """SI constants that fix the conversion of simulation units."""

    wavelength: float = 780.24e-9  # m, 85Rb D2
    gamma: float = 2 * math.pi * 3.03e6  # rad/s, half the D2 natural linewidth
    mass: float = 85 * AMU  # kg

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def recoil_omega(self) -> float:
        """hbar k0^2 / (2 m) in rad/s."""
        return HBAR * self.k0**2 / (2 * self.mass)

    @property
    def omega0(self) -> float:
        return 2 * math.pi * C_LIGHT / self.wavelength


_DEFAULT_SI = SIReference()
WAVELENGTH = 2 * math.pi  # lambda in units of 1/k0
BASELINE_WAIST_M = 0.7e-6


def _sigma_a() -> float:
    # 3 lambda^2 / (2 pi) with lambda = 2 pi / k0
    return 3 * WAVELENGTH**2 / (2 * math.pi)


def coupling_from_waist(waist: float, gamma: float = 1.0) -> float:
    """Coupling g such that 2 pi g^2 / Gamma = 4 sigma_a / (pi w^2)."""
    g2 = 2 * gamma * _sigma_a() / (math.pi**2 * waist**2)
    return math.sqrt(g2)


@dataclass(frozen=True)
class PhysicalParams:
    gamma: float = 1.0
    detuning: float = -10.0
    coupling_g: float = 0.0
    pump_rate: float = 62.5 / (2 * math.pi)
    delay_tau: float = 0.25
    k0: float = 1.0
    mass: float = 0.0
    trap_omega: float = 0.5 * 2 * math.pi
    trap_offset: float = -3.0 / 16.0
    waist: float = 0.0
    si_reference: SIReference | None = field(default=_DEFAULT_SI)

    # -- derived conveniences -------------------------------------------------
    @property
    def pump_amplitude_sq(self) -> float:
        """|A|^2 of the continuum pump (2 pi times the photon flux)."""
        return 2 * math.pi * self.pump_rate

    @property
    def unit_rate(self) -> float:
        """SI value (rad/s) of the simulation frequency unit."""
        return self._si().gamma / self.gamma

    @property
    def omega0(self) -> float:
        """Pump angular frequency in simulation units (= c in units of Gamma/k0)."""
        return self._si().omega0 / self.unit_rate

    @property
    def trap_center(self) -> float:
        """Trap centre relative to the pump node nearest c*tau, in 1/k0."""
        return self.trap_offset * WAVELENGTH

    @property
    def spring_constant(self) -> float:
        return self.mass * self.trap_omega**2

    def _si(self) -> SIReference:
        if self.si_reference is None:
            raise ParameterError("si_reference", "missing SI reference")
        return self.si_reference

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if self.si_reference is not None:
            d["si_reference"] = dataclasses.asdict(self.si_reference)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PhysicalParams":
        d = dict(d)
        si = d.pop("si_reference", None)
        return cls(**d, si_reference=SIReference(**si) if si is not None else None)


@dataclass(frozen=True)
class DerivedParams:
    d_delta: float
    saturation_s: float
    sigma_a: float
    light_shift_u0: float
    scatter_gamma: float
    pump_photons: float
    mode_spacing: float


# -- config parsing -----------------------------------------------------------

_PARAM_KEYS = {
    "gamma", "detuning", "coupling_g", "pump_rate", "delay_tau", "k0", "mass",
    "trap_omega", "trap_offset", "waist",
}
_ALIAS_KEYS = {
    "trap_freq",  # trap_omega / (2 pi)
    "waist_um",  # waist in micrometres
    "wavelength_nm", "gamma_si", "mass_amu",
}
PARAM_KEYS = frozenset(_PARAM_KEYS | _ALIAS_KEYS)

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow,
}
_NAMES = {"pi": math.pi, "e": math.e}


def parse_number(text: str) -> float:
    """Parse a float or a small arithmetic expression such as ``62.5/(2*pi)``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported expression: {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


def read_config_file(path) -> dict[str, str]:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError("<config>", f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def make_params(config: Mapping[str, Any] | None = None) -> PhysicalParams:
    """Build validated :class:`PhysicalParams` from a key-value mapping.

    Every key is optional; omitted keys take the 85Rb baseline values
    (|A|^2 = 62.5 Gamma, i.e. a flux of 62.5 Gamma/(2 pi), Delta = -10 Gamma,
    tau = 0.25/Gamma, w = 0.7 um).  Values may be numbers or strings accepted
    by :func:`parse_number`.
    """
    cfg: dict[str, float] = {}
    for key, value in (config or {}).items():
        if key not in PARAM_KEYS:
            raise ParameterError(key, f"unknown parameter {key!r}")
        try:
            v = parse_number(value) if isinstance(value, str) else float(value)
        except (TypeError, ValueError):
            raise ParameterError(key, f"{key} is not a number: {value!r}") from None
        if not math.isfinite(v):
            raise ParameterError(key, f"{key} must be finite")
        cfg[key] = v

    si = SIReference(
        wavelength=cfg.pop("wavelength_nm", _DEFAULT_SI.wavelength * 1e9) * 1e-9,
        gamma=cfg.pop("gamma_si", _DEFAULT_SI.gamma),
        mass=cfg.pop("mass_amu", _DEFAULT_SI.mass / AMU) * AMU,
    )
    if "trap_freq" in cfg:
        if "trap_omega" in cfg:
            raise ParameterError("trap_freq", "give trap_freq or trap_omega, not both")
        cfg["trap_omega"] = 2 * math.pi * cfg.pop("trap_freq")
    if "waist_um" in cfg:
        if "waist" in cfg:
            raise ParameterError("waist_um", "give waist_um or waist, not both")
        cfg["waist"] = cfg.pop("waist_um") * 1e-6 * si.k0

    gamma = cfg.get("gamma", 1.0)
    if gamma <= 0:
        raise ParameterError("gamma", "gamma must be positive")
    unit_rate = si.gamma / gamma
    cfg.setdefault("waist", BASELINE_WAIST_M * si.k0)
    if cfg["waist"] <= 0:
        raise ParameterError("waist", "waist must be positive")
    cfg.setdefault("coupling_g", coupling_from_waist(cfg["waist"], gamma))
    cfg.setdefault("mass", unit_rate / (2 * si.recoil_omega))

    params = PhysicalParams(**cfg, si_reference=si)
    validate(params)
    return params


def validate(params: PhysicalParams) -> None:
    p = params
    checks = [
        ("gamma", p.gamma > 0, "gamma must be positive"),
        ("pump_rate", p.pump_rate >= 0, "pump_rate must be non-negative"),
        ("delay_tau", p.delay_tau > 0, "delay_tau must be positive"),
        ("mass", p.mass > 0, "mass must be positive"),
        ("waist", p.waist > 0, "waist must be positive"),
        ("coupling_g", p.coupling_g >= 0, "coupling_g must be non-negative"),
        ("trap_omega", p.trap_omega >= 0, "trap_omega must be non-negative"),
        ("k0", p.k0 == 1.0, "k0 defines the length unit and must be 1"),
        ("trap_offset", -0.5 < p.trap_offset <= 0.5,
         "trap_offset must lie in (-1/2, 1/2] wavelengths"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise ParameterError(name, msg)
    if abs(p.detuning) < 5 * p.gamma:
        warnings.warn(
            f"|detuning| = {abs(p.detuning):g} Gamma: adiabatic elimination "
            "assumes |detuning| >> Gamma", AdiabaticityWarning, stacklevel=3)


def derive(params: PhysicalParams, mode_spacing: float = 0.1) -> DerivedParams:
    """Derived atom-light quantities, including the discrete-mode constants.

    The light shift and scattering rate per photon of a grid with spacing
    ``dw`` are ``U0 = g^2 D(Delta) dw`` and ``gamma = g^2 Gamma/(Delta^2+Gamma^2) dw``,
    so that ``U0 |alpha_pump|^2 = g^2 D(Delta) |A|^2``.
    """
    if not mode_spacing > 0:
        raise ParameterError("mode_spacing", "mode_spacing must be positive")
    p = params
    denom = p.detuning**2 + p.gamma**2
    g2 = p.coupling_g**2
    return DerivedParams(
        d_delta=p.detuning / denom,
        saturation_s=g2 * p.pump_amplitude_sq / denom,
        sigma_a=_sigma_a(),
        light_shift_u0=g2 * p.detuning / denom * mode_spacing,
        scatter_gamma=g2 * p.gamma / denom * mode_spacing,
        pump_photons=p.pump_amplitude_sq / mode_spacing,
        mode_spacing=mode_spacing,
    )


# -- SI conversions -----------------------------------------------------------

def temperature_to_si(t_sim: float, params: PhysicalParams) -> float:
    """Convert a temperature in hbar*Gamma/k_B to kelvin."""
    return t_sim * HBAR * params.unit_rate / KB


def temperature_from_si(t_kelvin: float, params: PhysicalParams) -> float:
    return t_kelvin * KB / (HBAR * params.unit_rate)


def time_to_si(t_sim: float, params: PhysicalParams) -> float:
    return t_sim / params.unit_rate


def time_from_si(t_seconds: float, params: PhysicalParams) -> float:
    return t_seconds * params.unit_rate


def offset_to_position(offset_wavelengths: float) -> float:
    """Node-relative offset in wavelengths -> position in 1/k0."""
    return offset_wavelengths * WAVELENGTH


def params_json(params: PhysicalParams, **extra) -> str:
    d = params.to_dict()
    d["derived"] = {
        "pump_amplitude_sq": params.pump_amplitude_sq,
        "omega0": params.omega0,
        "unit_rate_si": params.unit_rate,
    }
    d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True)
