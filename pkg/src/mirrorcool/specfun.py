"""Bessel J0/J1, Struve H1, sinc and the orbit-averaging integral.

Real arguments only.  Accuracy targets on [0, 50]: J1 to 1e-12 and H1 to
1e-10 (absolute).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SERIES_MAX_J = 8.0
_SERIES_MAX_H = 12.0
_SMALL_B = 1e-6

# Gauss-Laguerre rule for the Struve-minus-Neumann integral at large x.
_LAG_X, _LAG_W = np.polynomial.laguerre.laggauss(60)


def sinc(x: float) -> float:
    """sin(x)/x, equal to 1 at x = 0."""
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sin(x) / x


def _j01_series(x: float) -> tuple[float, float]:
    y = 0.25 * x * x
    t0, t1 = 1.0, 0.5 * x
    s0, s1 = t0, t1
    for k in range(1, 80):
        t0 *= -y / (k * k)
        t1 *= -y / (k * (k + 1))
        s0 += t0
        s1 += t1
        if abs(t0) < 1e-18 and abs(t1) < 1e-18:
            break
    return s0, s1


def _j01_miller(x: float) -> tuple[float, float]:
    # Backward recurrence normalised by J0 + 2*sum(J_2k) = 1.
    n = 2 * int((x + 30.0 + 3.0 * math.sqrt(x)) / 2.0)
    jp, j, even_sum, j1 = 0.0, 1e-300, 0.0, 0.0
    for k in range(n, 0, -1):
        jm = 2.0 * k / x * j - jp
        jp, j = j, jm
        order = k - 1
        if order == 1:
            j1 = j
        if order > 0 and order % 2 == 0:
            even_sum += j
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            even_sum *= 1e-250
            j1 *= 1e-250
    norm = j + 2.0 * even_sum
    return j / norm, j1 / norm


def _j01(x: float) -> tuple[float, float]:
    ax = abs(x)
    j0, j1 = _j01_series(ax) if ax <= _SERIES_MAX_J else _j01_miller(ax)
    return j0, (j1 if x >= 0 else -j1)


def bessel_j0(x: float) -> float:
    return _j01(x)[0]


def bessel_j1(x: float) -> float:
    """Bessel function of the first kind, order 1 (odd in x)."""
    if x == 0.0:
        return 0.0
    return _j01(x)[1]


J1_FIRST_ZERO = 3.8317059702075125


def _h1_series(x: float) -> float:
    y = 0.25 * x * x
    t = y / (math.gamma(1.5) * math.gamma(2.5))
    s = t
    for k in range(1, 200):
        t *= -y / ((k + 0.5) * (k + 1.5))
        s += t
        if abs(t) < 1e-18 * max(1.0, abs(s)):
            break
    return s


def _y1_hankel(x: float) -> float:
    """Neumann Y1 from the Hankel expansion, truncated at its smallest term."""
    mu = 4.0
    p = q = 0.0
    a = 1.0
    prev = math.inf
    for k in range(200):
        if k > 0:
            a *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if k > 2 and abs(a) > abs(prev):
            break
        prev = a
        r = k % 4
        if r == 0:
            p += a
        elif r == 1:
            q += a
        elif r == 2:
            p -= a
        else:
            q -= a
    chi = x - 0.75 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.sin(chi) + q * math.cos(chi))


def struve_h1(x: float) -> float:
    """Struve function of order 1 for x >= 0."""
    if x < 0:
        raise ValueError("struve_h1 requires x >= 0")
    if x == 0.0:
        return 0.0
    if x <= _SERIES_MAX_H:
        return _h1_series(x)
    # H1 - Y1 = (2x/pi) * int_0^inf exp(-x t) sqrt(1 + t^2) dt
    integral = float(np.sum(_LAG_W * np.sqrt(1.0 + (_LAG_X / x) ** 2))) / x
    return _y1_hankel(x) + 2.0 * x / math.pi * integral


def spatial_average_integral(a: float, b: float) -> float:
    """Integral over one full period of sin(a + b sin T) cos^2 T dT.

    Equals 2*pi*sin(a)*J1(b)/b.  The cos(a) part integrates to zero over a
    full period because its integrand is odd about T = pi.
    """
    if b < 0:
        raise ValueError("b must be non-negative")
    if b < _SMALL_B:
        return math.pi * math.sin(a) * (1.0 - b * b / 8.0)
    return 2.0 * math.pi / b * math.sin(a) * bessel_j1(b)


def half_period_integral(a: float, b: float) -> float:
    """Integral over T in [0, pi] of sin(a + b sin T) cos^2 T dT.

    (pi/b) [sin(a) J1(b) + cos(a) H1(b)]; this is where the Struve term lives.
    """
    if b < 0:
        raise ValueError("b must be non-negative")
    if b < _SMALL_B:
        return 0.5 * math.pi * math.sin(a) + (2.0 / 3.0) * b * math.cos(a)
    return math.pi / b * (math.sin(a) * bessel_j1(b) + math.cos(a) * struve_h1(b))


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 512
    scheme: str = "periodic-trapezoid"

    def __post_init__(self):
        if self.nodes < 64 or self.nodes % 2:
            raise ValueError("nodes must be even and at least 64")
        if self.scheme != "periodic-trapezoid":
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")


def periodic_trapezoid(func, period: float = 2 * math.pi,
                       spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Trapezoid rule for a smooth periodic integrand (spectrally accurate)."""
    t = np.arange(spec.nodes) * (period / spec.nodes)
    return float(np.sum(func(t))) * period / spec.nodes


def spatial_average_quadrature(a: float, b: float,
                               spec: QuadratureSpec = QuadratureSpec()) -> float:
    return periodic_trapezoid(lambda t: np.sin(a + b * np.sin(t)) * np.cos(t) ** 2,
                              spec=spec)
