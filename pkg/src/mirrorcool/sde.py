"""Semiclassical atom + discrete multimode field stochastic simulator.

State: atom position x (node-relative, 1/k0), momentum p (hbar k0) and
complex mode amplitudes alpha_k (sqrt photons).  Equations of motion:

    dx      = p/m dt
    dp      = [-2 U0 Re(E dE*/dx) - 2 gamma Im(E dE*/dx) - k_t (x - x_t)] dt + dP
    dalpha_k = [i Delta_k alpha_k - (i U0 + gamma) E f_k] dt + dA_k

with E = sum_k alpha_k f_k(x), <dP^2> = 2 D(x) dt and dA_k = sqrt(gamma dt) f_k zeta
for one complex standard normal zeta per step.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend, kernels
from .core import PhysicalParams, derive, params_json

# pi split so that n * _PI_HI is exact for |n| < 2**26
_PI_HI = float.fromhex("0x1.921fb50000000p+1")
_PI_LO = math.pi - _PI_HI + 1.2246467991473532e-16

TRAJ_COLUMNS = ("t[1/Gamma]", "x[1/k0]", "p[hbar*k0]", "photons[1]",
                "field_re[sqrt(photons)]", "field_im[sqrt(photons)]")


class SimulationError(RuntimeError):
    def __init__(self, message: str, step: int | None = None, trajectory: int | None = None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class RecurrenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Field modes omega_k = omega0 - Delta_k, Delta_k = (k - n_modes//2) * spacing."""

    n_modes: int
    spacing: float
    omega0: float
    node_index: int
    detunings: np.ndarray
    pump_index: int
    wavenumbers: np.ndarray
    phases: np.ndarray

    @classmethod
    def build(cls, params: PhysicalParams, n_modes: int = 256, spacing: float = 0.1) -> "ModeGrid":
        if n_modes < 1:
            raise ValueError("n_modes must be positive")
        if not spacing > 0:
            raise ValueError("spacing must be positive")
        omega0 = params.omega0
        n = round(omega0 * params.delay_tau / math.pi)
        det = (np.arange(n_modes) - n_modes // 2) * spacing
        tau_n = n * math.pi / omega0
        wn = 1.0 - det / omega0
        ph = det * tau_n
        for arr in (det, wn, ph):
            arr.setflags(write=False)
        return cls(n_modes, spacing, omega0, n, det, n_modes // 2, wn, ph)

    @property
    def eps(self) -> np.ndarray:
        return self.detunings / self.omega0

    @property
    def recurrence_time(self) -> float:
        return 2 * math.pi / self.spacing

    @property
    def max_detuning(self) -> float:
        return float(np.max(np.abs(self.detunings)))

    @property
    def node_position(self) -> float:
        """Absolute distance of the reference node from the mirror (1/k0)."""
        return self.node_index * math.pi


def _reduce(x: float) -> tuple[int, float]:
    n = round(x / math.pi)
    return n, (x - n * _PI_HI) - n * _PI_LO


def mode_function(grid: ModeGrid, k, x: float, absolute: bool = False):
    """f_k at position x.

    By default x is node-relative and the common sign (-1)^node_index is
    dropped.  With ``absolute=True`` x is the distance from the mirror and the
    result is sin(omega_k x / c) with the large argument reduced exactly.
    """
    eps = grid.eps[k]
    if absolute:
        n, xi = _reduce(x)
        sign = -1.0 if n % 2 else 1.0
        return sign * np.sin(xi - eps * x)
    return np.sin(x - grid.phases[k] - eps * x)


def mode_gradient(grid: ModeGrid, k, x: float):
    eps = grid.eps[k]
    return (1.0 - eps) * np.cos(x - grid.phases[k] - eps * x)


@dataclass(eq=False)
class SystemState:
    x: float
    p: float
    alphas: np.ndarray
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(self.x, self.p, self.alphas.copy(), self.t)

    @property
    def photons(self) -> float:
        return float(np.sum(np.abs(self.alphas) ** 2))


def total_field(state: SystemState, grid: ModeGrid) -> tuple[complex, complex]:
    """E(x) and dE/dx at the atom."""
    k = np.arange(grid.n_modes)
    f = mode_function(grid, k, state.x)
    g = mode_gradient(grid, k, state.x)
    return complex(np.sum(state.alphas * f)), complex(np.sum(state.alphas * g))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model: momentum diffusion and rank-1 field noise, uncorrelated."""

    momentum: bool = True
    field: bool = True
    cross_correlation: float = 0.0

    @property
    def enabled(self) -> bool:
        return self.momentum or self.field

    @property
    def approximation(self) -> str:
        return "lowest-order diffusion; rank-1 field noise; zero dP-dA cross-correlation"

    @classmethod
    def off(cls) -> "NoiseSpec":
        return cls(False, False)

    def __post_init__(self):
        if self.cross_correlation != 0.0:
            raise ValueError("only zero dP-dA cross-correlation is implemented")

    @staticmethod
    def field_covariance(gamma: float, f: np.ndarray) -> np.ndarray:
        """<dA_k dA_l*> / dt = gamma f_k f_l."""
        f = np.asarray(f, dtype=float)
        return gamma * np.outer(f, f)


@dataclass(frozen=True)
class Trap:
    omega: float
    center: float
    pinned: bool = False

    @property
    def mode(self) -> int:
        if self.pinned:
            return kernels.TRAP_PINNED
        return kernels.TRAP_HARMONIC if self.omega > 0 else kernels.TRAP_FREE


@dataclass(frozen=True, eq=False)
class SDEModel:
    params: PhysicalParams
    grid: ModeGrid
    u0: float
    gamma_sc: float
    diffusion_scale: float
    trap: Trap
    noise: NoiseSpec = NoiseSpec()
    dt: float = 1e-3

    @classmethod
    def build(cls, params: PhysicalParams, n_modes: int = 256, spacing: float = 0.1,
              dt: float = 1e-3, noise: NoiseSpec | None = None, pinned: bool = False,
              u0: float | None = None, gamma_sc: float | None = None) -> "SDEModel":
        grid = ModeGrid.build(params, n_modes, spacing)
        d = derive(params, spacing)
        model = cls(
            params=params, grid=grid,
            u0=d.light_shift_u0 if u0 is None else u0,
            gamma_sc=d.scatter_gamma if gamma_sc is None else gamma_sc,
            diffusion_scale=params.gamma * d.saturation_s,
            trap=Trap(params.trap_omega, params.trap_center, pinned),
            noise=NoiseSpec() if noise is None else noise,
            dt=dt,
        )
        model.check_dt(dt)
        return model

    def with_(self, **changes) -> "SDEModel":
        m = replace(self, **changes)
        m.check_dt(m.dt)
        return m

    def check_dt(self, dt: float) -> None:
        limit = 0.1 / self.grid.max_detuning if self.grid.max_detuning > 0 else math.inf
        if not (dt > 0 and dt <= limit * (1 + 1e-12)):
            raise SimulationError(
                f"dt = {dt:g} must satisfy 0 < dt <= 0.1/max|Delta_k| = {limit:g} "
                f"(max|Delta_k| = {self.grid.max_detuning:g})")

    @property
    def pump_amplitude(self) -> float:
        return math.sqrt(derive(self.params, self.grid.spacing).pump_photons)

    def initial_field(self) -> np.ndarray:
        a = np.zeros(self.grid.n_modes, dtype=complex)
        a[self.grid.pump_index] = self.pump_amplitude
        return a

    def initial_state(self, x: float | None = None, p: float = 0.0) -> SystemState:
        return SystemState(self.trap.center if x is None else x, p, self.initial_field())

    def diffusion(self, x):
        """D(x) for the momentum noise."""
        return self.diffusion_scale * (np.cos(x) ** 2 + 0.4 * np.sin(x) ** 2)

    def metadata(self) -> dict:
        return {
            "params": json.loads(params_json(self.params)),
            "n_modes": self.grid.n_modes,
            "mode_spacing": self.grid.spacing,
            "node_index": self.grid.node_index,
            "u0": self.u0,
            "gamma_sc": self.gamma_sc,
            "dt": self.dt,
            "trap": {"omega": self.trap.omega, "center": self.trap.center,
                     "pinned": self.trap.pinned},
            "noise": {"momentum": self.noise.momentum, "field": self.noise.field,
                      "approximation": self.noise.approximation},
        }


def drift(state: SystemState, model: SDEModel):
    """Deterministic time derivatives (dx/dt, dp/dt, dalpha/dt)."""
    grid = model.grid
    k = np.arange(grid.n_modes)
    f = mode_function(grid, k, state.x)
    e, ge = total_field(state, grid)
    gam, u0 = model.gamma_sc, model.u0
    a = e * np.conj(ge)
    b = np.conj(e) * ge
    dp_complex = 1j * gam * (a - b) - u0 * (a + b)
    scale = max(abs(dp_complex), 1e-300)
    if abs(dp_complex.imag) > 1e-12 * scale:
        raise SimulationError("momentum drift has a non-negligible imaginary part")
    dp = dp_complex.real
    if model.trap.pinned:
        dx = 0.0
    else:
        dx = state.p / model.params.mass
        dp -= model.params.mass * model.trap.omega**2 * (state.x - model.trap.center)
    dalpha = 1j * grid.detunings * state.alphas - (1j * u0 + gam) * e * f
    return dx, dp, dalpha


# -- batch driver -------------------------------------------------------------

def noise_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(master_seed, spawn_key=(index, 1))))


def init_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(master_seed, spawn_key=(index, 0))))


@dataclass(eq=False)
class BatchResult:
    """Sampled batch: ``data[b, k, c]`` with columns x, p, photons, Re E, Im E, M."""

    t: np.ndarray
    data: np.ndarray
    bad_step: np.ndarray
    final_alphas: np.ndarray = field(repr=False, default=None)

    @property
    def x(self):
        return self.data[:, :, 0]

    @property
    def p(self):
        return self.data[:, :, 1]

    @property
    def photons(self):
        return self.data[:, :, 2]

    @property
    def martingale(self):
        return self.data[:, :, 5]


def capped_end(model: SDEModel, t_end: float) -> float:
    rec = model.grid.recurrence_time
    if t_end >= rec:
        warnings.warn(f"t_end = {t_end:g} reaches the mode recurrence time {rec:g}; capping",
                      RecurrenceWarning, stacklevel=3)
        return rec * (1 - 1e-9)
    return t_end


def simulate_batch(model: SDEModel, x0, p0, t_end: float, sample_every: int = 100,
                   master_seed: int = 0, indices=None, alphas=None,
                   backend: str | None = None, chunk_steps: int = 2000,
                   raise_on_error: bool = True) -> BatchResult:
    """Integrate a batch of independent trajectories.

    Trajectory ``i`` (``indices[b]``) draws its noise from its own stream keyed
    by (master_seed, i), so results do not depend on batch composition or on
    the backend.
    """
    backend = _backend.resolve(backend)
    x = np.array(x0, dtype=float, ndmin=1).copy()
    p = np.array(p0, dtype=float, ndmin=1).copy()
    nb = x.shape[0]
    if p.shape != x.shape:
        raise ValueError("x0 and p0 must have the same length")
    if indices is None:
        indices = np.arange(nb)
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    t_end = capped_end(model, t_end)
    nsteps = int(round(t_end / model.dt))
    nsteps -= nsteps % sample_every
    if alphas is None:
        alpha = np.tile(model.initial_field(), (nb, 1))
    else:
        alpha = np.array(np.broadcast_to(alphas, (nb, model.grid.n_modes)), dtype=complex)
    nsamp = nsteps // sample_every + 1
    out = np.full((nb, nsamp, kernels.N_COLS), np.nan)
    m_acc = np.zeros(nb)
    grid = model.grid
    out[:, 0, 0] = x
    out[:, 0, 1] = p
    out[:, 0, 2] = np.sum(np.abs(alpha) ** 2, axis=1)
    e0 = np.array([total_field(SystemState(x[b], p[b], alpha[b]), grid)[0] for b in range(nb)])
    out[:, 0, 3] = e0.real
    out[:, 0, 4] = e0.imag
    out[:, 0, 5] = 0.0

    cph = np.cos(grid.phases)
    sph = np.sin(grid.phases)
    eps = np.ascontiguousarray(grid.eps)
    rot = np.exp(1j * grid.detunings * model.dt)
    noise_on = model.noise.enabled and (model.noise.momentum or model.gamma_sc > 0)
    rngs = [noise_rng(master_seed, int(i)) for i in indices] if noise_on else None
    chunk = max(1, chunk_steps // sample_every) * sample_every
    bad = np.full(nb, -1, dtype=np.int64)
    zeros = None
    done = 0
    k = 1
    trap = model.trap
    while done < nsteps:
        n = min(chunk, nsteps - done)
        if noise_on:
            noise = np.stack([r.standard_normal((n, 3)) for r in rngs])
        else:
            if zeros is None or zeros.shape[1] != n:
                zeros = np.zeros((nb, n, 3))
            noise = zeros
        local = np.where(bad >= 0, 0, -1).astype(np.int64)
        kernels.advance(backend, x, p, m_acc, alpha, noise, cph, sph, eps, rot,
                        model.u0, model.gamma_sc, model.params.mass, trap.omega,
                        trap.center, model.dt, model.diffusion_scale, trap.mode,
                        model.noise.momentum, model.noise.field and model.gamma_sc > 0,
                        sample_every, out, k, local)
        new = (local >= 0) & (bad < 0)
        bad[new] = done + local[new]
        done += n
        k += n // sample_every
    if raise_on_error and (bad >= 0).any():
        b = int(np.argmax(bad >= 0))
        raise SimulationError(f"non-finite state in trajectory {int(indices[b])} at step {int(bad[b])}",
                              step=int(bad[b]), trajectory=int(indices[b]))
    t = np.arange(nsamp) * (sample_every * model.dt)
    return BatchResult(t, out, bad, alpha)


def step(state: SystemState, model: SDEModel, rng: np.random.Generator | None = None,
         dt: float | None = None) -> SystemState:
    """One integrator step; ``rng`` supplies the three normals (ignored if noise is off)."""
    dt = model.dt if dt is None else dt
    if dt != model.dt:
        model = model.with_(dt=dt)
    else:
        model.check_dt(dt)
    noise = np.zeros((1, 1, 3))
    if model.noise.enabled and rng is not None:
        noise[0, 0] = rng.standard_normal(3)
    x = np.array([state.x])
    p = np.array([state.p])
    alpha = state.alphas.astype(complex).reshape(1, -1).copy()
    out = np.full((1, 2, kernels.N_COLS), np.nan)
    bad = np.full(1, -1, dtype=np.int64)
    grid = model.grid
    kernels.advance(_backend.resolve(), x, p, np.zeros(1), alpha, noise,
                    np.cos(grid.phases), np.sin(grid.phases), np.ascontiguousarray(grid.eps),
                    np.exp(1j * grid.detunings * dt), model.u0, model.gamma_sc,
                    model.params.mass, model.trap.omega, model.trap.center, dt,
                    model.diffusion_scale, model.trap.mode, model.noise.momentum,
                    model.noise.field and model.gamma_sc > 0, 1, out, 1, bad)
    if bad[0] >= 0:
        raise SimulationError("non-finite state", step=0)
    return SystemState(float(x[0]), float(p[0]), alpha[0], state.t + dt)


# -- single trajectories ------------------------------------------------------

@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    photons: np.ndarray
    field_re: np.ndarray
    field_im: np.ndarray
    seed: int
    metadata: dict

    def rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.p, self.photons, self.field_re, self.field_im])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("# " + json.dumps({**self.metadata, "seed": self.seed}, sort_keys=True) + "\n")
            fh.write(",".join(TRAJ_COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path) as fh:
            meta = json.loads(fh.readline()[2:])
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        return cls(*data.T, seed=meta.pop("seed"), metadata=meta)


def run_trajectory(model: SDEModel, init: SystemState | None = None, t_end: float = 10.0,
                   sample_every: int = 100, seed: int = 0, backend: str | None = None) -> Trajectory:
    init = model.initial_state() if init is None else init
    res = simulate_batch(model, [init.x], [init.p], t_end, sample_every, seed, [0],
                         alphas=init.alphas, backend=backend)
    d = res.data[0]
    from . import __version__

    meta = {**model.metadata(), "t_end": float(res.t[-1]), "sample_every": sample_every,
            "code_version": __version__}
    return Trajectory(res.t + init.t, d[:, 0], d[:, 1], d[:, 2], d[:, 3], d[:, 4], seed, meta)
