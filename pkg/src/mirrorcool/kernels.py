"""Batch time-stepping kernels for the atom + multimode field system.

One step (symmetric splitting):

1. half-step exact motion in the harmonic trap (free drift if omega_t = 0),
2. dipole force kick plus momentum noise,
3. field update: exact exponential of the rank-1 coupling -(iU0+gamma) f f^T,
   field noise along f, then the free rotation exp(i Delta_k dt),
4. second half-step of trap motion.

The trap part conserves energy to rounding and the field part conserves
photon number exactly when gamma = 0.

Mode functions are evaluated relative to the pump node nearest c*tau:
f_k(xi) = sin(xi - phi_k) - eps_k xi cos(xi - phi_k), with phi_k = Delta_k
tau_n and eps_k = Delta_k/omega0, the first-order expansion of
sin((1 - eps_k)(xi + n pi)) up to the common sign (-1)^n.

Samples are written after every ``every`` steps with columns
(x, p, photons, Re E, Im E, M) where M accumulates the martingale part
2 (p + F dt) dP of the p^2 increments.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import HAS_NUMBA

N_COLS = 6
TRAP_HARMONIC, TRAP_FREE, TRAP_PINNED = 0, 1, 2


def _advance_numpy(x, p, m_acc, alpha, noise, cph, sph, eps, rot,
                   u0, gam, mass, wt, xt, dt, dcoef, trap_mode,
                   p_noise, f_noise, every, out, k_start, bad):
    x = x.copy()
    p = p.copy()
    alive = bad < 0
    nsteps = noise.shape[1]
    if wt > 0:
        c, sn = math.cos(0.5 * wt * dt), math.sin(0.5 * wt * dt)
    k = k_start
    for n in range(nsteps):
        if trap_mode == TRAP_PINNED:
            if p_noise:
                dpn = np.sqrt(2 * dcoef * (np.cos(x) ** 2 + 0.4 * np.sin(x) ** 2) * dt) * noise[:, n, 0]
                m_acc += 2 * p * dpn
                p = p + dpn
        else:
            if trap_mode == TRAP_HARMONIC:
                u, v = x - xt, p / (mass * wt)
                u, v = u * c + v * sn, -u * sn + v * c
                x, p = xt + u, v * mass * wt
            else:
                x = x + 0.5 * dt * p / mass
            sx, cx = np.sin(x)[:, None], np.cos(x)[:, None]
            sa = sx * cph - cx * sph
            ca = cx * cph + sx * sph
            d = eps * x[:, None]
            f = sa - d * ca
            g = (ca + d * sa) * (1.0 - eps)
            e = np.sum(alpha * f, axis=1)
            gr = np.sum(alpha * g, axis=1)
            ff = np.sum(f * f, axis=1)
            eg = e * np.conj(gr)
            force = -2 * u0 * eg.real - 2 * gam * eg.imag
            dpn = np.zeros_like(p)
            if p_noise:
                s2, c2 = sx[:, 0] ** 2, cx[:, 0] ** 2
                dpn = np.sqrt(2 * dcoef * (c2 + 0.4 * s2) * dt) * noise[:, n, 0]
            m_acc += 2 * (p + force * dt) * dpn
            p = p + force * dt + dpn
            lam = (1j * u0 + gam) * ff * dt
            fac = np.where(ff > 1e-300, np.expm1(-lam) / np.where(ff > 1e-300, ff, 1.0),
                           -(1j * u0 + gam) * dt) * e
            if f_noise:
                fac = fac + math.sqrt(0.5 * gam * dt) * (noise[:, n, 1] + 1j * noise[:, n, 2])
            alpha[:] = (alpha + fac[:, None] * f) * rot
            if trap_mode == TRAP_HARMONIC:
                u, v = x - xt, p / (mass * wt)
                u, v = u * c + v * sn, -u * sn + v * c
                x, p = xt + u, v * mass * wt
            else:
                x = x + 0.5 * dt * p / mass
        newly_bad = alive & ~(np.isfinite(p) & np.isfinite(x))
        if newly_bad.any():
            bad[newly_bad] = n
            alive &= ~newly_bad
            # freeze the broken trajectories so the rest of the batch continues
            x = np.where(alive, x, 0.0)
            p = np.where(alive, p, 0.0)
            alpha[~alive] = 0.0
        if (n + 1) % every == 0:
            sx, cx = np.sin(x)[:, None], np.cos(x)[:, None]
            f = (sx * cph - cx * sph) - eps * x[:, None] * (cx * cph + sx * sph)
            e = np.sum(alpha * f, axis=1)
            out[:, k, 0] = x
            out[:, k, 1] = p
            out[:, k, 2] = np.sum(alpha.real ** 2 + alpha.imag ** 2, axis=1)
            out[:, k, 3] = e.real
            out[:, k, 4] = e.imag
            out[:, k, 5] = m_acc
            k += 1
    return x, p


if HAS_NUMBA:
    import numba as nb

    @nb.njit(cache=True, fastmath=False)
    def _one(b, x, p, m_acc, alpha, noise, cph, sph, eps, rot, u0, gam, mass,
             wt, xt, dt, dcoef, trap_mode, p_noise, f_noise, every, out, k_start):
        nmodes = cph.shape[0]
        nsteps = noise.shape[1]
        f = np.empty(nmodes)
        c = math.cos(0.5 * wt * dt)
        sn = math.sin(0.5 * wt * dt)
        mw = mass * wt
        k = k_start
        for n in range(nsteps):
            if trap_mode == TRAP_PINNED:
                if p_noise:
                    sx = math.sin(x)
                    cx = math.cos(x)
                    dpn = math.sqrt(2 * dcoef * (cx * cx + 0.4 * sx * sx) * dt) * noise[b, n, 0]
                    m_acc += 2 * p * dpn
                    p += dpn
            else:
                if trap_mode == TRAP_HARMONIC:
                    u = x - xt
                    v = p / mw
                    u, v = u * c + v * sn, -u * sn + v * c
                    x = xt + u
                    p = v * mw
                else:
                    x += 0.5 * dt * p / mass
                sx = math.sin(x)
                cx = math.cos(x)
                er = 0.0
                ei = 0.0
                gre = 0.0
                gim = 0.0
                ff = 0.0
                for j in range(nmodes):
                    sa = sx * cph[j] - cx * sph[j]
                    ca = cx * cph[j] + sx * sph[j]
                    d = eps[j] * x
                    fj = sa - d * ca
                    gj = (ca + d * sa) * (1.0 - eps[j])
                    f[j] = fj
                    a = alpha[b, j]
                    er += a.real * fj
                    ei += a.imag * fj
                    gre += a.real * gj
                    gim += a.imag * gj
                    ff += fj * fj
                # E conj(G)
                egr = er * gre + ei * gim
                egi = ei * gre - er * gim
                force = -2 * u0 * egr - 2 * gam * egi
                dpn = 0.0
                if p_noise:
                    dpn = math.sqrt(2 * dcoef * (cx * cx + 0.4 * sx * sx) * dt) * noise[b, n, 0]
                m_acc += 2 * (p + force * dt) * dpn
                p += force * dt + dpn
                e = complex(er, ei)
                if ff > 1e-300:
                    fac = (np.exp(-(1j * u0 + gam) * ff * dt) - 1.0) / ff * e
                else:
                    fac = -(1j * u0 + gam) * dt * e
                if f_noise:
                    fac += math.sqrt(0.5 * gam * dt) * complex(noise[b, n, 1], noise[b, n, 2])
                for j in range(nmodes):
                    alpha[b, j] = (alpha[b, j] + fac * f[j]) * rot[j]
                if trap_mode == TRAP_HARMONIC:
                    u = x - xt
                    v = p / mw
                    u, v = u * c + v * sn, -u * sn + v * c
                    x = xt + u
                    p = v * mw
                else:
                    x += 0.5 * dt * p / mass
            if not (math.isfinite(p) and math.isfinite(x)):
                return x, p, m_acc, n
            if (n + 1) % every == 0:
                sx = math.sin(x)
                cx = math.cos(x)
                er = 0.0
                ei = 0.0
                ph = 0.0
                for j in range(nmodes):
                    fj = (sx * cph[j] - cx * sph[j]) - eps[j] * x * (cx * cph[j] + sx * sph[j])
                    a = alpha[b, j]
                    er += a.real * fj
                    ei += a.imag * fj
                    ph += a.real * a.real + a.imag * a.imag
                out[b, k, 0] = x
                out[b, k, 1] = p
                out[b, k, 2] = ph
                out[b, k, 3] = er
                out[b, k, 4] = ei
                out[b, k, 5] = m_acc
                k += 1
        return x, p, m_acc, -1

    @nb.njit(cache=True, parallel=True)
    def _advance_numba(x, p, m_acc, alpha, noise, cph, sph, eps, rot, u0, gam,
                       mass, wt, xt, dt, dcoef, trap_mode, p_noise, f_noise,
                       every, out, k_start, bad):
        for b in nb.prange(x.shape[0]):
            if bad[b] >= 0:
                continue
            xb, pb, mb, flag = _one(b, x[b], p[b], m_acc[b], alpha, noise, cph, sph,
                                    eps, rot, u0, gam, mass, wt, xt, dt, dcoef,
                                    trap_mode, p_noise, f_noise, every, out, k_start)
            x[b] = xb
            p[b] = pb
            m_acc[b] = mb
            if flag >= 0:
                bad[b] = flag


def advance(backend: str, x, p, m_acc, alpha, noise, cph, sph, eps, rot, u0, gam,
            mass, wt, xt, dt, dcoef, trap_mode, p_noise, f_noise, every, out,
            k_start, bad):
    """Advance a batch by ``noise.shape[1]`` steps in place.

    ``bad[b]`` receives the step index (within this call) at which trajectory
    b first produced a non-finite value; it is left at -1 otherwise.
    """
    if backend == "numba":
        _advance_numba(x, p, m_acc, alpha, noise, cph, sph, eps, rot, u0, gam,
                       mass, wt, xt, dt, dcoef, trap_mode, p_noise, f_noise,
                       every, out, k_start, bad)
        return
    xn, pn = _advance_numpy(x, p, m_acc, alpha, noise, cph, sph, eps, rot, u0, gam,
                            mass, wt, xt, dt, dcoef, trap_mode, p_noise, f_noise,
                            every, out, k_start, bad)
    x[:] = xn
    p[:] = pn
