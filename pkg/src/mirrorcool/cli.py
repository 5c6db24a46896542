"""Command-line front end: ``mirrorcool <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import _backend, analytic
from . import ensemble as ens
from .core import ParameterError, make_params, params_json, read_config_file
from .core import temperature_to_si, time_to_si
from .io import write_manifest, write_table
from .sde import NoiseSpec, SDEModel, SimulationError, run_trajectory

WORKERS_ENV = "MIRRORCOOL_WORKERS"
TWO_PI = 2 * math.pi


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key = value parameter file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one parameter (repeatable)")
    p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    p.add_argument("--workers", type=int, default=None,
                   help=f"thread cap for the kernels (default: ${WORKERS_ENV})")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None)
    return p


def _sim() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--dt", type=float, default=2e-3, help="time step (1/Gamma)")
    p.add_argument("--n-modes", type=int, default=256)
    p.add_argument("--mode-spacing", type=float, default=0.1, help="Gamma")
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--sample-every", type=int, default=100)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirrorcool",
                                     description="Mirror-mediated cooling toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    common, sim = _common(), _sim()

    sub.add_parser("dump-config", parents=[common], help="print the resolved parameters")

    a = sub.add_parser("analytic-scan", parents=[common],
                       help="friction, temperatures and crossover versus position and detuning")
    a.add_argument("--points", type=int, default=161)

    f = sub.add_parser("friction-curve", parents=[common, sim],
                       help="noiseless simulated d(p^2)/dt versus initial momentum")
    f.add_argument("--p0", type=_floats, default=[40, 80, 120, 160, 200, 240, 280, 320],
                   help="comma-separated peak momenta (hbar*k0)")

    c = sub.add_parser("capture-scan", parents=[common, sim],
                       help="simulated capture range versus trap frequency")
    c.add_argument("--trap-freqs", type=_floats, default=[0.1, 0.2, 0.3, 0.5],
                   help="comma-separated omega_t/(2 pi Gamma)")

    s = sub.add_parser("steady-state", parents=[common, sim],
                       help="fitted steady-state temperature from thermal ensembles")
    s.add_argument("--t0", type=_floats, default=[5, 7.5, 10, 12.5, 15],
                   help="comma-separated initial temperatures (hbar*Gamma/k_B)")

    x = sub.add_parser("crossover", parents=[common],
                       help="detuning where mirror and Doppler temperatures meet")
    x.add_argument("--points", type=int, default=100)

    t = sub.add_parser("trajectory", parents=[common, sim], help="dump one trajectory")
    t.add_argument("--t-end", type=float, default=10.0)
    t.add_argument("--p0", type=float, default=0.0)
    t.add_argument("--no-noise", action="store_true")
    return parser


def _params(args):
    cfg = read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ParameterError(item, f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    return make_params(cfg)


def _resolved(params, args, **extra) -> dict:
    d = json.loads(params_json(params))
    d["run"] = {"seed": args.seed, **extra}
    return d


def _model(params, args, noise: NoiseSpec | None = None) -> SDEModel:
    return SDEModel.build(params, n_modes=args.n_modes, spacing=args.mode_spacing,
                          dt=args.dt, noise=noise)


def _us(t, params) -> float:
    return temperature_to_si(t, params) * 1e6


def cmd_dump_config(args, params, out: Path):
    text = params_json(params)
    print(text)
    if args.out != ".":
        path = out / "config.json"
        path.write_text(text + "\n")
        write_manifest(out / "dump-config.manifest.json", "dump-config",
                       _resolved(params, args), [path])


def cmd_analytic_scan(args, params, out: Path):
    wt = params.trap_omega
    lam = 2 * math.pi
    rows = []
    for i in range(args.points):
        off = -0.5 + i / (args.points - 1)
        x = off * lam
        ups = analytic.heating_coefficient(params, x)
        trans = analytic.friction_transverse(params, x, 1.0, params.waist / 2).value
        tr = analytic.steady_state_temperatures(params, x, wt)
        rows.append((off, ups, ups < 0, trans,
                     _us(tr.t_mirror, params) if tr.valid else math.nan,
                     _us(tr.t_combined, params) if tr.valid else math.nan))
    pos = write_table(out / "analytic_position.csv",
                      ["x0_rel[lambda]", "upsilon[Gamma]", "cooling[bool]",
                       "transverse_coeff[hbar*k0^2]", "t_mirror[uK]", "t_combined[uK]"], rows)
    drows = []
    for d in np.linspace(1.0, 100.0, args.points):
        q = analytic.at_detuning(params, -d * params.gamma)
        tr = analytic.steady_state_temperatures(q, None, wt)
        drows.append((d, _us(tr.t_mirror, q), _us(tr.t_doppler, q),
                      _us(tr.t_combined, q) if tr.valid else math.nan))
    det = write_table(out / "analytic_detuning.csv",
                      ["abs_detuning[Gamma]", "t_mirror[uK]", "t_doppler[uK]", "t_combined[uK]"],
                      drows)
    write_manifest(out / "analytic-scan.manifest.json", "analytic-scan",
                   _resolved(params, args), [pos, det])
    tr = analytic.steady_state_temperatures(params)
    print(f"upsilon at trap centre: {analytic.heating_coefficient(params):.6g} Gamma")
    print(f"cooling time 2/|upsilon|: {time_to_si(analytic.cooling_time(params), params) * 1e3:.4g} ms")
    print(f"mirror temperature: {_us(tr.t_mirror, params):.4g} uK")
    try:
        pc = analytic.capture_range(params)
        print(f"capture range: {pc:.6g} hbar*k0 "
              f"({_us(analytic.capture_temperature(pc, params), params) / 1e3:.4g} mK)")
    except analytic.AnalyticError as exc:
        print(f"capture range: {exc}")


def cmd_friction_curve(args, params, out: Path):
    model = _model(params, args, NoiseSpec.off())
    spec = ens.EnsembleSpec(n_traj=args.trajectories or 64, p0=1.0,
                            sample_every=args.sample_every, master_seed=args.seed)
    pts = ens.friction_curve(model, args.p0, spec, args.backend)
    path = write_table(out / "friction_curve.csv",
                       ["p0[hbar*k0]", "p0_sq[(hbar*k0)^2]", "rate[(hbar*k0)^2*Gamma]",
                        "rate_se[(hbar*k0)^2*Gamma]", "analytic[(hbar*k0)^2*Gamma]"],
                       [(p.p0, p.p0**2, p.rate, p.rate_se, p.analytic) for p in pts])
    write_manifest(out / "friction-curve.manifest.json", "friction-curve",
                   _resolved(params, args, dt=args.dt, n_traj=spec.n_traj), [path])
    for p in pts:
        print(f"p0 = {p.p0:g} hbar*k0: rate {p.rate:.5g}, analytic {p.analytic:.5g} (hbar*k0)^2*Gamma")


def cmd_capture_scan(args, params, out: Path):
    model = _model(params, args, NoiseSpec.off())
    spec = ens.EnsembleSpec(n_traj=args.trajectories or 16, p0=1.0,
                            sample_every=args.sample_every, master_seed=args.seed)
    pts = ens.capture_scan(model, [f * TWO_PI for f in args.trap_freqs], spec, args.backend)
    path = write_table(out / "capture_scan.csv",
                       ["trap_freq[2pi*Gamma]", "p_capture[hbar*k0]", "t_capture[mK]",
                        "p_analytic[hbar*k0]", "t_analytic[mK]", "bounded[bool]"],
                       [(p.omega_t / TWO_PI, p.p_capture, _us(p.t_capture, params) / 1e3,
                         p.p_analytic, _us(p.t_analytic, params) / 1e3, p.bounded) for p in pts])
    write_manifest(out / "capture-scan.manifest.json", "capture-scan",
                   _resolved(params, args, dt=args.dt, n_traj=spec.n_traj), [path])
    for p in pts:
        print(f"omega_t = {p.omega_t / TWO_PI:g} x 2pi Gamma: capture {_us(p.t_capture, params) / 1e3:.4g} mK"
              f" (analytic {_us(p.t_analytic, params) / 1e3:.4g} mK)")


def cmd_steady_state(args, params, out: Path):
    model = _model(params, args, NoiseSpec())
    spec = ens.EnsembleSpec(n_traj=args.trajectories or 256, init_temperature=1.0,
                            sample_every=args.sample_every, master_seed=args.seed,
                            batch_size=256)
    try:
        res, stats = ens.steady_state_scan(model, args.t0, spec, args.backend)
    except ens.EstimationError as exc:
        coeffs = exc.details.get("coeffs")
        raise ens.EstimationError(f"{exc} (fitted coefficients: {coeffs})") from exc
    path = write_table(out / "steady_state.csv",
                       ["t0[hbar*Gamma]", "t_measured[hbar*Gamma]", "dTdt[hbar*Gamma^2]",
                        "dTdt_se[hbar*Gamma^2]"],
                       [(t0, s.t_measured, s.dTdt, s.dTdt_se) for t0, s in zip(args.t0, stats)])
    fit = write_table(out / "steady_state_fit.csv",
                      ["t_ss[hbar*Gamma]", "t_ss_se[hbar*Gamma]", "t_ss[uK]", "t_ss_se[uK]",
                       "c2", "c1", "c0", "cooling_time[ms]"],
                      [(res.t_ss, res.t_ss_se, _us(res.t_ss, params), _us(res.t_ss_se, params),
                        *res.coeffs, time_to_si(res.cooling_time, params) * 1e3)])
    write_manifest(out / "steady-state.manifest.json", "steady-state",
                   _resolved(params, args, dt=args.dt, n_traj=spec.n_traj), [path, fit])
    t_m = analytic.mirror_temperature(params)
    print(f"steady-state temperature: {_us(res.t_ss, params):.4g} +- {_us(res.t_ss_se, params):.2g} uK"
          f" (analytic mirror temperature {_us(t_m, params):.4g} uK)")
    print(f"cooling time: {time_to_si(res.cooling_time, params) * 1e3:.3g} ms")


def cmd_crossover(args, params, out: Path):
    d = analytic.crossover_detuning(params)
    rows = []
    for mag in np.linspace(1.0, 100.0, args.points):
        q = analytic.at_detuning(params, -mag * params.gamma)
        rows.append((mag, analytic.mirror_temperature(q), analytic.doppler_temperature(q)))
    path = write_table(out / "crossover.csv",
                       ["abs_detuning[Gamma]", "t_mirror[hbar*Gamma]", "t_doppler[hbar*Gamma]"], rows)
    write_manifest(out / "crossover.manifest.json", "crossover", _resolved(params, args),
                   [path], crossover_detuning=d)
    print(f"crossover detuning: {d:.4g} Gamma")


def cmd_trajectory(args, params, out: Path):
    model = _model(params, args, NoiseSpec.off() if args.no_noise else NoiseSpec())
    traj = run_trajectory(model, model.initial_state(p=args.p0), args.t_end,
                          args.sample_every, args.seed, backend=args.backend)
    path = out / "trajectory.csv"
    traj.to_csv(path)
    write_manifest(out / "trajectory.manifest.json", "trajectory",
                   _resolved(params, args, dt=args.dt, t_end=args.t_end), [path])
    print(f"{len(traj.t)} samples to t = {traj.t[-1]:g}/Gamma; "
          f"final p = {traj.p[-1]:.6g} hbar*k0, photons = {traj.photons[-1]:.6g}")


COMMANDS = {
    "dump-config": cmd_dump_config,
    "analytic-scan": cmd_analytic_scan,
    "friction-curve": cmd_friction_curve,
    "capture-scan": cmd_capture_scan,
    "steady-state": cmd_steady_state,
    "crossover": cmd_crossover,
    "trajectory": cmd_trajectory,
}

_ERRORS = (
    (ParameterError, "parameter"),
    (analytic.AnalyticError, "analytic"),
    (SimulationError, "simulation"),
    (ens.EstimationError, "estimation"),
    (OSError, "io"),
    (ValueError, "value"),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = args.workers
        if workers is None and os.environ.get(WORKERS_ENV):
            workers = int(os.environ[WORKERS_ENV])
        _backend.set_workers(workers)
        params = _params(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise OSError(f"output directory {out} is not writable")
        start = time.perf_counter()
        COMMANDS[args.command](args, params, out)
        print(f"done in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    except Exception as exc:
        for cls, kind in _ERRORS:
            if isinstance(exc, cls):
                msg = " ".join(str(exc).split())
                if isinstance(exc, ParameterError):
                    msg = f"{exc.field}: {msg}"
                print(f"error: {kind}: {msg}", file=sys.stderr)
                return 1
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
