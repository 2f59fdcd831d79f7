"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime failure
(non-convergence, contact, out-of-range gap, failed validation), 4 usage
error.  All tabular output is CSV with ``#``-prefixed provenance comments
(version, command, configuration digest, seed); when ``--out FILE`` is given
a ``FILE.meta.toml`` sidecar records the fully resolved configuration and a
result summary.  Output is deterministic for a given configuration and seed.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ConfigError, RunConfig, config_digest, parse_config
from .lifshitz import (
    FieldRangeError,
    Geometry,
    QuadratureError,
    ThermalSetting,
    energy_per_area_T0,
    ideal_energy,
    ideal_force,
    pfa_force,
    thermal_fraction,
)
from .materials import GOLD, SILICON, MirrorStack, PerfectConductor, bulk_reflection, TransverseMode
from .mechanics import ContactError, ModulationSchedule, SnapInError, demodulated_energies, simulate
from .protocol import minimum_splitting, psd_map, run_transfer_experiment, efficiency_vs_fmax
from .spectral import CouplingMap, EffectiveHamiltonian, ep_locate, eigenvalues, surface_grid

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this interface reserves 2 for config."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _toml_lines(d: dict, prefix: str = "") -> list[str]:
    lines = []
    for k, v in d.items():
        if not isinstance(v, dict):
            lines.append(f"{k} = {_toml_scalar(v)}")
    for k, v in d.items():
        if isinstance(v, dict):
            name = f"{prefix}.{k}" if prefix else k
            lines.append("")
            lines.append(f"[{name}]")
            lines.extend(_toml_lines(v, name))
    return lines


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def _emit(args, rc: RunConfig, command: str, columns, rows, summary: dict | None = None):
    buf = io.StringIO()
    buf.write(f"# casimir-dyn v{__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# config: sha256:{config_digest(rc.resolved)}\n")
    buf.write(f"# seed: {rc.seed if rc.seed is not None else 'none'}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        meta = {
            "version": __version__,
            "command": command,
            "config_sha256": config_digest(rc.resolved),
            "result": summary or {},
            "config": rc.resolved,
        }
        with open(args.out + ".meta.toml", "w") as fh:
            fh.write("\n".join(_toml_lines(meta)) + "\n")
    else:
        sys.stdout.write(text)


def _note(msg: str):
    print(msg, file=sys.stderr)


def _effective_seed(rc: RunConfig, args) -> int | None:
    if getattr(args, "noiseless", False):
        return None
    return rc.seed


def cmd_force(rc: RunConfig, args) -> int:
    field = rc.build_field()
    quad, T = rc.quad, rc.system.temperature
    x = field.x_grid

    def fraction(xi: float) -> float:
        return thermal_fraction(rc.mirrors, xi, T, quad)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            frac = list(pool.map(fraction, x))
    else:
        frac = [fraction(xi) for xi in x]

    rows = [
        (
            x[i] * 1e9,
            field.force[i],
            field.dforce[i],
            field.d2force[i],
            ideal_force(Geometry(rc.system.sphere_radius, x[i])),
            frac[i],
        )
        for i in range(len(x))
    ]
    _emit(
        args,
        rc,
        "force",
        ["x_nm", "F_N", "dFdx_N_per_m", "d2Fdx2_N_per_m2", "F_ideal_N", "thermal_fraction"],
        rows,
    )
    return EXIT_OK


def cmd_spectrum(rc: RunConfig, args) -> int:
    field = rc.build_field()
    cmap = CouplingMap.from_field(field, rc.system)
    e = rc.experiment
    f_grid = np.linspace(e.sweep_start, e.sweep_stop, e.sweep_points)
    d_grid = np.linspace(e.depth_min, e.depth_max, e.depth_points)
    lam_p, lam_m = surface_grid(
        rc.system.cantilever1.gamma, rc.system.gamma2_total, f_grid, d_grid, cmap
    )
    rows = []
    for i, f in enumerate(f_grid):
        for j, d in enumerate(d_grid):
            lp, lm = lam_p[i, j], lam_m[i, j]
            rows.append(
                (f, d * 1e9, lp.real, lp.imag, lm.real, lm.imag, abs(lp - lm))
            )
    _emit(
        args,
        rc,
        "spectrum",
        ["f_mod_Hz", "delta_d_nm", "re_lp", "im_lp", "re_lm", "im_lm", "gap"],
        rows,
        summary={"f21_eff_hz": cmap.f21_eff},
    )
    return EXIT_OK


def cmd_ep_locate(rc: RunConfig, args) -> int:
    field = rc.build_field()
    s = rc.system
    delta_star, f_star = ep_locate(
        s.cantilever1.gamma,
        s.gamma2_total,
        field,
        s.equilibrium_gap,
        s.cantilever1.mass,
        s.cantilever2.mass,
        s.cantilever1.omega,
        s.cantilever2.omega,
    )
    _note(f"exceptional point: delta_d* = {delta_star * 1e9:.3f} nm, f_mod* = {f_star:.3f} Hz")
    _emit(
        args,
        rc,
        "ep-locate",
        ["delta_d_star_nm", "f_mod_star_hz"],
        [(delta_star * 1e9, f_star)],
        summary={"delta_d_star_nm": delta_star * 1e9, "f_mod_star_hz": f_star},
    )
    return EXIT_OK


def cmd_simulate(rc: RunConfig, args) -> int:
    field = rc.build_field()
    e, s = rc.experiment, rc.system
    schedule = ModulationSchedule.constant(e.f_mod, e.delta_d, e.duration)
    drives = []
    if e.drive_amplitude > 0 and e.drive_duration > 0:
        from .mechanics import drive_for_amplitude, shifted_frequency

        cant = s.cantilever1 if e.excited == 1 else s.cantilever2
        extra = 0.0 if e.excited == 1 else s.extra_damping_2
        drives.append(
            drive_for_amplitude(
                cant,
                target=e.excited,
                steady_amplitude=e.drive_amplitude,
                frequency=shifted_frequency(cant, field, s.equilibrium_gap),
                window=(0.0, e.drive_duration),
                extra_gamma=extra,
            )
        )
    traj = simulate(
        s,
        field,
        schedule,
        drives,
        noise_seed=_effective_seed(rc, args),
        duration=e.duration,
        dt=e.dt,
        record_every=e.record_every,
    )
    t_e, e1, e2 = demodulated_energies(traj, s)
    k = len(t_e)
    rows = zip(t_e, traj.x1[-k:], traj.x2[-k:], traj.gap[-k:], e1, e2)
    _emit(args, rc, "simulate", ["t_s", "x1_m", "x2_m", "gap_m", "E1_J", "E2_J"], rows)
    return EXIT_OK


def cmd_psd_map(rc: RunConfig, args) -> int:
    field = rc.build_field()
    e = rc.experiment
    f_grid = np.linspace(e.sweep_start, e.sweep_stop, e.sweep_points)
    result = psd_map(
        rc.system,
        field,
        e.delta_d,
        f_grid,
        noise_seed=rc.seed if rc.seed is not None else 0,
        duration=e.psd_duration,
        dt=e.dt,
        record_every=e.record_every,
        jobs=args.jobs,
    )
    split = minimum_splitting(result)
    _note(f"minimum two-peak splitting: {split:.3f} Hz")
    rows = [
        (result.mod_freq[i], result.freq[j], result.power[i, j])
        for i in range(len(result.mod_freq))
        for j in range(len(result.freq))
    ]
    _emit(
        args,
        rc,
        "psd-map",
        ["f_mod_Hz", "freq_Hz", "psd_m2_per_Hz"],
        rows,
        summary={"min_splitting_hz": split, "notes": list(result.notes)},
    )
    return EXIT_OK


def cmd_loop(rc: RunConfig, args) -> int:
    field = rc.build_field()
    e = rc.experiment
    res = run_transfer_experiment(
        rc.system,
        field,
        rc.loop(),
        excited=e.excited,
        seed=_effective_seed(rc, args),
        drive_amplitude=e.drive_amplitude,
        drive_duration=e.drive_duration,
        dt=e.dt,
        record_every=e.record_every,
    )
    if res.eta is None:
        _note("eta: indeterminate (final energy below the thermal floor)")
    else:
        _note(f"eta = {res.eta:.4f}  (final energy {res.final_energy:.3e} J)")
    for seg in res.segments:
        _note(
            f"segment {seg.index}: min gap {seg.min_gap:.2f} rad/s, "
            f"gap*time {seg.gap_time_product:.2f} -> {seg.classification}"
        )
    rows = zip(res.t, res.e1, res.e2, res.e1_norm, res.e2_norm)
    summary = {
        "eta": res.eta if res.eta is not None else "indeterminate",
        "final_energy_J": res.final_energy,
        "noise_floor_J": res.noise_floor,
        "segment_min_gap_rad_s": [s.min_gap for s in res.segments],
        "segment_gap_time": [s.gap_time_product for s in res.segments],
        "segment_class": [s.classification for s in res.segments],
    }
    _emit(args, rc, "loop", ["t_s", "E1_J", "E2_J", "e1_norm", "e2_norm"], rows, summary)
    return EXIT_OK


def cmd_efficiency(rc: RunConfig, args) -> int:
    field = rc.build_field()
    e = rc.experiment
    base = rc.seed if rc.seed is not None else 0
    curve = efficiency_vs_fmax(
        rc.system,
        field,
        np.linspace(e.fmax_start, e.fmax_stop, e.fmax_points),
        f_min=e.f_min,
        delta_range=(e.delta_min, e.delta_max),
        excited=e.excited,
        loop_duration=e.loop_duration,
        direction=e.direction,
        seeds=tuple(range(base, base + e.n_seeds)),
        jobs=args.jobs,
    )
    rows = zip(curve.f_max, curve.eta_mean, curve.eta_std, curve.n_valid)
    _emit(args, rc, "efficiency", ["f_max_Hz", "eta_mean", "eta_std", "n_valid"], rows)
    return EXIT_OK


def _validate_checks(rc: RunConfig):
    """Yield (name, passed, detail) for fast internal consistency checks."""
    pc = MirrorStack.bulk(PerfectConductor())
    x = 100e-9
    got = energy_per_area_T0(pc, pc, x, rc.quad)
    want = ideal_energy(x)
    rel = abs(got - want) / abs(want)
    yield "ideal-mirror quadrature vs closed form", rel < 1e-3, f"rel err {rel:.2e}"

    kgrid = np.geomspace(1e4, 1e9, 40)
    ok = True
    for xi in (1e13, 1e15, 1e17):
        for mode in TransverseMode:
            r = bulk_reflection(GOLD, xi, kgrid, mode)
            ok &= bool(np.all(np.abs(r) <= 1.0 + 1e-12))
    yield "gold reflection coefficients bounded by 1", ok, ""

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        g1, g2, g, d = rng.uniform(0.1, 100.0, 4)
        h = EffectiveHamiltonian(gamma1=g1, gamma2=g2, g=g, delta=d)
        pair = eigenvalues(h)
        ref = sorted(np.linalg.eigvals(h.matrix()), key=lambda z: (z.real, z.imag))
        mine = sorted([pair.lam_plus, pair.lam_minus], key=lambda z: (z.real, z.imag))
        worst = max(worst, max(abs(a - b) for a, b in zip(mine, ref)))
    yield "closed-form eigenvalues vs dense solver", worst < 1e-9, f"max diff {worst:.1e}"

    sched = ModulationSchedule.constant(700.0, 1e-9, 0.01)
    t1 = simulate(rc.system, None, sched, noise_seed=7, duration=0.01)
    t2 = simulate(rc.system, None, sched, noise_seed=7, duration=0.01)
    same = bool(np.array_equal(t1.x1, t2.x1) and np.array_equal(t1.x2, t2.x2))
    yield "seeded runs bit-identical", same, ""

    film = MirrorStack(film=GOLD, film_thickness=70e-9, substrate=SILICON)
    bulk = MirrorStack.bulk(GOLD)
    geom = Geometry(rc.system.sphere_radius, 200e-9)
    thermal = ThermalSetting(rc.system.temperature)
    f_film = pfa_force(geom, (film, bulk), thermal, rc.quad)
    f_bulk = pfa_force(geom, (bulk, bulk), thermal, rc.quad)
    rel = abs(f_film - f_bulk) / abs(f_bulk)
    yield "70 nm film on silicon is optically bulk", rel < 1e-3, f"rel force diff {rel:.1e}"


def cmd_validate(rc: RunConfig, args) -> int:
    failures = 0
    for name, passed, detail in _validate_checks(rc):
        tag = "ok  " if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{tag} - {name}{suffix}")
        failures += 0 if passed else 1
    if failures:
        print(f"{failures} check(s) failed")
        return EXIT_RUNTIME
    print("all checks passed")
    return EXIT_OK


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="TOML file layered over the packaged defaults")
    common.add_argument("--out", metavar="FILE", help="write CSV here (with FILE.meta.toml sidecar)")
    common.add_argument("--seed", type=int, help="override the configured random seed")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps (default 1)")

    p = _Parser(prog="casimir-dyn", description="Casimir-coupled cantilever dynamics toolkit")
    p.add_argument("--version", action="version", version=f"casimir-dyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("force", parents=[common], help="force curve with gradients and thermal fraction")
    sp.set_defaults(func=cmd_force)
    sp = sub.add_parser("spectrum", parents=[common], help="effective-Hamiltonian eigenvalue surfaces")
    sp.set_defaults(func=cmd_spectrum)
    sp = sub.add_parser("ep-locate", parents=[common], help="locate the exceptional point")
    sp.set_defaults(func=cmd_ep_locate)
    sp = sub.add_parser("simulate", parents=[common], help="time-domain run at fixed modulation")
    sp.add_argument("--noiseless", action="store_true", help="disable thermal force noise")
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("psd-map", parents=[common], help="thermal PSD of cantilever 2 vs modulation frequency")
    sp.set_defaults(func=cmd_psd_map)
    sp = sub.add_parser("loop", parents=[common], help="drive, traverse the control loop, report eta")
    sp.add_argument("--noiseless", action="store_true", help="disable thermal force noise")
    sp.set_defaults(func=cmd_loop)
    sp = sub.add_parser("efficiency", parents=[common], help="transfer efficiency vs loop f_max over seeds")
    sp.set_defaults(func=cmd_efficiency)
    sp = sub.add_parser("validate", parents=[common], help="run fast internal consistency checks")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    overrides = {"seed": args.seed} if args.seed is not None else None
    try:
        rc = parse_config(args.config, overrides=overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(rc, args)
    except (ContactError, SnapInError, QuadratureError, FieldRangeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
