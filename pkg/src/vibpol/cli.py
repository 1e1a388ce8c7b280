"""Command line entry point: ``vibpol run <config>`` and ``vibpol validate``."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, ConfigError, load_config
from .core import SystemParams, block_eigensystems, enumerate_configs
from .dynamics import evolve, intermolecule_coherence, polariton_populations, prepare_initial, site_populations, spatial_density
from .liouvillian import DefectiveGeneratorError, IllConditionedWarning, decompose, solvent_eigen
from .signals import dipole_distribution, trps, twodir, twodir_context
from .units import format_quantity

EXIT_OK, EXIT_VALIDATE_FAILED, EXIT_CONFIG, EXIT_CONDITIONING = 0, 1, 2, 3
THREADS_ENV = "VIBPOL_THREADS"


class ConditioningAbort(RuntimeError):
    pass


def worker_count():
    """Worker threads for independent T2 / tau_pr evaluations (env override)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _fmt(x):
    return repr(float(x))


def write_csv(path, header, columns):
    """One header row, then one row per sample; floats written with full precision."""
    rows = zip(*columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _time_label(t):
    return format(t, "g").replace(".", "p")


def _spectrum(params, strict):
    with warnings.catch_warnings():
        warnings.simplefilter("error" if strict else "default", IllConditionedWarning)
        try:
            return decompose(params)
        except IllConditionedWarning as exc:
            raise ConditioningAbort(str(exc)) from None
        except DefectiveGeneratorError as exc:
            raise ConditioningAbort(str(exc)) from None


def _shift(axis, convention, omega_c):
    return axis + omega_c if convention == "absolute" else axis


def run_dynamics(cfg, out):
    p, b = cfg.system, cfg.block
    eigs = block_eigensystems(p)
    spec = _spectrum(p, strict=False)
    derived = {"condition_number": float(spec.cond)}
    state = prepare_initial(b["initial"], eigs[b["config"]])
    times = b["times"].values()
    traj = evolve(state, times, spec, p, solvent_eigen(p))
    N = p.N
    pairs = [(i, j) for i in range(1, N + 1) for j in range(i + 1, N + 1)]
    pops = np.array([site_populations(s) for s in traj])
    pol = [polariton_populations(s, eigs) for s in traj]
    header = ["t_ps"] + [f"pop_{i}" for i in range(1, N + 1)] + ["pop_photon"]
    header += [f"coh_{i}{j}" if N < 10 else f"coh_{i}_{j}" for i, j in pairs] + ["LP", "UP", "dark", "ground"]
    cols = [times] + [pops[:, k] for k in range(N + 1)]
    cols += [[intermolecule_coherence(s, i, j) for s in traj] for i, j in pairs]
    cols += [[x.LP for x in pol], [x.UP for x in pol], [x.dark for x in pol], [s.ground.sum() for s in traj]]
    files = [out / f"{cfg.prefix}_dynamics.csv"]
    write_csv(files[0], header, cols)
    if "spatial_x" in b:
        x = b["spatial_x"].values()
        want = np.asarray(b["spatial_times"])
        snaps = evolve(state, want, spec, p) if want.size else []
        rows_t, rows_x, rows_v = [], [], []
        for t, s in zip(want, snaps):
            dens = spatial_density(s, x, p).values
            rows_t += [t] * x.size
            rows_x += list(x)
            rows_v += list(dens)
        files.append(out / f"{cfg.prefix}_density.csv")
        write_csv(files[-1], ["t_ps", "x_nm", "density"], [rows_t, rows_x, rows_v])
    return files, derived


def run_trps(cfg, out):
    p, b = cfg.system, cfg.block
    eigs = block_eigensystems(p)
    spec = _spectrum(p, strict=False)
    state = prepare_initial(b["initial"], eigs[b["config"]])
    taus = np.asarray(b["tau_pr"])
    order = np.argsort(taus, kind="stable")
    snaps = evolve(state, taus[order], spec, p)
    by_tau = {int(k): s for k, s in zip(order, snaps)}
    omega = b["omega"].values()

    def one(k):
        return trps(by_tau[k], p, b["probe"], b["lo"], omega, eigs,
                    b["include_leakage_term"], b["cavity_width"]).values

    with ThreadPoolExecutor(worker_count()) as pool:
        spectra = list(pool.map(one, range(taus.size)))
    axis = _shift(omega, b["axis_convention"], p.omega_c)
    header = ["omega_cm"] + [f"S_tau_{_time_label(t)}ps" for t in taus]
    path = out / f"{cfg.prefix}_trps.csv"
    write_csv(path, header, [axis] + spectra)
    return [path], {"condition_number": float(spec.cond)}


def run_twodir(cfg, out):
    p, b = cfg.system, cfg.block
    eigs = block_eigensystems(p)
    spec = _spectrum(p, strict=True)
    ctx = twodir_context(p, spec, b["pulses"], b["omega1"].values(), b["omega3"].values(),
                         b["initial"], eigs, b["cavity_width"])

    def one(T2):
        return twodir(ctx, T2, b["subtract_gsb"], b["components"])

    with ThreadPoolExecutor(worker_count()) as pool:
        grids = list(pool.map(one, b["T2"]))
    o1 = _shift(ctx.omega1, b["axis_convention"], p.omega_c)
    o3 = _shift(ctx.omega3, b["axis_convention"], p.omega_c)
    g1, g3 = np.meshgrid(o1, o3, indexing="ij")
    flipped = _shift(-ctx.omega1, b["axis_convention"], p.omega_c)
    f1 = np.broadcast_to(flipped[:, None], g1.shape)
    files = []
    for T2, grid in zip(b["T2"], grids):
        header = ["omega1_cm", "omega3_cm", "omega1_flipped_cm", "signal"]
        cols = [g1.ravel(), g3.ravel(), f1.ravel(), grid.values.ravel()]
        for name in ("ese", "gsb", "esd"):
            if name in grid.components:
                header.append(name)
                cols.append(grid.components[name].ravel())
        path = out / f"{cfg.prefix}_twodir_T2_{_time_label(T2)}ps.csv"
        write_csv(path, header, cols)
        files.append(path)
    return files, {"condition_number": float(spec.cond)}


def run_dipoles(cfg, out):
    p, b = cfg.system, cfg.block
    files = []
    derived = {"g_sqrtN": [b["g_sqrtN"]], "g_per_molecule": b["g_sqrtN"] / np.sqrt(b["N"]), "block_dim": b["N"] + 1}
    for count in b["detuned_count"]:
        sticks = dipole_distribution(b["N"], b["g_sqrtN"], count, b["delta_omega"], p)
        axis = _shift(sticks.omega, b["axis_convention"], p.omega_c)
        path = out / f"{cfg.prefix}_dipoles_{count}.csv"
        write_csv(path, ["omega_cm", "strength", "photon_weight"], [axis, sticks.strength, sticks.photon_weight])
        files.append(path)
        if b["broadening"] is not None and b["omega"] is not None:
            grid = b["omega"].values()
            spec = sticks.broadened(grid, b["broadening"], b["shape"])
            path = out / f"{cfg.prefix}_dipoles_{count}_broadened.csv"
            write_csv(path, ["omega_cm", "strength"], [_shift(grid, b["axis_convention"], p.omega_c), spec])
            files.append(path)
    return files, derived


RUNNERS = {"dynamics": run_dynamics, "trps": run_trps, "twodir": run_twodir, "dipoles": run_dipoles}


def _derived(cfg):
    p = cfg.system
    return {
        "nbar": [float(x) for x in p.nbar],
        "g_sqrtN": [float(x) for x in p.g * np.sqrt(p.N)],
        "dim_L": int((p.N + 1) ** 2 * 2**p.N),
        "n_configs": len(enumerate_configs(p.N)),
        "cavity_loss": format_quantity(p.cavity_loss, "wavenumber"),
        "rate_per_cm_rad_ps": float(p.rate_per_cm),
    }


def run(config, output_dir=None):
    """Execute one configured run; returns the sidecar dictionary."""
    start = time.perf_counter()
    cfg = load_config(config)
    if cfg.run == "validate":
        reports, ok = validate()
        return {"passed": ok, "reports": [r.as_dict() for r in reports]}
    out = Path(output_dir) if output_dir else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    files, extra = RUNNERS[cfg.run](cfg, out)
    sidecar = {
        "resolved_config": cfg.resolved,
        "derived": {**_derived(cfg), **extra},
        "version": __version__,
        "outputs": [f.name for f in files],
        "wall_time_s": time.perf_counter() - start,
    }
    with open(out / f"{cfg.prefix}.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    return sidecar


def validate():
    from .validation import run_suite

    reports = run_suite()
    return reports, all(r.passed for r in reports)


def _print_reports(reports, stream):
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag}  {r.name:34s} deviation={r.deviation:.3e}  tol={r.tolerance:.1e}  "
              f"({r.runtime:.2f} s)", file=stream)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="vibpol", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a TOML/JSON config or a bundled preset")
    p_run.add_argument("config", help=f"config path or preset name ({', '.join(PRESETS)})")
    p_run.add_argument("-o", "--output-dir", help="override the configured output directory")
    p_val = sub.add_parser("validate", help="run the oracle and invariant suite")
    p_val.add_argument("--json", metavar="PATH", help="write the machine-readable report here")
    sub.add_parser("presets", help="list bundled presets")
    args = parser.parse_args(argv)

    if args.command == "presets":
        print("\n".join(PRESETS))
        return EXIT_OK
    if args.command == "validate":
        reports, ok = validate()
        _print_reports(reports, sys.stdout)
        if args.json:
            p = SystemParams.w_co6()
            payload = {"passed": ok, "version": __version__,
                       "derived": {"dim_L": int((p.N + 1) ** 2 * 2**p.N), "nbar": float(p.nbar[0])},
                       "reports": [r.as_dict() for r in reports]}
            Path(args.json).write_text(json.dumps(payload, indent=2) + "\n")
        return EXIT_OK if ok else EXIT_VALIDATE_FAILED
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            sidecar = run(args.config, args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConditioningAbort as exc:
        print(f"numerical conditioning abort: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    if "reports" in sidecar:
        return EXIT_OK if sidecar["passed"] else EXIT_VALIDATE_FAILED
    print(f"wrote {', '.join(sidecar['outputs'])} ({sidecar['wall_time_s']:.2f} s)")
    return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {category.__name__}: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
