"""The `validate` suite: oracle comparisons plus structural invariants at W(CO)6 parameters."""
from __future__ import annotations

import time

import numpy as np
import scipy.linalg

from .core import SystemParams, block_eigensystems, thermal_config_weights
from .dynamics import DensityState, evolve, prepare_initial
from .liouvillian import (assemble_full_generator, assemble_ground_generator,
                          decompose, ground_propagator, solvent_gg, SectorIndexing)
from .oracle import OracleReport, compare_propagators, compare_trps, random_density_state
from .signals import Pulse

SEED = 20240607


def _timed(name, tol, fn, **details):
    start = time.perf_counter()
    dev = fn()
    return OracleReport.make(name, dev, tol, time.perf_counter() - start, **details)


def propagator_checks(sizes=(1, 2, 3), n_states=2, times=None):
    times = np.linspace(0.0, 200.0, 9) if times is None else times
    rng = np.random.default_rng(SEED)
    reports = []
    for N in sizes:
        params = SystemParams.w_co6(N=N)
        states = [random_density_state(N, rng) for _ in range(n_states)]
        reports.append(compare_propagators(params, states, times))
    params = SystemParams.w_co6()
    lp = prepare_initial("LP", block_eigensystems(params)[0])
    rep = compare_propagators(params, lp, np.array([0.0, 1.0, 10.0, 100.0]))
    reports.append(OracleReport(rep.name + "_LP", rep.deviation, rep.tolerance, rep.passed, rep.runtime, rep.details))
    return reports


def trps_checks():
    params = SystemParams.w_co6(N=1, gamma=0.0, Q=1983.0 / 0.5)
    lp = prepare_initial("LP", block_eigensystems(params)[0])
    state = DensityState(0.7 * lp.excited, np.array([0.3, 0.0]))
    omega = np.linspace(-6.0, 6.0, 1201)
    return compare_trps(state, params, Pulse(1993.0, 50.0), Pulse(1993.0, 50.0), omega)


def structure_checks(params=None):
    params = params or SystemParams.w_co6()
    N = params.N
    idx = SectorIndexing(N)
    spec = decompose(params)
    reports = []
    eigs = block_eigensystems(params)

    reports.append(OracleReport.make("dim_L", abs(spec.nu.size - (N + 1) ** 2 * 2**N), 0, 0.0,
                                     dim_L=int(spec.nu.size), condition_number=float(spec.cond)))
    reports.append(OracleReport.make("max_real_eigenvalue", max(0.0, float(spec.nu.real.max())), 1e-10, 0.0,
                                     max_real=float(spec.nu.real.max())))

    traj = []

    def trace_drift():
        lp = prepare_initial("LP", eigs[0])
        traj.extend(evolve(lp, np.linspace(0.0, 200.0, 201), spec, params, check=False))
        return max(abs(s.trace() - 1.0) for s in traj)

    reports.append(_timed("trace_drift_200ps", 1e-8, trace_drift))
    reports.append(OracleReport.make("hermiticity", max(s.hermiticity_error() for s in traj), 1e-10, 0.0))
    reports.append(OracleReport.make("positivity", max(0.0, -min(s.min_population() for s in traj)), 1e-10, 0.0))

    def generator_trace():
        full = assemble_full_generator(params)
        rng = np.random.default_rng(SEED)
        rho = random_density_state(N, rng)
        y = full @ np.concatenate([rho.excited, rho.ground.astype(complex)])
        d = DensityState(y[:idx.excited_dim], y[idx.excited_dim:].real, 0.0)
        return abs(d.trace())

    reports.append(_timed("generator_trace_preservation", 1e-12, generator_trace))

    def column_sums():
        dev = 0.0
        for t in (0.1, 1.0, 10.0, 100.0):
            for s in range(N):
                dev = max(dev, np.abs(solvent_gg(params, s, t).sum(axis=0) - 1.0).max())
        return dev

    reports.append(_timed("solvent_column_sums", 1e-12, column_sums))

    def semigroup():
        dev = 0.0
        W, _ = assemble_ground_generator(params)
        for t, s in ((0.1, 1.0), (1.0, 10.0), (10.0, 100.0)):
            lhs = ground_propagator(params, t + s)
            dev = max(dev, np.abs(lhs - ground_propagator(params, t) @ ground_propagator(params, s)).max())
            dev = max(dev, np.abs(lhs - scipy.linalg.expm(W.toarray() * (t + s))).max())
        return dev

    reports.append(_timed("solvent_semigroup", 1e-10, semigroup))

    weights = thermal_config_weights(params)
    reports.append(OracleReport.make("thermal_weights_sum", abs(weights.sum() - 1.0), 1e-12, 0.0))

    def null_vector():
        W, _ = assemble_ground_generator(params)
        w, vecs = np.linalg.eig(W.toarray())
        k = int(np.argmin(np.abs(w)))
        v = vecs[:, k].real
        return float(np.abs(v / v.sum() - weights).max())

    reports.append(_timed("thermal_weights_null_vector", 1e-10, null_vector,
                          nbar=[float(x) for x in params.nbar]))
    return reports


def run_suite():
    """All checks, in a fixed order."""
    return propagator_checks() + trps_checks() + structure_checks()
