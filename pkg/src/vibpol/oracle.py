"""Brute-force cross-checks for the spectral machinery.

Nothing here calls the Liouvillian eigendecomposition: the master equation is
stepped with classical RK4 on the assembled generator, and the TRPS oracle
propagates the optical coherence with matrix exponentials and Fourier
transforms it numerically.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import build_block_hamiltonian, enumerate_configs
from .dynamics import DensityState, evolve
from .liouvillian import assemble_full_generator, decompose
from .signals import SpectrumGrid


@dataclass(frozen=True)
class OracleReport:
    name: str
    deviation: float
    tolerance: float
    passed: bool
    runtime: float
    details: dict = None

    @classmethod
    def make(cls, name, deviation, tolerance, runtime, **details):
        return cls(name, float(deviation), float(tolerance), bool(deviation <= tolerance), float(runtime),
                   details or None)

    def as_dict(self):
        return {"name": self.name, "deviation": self.deviation, "tolerance": self.tolerance,
                "passed": self.passed, "runtime_s": self.runtime, "details": self.details or {}}


class StepSizeError(ValueError):
    pass


def max_step(params):
    """Largest RK4 step (ps) allowed: 0.01 / max |H| entry in 1/ps."""
    hmax = max(np.abs(build_block_hamiltonian(params, P)).max() for P in enumerate_configs(params.N))
    hmax *= params.rate_per_cm
    return math.inf if hmax == 0 else 0.01 / hmax


def _stack(states):
    return np.stack([np.concatenate([s.excited, s.ground.astype(complex)]) for s in states], axis=1)


def _unstack(y, n_exc, t):
    return [DensityState(y[:n_exc, k].copy(), y[n_exc:, k].real.copy(), t) for k in range(y.shape[1])]


def rk4_propagate(params, rho0, dt, t_end, times=None):
    """Fixed-step RK4 integration of the full (excited + ground) generator.

    ``rho0`` is a DensityState or a list of them. Each interval between
    recorded times is split into equal substeps no longer than ``dt``.
    Returns ``(times, trajectory)``; the trajectory holds one DensityState per
    time, or one list per time when several initial states are given.
    """
    if params.N > 4:
        raise ValueError("the RK4 oracle is limited to N <= 4")
    limit = max_step(params)
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} ps exceeds the stability bound; use dt <= {limit:.6g} ps")
    single = isinstance(rho0, DensityState)
    states = [rho0] if single else list(rho0)
    times = np.array([0.0, t_end] if times is None else times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be ascending and non-negative")
    G = assemble_full_generator(params).toarray()
    y = _stack(states)
    n_exc = states[0].excited.shape[0]
    out, now = [], 0.0
    for t in times:
        span = t - now
        if span > 0:
            n = max(1, math.ceil(span / dt - 1e-9))
            h = span / n
            for _ in range(n):
                k1 = G @ y
                k2 = G @ (y + 0.5 * h * k1)
                k3 = G @ (y + 0.5 * h * k2)
                k4 = G @ (y + h * k3)
                y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            now = t
        snap = _unstack(y, n_exc, float(t))
        out.append(snap[0] if single else snap)
    return times, out


def random_density_state(N, rng):
    """Random Hermitian, positive, unit-trace state spread over all sectors."""
    d, nconf = N + 1, 2**N
    blocks = []
    for _ in range(nconf):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        blocks.append(a @ a.conj().T)
    ground = rng.random(nconf)
    total = sum(np.trace(b).real for b in blocks) + ground.sum()
    excited = np.concatenate([b.ravel() for b in blocks]) / total
    return DensityState(excited, ground / total)


def compare_propagators(params, rho0, times, tol=1e-6, spec=None, dt=None):
    """Max element deviation between spectral propagation and RK4."""
    start = time.perf_counter()
    spec = spec if spec is not None else decompose(params)
    states = [rho0] if isinstance(rho0, DensityState) else list(rho0)
    times = np.asarray(times, dtype=float)
    dt = dt or max_step(params)
    _, rk = rk4_propagate(params, states, dt, times[-1], times)
    dev = 0.0
    for k, s in enumerate(states):
        spectral = evolve(s, times, spec, params, check=False)
        for a, b in zip(spectral, (snap[k] for snap in rk)):
            dev = max(dev, np.abs(a.excited - b.excited).max(), np.abs(a.ground - b.ground).max())
    return OracleReport.make(f"spectral_vs_rk4_N{params.N}", dev, tol, time.perf_counter() - start,
                             n_states=len(states), t_max=float(times[-1]), dt=dt)


def _matrix_gaussian(H, pulse, omega_c):
    rel = pulse.center - omega_c
    shifted = H - rel * np.eye(H.shape[0])
    return pulse.amplitude * scipy.linalg.expm(-(shifted @ shifted) / (2.0 * pulse.sigma**2))


def timedomain_trps_oracle(state, params, probe, lo, omega_grid, t_max=None, n_t=None, include_leakage=True):
    """TRPS from the explicitly propagated emission coherence, Fourier transformed.

    The probe converts the excited population/ground population into the
    coherence X = rho d - p_G d; X evolves under H - i (omega_c / 2Q) |photon><photon|
    (times measured in the phase variable s = t * rate_per_cm, so the transform
    variable is cm^-1). Pulse filters act as Gaussian matrix functions of H on
    the emitting side.
    """
    if params.N != 1:
        raise NotImplementedError("the time-domain oracle covers N = 1 only")
    if np.any(params.gamma != 0):
        raise NotImplementedError("the time-domain oracle requires a frozen solvent (gamma = 0)")
    omega_grid = np.asarray(omega_grid, dtype=float)
    kappa = params.cavity_loss
    width = max(kappa / 4.0, 1e-3)
    t_max = t_max or 30.0 / width
    span = np.abs(omega_grid).max() + max(np.linalg.norm(build_block_hamiltonian(params, P), 2)
                                          for P in enumerate_configs(params.N))
    n_t = n_t or int(math.ceil(t_max * span / 0.1)) + 1
    s = np.linspace(0.0, t_max, n_t)
    ds = s[1] - s[0]
    weights = np.full(n_t, ds)
    weights[[0, -1]] = ds / 2

    pol_pr = np.asarray(probe.polarization)
    pol_lo = np.asarray(lo.polarization)
    d_pr = np.append(params.mu @ pol_pr, 0.0)
    d_lo = np.append(params.mu @ pol_lo, 0.0)
    blocks = state.blocks
    response = np.zeros(omega_grid.size, dtype=complex)
    for P in enumerate_configs(params.N):
        H = build_block_hamiltonian(params, P)
        x0 = blocks[P.index] @ d_pr
        if include_leakage:
            x0 = x0 - state.ground[P.index] * d_pr
        if not np.any(x0):
            continue
        F = _matrix_gaussian(H, lo, params.omega_c).conj() @ _matrix_gaussian(H, probe, params.omega_c)
        H_eff = H.astype(complex)
        H_eff[-1, -1] -= 0.5j * kappa
        step = scipy.linalg.expm(-1j * H_eff * ds)
        sig = np.empty(n_t, dtype=complex)
        x = x0.astype(complex)
        row = d_lo.conj() @ F
        for k in range(n_t):
            sig[k] = row @ x
            x = step @ x
        # sum_i ... / (Omega - w_i + i g_i) = -i int_0^inf sig(s) exp(i Omega s) ds
        ws = weights * sig
        for lo_i in range(0, omega_grid.size, 128):
            chunk = omega_grid[lo_i:lo_i + 128]
            response[lo_i:lo_i + 128] += -1j * (np.exp(1j * np.outer(chunk, s)) @ ws)
    return SpectrumGrid((omega_grid,), -response.imag, metadata={"oracle": "time-domain", "t_max": t_max})


def peak_fwhm(x, y):
    """Full width at half maximum of the tallest peak, linearly interpolated."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    half = y[k] / 2.0
    i = k
    while i > 0 and y[i] > half:
        i -= 1
    j = k
    while j < y.size - 1 and y[j] > half:
        j += 1
    left = x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    right = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(right - left)


def compare_trps(state, params, probe, lo, omega_grid, width_tol=0.05):
    """Peak position and width of the closed-form TRPS against the time-domain oracle."""
    from .signals import trps

    start = time.perf_counter()
    omega_grid = np.asarray(omega_grid, dtype=float)
    closed = trps(state, params, probe, lo, omega_grid).values
    brute = timedomain_trps_oracle(state, params, probe, lo, omega_grid).values
    elapsed = time.perf_counter() - start
    step = float(omega_grid[1] - omega_grid[0])
    shift = abs(omega_grid[np.argmax(closed)] - omega_grid[np.argmax(brute)])
    w_closed, w_brute = peak_fwhm(omega_grid, closed), peak_fwhm(omega_grid, brute)
    return [
        OracleReport.make("trps_peak_position", shift, step, elapsed,
                          peak_closed=float(omega_grid[np.argmax(closed)]),
                          peak_oracle=float(omega_grid[np.argmax(brute)])),
        OracleReport.make("trps_linewidth", abs(w_closed - w_brute) / w_brute, width_tol, 0.0,
                          fwhm_closed=w_closed, fwhm_oracle=w_brute),
    ]
