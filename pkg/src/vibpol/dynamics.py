"""Initial states, time evolution and observables of the joint density matrix."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .core import DARK, LP, UP, thermal_config_weights  # noqa: F401  (re-exported)
from .liouvillian import (SectorIndexing, assemble_full_generator, leaked_ground,
                          propagate_excited, solvent_eigen)


@dataclass(frozen=True, eq=False)
class DensityState:
    excited: np.ndarray
    ground: np.ndarray
    time: float = 0.0

    @property
    def N(self):
        return int(round(math.log2(self.ground.shape[0])))

    @property
    def indexing(self):
        return SectorIndexing(self.N)

    @property
    def blocks(self):
        """Excited sector as an array (2^N, N+1, N+1)."""
        return self.indexing.as_blocks(self.excited)

    def trace(self):
        return float(np.einsum("pii->", self.blocks).real + self.ground.sum())

    def hermiticity_error(self):
        b = self.blocks
        return float(np.max(np.abs(b - np.conj(np.swapaxes(b, 1, 2))), initial=0.0))

    def min_population(self):
        diag = np.einsum("pii->pi", self.blocks).real
        return float(min(diag.min(), self.ground.min()))

    def check(self, trace_tol=1e-8, herm_tol=1e-10, pos_tol=1e-10):
        """Raise if the state violates trace, hermiticity or positivity bounds."""
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace()!r} deviates from 1")
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"hermiticity error {self.hermiticity_error():.3g}")
        if self.min_population() < -pos_tol:
            raise ValueError(f"negative population {self.min_population():.3g}")


def _parse_selector(selector):
    if isinstance(selector, tuple):
        return selector[0].upper(), selector[1]
    text = str(selector).strip().upper()
    if ":" in text:
        kind, arg = text.split(":", 1)
        return kind, int(arg)
    if "(" in text and text.endswith(")"):
        kind, arg = text[:-1].split("(", 1)
        return kind, int(arg)
    return text, None


def prepare_initial(selector, eig, n_configs=None):
    """Initial state built from the eigensystem of config J.

    ``selector`` is one of LP, UP, DARK_UNIFORM, DARK:k (1-based among dark
    states), SITE:i (1-based molecule) or GROUND, optionally as a (kind, arg)
    tuple.
    """
    d = eig.C.shape[0]
    N = d - 1
    n_configs = n_configs or 2**N
    idx = SectorIndexing(N)
    J = eig.config.index
    kind, arg = _parse_selector(selector)
    excited = np.zeros(idx.excited_dim, dtype=complex)
    ground = np.zeros(idx.ground_dim)
    block = np.zeros((d, d), dtype=complex)

    def pure(vec):
        return np.outer(vec, vec.conj())

    if kind in (LP, UP):
        block = pure(eig.C[:, eig.index_of(kind)])
    elif kind == "DARK":
        darks = eig.dark_indices
        if arg is None or not 1 <= arg <= len(darks):
            raise IndexError(f"DARK({arg}) invalid: config has {len(darks)} dark states")
        block = pure(eig.C[:, darks[arg - 1]])
    elif kind == "DARK_UNIFORM":
        darks = eig.dark_indices
        if not darks:
            raise IndexError("no dark states for N=1")
        block = sum(pure(eig.C[:, k]) for k in darks) / len(darks)
    elif kind == "SITE":
        if arg is None or not 1 <= arg <= N:
            raise IndexError(f"SITE({arg}) invalid for N={N}")
        block[arg - 1, arg - 1] = 1.0
    elif kind == "GROUND":
        ground[J] = 1.0
    else:
        raise ValueError(f"unknown initial-state selector {selector!r}")
    excited[J * idx.block:(J + 1) * idx.block] = block.ravel()
    return DensityState(excited, ground, 0.0)


def evolve(state, times, spec, params, solvent=None, check=True):
    """Trajectory of ``state`` at the given times (ps, ascending, >= 0).

    Excited sector by spectral propagation; ground sector by its own analytic
    propagator plus the closed-form leakage feed. Falls back to Krylov
    exponentiation of the full generator if the spectrum is ill-conditioned.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and ascending")
    if spec is None or spec.ill_conditioned:
        if spec is not None:
            warnings.warn("ill-conditioned spectrum; evolving with expm_multiply", RuntimeWarning, stacklevel=2)
        return _evolve_expm(state, times, params, check)
    solvent = solvent or solvent_eigen(params)
    rho0 = state.excited
    excited = propagate_excited(spec, rho0, times)
    traj = []
    for k, t in enumerate(times):
        if t == 0.0:
            snap = DensityState(state.excited.copy(), state.ground.copy(), state.time)
            traj.append(snap)
            continue
        g0 = (solvent.R * np.exp(solvent.rates * t)) @ (solvent.R_inv @ state.ground)
        g = g0 + leaked_ground(spec, params, rho0, t, solvent)
        snap = DensityState(excited[k], g, state.time + float(t))
        if check:
            snap.check()
        traj.append(snap)
    return traj


def _evolve_expm(state, times, params, check):
    full = assemble_full_generator(params)
    y0 = np.concatenate([state.excited, state.ground.astype(complex)])
    n_exc = state.excited.shape[0]
    traj = []
    for t in times:
        y = expm_multiply(full * t, y0) if t > 0 else y0
        snap = DensityState(y[:n_exc], y[n_exc:].real.copy(), state.time + float(t))
        if check:
            snap.check()
        traj.append(snap)
    return traj


def _summed_block(state):
    return state.blocks.sum(axis=0)


def site_populations(state):
    """Populations of molecules 1..N then the photon, summed over configs."""
    return np.diag(_summed_block(state)).real.copy()


def intermolecule_coherence(state, i, j):
    """|sum_P rho_ij^(P)| for molecules i != j (1-based)."""
    if i == j:
        raise ValueError("coherence needs two different molecules")
    N = state.N
    if not (1 <= i <= N and 1 <= j <= N):
        raise IndexError(f"molecule indices must lie in [1, {N}]")
    return float(abs(_summed_block(state)[i - 1, j - 1]))


@dataclass(frozen=True)
class PolaritonPopulations:
    per_config: np.ndarray      # (2^N, N+1) eigenstate populations
    LP: float
    UP: float
    dark: float


def polariton_populations(state, eigs):
    blocks = state.blocks
    per = np.empty((len(eigs), blocks.shape[1]))
    lp = upp = dark = 0.0
    for P, e in enumerate(eigs):
        rot = e.C.conj().T @ blocks[P] @ e.C
        pops = np.diag(rot).real
        per[P] = pops
        for k, lab in enumerate(e.labels):
            if lab == LP:
                lp += pops[k]
            elif lab == UP:
                upp += pops[k]
            else:
                dark += pops[k]
    return PolaritonPopulations(per, lp, upp, dark)


def vibrational_wavefunction(x, a, ell):
    """First excited harmonic-oscillator wavefunction centered at ``a``."""
    y = np.asarray(x, dtype=float) - a
    return math.sqrt(2.0 / (ell**3 * math.sqrt(math.pi))) * y * np.exp(-(y**2) / (2.0 * ell**2))


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    x: np.ndarray
    values: np.ndarray

    @property
    def density(self):
        return np.diag(self.values).real if self.values.ndim == 2 else self.values


def spatial_density(state, x, params, full=False):
    """rho(x, x') from config-summed molecular coefficients.

    Returns the diagonal density by default, or the full (x, x') map with
    ``full=True``.
    """
    a, ell = params.positions, params.loc_length
    for i in range(params.N):
        for j in range(i + 1, params.N):
            if abs(a[i] - a[j]) < 0.01:
                warnings.warn(f"molecules {i + 1} and {j + 1} overlap (|a_i - a_j| < 0.01 nm)",
                              RuntimeWarning, stacklevel=2)
    x = np.asarray(x, dtype=float)
    phi = np.stack([vibrational_wavefunction(x, a[i], ell[i]) for i in range(params.N)])  # (N, nx)
    rho = _summed_block(state)[: params.N, : params.N]
    if full:
        values = phi.T @ rho @ phi.conj()
    else:
        values = np.einsum("ix,ij,jx->x", phi, rho, phi.conj()).real
    return SpatialGrid(x, values)


def rise_time(t, y, fraction=0.5, baseline=None):
    """First time y climbs ``fraction`` of the way from its start to its maximum.

    Linear interpolation between samples.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    y0 = y[0] if baseline is None else baseline
    target = y0 + fraction * (y.max() - y0)
    k = int(np.argmax(y >= target))
    if k == 0:
        return float(t[0])
    return float(t[k - 1] + (target - y[k - 1]) * (t[k] - t[k - 1]) / (y[k] - y[k - 1]))


def decay_rate(t, y):
    """Least-squares exponential decay rate of a positive series (log-linear fit)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    slope = np.polyfit(t[keep], np.log(y[keep]), 1)[0]
    return -float(slope)
