"""Closed-form heterodyne signals: TRPS, rephasing 2D-IR and large-N dipole sticks.

Frequency axes are detunings from the cavity frequency (cm^-1). Overall
prefactors are set to one, so spectra are in arbitrary units. TRPS is
reported as -Im of the response sum and 2D-IR as Re of the pathway sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import block_eigensystems, build_block_hamiltonian, SolventConfig, SystemParams, thermal_config_weights
from .liouvillian import esd_green, ese_green, ground_propagator


@dataclass(frozen=True)
class Pulse:
    """Gaussian pulse filter; ``center`` is the lab-frame carrier in cm^-1."""

    center: float
    sigma: float
    polarization: tuple = (0.0, 0.0, 1.0)
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("pulse sigma must be positive")
        pol = np.asarray(self.polarization, dtype=float)
        if pol.shape != (3,) or abs(np.linalg.norm(pol) - 1.0) > 1e-9:
            raise ValueError(f"polarization must be a unit 3-vector, got {self.polarization}")


def gaussian_envelope(omega, pulse, omega_c):
    """Pulse spectrum at rotating-frame frequency ``omega``."""
    rel = pulse.center - omega_c
    return pulse.amplitude * np.exp(-((np.asarray(omega) - rel) ** 2) / (2.0 * pulse.sigma**2))


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    axes: tuple
    values: np.ndarray
    components: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for ax in self.axes:
            if np.any(np.diff(ax) <= 0):
                raise ValueError("spectrum axes must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("non-finite spectrum values")


def linewidths(params, eigs, cavity=True):
    """Optical-coherence half-widths gamma_i^(Y) in cm^-1, shape (2^N, N+1).

    Solvent part sum_m gamma_m (nbar_m + l_m); with ``cavity`` the photon
    fraction of each eigenstate adds omega_c/(2Q).
    """
    out = np.empty((len(eigs), params.N + 1))
    for P, e in enumerate(eigs):
        bits = np.asarray(e.config.bits, dtype=float)
        base = float(np.sum(params.gamma * (params.nbar + bits)))
        out[P] = base + (0.5 * params.cavity_loss * e.photon_weight if cavity else 0.0)
    return out


def _projected_dipoles(eigs, pulse):
    pol = np.asarray(pulse.polarization, dtype=float)
    return np.stack([e.V @ pol for e in eigs])


def _omegas(eigs):
    return np.stack([e.omega_k for e in eigs])


def trps(state, params, probe, lo, omega_grid, eigs=None, include_leakage=True, cavity_width=True):
    """Time-resolved photoluminescence spectrum of ``state`` (already at tau_pr)."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size == 0:
        raise ValueError("empty frequency grid")
    eigs = eigs or block_eigensystems(params)
    w = _omegas(eigs)
    gam = linewidths(params, eigs, cavity_width)
    v_lo = _projected_dipoles(eigs, lo)
    v_pr = _projected_dipoles(eigs, probe)
    filt = np.conj(gaussian_envelope(w, lo, params.omega_c)) * gaussian_envelope(w, probe, params.omega_c)
    blocks = state.blocks
    # weight[Y, i] = conj(V_lo,i) filter_i sum_j V_pr,j <psi_i|rho|psi_j>  (minus the leakage term)
    weight = np.empty_like(w, dtype=complex)
    for Y, e in enumerate(eigs):
        rho_eig = e.C.conj().T @ blocks[Y] @ e.C
        weight[Y] = rho_eig @ v_pr[Y]
        if include_leakage:
            weight[Y] -= v_pr[Y] * state.ground[Y]
    weight *= np.conj(v_lo) * filt
    denom = omega_grid[:, None, None] - w[None] + 1j * gam[None]
    total = np.sum(weight[None] / denom, axis=(1, 2))
    return SpectrumGrid((omega_grid,), -total.imag, metadata={"tau_pr": state.time})


@dataclass(frozen=True, eq=False)
class TwoDContext:
    """T2-independent ingredients shared across waiting times."""

    params: SystemParams
    eigs: list
    spec: object
    weights: np.ndarray
    omega1: np.ndarray
    omega3: np.ndarray
    A: np.ndarray        # (n3, 2^N, N+1, N+1) detection factor for (r, i, i')
    B: np.ndarray        # (2^N, N+1, N+1, n1) preparation factor for (J, j', j)
    A_gnd: np.ndarray    # (n3, 2^N)
    B_gnd: np.ndarray    # (2^N, n1)


def twodir_context(params, spec, pulses, omega1, omega3, initial="pure-ground", eigs=None, cavity_width=True):
    """Precompute dipole, filter and Lorentzian factors of the rephasing signal.

    ``pulses`` maps k1, k2, k3, lo to :class:`Pulse`.
    """
    omega1 = np.asarray(omega1, dtype=float)
    omega3 = np.asarray(omega3, dtype=float)
    if omega1.size == 0 or omega3.size == 0:
        raise ValueError("empty frequency grid")
    eigs = eigs or block_eigensystems(params)
    if initial == "thermal":
        weights = thermal_config_weights(params)
    elif initial == "pure-ground":
        weights = np.zeros(2**params.N)
        weights[0] = 1.0
    else:
        raise ValueError(f"initial must be 'thermal' or 'pure-ground', got {initial!r}")
    w = _omegas(eigs)
    gam = linewidths(params, eigs, cavity_width)
    oc = params.omega_c
    v = {k: _projected_dipoles(eigs, p) for k, p in pulses.items()}
    env = {k: gaussian_envelope(w, p, oc) for k, p in pulses.items()}

    f3 = np.conj(env["lo"]) * env["k3"]                                  # (2^N, N+1) at omega_i^(r)
    f1 = env["k2"] * np.conj(env["k1"])                                  # at omega_j^(J)
    d3 = 1.0 / (omega3[:, None, None] - w[None] + 1j * gam[None])        # (n3, r, i)
    d1 = 1.0 / (omega1[:, None, None] + w[None] + 1j * gam[None])        # (n1, J, j)

    det = np.conj(v["lo"]) * f3 * d3                                     # (n3, r, i)
    A = det[..., :, None] * v["k3"][None, :, None, :]                    # (n3, r, i, i')
    prep = np.conj(v["k1"]) * f1 * d1 * weights[None, :, None]           # (n1, J, j)
    B = np.einsum("Jp,nJj->Jpjn", v["k2"], prep)                         # (J, j', j, n1)
    A_gnd = np.einsum("nri,ri->nr", det, v["k3"])
    B_gnd = np.einsum("Jj,nJj->Jn", v["k2"], prep)
    return TwoDContext(params, eigs, spec, weights, omega1, omega3, A, B, A_gnd, B_gnd)


def twodir(ctx, T2, subtract_gsb=True, components=False):
    """Rephasing 2D-IR spectrum at waiting time ``T2`` (ps).

    Values are indexed [omega1, omega3]. The GSB pathway is left out when
    ``subtract_gsb`` is set.
    """
    if T2 < 0:
        raise ValueError("T2 must be non-negative")
    p = ctx.params
    n3, n1 = ctx.omega3.size, ctx.omega1.size
    A = ctx.A.reshape(n3, -1)
    B = ctx.B.reshape(-1, n1)
    ese = A @ (ese_green(ctx.spec, T2, ctx.eigs) @ B)
    gsb = ctx.A_gnd @ ground_propagator(p, T2) @ ctx.B_gnd
    esd = ctx.A_gnd @ (esd_green(ctx.spec, p, T2, ctx.eigs).reshape(2**p.N, -1) @ B)
    parts = {"ese": ese.real.T, "gsb": gsb.real.T, "esd": -esd.real.T}
    for name, arr in parts.items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in the {name.upper()} pathway")
    total = parts["ese"] + parts["esd"] + (0.0 if subtract_gsb else parts["gsb"])
    comps = parts if components else {}
    return SpectrumGrid((ctx.omega1, ctx.omega3), total, comps,
                        {"T2": float(T2), "subtract_gsb": subtract_gsb})


@dataclass(frozen=True, eq=False)
class DipoleSticks:
    omega: np.ndarray
    strength: np.ndarray
    photon_weight: np.ndarray
    g: float

    def broadened(self, grid, width, shape="lorentzian"):
        grid = np.asarray(grid, dtype=float)
        x = grid[:, None] - self.omega[None, :]
        if shape == "lorentzian":
            kern = (width / math.pi) / (x**2 + width**2)
        elif shape == "gaussian":
            kern = np.exp(-(x**2) / (2 * width**2)) / (width * math.sqrt(2 * math.pi))
        else:
            raise ValueError(f"unknown broadening shape {shape!r}")
        return kern @ self.strength


def dipole_distribution(n, g_sqrt_n, detuned_count, delta_omega, params=None):
    """Stick spectrum (omega_k, |V_k|^2) of a single large-N configuration block.

    ``detuned_count`` molecules are shifted by ``delta_omega``; the rest stay
    at the base frequency. Other parameters come from ``params`` (defaults to
    the W(CO)6 set) with uniform molecules.
    """
    if not 0 <= detuned_count <= n:
        raise ValueError(f"detuned_count={detuned_count} must lie in [0, N={n}]")
    base = params or SystemParams.w_co6(N=1)
    g = g_sqrt_n / math.sqrt(n)
    mu = float(np.linalg.norm(base.mu[0]))
    diag = np.full(n + 1, float(base.omega[0] - base.omega_c))
    diag[:detuned_count] += delta_omega
    diag[-1] = 0.0
    H = np.diag(diag)
    H[:n, n] = g
    H[n, :n] = g
    w, C = scipy.linalg.eigh(H, overwrite_a=True, check_finite=False, driver="evd")
    V = mu * C[:n, :].sum(axis=0)
    return DipoleSticks(w, V**2, C[n, :] ** 2, g)
