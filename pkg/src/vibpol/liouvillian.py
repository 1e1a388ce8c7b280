"""Lindblad generator on the config-diagonal single-excitation sector.

Excited-sector vectors hold rho^{(P)}_{mn} = <e_m; P| rho |e_n; P> at flat index
``P * (N+1)**2 + m * (N+1) + n`` (0-based m, n; photon is m = N). The ground
sector holds the populations of |G; P> at index P. All generators are in
rad/ps; time in ps.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import build_block_hamiltonian, enumerate_configs

MAX_DENSE_DIM = 10_000
COND_WARN = 1e8


class IllConditionedWarning(RuntimeWarning):
    pass


class DefectiveGeneratorError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SectorIndexing:
    N: int

    @property
    def block(self):
        return (self.N + 1) ** 2

    @property
    def n_configs(self):
        return 2**self.N

    @property
    def excited_dim(self):
        return self.block * self.n_configs

    @property
    def ground_dim(self):
        return self.n_configs

    def excited(self, m, n, P):
        d = self.N + 1
        return P * self.block + m * d + n

    def unflatten(self, u):
        P, rest = divmod(u, self.block)
        m, n = divmod(rest, self.N + 1)
        return m, n, P

    def population_indices(self, m):
        """Flat indices of rho_{mm} in every config block."""
        return np.arange(self.n_configs) * self.block + m * (self.N + 1) + m

    def diagonal_mask(self):
        d = self.N + 1
        mask = np.zeros(self.excited_dim, dtype=bool)
        for P in range(self.n_configs):
            mask[P * self.block + np.arange(d) * (d + 1)] = True
        return mask

    def as_blocks(self, vec):
        """View an excited vector (…, dim) as (…, 2^N, N+1, N+1)."""
        vec = np.asarray(vec)
        return vec.reshape(vec.shape[:-1] + (self.n_configs, self.N + 1, self.N + 1))


def _rates(params):
    """Upward and downward solvent jump rates per molecule in rad/ps."""
    up = params.gamma * params.nbar * params.rate_per_cm
    down = params.gamma * (params.nbar + 1.0) * params.rate_per_cm
    return up, down


def assemble_excited_generator(params):
    """Sparse Lindblad generator restricted to the excited config-diagonal sector."""
    idx = SectorIndexing(params.N)
    d, nb = params.N + 1, idx.block
    eye_d = np.eye(d)
    up, down = _rates(params)
    kappa = params.cavity_loss * params.rate_per_cm

    photon = np.zeros(d)
    photon[-1] = 1.0
    cavity_diag = -0.5 * kappa * (np.add.outer(photon, photon)).ravel()

    blocks_diag = []
    for P in enumerate_configs(params.N):
        H = build_block_hamiltonian(params, P) * params.rate_per_cm
        coherent = -1j * (np.kron(H, eye_d) - np.kron(eye_d, H.T))
        bits = np.asarray(P.bits)
        loss = np.sum(np.where(bits == 0, up, down))
        blocks_diag.append(coherent + np.diag(cavity_diag - loss))
    L = sp.block_diag(blocks_diag, format="lil", dtype=complex)

    eye_b = np.ones(nb)
    rows, cols, vals = [], [], []
    for P in range(idx.n_configs):
        for i in range(params.N):
            flipped = P ^ (1 << i)
            rate = down[i] if (P >> i) & 1 else up[i]
            rows.append(flipped * nb + np.arange(nb))
            cols.append(P * nb + np.arange(nb))
            vals.append(rate * eye_b)
    jumps = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=L.shape)
    return (L.tocsr() + jumps).tocsr()


def solvent_rate_matrix(params, s):
    """2x2 rate matrix of molecule ``s``'s solvent coordinate, basis (l=0, l=1)."""
    up, down = _rates(params)
    return np.array([[-up[s], down[s]], [up[s], -down[s]]])


def assemble_ground_generator(params):
    """Ground-sector rate matrix and the photon-population feed map.

    Returns ``(W, F)``: ``W`` acts on ground populations, ``F`` maps an
    excited-sector vector to the leakage rate into each ground config.
    """
    idx = SectorIndexing(params.N)
    W = sp.csr_matrix((idx.ground_dim, idx.ground_dim))
    for s in range(params.N):
        left = sp.identity(2 ** (params.N - 1 - s), format="csr")
        right = sp.identity(2**s, format="csr")
        W = W + sp.kron(sp.kron(left, sp.csr_matrix(solvent_rate_matrix(params, s))), right, format="csr")
    kappa = params.cavity_loss * params.rate_per_cm
    cols = idx.population_indices(params.N)
    F = sp.csr_matrix((np.full(idx.n_configs, kappa), (np.arange(idx.n_configs), cols)),
                      shape=(idx.ground_dim, idx.excited_dim))
    F.eliminate_zeros()
    return W.tocsr(), F


def assemble_full_generator(params):
    """Block generator [[L, 0], [F, W]] on (excited, ground) in one matrix."""
    L = assemble_excited_generator(params)
    W, F = assemble_ground_generator(params)
    return sp.bmat([[L, None], [F.astype(complex), W.astype(complex)]], format="csr")


@dataclass(frozen=True, eq=False)
class LiouvillianSpectrum:
    nu: np.ndarray
    S: np.ndarray
    S_inv: np.ndarray
    cond: float
    indexing: SectorIndexing

    @property
    def ill_conditioned(self):
        return self.cond > COND_WARN


def spectral_decompose(L, N=None):
    """Dense eigendecomposition L = S diag(nu) S^-1 of the excited generator."""
    dim = L.shape[0]
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"generator dimension {dim} exceeds the dense eigensolve limit {MAX_DENSE_DIM}")
    if N is None:
        N = int(round(np.log2(dim))) - 2
        while (N + 1) ** 2 * 2**N < dim:
            N += 1
        if (N + 1) ** 2 * 2**N != dim:
            raise ValueError(f"dimension {dim} is not (N+1)^2 2^N for any N")
    dense = L.toarray() if sp.issparse(L) else np.asarray(L)
    nu, S = np.linalg.eig(dense)
    try:
        S_inv = np.linalg.inv(S)
    except np.linalg.LinAlgError as exc:
        raise DefectiveGeneratorError("eigenvector matrix is singular; generator is defective") from exc
    cond = float(np.linalg.cond(S))
    # beyond 1/eps the eigenvectors are numerically dependent
    if not np.isfinite(cond) or cond >= 1.0 / np.finfo(float).eps:
        raise DefectiveGeneratorError("eigenvector matrix is singular; generator is defective")
    if cond > COND_WARN:
        warnings.warn(f"Liouvillian eigenvectors ill-conditioned (cond={cond:.3g}); "
                      "use the RK4 oracle or expm propagation instead", IllConditionedWarning, stacklevel=2)
    for a in (nu, S, S_inv):
        a.setflags(write=False)
    return LiouvillianSpectrum(nu, S, S_inv, cond, SectorIndexing(N))


def decompose(params):
    return spectral_decompose(assemble_excited_generator(params), params.N)


def propagate_excited(spec, rho0, t):
    """rho(t) = S exp(nu t) S^-1 rho0. ``t`` may be a scalar or 1-D array.

    ``rho0`` may carry several states as columns; the time axis is prepended
    when ``t`` is an array.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("propagation times must be non-negative")
    coeff = spec.S_inv @ np.asarray(rho0, dtype=complex)
    phase = np.exp(np.multiply.outer(t_arr, spec.nu))
    if coeff.ndim == 1:
        return (phase * coeff) @ spec.S.T
    return np.einsum("iu,...u,uk->...ik", spec.S, phase, coeff)


def exp_convolution(a, b, t):
    """Closed form of int_0^t exp(a (t - s)) exp(b s) ds, broadcasting over a, b.

    Evaluated as exp(c t) * t * phi1(-|b - a| t) with c the exponent of larger
    real part and phi1(z) = expm1(z) / z, so coincident exponents take the
    analytic limit t exp(a t) and no intermediate grows.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    swap = b.real > a.real
    hi = np.where(swap, b, a)
    lo = np.where(swap, a, b)
    z = (lo - hi) * t
    small = (np.abs(lo - hi) <= 1e-9) | (np.abs(z) <= 1e-9)
    safe_z = np.where(small, 1.0, z)
    phi1 = np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(safe_z) / safe_z)
    return np.exp(hi * t) * t * phi1


@dataclass(frozen=True, eq=False)
class SolventEigen:
    """Analytic eigendecomposition of the ground-sector rate matrix."""

    rates: np.ndarray
    R: np.ndarray
    R_inv: np.ndarray

    def propagator(self, t):
        return (self.R * np.exp(self.rates * t)) @ self.R_inv


def solvent_eigen(params):
    """Tensor-product eigenbasis of the ground-sector generator."""
    up, down = _rates(params)
    rates, R, R_inv = np.zeros(1), np.ones((1, 1)), np.ones((1, 1))
    for s in range(params.N):
        tot = up[s] + down[s]
        r = np.array([[down[s] / tot, 1.0], [up[s] / tot, -1.0]]) if tot > 0 else np.eye(2)
        l = np.array([[1.0, 1.0], [up[s] / tot, -down[s] / tot]]) if tot > 0 else np.eye(2)
        lam = np.array([0.0, -tot])
        rates = np.add.outer(lam, rates).ravel()
        R = np.kron(r, R)
        R_inv = np.kron(l, R_inv)
    return SolventEigen(rates, R, R_inv)


def solvent_gg(params, s, t):
    """Closed-form 2x2 solvent propagator of molecule ``s``, basis (l=0, l=1)."""
    n = params.nbar[s]
    lam = params.gamma[s] * (2 * n + 1) * params.rate_per_cm
    stationary = np.array([[n + 1, n + 1], [n, n]]) / (2 * n + 1)
    transient = np.array([[n, -n - 1], [-n, n + 1]]) / (2 * n + 1)
    return stationary + np.exp(-lam * t) * transient


def ground_propagator(params, t):
    """Product of per-molecule solvent propagators over all configurations."""
    G = np.ones((1, 1))
    for s in range(params.N):
        G = np.kron(solvent_gg(params, s, t), G)
    return G


def leaked_ground(spec, params, coeffs, t, solvent=None, real=True):
    """Ground populations accumulated by cavity leakage up to time ``t``.

    ``coeffs`` are excited-sector initial vectors (columns). Evaluates
    int_0^t G_gnd(t - t') (omega_c/Q) rho_photon(t') dt' in closed form per
    (Liouvillian mode, solvent mode) pair. Hermitian inputs give real
    populations; pass ``real=False`` to keep the imaginary part produced by
    non-Hermitian inputs.
    """
    kappa = params.cavity_loss * params.rate_per_cm
    coeffs = np.asarray(coeffs, dtype=complex)
    single = coeffs.ndim == 1
    if single:
        coeffs = coeffs[:, None]
    idx = spec.indexing
    if kappa == 0.0 or t == 0.0:
        out = np.zeros((idx.ground_dim, coeffs.shape[1]), dtype=float if real else complex)
        return out[:, 0] if single else out
    solvent = solvent or solvent_eigen(params)
    photon_rows = spec.S[idx.population_indices(params.N), :]       # (P, u)
    amp = spec.S_inv @ coeffs                                        # (u, k)
    conv = exp_convolution(solvent.rates[:, None], spec.nu[None, :], t)  # (mode, u)
    # out[r, k] = kappa sum_{mode, P, u} R[r, mode] Rinv[mode, P] photon[P, u] conv[mode, u] amp[u, k]
    proj = solvent.R_inv @ photon_rows                               # (mode, u)
    out = kappa * (solvent.R @ ((proj * conv) @ amp))
    if real:
        out = out.real
    return out[:, 0] if single else out


def esd_green(spec, params, T2, eigs):
    """Leakage Green's function <<G^r, G^r | G(T2) | psi_j'^J, psi_j^J>>.

    Returns an array indexed [r, J, j', j].
    """
    idx = spec.indexing
    d = params.N + 1
    basis = eigenpair_basis(eigs)
    out = leaked_ground(spec, params, basis, T2, real=False)
    return out.reshape(idx.ground_dim, idx.n_configs, d, d)


def eigenpair_basis(eigs):
    """Columns are the site-basis vectors of |psi_a^P><psi_b^P|, ordered (P, a, b)."""
    nconf = len(eigs)
    d = eigs[0].C.shape[0]
    U = np.zeros((nconf * d * d, nconf * d * d), dtype=complex)
    for P, e in enumerate(eigs):
        sl = slice(P * d * d, (P + 1) * d * d)
        U[sl, sl] = np.kron(e.C, e.C.conj())
    return U


def ese_green(spec, T2, eigs):
    """Excited-sector Green's function in the eigenpair basis.

    Returns G[(r, i, i'), (J, j', j)] = <psi_i^r| G(T2)[|psi_j'^J><psi_j^J|] |psi_i'^r>.
    """
    U = eigenpair_basis(eigs)
    prop = (spec.S * np.exp(spec.nu * T2)) @ spec.S_inv
    return U.conj().T @ prop @ U
