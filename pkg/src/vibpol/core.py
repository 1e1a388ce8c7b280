"""Solvent configurations and the single-excitation block Hamiltonians.

Each solvent configuration P = (l_1 ... l_N) selects one (N+1)x(N+1) block in
the photon rotating frame. Site basis order is e_1 ... e_N (one vibrational
quantum on molecule i) followed by e_{N+1} (one cavity photon).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .units import CM_TO_RAD_PS, bose_occupation, thermal_ratio

MAX_MOLECULES = 20

LP, UP, DARK = "LP", "UP", "DARK"

# "angular": 1 cm^-1 -> 2 pi c rad/ps. "cyclic": 1 cm^-1 -> c 1/ps, which
# stretches every time axis by 2 pi and leaves all spectra unchanged.
TIME_CONVENTIONS = {"angular": CM_TO_RAD_PS, "cyclic": CM_TO_RAD_PS / (2.0 * math.pi)}


class SizeLimitError(ValueError):
    pass


def _per_molecule(value, n, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected {n} per-molecule values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Physical constants of molecules, cavity and solvent.

    Frequencies and rates in cm^-1, dipoles in Debye, lengths in nm, T in K.
    Per-molecule fields accept a scalar (broadcast) or a length-N sequence;
    ``mu`` accepts a scalar magnitude, a single 3-vector, or an (N, 3) array.
    Scalar dipoles point along z.
    """

    N: int
    omega: np.ndarray
    delta_omega: np.ndarray
    anharmonicity: np.ndarray
    g: np.ndarray
    mu: np.ndarray
    positions: np.ndarray
    loc_length: np.ndarray
    v: np.ndarray
    gamma: np.ndarray
    omega_c: float
    Q: float
    T: float
    time_convention: str = "angular"

    def __init__(self, N, omega, delta_omega, g, v, gamma, omega_c, Q, T,
                 anharmonicity=0.0, mu=0.122, positions=None, loc_length=0.05,
                 time_convention="angular"):
        if not isinstance(N, (int, np.integer)) or N < 1:
            raise ValueError(f"N must be a positive integer, got {N!r}")
        N = int(N)
        set_ = object.__setattr__
        set_(self, "N", N)
        for name, val in [("omega", omega), ("delta_omega", delta_omega), ("anharmonicity", anharmonicity),
                          ("g", g), ("v", v), ("gamma", gamma), ("loc_length", loc_length)]:
            set_(self, name, _per_molecule(val, N, name))
        ell = self.loc_length
        if positions is None:
            # equally spaced, ten localization lengths apart
            positions = 10.0 * ell[0] * np.arange(N)
        set_(self, "positions", _per_molecule(positions, N, "positions"))

        mu_arr = np.asarray(mu, dtype=float)
        if mu_arr.ndim == 0:
            mu_arr = np.outer(np.full(N, float(mu_arr)), [0.0, 0.0, 1.0])
        elif mu_arr.shape == (3,):
            mu_arr = np.tile(mu_arr, (N, 1))
        elif mu_arr.shape == (N,):
            mu_arr = np.outer(mu_arr, [0.0, 0.0, 1.0])
        if mu_arr.shape != (N, 3):
            raise ValueError(f"mu: expected scalar, 3-vector, N scalars or (N, 3), got shape {mu_arr.shape}")
        mu_arr.setflags(write=False)
        set_(self, "mu", mu_arr)
        set_(self, "omega_c", float(omega_c))
        set_(self, "Q", float(Q))
        set_(self, "T", float(T))
        if time_convention not in TIME_CONVENTIONS:
            raise ValueError(f"time_convention must be one of {sorted(TIME_CONVENTIONS)}")
        set_(self, "time_convention", time_convention)
        self._validate()

    def _validate(self):
        if np.any(self.omega <= 0) or self.omega_c <= 0:
            raise ValueError("vibrational and cavity frequencies must be positive")
        if np.any(self.v <= 0):
            raise ValueError("solvent gaps v must be positive")
        if np.any(self.gamma < 0) or np.any(self.g < 0):
            raise ValueError("rates and couplings must be non-negative")
        if np.any(self.loc_length <= 0):
            raise ValueError("localization lengths must be positive")
        if not self.Q > 0:
            raise ValueError("quality factor must be positive (inf allowed)")
        if not self.T > 0:
            raise ValueError("temperature must be positive")
        nbar = self.nbar
        if not np.all(np.isfinite(nbar)) or np.any(nbar < 0):
            raise ValueError("thermal occupations must be finite")

    @cached_property
    def nbar(self):
        """Thermal occupation of each solvent two-level gap."""
        return np.array([bose_occupation(v, self.T) for v in self.v])

    @property
    def cavity_loss(self):
        """omega_c / Q in cm^-1 (zero for an ideal cavity)."""
        return 0.0 if math.isinf(self.Q) else self.omega_c / self.Q

    @property
    def rate_per_cm(self):
        """Multiplier taking cm^-1 to the generator's 1/ps units."""
        return TIME_CONVENTIONS[self.time_convention]

    @property
    def dim(self):
        return self.N + 1

    def replace(self, **changes):
        kw = dict(N=self.N, omega=self.omega, delta_omega=self.delta_omega, g=self.g, v=self.v,
                  gamma=self.gamma, omega_c=self.omega_c, Q=self.Q, T=self.T,
                  anharmonicity=self.anharmonicity, mu=self.mu, positions=self.positions,
                  loc_length=self.loc_length, time_convention=self.time_convention)
        if "N" in changes and changes["N"] != self.N:
            raise ValueError("replace() cannot change N; build new params instead")
        kw.update(changes)
        return SystemParams(**kw)

    @classmethod
    def w_co6(cls, N=3, **overrides):
        """Three-molecule W(CO)6 parameter set of the polariton dynamics study."""
        kw = dict(N=N, omega=1983.0, delta_omega=18.0, g=2.1, v=62.0, gamma=0.18,
                  omega_c=1983.0, Q=1983.0 / 0.04, T=300.0, mu=0.122)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class SolventConfig:
    """A solvent configuration; bit i (0-based) carries weight 2**i in ``index``."""

    bits: tuple
    index: int

    @classmethod
    def from_index(cls, index, n):
        if not 0 <= index < 2**n:
            raise ValueError(f"config index {index} outside [0, 2^{n})")
        return cls(tuple((index >> i) & 1 for i in range(n)), index)

    @classmethod
    def from_bits(cls, bits):
        bits = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"solvent bits must be 0/1, got {bits}")
        return cls(bits, sum(b << i for i, b in enumerate(bits)))

    def __len__(self):
        return len(self.bits)


def enumerate_configs(n):
    """All 2**n solvent configurations in ascending index order."""
    if not 1 <= n <= MAX_MOLECULES:
        raise SizeLimitError(
            f"N={n} outside [1, {MAX_MOLECULES}]: the configuration space holds 2^N blocks "
            f"(limit 2^{MAX_MOLECULES})")
    return [SolventConfig.from_index(i, n) for i in range(2**n)]


def build_block_hamiltonian(params, config):
    """Single-excitation Hamiltonian (cm^-1) of one solvent configuration.

    Anharmonicity acts only with two quanta on one molecule and so does not
    enter this block.
    """
    n = params.N
    if len(config) != n:
        raise ValueError(f"config has {len(config)} bits, params have N={n}")
    h = np.zeros((n + 1, n + 1))
    bits = np.asarray(config.bits, dtype=float)
    h[np.arange(n), np.arange(n)] = params.omega + params.delta_omega * bits - params.omega_c
    h[:n, n] = params.g
    h[n, :n] = params.g
    return h


def fix_phases(vecs):
    """Rotate each column so its largest-magnitude component is real positive."""
    vecs = np.array(vecs, dtype=complex)
    idx = np.argmax(np.abs(vecs) ** 2 - 1e-12 * np.arange(vecs.shape[0])[:, None], axis=0)
    pivot = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(pivot) / pivot)[None, :]


def transition_dipoles(C, mu):
    """Eigenbasis transition dipoles V_k = sum_s mu_s C_{s,k}; photon row excluded."""
    C = np.asarray(C)
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 1:
        mu = mu[:, None]
    if C.shape[0] != mu.shape[0] + 1:
        raise ValueError(f"eigenvector rows ({C.shape[0]}) must equal molecules + 1 ({mu.shape[0] + 1})")
    return C[:-1, :].T @ mu


@dataclass(frozen=True, eq=False)
class BlockEigensystem:
    config: SolventConfig
    omega_k: np.ndarray
    C: np.ndarray
    V: np.ndarray
    labels: tuple = field(default=())

    @property
    def photon_weight(self):
        return np.abs(self.C[-1, :]) ** 2

    def index_of(self, label):
        return self.labels.index(label)

    @property
    def dark_indices(self):
        return [k for k, lab in enumerate(self.labels) if lab == DARK]


class ContractViolation(ValueError):
    pass


def diagonalize_block(H, params, config):
    """Eigenfrequencies (ascending), phase-fixed eigenvectors, dipoles and labels."""
    H = np.asarray(H)
    if np.max(np.abs(H - H.conj().T)) > 1e-10:
        raise ContractViolation("block Hamiltonian is not Hermitian")
    w, C = np.linalg.eigh(H)
    C = fix_phases(C)
    if np.isrealobj(H):
        C = C.real.copy()
    pw = np.abs(C[-1, :]) ** 2
    labels = [DARK] * len(w)
    if len(w) >= 2:
        bright = sorted(np.argsort(-pw, kind="stable")[:2])
        labels[bright[0]], labels[bright[1]] = LP, UP
    w.setflags(write=False)
    C.setflags(write=False)
    V = transition_dipoles(C, params.mu)
    V.setflags(write=False)
    return BlockEigensystem(config, w, C, V, tuple(labels))


def block_eigensystems(params):
    """Eigensystems for every solvent configuration, in index order."""
    return [diagonalize_block(build_block_hamiltonian(params, P), params, P)
            for P in enumerate_configs(params.N)]


def thermal_config_weights(params):
    """Equilibrium solvent-configuration probabilities P_J.

    Each molecule contributes (1 +/- tanh(hv/2kT)) / 2, with the plus sign for
    l = 0.
    """
    th = np.tanh(0.5 * thermal_ratio(params.v, params.T))
    w = np.ones(1)
    for s in range(params.N):
        w = np.kron(np.array([1.0 + th[s], 1.0 - th[s]]) / 2.0, w)
    return w
