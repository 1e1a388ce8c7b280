"""Feature extraction on computed spectra and trajectories.

Cross peaks are read at the model's own eigenfrequency coordinates rather
than from box maxima, since the rephasing lineshape has long dispersive
tails along both axes.
"""
from __future__ import annotations

import numpy as np

from .signals import twodir, twodir_context


def polariton_dark_coordinates(eigs, dark_config=1):
    """Named (omega1, omega3) points of the 2D map.

    Polaritons come from the all-ground block; the dark level is the highest
    state of ``dark_config`` (one molecule shifted up by delta_omega).
    """
    e0 = eigs[0]
    w_lp, w_up = e0.omega_k[e0.index_of("LP")], e0.omega_k[e0.index_of("UP")]
    w_dark = float(eigs[dark_config].omega_k[-1])
    return {
        "LP->dark": (-w_lp, w_dark),
        "UP->dark": (-w_up, w_dark),
        "dark->LP": (-w_dark, w_lp),
        "dark->UP": (-w_dark, w_up),
        "LP diag": (-w_lp, w_lp),
        "UP diag": (-w_up, w_up),
    }


def point_values(params, spec, pulses, points, T2s, initial="pure-ground", eigs=None, subtract_gsb=True):
    """Signal at each named point for each T2; returns {name: array over T2}."""
    out = {}
    for name, (o1, o3) in points.items():
        ctx = twodir_context(params, spec, pulses, [o1], [o3], initial, eigs)
        out[name] = np.array([twodir(ctx, T2, subtract_gsb).values[0, 0] for T2 in T2s])
    return out


def diagonal_max(grid):
    """Largest |S| along the main diagonal omega1 = -omega3 of a 2D spectrum.

    Samples the nearest omega1 grid point for every omega3 value.
    """
    o1, o3 = grid.axes
    rows = np.abs(o1[:, None] + o3[None, :]).argmin(axis=0)
    return float(np.abs(grid.values[rows, np.arange(o3.size)]).max())


def peak_in_window(omega, values, lo, hi):
    """Position and height of the maximum of ``values`` within [lo, hi]."""
    omega = np.asarray(omega)
    sel = (omega >= lo) & (omega <= hi)
    if not np.any(sel):
        raise ValueError(f"no grid points in [{lo}, {hi}]")
    k = np.flatnonzero(sel)[np.argmax(np.asarray(values)[sel])]
    return float(omega[k]), float(values[k])


def stick_features(sticks):
    """Polariton pair and strongest in-between feature of a dipole stick spectrum.

    The polaritons are the strongest sticks below and above zero detuning
    with photon weight; the dark feature is the strongest stick strictly
    between them. Returns (lower, upper, dark) as (omega, strength) pairs.
    """
    s = sticks.strength / sticks.strength.max()
    lower_mask = sticks.omega < 0
    k_low = np.flatnonzero(lower_mask)[np.argmax(s[lower_mask])]
    k_up = np.flatnonzero(~lower_mask)[np.argmax(s[~lower_mask])]
    between = (sticks.omega > sticks.omega[k_low]) & (sticks.omega < sticks.omega[k_up]) & (s > 1e-12)
    dark = None
    if np.any(between):
        k = np.flatnonzero(between)[np.argmax(s[between])]
        dark = (float(sticks.omega[k]), float(sticks.strength[k]))
    return ((float(sticks.omega[k_low]), float(sticks.strength[k_low])),
            (float(sticks.omega[k_up]), float(sticks.strength[k_up])), dark)
