"""Unit conversions and thermal occupations.

Spectroscopic quantities are carried in cm^-1 at the interfaces. Dynamics run
in angular frequency units of rad/ps.
"""
import math
import re

from scipy import constants

#: 1 cm^-1 expressed as an angular frequency in rad/ps (2 pi c).
CM_TO_RAD_PS = 2.0 * math.pi * constants.c * 100.0 * 1e-12

#: Second radiation constant hc/k_B in cm K.
HC_OVER_K = constants.h * constants.c * 100.0 / constants.k


def thermal_ratio(v_cm, temperature):
    """h v / k_B T for a gap ``v_cm`` (cm^-1) at ``temperature`` (K)."""
    return HC_OVER_K * v_cm / temperature


def bose_occupation(v_cm, temperature):
    """Bose-Einstein occupation 1 / (exp(hv/kT) - 1)."""
    if math.isinf(temperature):
        return math.inf
    return 1.0 / math.expm1(thermal_ratio(v_cm, temperature))


# Accepted unit spellings, mapped onto the canonical unit of each dimension.
_UNITS = {
    "cm^-1": ("wavenumber", 1.0),
    "cm-1": ("wavenumber", 1.0),
    "1/cm": ("wavenumber", 1.0),
    "ps": ("time", 1.0),
    "fs": ("time", 1e-3),
    "ns": ("time", 1e3),
    "D": ("dipole", 1.0),
    "debye": ("dipole", 1.0),
    "nm": ("length", 1.0),
    "angstrom": ("length", 0.1),
    "K": ("temperature", 1.0),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s+(\S+)\s*$")


class UnitError(ValueError):
    """A dimensional value is missing its unit or uses the wrong one."""


def parse_quantity(text, dimension):
    """Parse ``"<number> <unit>"`` into a float in the canonical unit of ``dimension``.

    Canonical units are cm^-1, ps, Debye, nm and K.
    """
    if not isinstance(text, str):
        raise UnitError(f"expected a quoted '<value> <unit>' string for a {dimension}, got {text!r}")
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"malformed quantity {text!r}; expected '<value> <unit>'")
    value, unit = m.groups()
    if unit not in _UNITS:
        raise UnitError(f"unknown unit {unit!r} in {text!r}")
    dim, scale = _UNITS[unit]
    if dim != dimension:
        raise UnitError(f"unit {unit!r} is a {dim}, expected a {dimension} in {text!r}")
    return float(value) * scale


def format_quantity(value, dimension):
    unit = {"wavenumber": "cm^-1", "time": "ps", "dipole": "D", "length": "nm", "temperature": "K"}[dimension]
    return f"{value!r} {unit}"
