"""Conversion from instrument power to on-chip power and mean photon number."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import hbar

from .model import ResonanceParams


@dataclass(frozen=True)
class PowerPoint:
    """One (photon number, Qi) point of a power sweep feeding the TLS fit."""

    n_mean: float
    qi: float
    qi_sigma: float
    power_chip_w: float

    def __post_init__(self):
        if not (math.isfinite(self.n_mean) and self.n_mean > 0.0):
            raise ValueError(f"n_mean must be > 0, got {self.n_mean!r}")
        if not (math.isfinite(self.qi) and self.qi > 0.0):
            raise ValueError(f"qi must be > 0, got {self.qi!r}")
        if not (math.isfinite(self.qi_sigma) and self.qi_sigma >= 0.0):
            raise ValueError(f"qi_sigma must be >= 0, got {self.qi_sigma!r}")
        if not (math.isfinite(self.power_chip_w) and self.power_chip_w > 0.0):
            raise ValueError(f"power_chip_w must be > 0, got {self.power_chip_w!r}")


def dbm_to_watts(p_dbm: float, attenuation_db: float = 0.0) -> float:
    """On-chip power in watts from instrument power minus line attenuation."""
    if attenuation_db < 0.0:
        raise ValueError(f"attenuation_db must be >= 0, got {attenuation_db!r}")
    return 1e-3 * 10.0 ** ((p_dbm - attenuation_db) / 10.0)


def photon_number(power_chip_w: float, res: ResonanceParams) -> float:
    """Mean circulating photon number at on-resonance drive.

    Steady-state relation for a notch-coupled resonator driven at fr:

        <n> = 2 / (hbar * omega0^2) * (Ql^2 / Qc) * P_chip

    with Qc = |Qe| / cos(phi0).
    """
    if not power_chip_w > 0.0:
        raise ValueError(f"power_chip_w must be > 0, got {power_chip_w!r}")
    omega0 = 2.0 * math.pi * res.fr
    return 2.0 * res.q_loaded**2 * power_chip_w / (hbar * omega0**2 * res.q_coupling)


def power_for_photon_number(n_mean: float, res: ResonanceParams) -> float:
    """On-chip power in watts that sustains ``n_mean`` photons (inverse of
    :func:`photon_number`)."""
    if not n_mean > 0.0:
        raise ValueError(f"n_mean must be > 0, got {n_mean!r}")
    omega0 = 2.0 * math.pi * res.fr
    return n_mean * hbar * omega0**2 * res.q_coupling / (2.0 * res.q_loaded**2)


def watts_to_dbm(power_w: float) -> float:
    """Inverse of :func:`dbm_to_watts` at zero attenuation."""
    if not power_w > 0.0:
        raise ValueError(f"power_w must be > 0, got {power_w!r}")
    return 10.0 * math.log10(power_w / 1e-3)
