"""Forward models for notch-coupled resonators and power-dependent TLS loss.

All public functions take linear frequency in Hz; the angular frequency
``omega0 = 2*pi*f0`` only appears internally and in :class:`TlsModelParams`,
which stores it explicitly because the loss law is written in terms of it.

Everything in this module is a pure function of its (immutable) inputs and is
safe to call from any number of concurrent tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, k as k_B

from .errors import NonPhysicalError

# tanh(x) is 1 to double precision well before x = 30; skip the transcendental
# evaluation beyond that point and return exactly 1.
_TANH_SATURATION_ARG = 30.0


def qi_from_circle(q_loaded: float, q_ext_mag: float, phi0: float) -> float:
    """Internal quality factor from loaded Q, |Qe| and the mismatch angle.

    Uses the diameter-corrected relation 1/Qi = 1/Ql - cos(phi0)/|Qe|.

    Raises:
        NonPhysicalError: if the implied internal loss is <= 0 (over-coupled
            beyond validity, or a bad fit upstream).
    """
    inv_qi = 1.0 / q_loaded - math.cos(phi0) / q_ext_mag
    if inv_qi <= 0.0:
        raise NonPhysicalError(
            f"1/Ql - cos(phi0)/|Qe| = {inv_qi:.3e} <= 0: zero or negative internal loss"
        )
    return 1.0 / inv_qi


@dataclass(frozen=True)
class ResonanceParams:
    """Resonance parameters of a notch-coupled resonator.

    Attributes:
        fr: resonance frequency [Hz].
        q_loaded: loaded quality factor.
        q_ext_mag: magnitude of the external (coupling) quality factor.
        phi0: impedance-mismatch angle [rad], restricted to (-pi/2, pi/2).
    """

    fr: float
    q_loaded: float
    q_ext_mag: float
    phi0: float

    def __post_init__(self):
        for name in ("fr", "q_loaded", "q_ext_mag"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not (math.isfinite(self.phi0) and -math.pi / 2 < self.phi0 < math.pi / 2):
            raise ValueError(f"phi0 must lie in (-pi/2, pi/2), got {self.phi0!r}")
        # Raises NonPhysicalError when 1/Ql <= cos(phi0)/|Qe|.
        qi_from_circle(self.q_loaded, self.q_ext_mag, self.phi0)

    @property
    def q_internal(self) -> float:
        """Diameter-corrected internal quality factor."""
        return qi_from_circle(self.q_loaded, self.q_ext_mag, self.phi0)

    @property
    def q_coupling(self) -> float:
        """Coupling quality factor Qc = |Qe| / cos(phi0)."""
        return self.q_ext_mag / math.cos(self.phi0)

    @property
    def linewidth(self) -> float:
        """Full linewidth fr/Ql [Hz]."""
        return self.fr / self.q_loaded


@dataclass(frozen=True)
class EnvironmentParams:
    """Measurement-chain terms: amplitude scale, global phase, cable delay.

    ``delay`` may be negative; its sign is a calibration artifact of the
    instrument reference plane.
    """

    amp: float = 1.0
    phase0: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.amp) and self.amp > 0.0):
            raise ValueError(f"amp must be finite and > 0, got {self.amp!r}")
        if not math.isfinite(self.phase0):
            raise ValueError("phase0 must be finite")
        if not math.isfinite(self.delay):
            raise ValueError("delay must be finite")


@dataclass(frozen=True)
class TlsModelParams:
    """Parameters of the power/temperature-dependent TLS loss law.

    Attributes:
        f_delta_tls0: filling factor times intrinsic TLS loss (their product
            is the only identifiable combination; they are never separated).
        n_c: critical photon number for TLS saturation.
        beta: saturation exponent, 0 < beta <= 0.5.
        delta_other: power-independent residual loss.
        omega0: angular resonance frequency [rad/s].
        temperature: bath temperature [K].
    """

    f_delta_tls0: float
    n_c: float
    beta: float
    delta_other: float
    omega0: float
    temperature: float = 0.010

    def __post_init__(self):
        if not (math.isfinite(self.f_delta_tls0) and self.f_delta_tls0 >= 0.0):
            raise ValueError(f"f_delta_tls0 must be >= 0, got {self.f_delta_tls0!r}")
        if not (math.isfinite(self.n_c) and self.n_c > 0.0):
            raise ValueError(f"n_c must be > 0, got {self.n_c!r}")
        if not (math.isfinite(self.beta) and 0.0 < self.beta <= 0.5):
            raise ValueError(f"beta must lie in (0, 0.5], got {self.beta!r}")
        if not (math.isfinite(self.delta_other) and self.delta_other >= 0.0):
            raise ValueError(f"delta_other must be >= 0, got {self.delta_other!r}")
        if not (math.isfinite(self.omega0) and self.omega0 > 0.0):
            raise ValueError(f"omega0 must be > 0, got {self.omega0!r}")
        if not (math.isfinite(self.temperature) and self.temperature >= 0.0):
            raise ValueError(f"temperature must be >= 0, got {self.temperature!r}")


@dataclass(frozen=True)
class ComplexSample:
    """One frequency point of a complex transmission sweep."""

    freq: float
    s21: complex

    def __post_init__(self):
        if not (math.isfinite(self.freq) and self.freq > 0.0):
            raise ValueError(f"freq must be finite and > 0, got {self.freq!r}")
        if not (math.isfinite(self.s21.real) and math.isfinite(self.s21.imag)):
            raise ValueError("s21 components must be finite")


def s21_notch(f, res: ResonanceParams, env: EnvironmentParams | None = None):
    """Complex transmission of a notch-coupled resonator.

    S21(f) = amp * e^{i phase0} * e^{-2 pi i f delay}
             * [1 - (Ql/|Qe|) e^{i phi0} / (1 + 2i Ql (f/fr - 1))]

    Accepts a scalar or array ``f`` in Hz and returns the matching shape.
    """
    if env is None:
        env = EnvironmentParams()
    f_arr = np.asarray(f, dtype=float)
    x = f_arr / res.fr - 1.0
    dip = (res.q_loaded / res.q_ext_mag) * np.exp(1j * res.phi0) / (1.0 + 2j * res.q_loaded * x)
    baseline = env.amp * np.exp(1j * (env.phase0 - 2.0 * np.pi * f_arr * env.delay))
    out = baseline * (1.0 - dip)
    if np.isscalar(f) or np.ndim(f) == 0:
        return complex(out)
    return out


def thermal_factor(omega0: float, temperature: float) -> float:
    """Thermal TLS population factor tanh(hbar*omega0 / (2 kB T)).

    The zero-temperature limit is handled explicitly and returns exactly 1,
    as do arguments large enough that tanh is 1 to double precision.
    """
    if not omega0 > 0.0:
        raise ValueError(f"omega0 must be > 0, got {omega0!r}")
    if temperature < 0.0:
        raise ValueError(f"temperature must be >= 0, got {temperature!r}")
    if temperature == 0.0:
        return 1.0
    arg = hbar * omega0 / (2.0 * k_B * temperature)
    if arg > _TANH_SATURATION_ARG:
        return 1.0
    return math.tanh(arg)


def tls_inverse_q(n, p: TlsModelParams):
    """Power-dependent loss 1/Qi(n) of the TLS model.

    1/Qi = f_delta_tls0 * tanh(hbar omega0 / 2 kB T) / (1 + n/n_c)^beta
           + delta_other

    ``n`` may be a scalar or an array of mean photon numbers (>= 0).
    """
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 0.0):
        raise ValueError("photon number must be >= 0")
    th = thermal_factor(p.omega0, p.temperature)
    out = p.f_delta_tls0 * th * (1.0 + n_arr / p.n_c) ** (-p.beta) + p.delta_other
    if np.isscalar(n) or np.ndim(n) == 0:
        return float(out)
    return out
