"""Deterministic synthetic sweep generator for round-trip validation.

Noise reproducibility contract: each trace of a sweep draws from its own
PCG64 stream whose seed is derived from the sweep seed and the power index
by splitmix64 mixing,

    stream = splitmix64(seed XOR splitmix64((power_index + 1) * GOLDEN))

with GOLDEN = 0x9E3779B97F4A7C15.  Streams are therefore independent of
generation order and a fixed (seed, power_index) pair yields the same noise
on any platform with IEEE-754 doubles.  Per trace, the real parts of the
noise are drawn first, then the imaginary parts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import dbm_to_watts, photon_number
from .errors import FixedPointDivergedError
from .model import EnvironmentParams, ResonanceParams, TlsModelParams, s21_notch, tls_inverse_q
from .circlefit import Trace, TraceMeta

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

_FIXED_POINT_TOL = 1e-12
_FIXED_POINT_MAX_ITER = 100
_FIXED_POINT_DAMPING = 0.7


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def noise_stream_seed(seed: int, power_index: int) -> int:
    """Documented stream-splitting rule; see module docstring."""
    return _splitmix64((seed & _MASK64) ^ _splitmix64(((power_index + 1) * _GOLDEN) & _MASK64))


@dataclass(frozen=True)
class SynthSpec:
    """Ground-truth description of a synthetic power sweep.

    ``res`` holds the zero-power baseline resonance; at finite power the
    loaded Q is recomputed from the TLS loss law, keeping fr, |Qe| and phi0
    fixed.
    """

    res: ResonanceParams
    tls: TlsModelParams
    env: EnvironmentParams
    powers_dbm: tuple[float, ...]
    attenuation_db: float = 0.0
    points_per_trace: int = 401
    span_linewidths: float = 10.0
    noise_sigma: float = 0.0
    seed: int = 0
    sample_id: str = "synthetic"
    resonator_id: str = "R0"

    def __post_init__(self):
        object.__setattr__(self, "powers_dbm", tuple(float(p) for p in self.powers_dbm))
        if self.points_per_trace < 16:
            raise ValueError(f"points_per_trace must be >= 16, got {self.points_per_trace}")
        if self.span_linewidths < 4.0:
            raise ValueError(f"span_linewidths must be >= 4, got {self.span_linewidths}")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if self.attenuation_db < 0.0:
            raise ValueError("attenuation_db must be >= 0")

    @classmethod
    def create(
        cls,
        fr: float,
        q_ext_mag: float,
        phi0: float,
        tls: TlsModelParams,
        env: EnvironmentParams | None = None,
        **kwargs,
    ) -> "SynthSpec":
        """Build a spec with the baseline loaded Q derived from the loss law."""
        ql0 = _loaded_q(0.0, tls, q_ext_mag, phi0)
        res = ResonanceParams(fr=fr, q_loaded=ql0, q_ext_mag=q_ext_mag, phi0=phi0)
        return cls(res=res, tls=tls, env=env or EnvironmentParams(), **kwargs)

    def to_dict(self) -> dict:
        return {
            "res": {
                "fr": self.res.fr,
                "q_loaded": self.res.q_loaded,
                "q_ext_mag": self.res.q_ext_mag,
                "phi0": self.res.phi0,
            },
            "tls": {
                "f_delta_tls0": self.tls.f_delta_tls0,
                "n_c": self.tls.n_c,
                "beta": self.tls.beta,
                "delta_other": self.tls.delta_other,
                "omega0": self.tls.omega0,
                "temperature": self.tls.temperature,
            },
            "env": {"amp": self.env.amp, "phase0": self.env.phase0, "delay": self.env.delay},
            "powers_dbm": list(self.powers_dbm),
            "attenuation_db": self.attenuation_db,
            "points_per_trace": self.points_per_trace,
            "span_linewidths": self.span_linewidths,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "sample_id": self.sample_id,
            "resonator_id": self.resonator_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(
            res=ResonanceParams(**d["res"]),
            tls=TlsModelParams(**d["tls"]),
            env=EnvironmentParams(**d.get("env", {})),
            powers_dbm=tuple(d["powers_dbm"]),
            attenuation_db=d.get("attenuation_db", 0.0),
            points_per_trace=d.get("points_per_trace", 401),
            span_linewidths=d.get("span_linewidths", 10.0),
            noise_sigma=d.get("noise_sigma", 0.0),
            seed=d.get("seed", 0),
            sample_id=d.get("sample_id", "synthetic"),
            resonator_id=d.get("resonator_id", "R0"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        return cls.from_dict(json.loads(text))


def _loaded_q(n: float, tls: TlsModelParams, q_ext_mag: float, phi0: float) -> float:
    inv_qi = tls_inverse_q(n, tls)
    return 1.0 / (inv_qi + math.cos(phi0) / q_ext_mag)


@dataclass(frozen=True)
class GroundTruthPoint:
    """Self-consistent operating point of one synthetic trace."""

    power_index: int
    power_dbm: float
    power_chip_w: float
    n_mean: float
    qi: float
    q_loaded: float


def solve_operating_point(spec: SynthSpec, power_index: int) -> GroundTruthPoint:
    """Solve the n <-> Ql fixed point for one power.

    The photon number depends on the loaded Q, which depends on Qi(n); the
    scalar fixed point n = photon_number(P, res(n)) is solved by damped
    iteration in log(n) to 1e-12 relative.
    """
    p_dbm = spec.powers_dbm[power_index]
    p_chip = dbm_to_watts(p_dbm, spec.attenuation_db)
    base = spec.res

    def g(n: float) -> float:
        ql = _loaded_q(n, spec.tls, base.q_ext_mag, base.phi0)
        res = ResonanceParams(fr=base.fr, q_loaded=ql, q_ext_mag=base.q_ext_mag, phi0=base.phi0)
        return photon_number(p_chip, res)

    x = math.log(g(1.0))
    for _ in range(_FIXED_POINT_MAX_ITER):
        gx = math.log(g(math.exp(x)))
        if abs(gx - x) <= _FIXED_POINT_TOL:
            x = gx
            break
        x = x + _FIXED_POINT_DAMPING * (gx - x)
    else:
        raise FixedPointDivergedError(
            f"photon-number fixed point did not converge in {_FIXED_POINT_MAX_ITER} iterations"
        )
    n = math.exp(x)
    ql = _loaded_q(n, spec.tls, base.q_ext_mag, base.phi0)
    qi = 1.0 / tls_inverse_q(n, spec.tls)
    return GroundTruthPoint(
        power_index=power_index,
        power_dbm=p_dbm,
        power_chip_w=p_chip,
        n_mean=n,
        qi=qi,
        q_loaded=ql,
    )


def ground_truth(spec: SynthSpec) -> list[GroundTruthPoint]:
    """Fixed-point operating points for every power of the sweep."""
    return [solve_operating_point(spec, i) for i in range(len(spec.powers_dbm))]


def synth_trace(spec: SynthSpec, power_index: int) -> Trace:
    """Generate one trace of the sweep at the given power index."""
    if not 0 <= power_index < len(spec.powers_dbm):
        raise IndexError(f"power_index {power_index} out of range")
    op = solve_operating_point(spec, power_index)
    base = spec.res
    res = ResonanceParams(fr=base.fr, q_loaded=op.q_loaded, q_ext_mag=base.q_ext_mag, phi0=base.phi0)

    span = spec.span_linewidths * res.fr / res.q_loaded
    freq = np.linspace(res.fr - span / 2.0, res.fr + span / 2.0, spec.points_per_trace)
    s21 = np.asarray(s21_notch(freq, res, spec.env), dtype=complex)
    if spec.noise_sigma > 0.0:
        rng = np.random.Generator(np.random.PCG64(noise_stream_seed(spec.seed, power_index)))
        scale = spec.noise_sigma * spec.env.amp
        re = rng.standard_normal(spec.points_per_trace)
        im = rng.standard_normal(spec.points_per_trace)
        s21 = s21 + scale * (re + 1j * im)

    meta = TraceMeta(
        power_dbm=spec.powers_dbm[power_index],
        attenuation_db=spec.attenuation_db,
        temperature_k=spec.tls.temperature,
        sample_id=spec.sample_id,
        resonator_id=spec.resonator_id,
    )
    return Trace(freq=freq, s21=s21, meta=meta)


def synth_power_sweep(spec: SynthSpec) -> list[Trace]:
    """One trace per entry of ``powers_dbm`` (empty list for no powers)."""
    return [synth_trace(spec, i) for i in range(len(spec.powers_dbm))]


def with_resonator(spec: SynthSpec, resonator_id: str, seed: int) -> SynthSpec:
    """Copy of a spec re-labeled for another resonator with its own seed."""
    return replace(spec, resonator_id=resonator_id, seed=seed)
