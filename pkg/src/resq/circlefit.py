"""Extraction of resonance and environment parameters from measured sweeps.

The pipeline follows the usual geometric decomposition of a notch response:
remove the cable delay, fit a circle to the delay-corrected data, fit the
phase-vs-frequency response around the circle center, locate the off-resonant
point, and assemble quality factors from the geometry.  A final nonlinear
least-squares refinement of the full complex model polishes the geometric
solution and supplies the covariances used for uncertainty propagation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import DegenerateDataError, NonPhysicalError
from .model import ComplexSample, EnvironmentParams, ResonanceParams, qi_from_circle, s21_notch

# Collinearity tolerance for the circle fit: ratio of singular values of the
# centered point cloud above which the scatter system is treated as singular.
_COLLINEAR_COND = 1e12

# Relative residual variation across the delay bracket below which the
# landscape is considered flat (delay not identifiable).
_DELAY_FLAT_TOL = 1e-6


class QualityFlag(str, enum.Enum):
    """Non-fatal quality conditions attached to a fit report."""

    NARROW_SPAN = "NARROW_SPAN"
    LOW_SNR = "LOW_SNR"
    SHALLOW_DIP = "SHALLOW_DIP"
    DELAY_UNSTABLE = "DELAY_UNSTABLE"


@dataclass(frozen=True)
class TraceMeta:
    """Measurement metadata carried alongside a sweep."""

    power_dbm: float = 0.0
    attenuation_db: float = 0.0
    temperature_k: float = 0.010
    sample_id: str = ""
    resonator_id: str = ""

    def __post_init__(self):
        if self.attenuation_db < 0.0:
            raise ValueError(f"attenuation_db must be >= 0, got {self.attenuation_db!r}")


@dataclass(frozen=True)
class Trace:
    """One frequency sweep of complex S21 samples plus metadata.

    Frequencies must be strictly increasing and everything finite; at least
    16 samples are required for any downstream fit to be meaningful.
    """

    freq: np.ndarray
    s21: np.ndarray
    meta: TraceMeta = field(default_factory=TraceMeta)

    def __post_init__(self):
        freq = np.asarray(self.freq, dtype=float)
        s21 = np.asarray(self.s21, dtype=complex)
        object.__setattr__(self, "freq", freq)
        object.__setattr__(self, "s21", s21)
        if freq.ndim != 1 or s21.shape != freq.shape:
            raise ValueError("freq and s21 must be 1-d arrays of equal length")
        if len(freq) < 16:
            raise ValueError(f"a trace needs at least 16 samples, got {len(freq)}")
        if not np.all(np.isfinite(freq)) or not np.all(np.isfinite(s21)):
            raise ValueError("trace values must be finite")
        if np.any(freq <= 0.0):
            raise ValueError("frequencies must be > 0")
        if np.any(np.diff(freq) <= 0.0):
            raise ValueError("frequencies must be strictly increasing")

    @classmethod
    def from_samples(cls, samples: list[ComplexSample], meta: TraceMeta | None = None) -> "Trace":
        freq = np.array([s.freq for s in samples], dtype=float)
        s21 = np.array([s.s21 for s in samples], dtype=complex)
        return cls(freq, s21, meta or TraceMeta())

    @property
    def span(self) -> float:
        return float(self.freq[-1] - self.freq[0])

    def __len__(self) -> int:
        return len(self.freq)


@dataclass(frozen=True)
class CircleGeom:
    """Fitted circle: center, radius and RMS radial residual."""

    center: complex
    radius: float
    rms_residual: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"radius must be > 0, got {self.radius!r}")
        if self.rms_residual < 0.0:
            raise ValueError("rms_residual must be >= 0")


@dataclass(frozen=True)
class DelayEstimate:
    """Result of the electrical-delay search."""

    delay: float
    stable: bool


@dataclass(frozen=True)
class FitReport:
    """Full result of extracting one trace."""

    res: ResonanceParams
    env: EnvironmentParams
    qi: float
    qi_sigma: float
    chi2_reduced: float
    flags: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "flags", frozenset(self.flags))
        expected = qi_from_circle(self.res.q_loaded, self.res.q_ext_mag, self.res.phi0)
        if abs(self.qi - expected) > 1e-12 * expected:
            raise ValueError("qi inconsistent with resonance parameters")
        if self.qi_sigma < 0.0:
            raise ValueError("qi_sigma must be >= 0")


def fit_circle(points) -> CircleGeom:
    """Algebraic (Taubin) circle fit to a set of complex points.

    Minimizes the Taubin-normalized algebraic distance; unbiased at small arc
    coverage compared to the plain algebraic (Kasa) fit.

    Raises:
        DegenerateDataError: for < 3 points or points collinear within
            tolerance.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if len(z) < 3:
        raise DegenerateDataError(f"need at least 3 points, got {len(z)}")
    x = z.real - z.real.mean()
    y = z.imag - z.imag.mean()

    # Collinearity check on the centered scatter.
    sv = np.linalg.svd(np.column_stack([x, y]), compute_uv=False)
    if sv[0] == 0.0 or sv[1] <= sv[0] / _COLLINEAR_COND:
        raise DegenerateDataError("points are collinear within tolerance")

    q = x * x + y * y
    q_mean = q.mean()
    z0 = (q - q_mean) / (2.0 * math.sqrt(q_mean))
    _, _, vt = np.linalg.svd(np.column_stack([z0, x, y]), full_matrices=False)
    a0, a1, a2 = vt[2]
    a0 /= 2.0 * math.sqrt(q_mean)
    a3 = -q_mean * a0
    if a0 == 0.0:
        raise DegenerateDataError("degenerate circle (infinite radius)")
    cx = -a1 / (2.0 * a0)
    cy = -a2 / (2.0 * a0)
    radius = math.sqrt(a1 * a1 + a2 * a2 - 4.0 * a0 * a3) / (2.0 * abs(a0))
    center = complex(cx + z.real.mean(), cy + z.imag.mean())
    rms = float(np.sqrt(np.mean((np.abs(z - center) - radius) ** 2)))
    return CircleGeom(center=center, radius=float(radius), rms_residual=rms)


def _delay_cost(trace: Trace, tau: float) -> float:
    try:
        return fit_circle(trace.s21 * np.exp(2j * np.pi * trace.freq * tau)).rms_residual
    except DegenerateDataError:
        return float("inf")


def estimate_delay(trace: Trace) -> DelayEstimate:
    """Electrical delay minimizing the circle-fit residual of corrected data.

    Seeded by the linear phase slope of the outer 20% of samples on each
    edge, searched over a bracket of +-5x the seed (plus a floor tied to the
    sweep span), with a coarse pre-scan guarding against secondary minima
    from full phase wraps.
    """
    f = trace.freq
    phase = np.unwrap(np.angle(trace.s21))
    k = max(2, len(f) // 5)
    edge = np.r_[0:k, len(f) - k : len(f)]
    slope = np.polyfit(f[edge], phase[edge], 1)[0]
    seed = -slope / (2.0 * np.pi)

    span = trace.span
    half = 5.0 * abs(seed) + 2.0 / span
    lo, hi = seed - half, seed + half

    # Coarse scan to land in the global basin before the local search.
    grid = np.linspace(lo, hi, 41)
    costs = [_delay_cost(trace, t) for t in grid]
    i_best = int(np.argmin(costs))
    b_lo = grid[max(i_best - 1, 0)]
    b_hi = grid[min(i_best + 1, len(grid) - 1)]
    opt = minimize_scalar(
        lambda t: _delay_cost(trace, t),
        bounds=(b_lo, b_hi),
        method="bounded",
        options={"xatol": 1e-16, "maxiter": 500},
    )
    delay = float(opt.x)
    c_best = float(opt.fun)

    c_edges = max(costs[0], costs[-1])
    flat = not (c_edges > c_best + _DELAY_FLAT_TOL * max(c_edges, 1e-300))
    at_bound = min(delay - lo, hi - delay) < 1e-3 * (hi - lo) and abs(delay) > 2.0 / span
    return DelayEstimate(delay=delay, stable=not (flat or at_bound))


@dataclass(frozen=True)
class PhaseFit:
    """Result of the arctan phase-vs-frequency fit."""

    fr: float
    q_loaded: float
    theta0: float
    cov: np.ndarray
    swing: float


def _phase_model(f, theta0, q_loaded, fr):
    return theta0 + 2.0 * np.arctan(2.0 * q_loaded * (1.0 - f / fr))


def fit_phase(freq, angles, fr_seed: float | None = None, q_seed: float | None = None) -> PhaseFit:
    """Least-squares fit of theta(f) = theta0 + 2 arctan(2 Ql (1 - f/fr)).

    ``angles`` must already be unwrapped angles of the circle-centered,
    delay-corrected data.  ``fr`` is constrained to the trace span.

    Returns the fit together with its (scaled) parameter covariance and the
    total modeled phase swing across the span.
    """
    f = np.asarray(freq, dtype=float)
    th = np.asarray(angles, dtype=float)
    if fr_seed is None:
        df = np.gradient(th, f)
        fr_seed = float(f[np.argmax(np.abs(df))])
    if q_seed is None:
        q_seed = 5.0 * fr_seed / (f[-1] - f[0])

    best = None
    for q0 in (q_seed * 0.2, q_seed, q_seed * 5.0):
        theta0_0 = float(np.interp(fr_seed, f, th))
        try:
            sol = least_squares(
                lambda p: _phase_model(f, *p) - th,
                x0=[theta0_0, q0, fr_seed],
                bounds=([-np.inf, 1e-2, f[0]], [np.inf, np.inf, f[-1]]),
                x_scale=[1.0, max(q0, 1.0), fr_seed],
                ftol=1e-15,
                xtol=1e-15,
                gtol=1e-15,
            )
        except ValueError:
            continue
        cost = float(sol.cost)
        if best is None or cost < best[0]:
            best = (cost, sol)
    if best is None:
        raise DegenerateDataError("phase fit failed for all starts")
    sol = best[1]
    theta0, q_loaded, fr = sol.x

    dof = max(len(f) - 3, 1)
    cov = _scaled_covariance(sol.jac, 2.0 * sol.cost / dof)
    swing = float(abs(_phase_model(f[0], *sol.x) - _phase_model(f[-1], *sol.x)))
    return PhaseFit(fr=float(fr), q_loaded=float(q_loaded), theta0=float(theta0), cov=cov, swing=swing)


def _wrap_angle(a: float) -> float:
    return float(np.angle(np.exp(1j * a)))


def _scaled_covariance(jac: np.ndarray, s2: float) -> np.ndarray:
    """Parameter covariance s2 * (J^T J)^-1 via column-normalized SVD.

    Parameter scales here span ~17 orders of magnitude (fr vs delay), so a
    raw pseudo-inverse truncates exactly the high-variance directions;
    normalizing columns first keeps the inversion scale-free.
    """
    d = np.linalg.norm(jac, axis=0)
    d[d == 0.0] = 1.0
    jtj = (jac / d).T @ (jac / d)
    cov = np.linalg.pinv(jtj, hermitian=True)
    return cov / np.outer(d, d) * s2


def _noise_sigma_estimate(z: np.ndarray) -> float:
    # Per-quadrature noise from point-to-point differences; the median makes
    # it robust against the (deterministic) variation near resonance.  For
    # complex white noise, median(|diff|) = sigma * sqrt(2) * sqrt(2 ln 2).
    d = np.abs(np.diff(z))
    return float(np.median(d) / (math.sqrt(2.0) * math.sqrt(2.0 * math.log(2.0))))


def _refine_full_model(trace: Trace, p0: dict) -> tuple[dict, np.ndarray, float]:
    """Polish the geometric solution against the raw complex data.

    Returns the refined parameter dict, the covariance of
    (fr, q_loaded, q_ext_mag, phi0, amp, phase0, delay) and the residual
    sum of squares.
    """
    f = trace.freq
    z = trace.s21
    span = trace.span

    def unpack(p):
        fr, ql, qe, phi0, amp, phase0, delay = p
        x = f / fr - 1.0
        dip = (ql / qe) * np.exp(1j * phi0) / (1.0 + 2j * ql * x)
        return amp * np.exp(1j * (phase0 - 2.0 * np.pi * f * delay)) * (1.0 - dip)

    def residuals(p):
        r = unpack(p) - z
        return np.concatenate([r.real, r.imag])

    x0 = [p0["fr"], p0["q_loaded"], p0["q_ext_mag"], p0["phi0"], p0["amp"], p0["phase0"], p0["delay"]]
    scale = [p0["fr"], p0["q_loaded"], p0["q_ext_mag"], 1.0, p0["amp"], 1.0, max(abs(p0["delay"]), 0.1 / span)]
    sol = least_squares(residuals, x0=x0, method="lm", x_scale=scale, ftol=1e-15, xtol=1e-15, gtol=1e-15)
    fr, ql, qe, phi0, amp, phase0, delay = sol.x
    out = {
        "fr": float(fr),
        "q_loaded": float(ql),
        "q_ext_mag": float(qe),
        "phi0": _wrap_angle(float(phi0)),
        "amp": float(abs(amp)),
        "phase0": _wrap_angle(float(phase0) + (math.pi if amp < 0 else 0.0)),
        "delay": float(delay),
    }
    dof = max(2 * len(f) - 7, 1)
    ssr = 2.0 * float(sol.cost)
    cov = _scaled_covariance(sol.jac, ssr / dof)
    return out, cov, ssr


def extract(trace: Trace) -> FitReport:
    """Full extraction pipeline for a single trace.

    Steps: delay estimate -> circle fit -> phase fit -> off-resonant
    normalization -> full-model refinement -> Qi with first-order
    uncertainty propagation from the (diagonal) fit covariances.
    """
    flags = set()

    est = estimate_delay(trace)
    if not est.stable:
        flags.add(QualityFlag.DELAY_UNSTABLE)
    z1 = trace.s21 * np.exp(2j * np.pi * trace.freq * est.delay)

    geom = fit_circle(z1)
    sigma_noise = _noise_sigma_estimate(z1)

    rel = z1 - geom.center
    raw_angles = np.angle(rel)
    steps = np.angle(np.exp(1j * np.diff(raw_angles)))
    if np.any(np.abs(steps) > np.pi / 2):
        flags.add(QualityFlag.LOW_SNR)
    angles = raw_angles[0] + np.concatenate([[0.0], np.cumsum(steps)])

    pf = fit_phase(trace.freq, angles)
    if pf.swing < np.pi:
        flags.add(QualityFlag.NARROW_SPAN)

    off_res = geom.center - geom.radius * np.exp(1j * pf.theta0)
    amp = abs(off_res)
    phase0 = float(np.angle(off_res))
    phi0 = _wrap_angle(pf.theta0 + math.pi - phase0)
    q_ext_mag = pf.q_loaded * amp / (2.0 * geom.radius)

    seed = {
        "fr": pf.fr,
        "q_loaded": pf.q_loaded,
        "q_ext_mag": q_ext_mag,
        "phi0": phi0,
        "amp": amp,
        "phase0": phase0,
        "delay": est.delay,
    }
    refined, cov, ssr = _refine_full_model(trace, seed)

    try:
        res = ResonanceParams(
            fr=refined["fr"],
            q_loaded=refined["q_loaded"],
            q_ext_mag=refined["q_ext_mag"],
            phi0=refined["phi0"],
        )
    except ValueError as exc:
        raise NonPhysicalError(f"refined parameters are non-physical: {exc}") from exc
    env = EnvironmentParams(amp=refined["amp"], phase0=refined["phase0"], delay=refined["delay"])

    if trace.span < res.linewidth:
        flags.add(QualityFlag.NARROW_SPAN)
    dip_diameter = env.amp * res.q_loaded / res.q_ext_mag
    if dip_diameter < 5.0 * sigma_noise:
        flags.add(QualityFlag.SHALLOW_DIP)

    qi = qi_from_circle(res.q_loaded, res.q_ext_mag, res.phi0)
    # First-order propagation of 1/Qi = 1/Ql - cos(phi0)/|Qe| from the
    # diagonal of the refinement covariance (indices 1, 2, 3).
    d_ql = -1.0 / res.q_loaded**2
    d_qe = math.cos(res.phi0) / res.q_ext_mag**2
    d_phi = math.sin(res.phi0) / res.q_ext_mag
    var_inv_qi = (
        d_ql**2 * max(cov[1, 1], 0.0)
        + d_qe**2 * max(cov[2, 2], 0.0)
        + d_phi**2 * max(cov[3, 3], 0.0)
    )
    qi_sigma = qi**2 * math.sqrt(max(var_inv_qi, 0.0))

    dof = max(2 * len(trace) - 7, 1)
    chi2_reduced = ssr / (dof * sigma_noise**2) if sigma_noise > 0.0 else 0.0

    return FitReport(res=res, env=env, qi=qi, qi_sigma=qi_sigma, chi2_reduced=chi2_reduced, flags=frozenset(flags))
