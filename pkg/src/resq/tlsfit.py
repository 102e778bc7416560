"""Bounded nonlinear least-squares fit of the power-dependent TLS loss law.

Residuals are formed in loss (1/Qi) rather than Qi: loss noise is closer to
homoscedastic and matches the additive structure of the model.  The critical
photon number is fitted in log coordinates, which makes the fit exactly
equivariant under a common rescaling of all photon numbers -- an unknown
line attenuation is absorbed entirely by n_c.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .calibration import PowerPoint
from .errors import DidNotConvergeError, InsufficientSpanError
from .model import TlsModelParams, thermal_factor, tls_inverse_q

_NC_SEEDS = 7
_NC_PROFILE_FLAT_TOL = 0.01
_BETA_MIN = 1e-6
_BETA_MAX = 0.5


class IdentifiabilityFlag(str, enum.Enum):
    """Conditions under which individual TLS parameters are unconstrained."""

    NC_UNBOUNDED = "NC_UNBOUNDED"
    BETA_AT_BOUND = "BETA_AT_BOUND"
    SATURATION_UNREACHED = "SATURATION_UNREACHED"


@dataclass(frozen=True)
class TlsSigmas:
    """1-sigma uncertainties of the fitted TLS parameters."""

    f_delta_tls0: float
    n_c: float
    beta: float
    delta_other: float


@dataclass(frozen=True)
class TlsFitResult:
    params: TlsModelParams
    sigmas: TlsSigmas
    chi2_reduced: float
    flags: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "flags", frozenset(self.flags))
        if self.chi2_reduced < 0.0:
            raise ValueError("chi2_reduced must be >= 0")


def tls_jacobian(n, params: TlsModelParams) -> np.ndarray:
    """Analytic partials of the loss 1/Qi(n) w.r.t.
    (f_delta_tls0, n_c, beta, delta_other).

    Returns an array of shape (..., 4) matching the shape of ``n``.
    """
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 0.0):
        raise ValueError("photon number must be >= 0")
    th = thermal_factor(params.omega0, params.temperature)
    u = 1.0 + n_arr / params.n_c
    u_pow = u ** (-params.beta)
    d_fd = th * u_pow
    d_nc = params.f_delta_tls0 * th * params.beta * u ** (-params.beta - 1.0) * n_arr / params.n_c**2
    d_beta = -params.f_delta_tls0 * th * u_pow * np.log(u)
    d_other = np.ones_like(n_arr)
    return np.stack([d_fd, d_nc, d_beta, d_other], axis=-1)


def qi_at(n: float, result: TlsFitResult) -> float:
    """Model Qi evaluated at photon number ``n`` for a finished fit."""
    return 1.0 / tls_inverse_q(n, result.params)


def _single_fit(loss, log_n, sig, th, x0, x_scale):
    def model(x):
        fd, log_nc, beta, other = x
        u = 1.0 + np.exp(log_n - log_nc)
        return fd * th * u ** (-beta) + other

    def residuals(x):
        return (loss - model(x)) / sig

    def jac(x):
        fd, log_nc, beta, other = x
        r = np.exp(log_n - log_nc)
        u = 1.0 + r
        u_pow = u ** (-beta)
        d_fd = th * u_pow
        d_log_nc = fd * th * beta * u ** (-beta - 1.0) * r  # chain rule: d/d log(n_c)
        d_beta = -fd * th * u_pow * np.log(u)
        d_other = np.ones_like(r)
        return -np.column_stack([d_fd, d_log_nc, d_beta, d_other]) / sig[:, None]

    return least_squares(
        residuals,
        x0=x0,
        jac=jac,
        bounds=([0.0, -np.inf, _BETA_MIN, 0.0], [np.inf, np.inf, _BETA_MAX, np.inf]),
        x_scale=x_scale,
        ftol=1e-14,
        xtol=1e-14,
        gtol=1e-14,
        max_nfev=2000,
    )


def fit_tls(points: list[PowerPoint], f0: float, temperature: float = 0.010) -> TlsFitResult:
    """Fit the TLS loss law to a power sweep of (n, Qi) points.

    Requires at least 4 points spanning at least 2 decades in photon number.
    Weighted by the propagated loss uncertainties sigma_k = qi_sigma_k/qi_k^2
    when available (unweighted if every qi_sigma is zero).  Multi-start over
    a log-spaced n_c seed grid; the lowest-chi^2 solution wins, ties broken
    by smaller n_c.
    """
    if len(points) < 4:
        raise InsufficientSpanError(f"need at least 4 points, got {len(points)}")
    n = np.array([p.n_mean for p in points], dtype=float)
    qi = np.array([p.qi for p in points], dtype=float)
    qi_sigma = np.array([p.qi_sigma for p in points], dtype=float)
    if n.max() / n.min() < 100.0:
        raise InsufficientSpanError(
            f"photon numbers span {math.log10(n.max() / n.min()):.2f} decades; need >= 2"
        )

    loss = 1.0 / qi
    log_n = np.log(n)
    weighted = bool(np.all(qi_sigma > 0.0))
    if weighted:
        sig = qi_sigma / qi**2
    else:
        sig = np.ones_like(loss)

    omega0 = 2.0 * math.pi * f0
    th = thermal_factor(omega0, temperature)

    l0 = float(np.median(loss))
    x_scale = np.array([l0, 1.0, 0.1, l0])
    other0 = 0.8 * float(loss.min())
    fd0 = max((float(loss.max()) - float(loss.min())) / th, 0.1 * l0)
    beta0 = 0.3
    nc_seeds = np.log(np.geomspace(n.min() / 10.0, n.max() * 10.0, _NC_SEEDS))

    best = None
    for log_nc0 in nc_seeds:
        try:
            sol = _single_fit(loss, log_n, sig, th, [fd0, log_nc0, beta0, other0], x_scale)
        except Exception:
            continue
        if not (sol.status > 0 and np.all(np.isfinite(sol.x))):
            continue
        cost = float(sol.cost)
        nc = math.exp(sol.x[1])
        if best is None:
            best = (cost, nc, sol)
        elif cost < best[0] * (1.0 - 1e-12):
            best = (cost, nc, sol)
        elif abs(cost - best[0]) <= 1e-12 * max(best[0], 1e-300) and nc < best[1]:
            best = (cost, nc, sol)
    if best is None:
        raise DidNotConvergeError("no optimizer start converged")

    cost, _, sol = best
    fd, log_nc, beta, other = sol.x
    n_c = math.exp(log_nc)
    dof = max(len(points) - 4, 1)
    chi2_reduced = 2.0 * cost / dof

    # Covariance in (fd, log_nc, beta, other).  Directions the data does not
    # constrain (degenerate flat data) get infinite variance rather than the
    # misleading zeros a plain pseudo-inverse would produce.
    jac = sol.jac
    d = np.linalg.norm(jac, axis=0)
    # A column vanishing relative to the rest of the Jacobian means the data
    # carry no information on that parameter (e.g. n_c and beta when the
    # fitted TLS amplitude is zero): infinite sigma, not the misleading zero
    # a pseudo-inverse would report.
    null_col = d <= 1e-10 * max(float(d.max()), 1e-300)
    d = np.where(null_col, 1.0, d)
    w, v = np.linalg.eigh((jac / d).T @ (jac / d))
    constrained = w > 1e-12 * max(float(w.max()), 1e-300)
    var = np.full(4, np.inf)
    if constrained.any():
        inv_w = np.where(constrained, 1.0 / np.where(constrained, w, 1.0), 0.0)
        cov = ((v * inv_w) @ v.T) / np.outer(d, d)
        if not weighted:
            cov = cov * (2.0 * cost / dof)
        var = np.diag(cov).copy()
        # Any parameter with weight in a null direction is unconstrained.
        if (~constrained).any():
            var[(np.abs(v[:, ~constrained]) > 1e-6).any(axis=1)] = np.inf
        var[null_col] = np.inf
    diag = np.sqrt(np.maximum(var, 0.0))
    sigmas = TlsSigmas(
        f_delta_tls0=float(diag[0]),
        n_c=float(diag[1] * n_c),  # from log(n_c) back to n_c
        beta=float(diag[2]),
        delta_other=float(diag[3]),
    )

    params = TlsModelParams(
        f_delta_tls0=float(fd),
        n_c=n_c,
        beta=float(beta),
        delta_other=float(other),
        omega0=omega0,
        temperature=temperature,
    )

    flags = set()
    if _BETA_MAX - beta <= sigmas.beta:
        flags.add(IdentifiabilityFlag.BETA_AT_BOUND)
    if n_c > n.max():
        flags.add(IdentifiabilityFlag.SATURATION_UNREACHED)

    # Profile chi^2 in log(n_c) over a decade around the optimum; a flat
    # profile means n_c is unconstrained by the data.
    profile_costs = []
    for shift in (-math.log(10.0) / 2.0, math.log(10.0) / 2.0):

        def residuals_fixed(x3, log_nc_fixed=log_nc + shift):
            fd_, beta_, other_ = x3
            u = 1.0 + np.exp(log_n - log_nc_fixed)
            return (loss - (fd_ * th * u ** (-beta_) + other_)) / sig

        try:
            psol = least_squares(
                residuals_fixed,
                x0=[fd, beta, other],
                bounds=([0.0, _BETA_MIN, 0.0], [np.inf, _BETA_MAX, np.inf]),
                x_scale=[l0, 0.1, l0],
                ftol=1e-14,
                xtol=1e-14,
                gtol=1e-14,
            )
            profile_costs.append(float(psol.cost))
        except Exception:
            profile_costs.append(float("inf"))
    rise = min(profile_costs) - cost
    # Floor keeps the flatness test meaningful on exactly-fitting data,
    # where cost is numerically zero.
    cost_floor = len(points) * (1e-8 * float(np.median(np.abs(loss / sig)))) ** 2
    if rise <= _NC_PROFILE_FLAT_TOL * max(cost, cost_floor):
        flags.add(IdentifiabilityFlag.NC_UNBOUNDED)

    return TlsFitResult(params=params, sigmas=sigmas, chi2_reduced=chi2_reduced, flags=frozenset(flags))
