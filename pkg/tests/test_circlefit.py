"""Circle-fit extraction tests: Taubin fit, delay search, phase fit, extract."""

import math

import numpy as np
import pytest

from resq import (
    DegenerateDataError,
    EnvironmentParams,
    QualityFlag,
    ResonanceParams,
    Trace,
    estimate_delay,
    extract,
    fit_circle,
    s21_notch,
)
from resq.circlefit import TraceMeta, fit_phase

from conftest import notch_trace


# ---------------------------------------------------------------------------
# Trace validation


def test_trace_too_few_samples():
    f = np.linspace(4.4e9, 4.5e9, 8)
    with pytest.raises(ValueError):
        Trace(freq=f, s21=np.ones(8, dtype=complex))


def test_trace_non_monotone():
    f = np.linspace(4.4e9, 4.5e9, 32)
    f[10] = f[9]
    with pytest.raises(ValueError):
        Trace(freq=f, s21=np.ones(32, dtype=complex))


def test_trace_non_finite():
    f = np.linspace(4.4e9, 4.5e9, 32)
    s = np.ones(32, dtype=complex)
    s[3] = complex("nan")
    with pytest.raises(ValueError):
        Trace(freq=f, s21=s)


# ---------------------------------------------------------------------------
# fit_circle


def test_circumcircle():
    geom = fit_circle(np.array([1 + 0j, 0 + 1j, -1 + 0j]))
    assert geom.center == pytest.approx(0.0 + 0.0j, abs=1e-12)
    assert geom.radius == pytest.approx(1.0, rel=1e-12)


def test_exact_circle_recovery():
    theta = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
    pts = (0.3 - 0.2j) + 0.25 * np.exp(1j * theta)
    geom = fit_circle(pts)
    assert geom.center == pytest.approx(0.3 - 0.2j, abs=1e-12)
    assert geom.radius == pytest.approx(0.25, rel=1e-12)
    assert geom.rms_residual < 1e-12


def test_noisy_circle_recovery():
    center, radius, n = 0.3 - 0.2j, 0.25, 256
    sigma = 1e-3
    errs_c, errs_r = [], []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        pts = center + (radius + sigma * rng.standard_normal(n)) * np.exp(1j * theta)
        geom = fit_circle(pts)
        errs_c.append(abs(geom.center - center))
        errs_r.append(abs(geom.radius - radius))
    bound = 3.0 * sigma / math.sqrt(n)
    assert np.median(errs_c) < bound
    assert np.median(errs_r) < bound


def test_collinear_points_degenerate():
    pts = np.linspace(0, 1, 64) + 1j * np.linspace(0, 2, 64)
    with pytest.raises(DegenerateDataError):
        fit_circle(pts)


def test_partial_arc():
    """Taubin stays accurate on a small arc (the regime that motivates it)."""
    theta = np.linspace(0.1, 0.9, 128)
    pts = (1.5 + 0.5j) + 2.0 * np.exp(1j * theta)
    geom = fit_circle(pts)
    assert geom.center == pytest.approx(1.5 + 0.5j, abs=1e-9)
    assert geom.radius == pytest.approx(2.0, rel=1e-9)


# ---------------------------------------------------------------------------
# estimate_delay


def _delay_trace(delay, noise, seed, ql=5e4, npts=1001, span=20.0):
    res = ResonanceParams(fr=4.4e9, q_loaded=ql, q_ext_mag=1.5 * ql, phi0=0.25)
    env = EnvironmentParams(amp=0.8, phase0=0.4, delay=delay)
    return notch_trace(res, env, n_points=npts, span_linewidths=span,
                       noise_sigma=noise, seed=seed)


def test_delay_zero():
    est = estimate_delay(_delay_trace(0.0, 0.0, 0))
    assert abs(est.delay) < 1e-12


def test_delay_noiseless():
    est = estimate_delay(_delay_trace(37.5e-9, 0.0, 0))
    assert est.delay == pytest.approx(37.5e-9, rel=1e-4)


def test_delay_noisy_ensemble():
    errs = [
        abs(estimate_delay(_delay_trace(37.5e-9, 1e-3, seed)).delay / 37.5e-9 - 1.0)
        for seed in range(100)
    ]
    assert max(errs) < 0.01


def test_delay_negative_sign():
    est = estimate_delay(_delay_trace(-12e-9, 0.0, 0))
    assert est.delay == pytest.approx(-12e-9, rel=1e-4)


# ---------------------------------------------------------------------------
# fit_phase


def test_phase_fit_exact():
    fr, ql = 4.4e9, 3e5
    f = np.linspace(fr * (1 - 10 / ql), fr * (1 + 10 / ql), 501)
    theta = 0.7 + 2.0 * np.arctan(2.0 * ql * (1.0 - f / fr))
    fit = fit_phase(f, theta)
    assert fit.fr == pytest.approx(fr, rel=1e-10)
    assert fit.q_loaded == pytest.approx(ql, rel=1e-8)
    assert fit.theta0 == pytest.approx(0.7, abs=1e-8)


def test_phase_fit_after_unwrapping():
    """Callers unwrap before fitting; a wrapped-then-unwrapped input agrees."""
    fr, ql = 4.4e9, 3e5
    f = np.linspace(fr * (1 - 10 / ql), fr * (1 + 10 / ql), 501)
    theta = 2.9 + 2.0 * np.arctan(2.0 * ql * (1.0 - f / fr))
    unwrapped = np.unwrap(np.angle(np.exp(1j * theta)))
    fit = fit_phase(f, unwrapped)
    assert fit.fr == pytest.approx(fr, rel=1e-10)
    assert fit.q_loaded == pytest.approx(ql, rel=1e-8)
    assert math.cos(fit.theta0 - 2.9) == pytest.approx(1.0, abs=1e-8)


# ---------------------------------------------------------------------------
# extract: round trip, invariances, diagnostics


CONFIGS = [
    # (ql, qe_over_ql, phi0, amp, phase0, delay_ns)
    (2e5, 1.5, 0.25, 0.8, 0.4, 30.0),
    (5e4, 3.0, -0.35, 1.2, -1.0, 0.0),
    (1e6, 1.2, 0.05, 0.5, 2.5, 55.0),
    (1e4, 5.0, 0.45, 2.0, 0.0, -20.0),
]


@pytest.mark.parametrize("ql,ratio,phi0,amp,phase0,delay_ns", CONFIGS)
def test_extract_noiseless_round_trip(ql, ratio, phi0, amp, phase0, delay_ns):
    res = ResonanceParams(fr=4.4e9, q_loaded=ql, q_ext_mag=ratio * ql, phi0=phi0)
    env = EnvironmentParams(amp=amp, phase0=phase0, delay=delay_ns * 1e-9)
    rep = extract(notch_trace(res, env))
    assert rep.res.fr == pytest.approx(res.fr, rel=1e-6)
    assert rep.res.q_loaded == pytest.approx(res.q_loaded, rel=1e-6)
    assert rep.res.q_ext_mag == pytest.approx(res.q_ext_mag, rel=1e-6)
    assert rep.res.phi0 == pytest.approx(res.phi0, abs=1e-6)
    assert rep.qi == pytest.approx(res.q_internal, rel=1e-6)
    assert not rep.flags


def test_extract_environment_invariance():
    res = ResonanceParams(fr=4.4e9, q_loaded=2e5, q_ext_mag=3e5, phi0=0.25)
    base = notch_trace(res, EnvironmentParams())
    rep0 = extract(base)
    mod = Trace(
        freq=base.freq,
        s21=base.s21 * 0.7 * np.exp(0.9j) * np.exp(-2j * np.pi * base.freq * 12e-9),
        meta=base.meta,
    )
    rep1 = extract(mod)
    assert rep1.res.fr == pytest.approx(rep0.res.fr, rel=1e-6)
    assert rep1.res.q_loaded == pytest.approx(rep0.res.q_loaded, rel=1e-6)
    assert rep1.res.q_ext_mag == pytest.approx(rep0.res.q_ext_mag, rel=1e-6)
    assert rep1.res.phi0 == pytest.approx(rep0.res.phi0, abs=1e-6)
    assert rep1.env.amp == pytest.approx(0.7 * rep0.env.amp, rel=1e-6)
    assert rep1.env.delay == pytest.approx(rep0.env.delay + 12e-9, rel=1e-4)


def test_extract_frequency_reversal_invariance():
    res = ResonanceParams(fr=4.4e9, q_loaded=2e5, q_ext_mag=3e5, phi0=0.25)
    tr = notch_trace(res, EnvironmentParams(amp=0.8, phase0=0.4, delay=30e-9),
                     noise_sigma=1e-3, seed=7)
    # reversed sample order re-sorts to the same valid Trace
    order = np.argsort(tr.freq[::-1])
    rev = Trace(freq=tr.freq[::-1][order], s21=tr.s21[::-1][order], meta=tr.meta)
    rep0 = extract(tr)
    rep1 = extract(rev)
    assert rep1.qi == rep0.qi
    assert rep1.res == rep0.res
    assert rep1.flags == rep0.flags


def test_extract_noisy_qi_and_coverage():
    """sigma = 1e-3 * amp, Qi = 1.1e6: Qi within 5%, reported sigma covers the
    truth in at least 95% of 200 seeds."""
    qi_true = 1.1e6
    qe, phi0 = 4e5, 0.2
    ql = 1.0 / (1.0 / qi_true + math.cos(phi0) / qe)
    res = ResonanceParams(fr=4.4e9, q_loaded=ql, q_ext_mag=qe, phi0=phi0)
    env = EnvironmentParams(amp=0.8, phase0=0.4, delay=30e-9)
    covered = 0
    for seed in range(200):
        rep = extract(notch_trace(res, env, noise_sigma=1e-3, seed=seed))
        assert rep.qi == pytest.approx(qi_true, rel=0.05)
        if abs(rep.qi - qi_true) <= 1.96 * rep.qi_sigma:
            covered += 1
    assert covered >= 190


def test_extract_shallow_dip_flag():
    """A dip whose circle diameter is comparable to the noise is flagged."""
    res = ResonanceParams(fr=4.4e9, q_loaded=1e5, q_ext_mag=2e7, phi0=0.0)
    tr = notch_trace(res, EnvironmentParams(), n_points=2001, noise_sigma=1.5e-3, seed=13)
    rep = extract(tr)
    assert QualityFlag.SHALLOW_DIP in rep.flags
    assert rep.qi == pytest.approx(res.q_internal, rel=0.2)


def test_fit_report_qi_consistency():
    res = ResonanceParams(fr=4.4e9, q_loaded=2e5, q_ext_mag=3e5, phi0=0.25)
    rep = extract(notch_trace(res))
    from resq import qi_from_circle

    expected = qi_from_circle(rep.res.q_loaded, rep.res.q_ext_mag, rep.res.phi0)
    assert rep.qi == pytest.approx(expected, rel=1e-12)
    assert rep.qi_sigma >= 0.0


def test_extract_keeps_metadata():
    res = ResonanceParams(fr=4.4e9, q_loaded=2e5, q_ext_mag=3e5, phi0=0.25)
    meta = TraceMeta(power_dbm=-30.0, attenuation_db=60.0, temperature_k=0.01,
                     sample_id="A", resonator_id="R3")
    tr = notch_trace(res, meta=meta)
    assert tr.meta.sample_id == "A"
    assert tr.meta.resonator_id == "R3"
