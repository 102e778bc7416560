"""Trace file I/O, manifest-driven batch execution and aggregation.

Trace file format: UTF-8 CSV with the exact header line

    frequency_hz,s21_real,s21_imag

and one sample per row (decimal point, no thousands separators).  All
measurement metadata lives in the JSON manifest, not in trace files, so raw
instrument dumps stay usable unmodified.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .calibration import PowerPoint, dbm_to_watts, photon_number
from .circlefit import Trace, TraceMeta, extract
from .errors import EmptyInputError, ParseError, ResqError, ValidationError
from .tlsfit import TlsFitResult, TlsModelParams, TlsSigmas, fit_tls, qi_at

TRACE_HEADER = "frequency_hz,s21_real,s21_imag"


def ingest_trace(path, meta: TraceMeta | None = None) -> Trace:
    """Read and validate one trace file.

    Frequencies are re-sorted ascending with a warning if the file is out of
    order.  Raises :class:`ParseError` for structural problems and
    :class:`ValidationError` for content violations, both naming the line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read trace file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    if lines[0].strip() != TRACE_HEADER:
        raise ParseError(f"{path}: bad header {lines[0]!r}, expected {TRACE_HEADER!r}", line=1)

    freqs: list[float] = []
    vals: list[complex] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"{path}: expected 3 comma-separated fields, got {len(parts)}", line=lineno)
        try:
            f, re_, im = (float(p) for p in parts)
        except ValueError:
            raise ParseError(f"{path}: non-numeric field in {line!r}", line=lineno) from None
        if not (math.isfinite(f) and math.isfinite(re_) and math.isfinite(im)):
            raise ValidationError(f"{path}: non-finite value in {line!r}", line=lineno)
        if f <= 0.0:
            raise ValidationError(f"{path}: frequency must be > 0, got {f!r}", line=lineno)
        freqs.append(f)
        vals.append(complex(re_, im))

    if len(freqs) < 16:
        raise ValidationError(f"{path}: need at least 16 samples, got {len(freqs)}")
    freq = np.array(freqs)
    s21 = np.array(vals)
    order = np.argsort(freq, kind="stable")
    if not np.array_equal(order, np.arange(len(freq))):
        warnings.warn(f"{path}: frequencies out of order; re-sorting", stacklevel=2)
        freq = freq[order]
        s21 = s21[order]
    if np.any(np.diff(freq) <= 0.0):
        raise ValidationError(f"{path}: duplicate frequency values")
    try:
        return Trace(freq=freq, s21=s21, meta=meta or TraceMeta())
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def write_trace(path, trace: Trace) -> None:
    """Write a trace in the canonical CSV format (byte-stable)."""
    rows = [TRACE_HEADER]
    for f, z in zip(trace.freq, trace.s21):
        rows.append(f"{float(f)!r},{float(z.real)!r},{float(z.imag)!r}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ManifestRun:
    """One measured trace plus the metadata needed to process it."""

    trace_path: str
    sample_id: str
    resonator_id: str
    power_dbm: float
    attenuation_db: float
    temperature_k: float


@dataclass(frozen=True)
class Manifest:
    runs: tuple[ManifestRun, ...]
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        paths = [r.trace_path for r in self.runs]
        if len(set(paths)) != len(paths):
            raise ValidationError("manifest trace paths must be distinct")
        for r in self.runs:
            if r.attenuation_db < 0.0:
                raise ValidationError(f"attenuation_db must be >= 0 for {r.trace_path}")
            if not r.temperature_k > 0.0:
                raise ValidationError(f"temperature_k must be > 0 for {r.trace_path}")


def load_manifest(path) -> Manifest:
    """Load a JSON manifest, applying shared defaults to each run."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    defaults = doc.get("defaults", {})
    runs = []
    for i, entry in enumerate(doc.get("runs", [])):
        merged = {**defaults, **entry}
        try:
            runs.append(
                ManifestRun(
                    trace_path=merged["trace_path"],
                    sample_id=str(merged["sample_id"]),
                    resonator_id=str(merged["resonator_id"]),
                    power_dbm=float(merged["power_dbm"]),
                    attenuation_db=float(merged.get("attenuation_db", 0.0)),
                    temperature_k=float(merged.get("temperature_k", 0.010)),
                )
            )
        except KeyError as exc:
            raise ParseError(f"{path}: run {i} missing field {exc}") from exc
    return Manifest(runs=tuple(runs), base_dir=path.parent)


def quartiles(values) -> tuple[float, float, float, float, float]:
    """Five-number summary (min, Q1, median, Q3, max).

    Quantiles use the linear-interpolation rule with inclusive endpoints
    (the i-th of N sorted values sits at quantile (i-1)/(N-1)).
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInputError("quartiles of an empty list")
    if not np.all(np.isfinite(arr)):
        raise ValueError("quartiles require finite values")
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return tuple(float(x) for x in q)


@dataclass(frozen=True)
class ResonatorResult:
    """TLS fit of a single resonator together with its power points."""

    resonator_id: str
    fit: TlsFitResult
    points: tuple[PowerPoint, ...]
    f0: float

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))


@dataclass(frozen=True)
class SampleStats:
    """Per-sample aggregation over its resonators."""

    sample_id: str
    resonators: tuple[ResonatorResult, ...]
    ref_n: float
    f_delta_tls0_box: tuple[float, float, float, float, float]
    qi_ref_mean: float
    qi_ref_median: float

    def __post_init__(self):
        object.__setattr__(self, "resonators", tuple(self.resonators))
        if not self.resonators:
            raise ValueError("SampleStats needs at least one resonator")
        lo, q1, med, q3, hi = self.f_delta_tls0_box
        if not (lo <= q1 <= med <= q3 <= hi):
            raise ValueError("box statistics out of order")


@dataclass(frozen=True)
class Failure:
    """A resonator (or sample) that could not be processed."""

    sample_id: str
    resonator_id: str
    error: str


@dataclass(frozen=True)
class PipelineResult:
    samples: tuple[SampleStats, ...]
    failures: tuple[Failure, ...]
    ref_n: float

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "failures", tuple(self.failures))


def _max_workers() -> int:
    raw = os.environ.get("RESQ_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def _process_resonator(runs: list[ManifestRun], base_dir: Path) -> ResonatorResult:
    points = []
    frs = []
    temps = []
    for run in sorted(runs, key=lambda r: r.power_dbm):
        meta = TraceMeta(
            power_dbm=run.power_dbm,
            attenuation_db=run.attenuation_db,
            temperature_k=run.temperature_k,
            sample_id=run.sample_id,
            resonator_id=run.resonator_id,
        )
        trace = ingest_trace(base_dir / run.trace_path, meta=meta)
        report = extract(trace)
        p_chip = dbm_to_watts(run.power_dbm, run.attenuation_db)
        n_mean = photon_number(p_chip, report.res)
        points.append(PowerPoint(n_mean=n_mean, qi=report.qi, qi_sigma=report.qi_sigma, power_chip_w=p_chip))
        frs.append(report.res.fr)
        temps.append(run.temperature_k)
    f0 = float(np.median(frs))
    temperature = float(np.median(temps))
    fit = fit_tls(points, f0=f0, temperature=temperature)
    return ResonatorResult(resonator_id=runs[0].resonator_id, fit=fit, points=tuple(points), f0=f0)


def sample_stats(sample_id: str, resonators: list[ResonatorResult], ref_n: float) -> SampleStats:
    """Aggregate per-resonator fits into box and reference-Qi statistics."""
    resonators = sorted(resonators, key=lambda r: r.resonator_id)
    losses = [r.fit.params.f_delta_tls0 for r in resonators]
    qi_ref = [qi_at(ref_n, r.fit) for r in resonators]
    return SampleStats(
        sample_id=sample_id,
        resonators=tuple(resonators),
        ref_n=ref_n,
        f_delta_tls0_box=quartiles(losses),
        qi_ref_mean=float(np.mean(qi_ref)),
        qi_ref_median=float(np.median(qi_ref)),
    )


def run_pipeline(manifest: Manifest, ref_n: float = 1.0) -> PipelineResult:
    """Process every resonator of a manifest and aggregate per sample.

    Per-resonator failures are recorded and excluded from the statistics; a
    sample with zero successful resonators becomes a failure entry with
    resonator_id "*".  Resonators run concurrently (capped by RESQ_THREADS;
    0 or unset means auto) and the output ordering is lexicographic in
    (sample_id, resonator_id) regardless of completion order.
    """
    groups: dict[tuple[str, str], list[ManifestRun]] = {}
    for run in manifest.runs:
        groups.setdefault((run.sample_id, run.resonator_id), []).append(run)
    keys = sorted(groups)

    results: dict[tuple[str, str], ResonatorResult] = {}
    failures: list[Failure] = []

    def work(key):
        return _process_resonator(groups[key], manifest.base_dir)

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        futures = {key: pool.submit(work, key) for key in keys}
    for key in keys:
        try:
            results[key] = futures[key].result()
        except (ResqError, OSError, ValueError) as exc:
            failures.append(Failure(sample_id=key[0], resonator_id=key[1], error=str(exc)))

    samples = []
    for sample_id in sorted({k[0] for k in keys}):
        fits = [results[k] for k in keys if k[0] == sample_id and k in results]
        if fits:
            samples.append(sample_stats(sample_id, fits, ref_n))
        else:
            failures.append(Failure(sample_id=sample_id, resonator_id="*", error="no successful resonators"))

    failures.sort(key=lambda f: (f.sample_id, f.resonator_id))
    return PipelineResult(samples=tuple(samples), failures=tuple(failures), ref_n=ref_n)
