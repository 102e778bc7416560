"""resq: quality-factor extraction and TLS loss fitting for notch-coupled
superconducting resonators.

Layers, bottom up: closed-form models (:mod:`resq.model`), trace extraction
(:mod:`resq.circlefit`), photon-number calibration (:mod:`resq.calibration`),
TLS loss fitting (:mod:`resq.tlsfit`), a deterministic synthetic-data oracle
(:mod:`resq.synth`) and the batch pipeline with reports
(:mod:`resq.batch` / :mod:`resq.report`).
"""

from .calibration import PowerPoint, dbm_to_watts, photon_number, power_for_photon_number, watts_to_dbm
from .circlefit import (
    CircleGeom,
    DelayEstimate,
    FitReport,
    QualityFlag,
    Trace,
    TraceMeta,
    estimate_delay,
    extract,
    fit_circle,
    fit_phase,
)
from .errors import (
    DegenerateDataError,
    DidNotConvergeError,
    EmptyInputError,
    FitError,
    FixedPointDivergedError,
    InsufficientSpanError,
    NonPhysicalError,
    ParseError,
    ResqError,
    ValidationError,
)
from .model import (
    ComplexSample,
    EnvironmentParams,
    ResonanceParams,
    TlsModelParams,
    qi_from_circle,
    s21_notch,
    thermal_factor,
    tls_inverse_q,
)
from .batch import (
    Failure,
    Manifest,
    ManifestRun,
    PipelineResult,
    ResonatorResult,
    SampleStats,
    ingest_trace,
    load_manifest,
    quartiles,
    run_pipeline,
    write_trace,
)
from .report import emit_report, render_csv, render_json
from .synth import SynthSpec, ground_truth, noise_stream_seed, synth_power_sweep, synth_trace
from .tlsfit import IdentifiabilityFlag, TlsFitResult, TlsSigmas, fit_tls, qi_at, tls_jacobian

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
