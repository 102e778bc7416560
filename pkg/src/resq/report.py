"""Report emission: delimited tables, JSON, and SVG figures.

All text outputs are byte-stable for identical inputs: floats are rendered
with shortest round-trip repr, JSON keys are sorted, and row order follows
the (already deterministic) pipeline ordering.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .batch import Failure, PipelineResult, ResonatorResult, SampleStats
from .calibration import PowerPoint
from .errors import EmptyInputError
from .tlsfit import TlsFitResult, TlsModelParams, TlsSigmas

CSV_COLUMNS = [
    "sample_id",
    "n_resonators",
    "ref_n",
    "qi_ref_mean",
    "qi_ref_median",
    "beta_mean",
    "beta_median",
    "f_delta_tls0_mean",
    "f_delta_tls0_median",
    "f_delta_tls0_min",
    "f_delta_tls0_q1",
    "f_delta_tls0_q3",
    "f_delta_tls0_max",
    "delta_other_mean",
    "delta_other_median",
    "flags",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def render_csv(result: PipelineResult) -> str:
    """Per-sample summary table as CSV text."""
    if not result.samples and not result.failures:
        raise EmptyInputError("nothing to report")
    lines = [",".join(CSV_COLUMNS)]
    for s in result.samples:
        betas = [r.fit.params.beta for r in s.resonators]
        losses = [r.fit.params.f_delta_tls0 for r in s.resonators]
        others = [r.fit.params.delta_other for r in s.resonators]
        flags = sorted({f.value for r in s.resonators for f in r.fit.flags})
        lo, q1, med, q3, hi = s.f_delta_tls0_box
        row = [
            s.sample_id,
            str(len(s.resonators)),
            _fmt(s.ref_n),
            _fmt(s.qi_ref_mean),
            _fmt(s.qi_ref_median),
            _fmt(np.mean(betas)),
            _fmt(np.median(betas)),
            _fmt(np.mean(losses)),
            _fmt(np.median(losses)),
            _fmt(lo),
            _fmt(q1),
            _fmt(q3),
            _fmt(hi),
            _fmt(np.mean(others)),
            _fmt(np.median(others)),
            ";".join(flags),
        ]
        lines.append(",".join(row))
    for f in result.failures:
        lines.append(f"# failed,{f.sample_id},{f.resonator_id},{f.error}")
    return "\n".join(lines) + "\n"


def _fit_to_dict(fit: TlsFitResult) -> dict:
    return {
        "params": {
            "f_delta_tls0": fit.params.f_delta_tls0,
            "n_c": fit.params.n_c,
            "beta": fit.params.beta,
            "delta_other": fit.params.delta_other,
            "omega0": fit.params.omega0,
            "temperature": fit.params.temperature,
        },
        "sigmas": {
            "f_delta_tls0": fit.sigmas.f_delta_tls0,
            "n_c": fit.sigmas.n_c,
            "beta": fit.sigmas.beta,
            "delta_other": fit.sigmas.delta_other,
        },
        "chi2_reduced": fit.chi2_reduced,
        "flags": sorted(f.value for f in fit.flags),
    }


def _fit_from_dict(d: dict) -> TlsFitResult:
    from .tlsfit import IdentifiabilityFlag

    return TlsFitResult(
        params=TlsModelParams(**d["params"]),
        sigmas=TlsSigmas(**d["sigmas"]),
        chi2_reduced=d["chi2_reduced"],
        flags=frozenset(IdentifiabilityFlag(f) for f in d["flags"]),
    )


def to_dict(result: PipelineResult) -> dict:
    """JSON-ready dict; round-trips through :func:`from_dict`."""
    return {
        "ref_n": result.ref_n,
        "samples": [
            {
                "sample_id": s.sample_id,
                "ref_n": s.ref_n,
                "f_delta_tls0_box": list(s.f_delta_tls0_box),
                "qi_ref_mean": s.qi_ref_mean,
                "qi_ref_median": s.qi_ref_median,
                "resonators": [
                    {
                        "resonator_id": r.resonator_id,
                        "f0": r.f0,
                        "fit": _fit_to_dict(r.fit),
                        "points": [
                            {
                                "n_mean": p.n_mean,
                                "qi": p.qi,
                                "qi_sigma": p.qi_sigma,
                                "power_chip_w": p.power_chip_w,
                            }
                            for p in r.points
                        ],
                    }
                    for r in s.resonators
                ],
            }
            for s in result.samples
        ],
        "failures": [
            {"sample_id": f.sample_id, "resonator_id": f.resonator_id, "error": f.error}
            for f in result.failures
        ],
    }


def from_dict(doc: dict) -> PipelineResult:
    samples = []
    for s in doc["samples"]:
        resonators = [
            ResonatorResult(
                resonator_id=r["resonator_id"],
                fit=_fit_from_dict(r["fit"]),
                points=tuple(PowerPoint(**p) for p in r["points"]),
                f0=r["f0"],
            )
            for r in s["resonators"]
        ]
        samples.append(
            SampleStats(
                sample_id=s["sample_id"],
                resonators=tuple(resonators),
                ref_n=s["ref_n"],
                f_delta_tls0_box=tuple(s["f_delta_tls0_box"]),
                qi_ref_mean=s["qi_ref_mean"],
                qi_ref_median=s["qi_ref_median"],
            )
        )
    failures = tuple(Failure(**f) for f in doc.get("failures", []))
    return PipelineResult(samples=tuple(samples), failures=failures, ref_n=doc["ref_n"])


def render_json(result: PipelineResult) -> str:
    return json.dumps(to_dict(result), sort_keys=True, indent=2) + "\n"


def load_json_report(path) -> PipelineResult:
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def emit_report(result: PipelineResult, formats, out_dir, stem: str = "report") -> list[Path]:
    """Write the requested report formats into ``out_dir``.

    ``formats`` is an iterable drawn from {"csv", "json", "svg"}.  The SVG
    format produces two figures: the per-resonator Qi-vs-photon-number
    curves with fitted model overlay, and the per-sample box plot of the
    fitted TLS loss.  Returns the written paths.
    """
    if not result.samples and not result.failures:
        raise EmptyInputError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out_dir / f"{stem}.csv"
            path.write_text(render_csv(result), encoding="utf-8")
            written.append(path)
        elif fmt == "json":
            path = out_dir / f"{stem}.json"
            path.write_text(render_json(result), encoding="utf-8")
            written.append(path)
        elif fmt == "svg":
            from .figures import save_loss_box_figure, save_qi_vs_photon_figure

            p1 = out_dir / f"{stem}_qi_vs_n.svg"
            save_qi_vs_photon_figure(result, p1)
            p2 = out_dir / f"{stem}_tls_box.svg"
            save_loss_box_figure(result, p2)
            written.extend([p1, p2])
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written
