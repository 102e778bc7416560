"""Command-line interface.

Exit codes: 0 success, 1 validation/parse error, 2 fit failure, 3 I/O error.
The RESQ_THREADS environment variable caps pipeline concurrency (0 = auto).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .batch import ingest_trace, load_manifest, run_pipeline, write_trace
from .circlefit import extract
from .errors import (
    EmptyInputError,
    FitError,
    DegenerateDataError,
    NonPhysicalError,
    ParseError,
    ResqError,
    ValidationError,
)
from .report import emit_report, load_json_report, render_csv
from .synth import SynthSpec, ground_truth, synth_power_sweep

EXIT_VALIDATION = 1
EXIT_FIT = 2
EXIT_IO = 3


def _run(body) -> None:
    try:
        body()
    except (ParseError, ValidationError, EmptyInputError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (FitError, DegenerateDataError, NonPhysicalError) as exc:
        click.echo(f"fit error: {exc}", err=True)
        sys.exit(EXIT_FIT)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)


@click.group()
def main() -> None:
    """Quality-factor extraction and TLS loss fitting for notch resonators."""


@main.command("fit-trace")
@click.argument("file", type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True, help="Emit the fit report as JSON.")
def fit_trace_cmd(file: Path, as_json: bool) -> None:
    """Fit a single trace FILE and print the resonance parameters."""

    def body():
        trace = ingest_trace(file)
        report = extract(trace)
        doc = {
            "fr": report.res.fr,
            "q_loaded": report.res.q_loaded,
            "q_ext_mag": report.res.q_ext_mag,
            "phi0": report.res.phi0,
            "qi": report.qi,
            "qi_sigma": report.qi_sigma,
            "amp": report.env.amp,
            "phase0": report.env.phase0,
            "delay": report.env.delay,
            "chi2_reduced": report.chi2_reduced,
            "flags": sorted(f.value for f in report.flags),
        }
        if as_json:
            click.echo(json.dumps(doc, sort_keys=True, indent=2))
        else:
            for key, value in doc.items():
                click.echo(f"{key}: {value}")

    _run(body)


@main.command("fit-sweep")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--ref-n", type=click.Choice(["1", "10"]), default="1", show_default=True,
              help="Photon number at which the reference Qi is reported.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("."), show_default=True)
@click.option("--format", "formats", default="csv,json,svg", show_default=True,
              help="Comma-separated subset of csv,json,svg.")
def fit_sweep_cmd(manifest_path: Path, ref_n: str, out_dir: Path, formats: str) -> None:
    """Run the batch pipeline over a manifest and write reports."""

    def body():
        manifest = load_manifest(manifest_path)
        result = run_pipeline(manifest, ref_n=float(ref_n))
        fmts = [f.strip() for f in formats.split(",") if f.strip()]
        written = emit_report(result, fmts, out_dir)
        for path in written:
            click.echo(str(path))
        if not result.samples:
            raise FitError("no sample produced a successful fit")

    _run(body)


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(path_type=Path),
              help="JSON file describing the synthetic sweep.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def synth_cmd(spec_path: Path, out_dir: Path) -> None:
    """Generate a synthetic sweep: traces, manifest and ground truth."""

    def body():
        try:
            spec = SynthSpec.from_json(spec_path.read_text(encoding="utf-8"))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{spec_path}: invalid spec: {exc}") from exc
        out_dir.mkdir(parents=True, exist_ok=True)
        traces = synth_power_sweep(spec)
        runs = []
        for i, trace in enumerate(traces):
            name = f"trace_{i:03d}.csv"
            write_trace(out_dir / name, trace)
            runs.append(
                {
                    "trace_path": name,
                    "sample_id": spec.sample_id,
                    "resonator_id": spec.resonator_id,
                    "power_dbm": trace.meta.power_dbm,
                }
            )
        manifest = {
            "defaults": {
                "attenuation_db": spec.attenuation_db,
                "temperature_k": spec.tls.temperature,
            },
            "runs": runs,
        }
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        truth = [
            {
                "power_index": gt.power_index,
                "power_dbm": gt.power_dbm,
                "power_chip_w": gt.power_chip_w,
                "n_mean": gt.n_mean,
                "qi": gt.qi,
                "q_loaded": gt.q_loaded,
            }
            for gt in ground_truth(spec)
        ]
        (out_dir / "ground_truth.json").write_text(
            json.dumps({"spec": spec.to_dict(), "points": truth}, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        click.echo(str(out_dir / "manifest.json"))

    _run(body)


@main.command("report")
@click.option("--in", "in_dir", required=True, type=click.Path(path_type=Path),
              help="Directory holding a previously written report.json.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Output directory (defaults to the input directory).")
@click.option("--format", "formats", default="csv,svg", show_default=True,
              help="Comma-separated subset of csv,json,svg.")
def report_cmd(in_dir: Path, out_dir: Path | None, formats: str) -> None:
    """Re-emit reports from a stored report.json."""

    def body():
        src = in_dir / "report.json"
        result = load_json_report(src)
        fmts = [f.strip() for f in formats.split(",") if f.strip()]
        written = emit_report(result, fmts, out_dir or in_dir)
        for path in written:
            click.echo(str(path))

    _run(body)


if __name__ == "__main__":
    main()
