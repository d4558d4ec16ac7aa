"""Command-line entry point: ``fracomp {fit,batch,compare,synth,correlate,models}``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .analysis import BIN_MMHG, BIN_PWV, correlation_table, write_correlation_csv
from .errors import FracompError, UnknownModel
from .fitting import FitConfig, fit_models, sort_by_aicc
from .models import FRACTIONAL_TAGS, MODEL_TAGS, catalogue, parse_models
from .population import (
    aggregate,
    batch_fit,
    cohort_from_config,
    default_workers,
    load_subjects_csv,
    model_summary,
    save_subjects_csv,
    synthesize_subject,
)
from .reporting import (
    dump_json,
    provenance,
    provenance_line,
    read_results_csv,
    write_groups_csv,
    write_results_csv,
    write_results_json,
    write_summary_csv,
)
from .spectral import DEFAULT_FMAX

EXIT_USAGE = 2
EXIT_FAILURE = 1

COMMANDS = ("fit", "batch", "compare", "synth", "correlate")


@dataclass
class RunManifest:
    command: str
    input_path: str | None
    output_dir: str
    f_max: float = DEFAULT_FMAX
    models: tuple[str, ...] = MODEL_TAGS
    seed: int = 0
    threads: int = 1
    fit: dict = field(default_factory=dict)
    bin_mmhg: float = BIN_MMHG
    bin_pwv: float = BIN_PWV
    confidence: float = 0.95
    raw_correlation: bool = False
    subject: str | None = None
    results_path: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise UnknownModel(f"unknown command {self.command!r}")
        if self.command in ("fit", "batch", "compare") and not self.models:
            raise UnknownModel("no models given")
        if self.command != "correlate" or self.results_path is None:
            if not self.input_path:
                raise FracompError("--input is required")

    def fit_config(self) -> FitConfig:
        return FitConfig(seed=self.seed, **self.fit)

    def provenance_manifest(self) -> dict:
        """Settings that determine numeric output; paths and worker count excluded."""
        d = asdict(self)
        for k in ("output_dir", "threads", "input_path", "results_path"):
            d.pop(k)
        d["models"] = list(self.models)
        return d


def _write_run_record(m: RunManifest, out: Path, status: str, outputs, error=None):
    record = {
        "provenance": provenance(m.provenance_manifest()),
        "manifest": {**asdict(m), "models": list(m.models)},
        "status": status,
        "outputs": sorted(outputs),
        "finished_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    if error is not None:
        record["error"] = error
    dump_json(record, out / "run.json")


def _batch_outputs(m, batch, subjects, out: Path, outputs):
    prov = m.provenance_manifest()
    write_results_csv(batch, out / "results.csv", prov)
    write_results_json(batch, out / "results.json", prov)
    write_groups_csv(aggregate(batch, subjects), out / "groups.csv", prov)
    outputs += ["results.csv", "results.json", "groups.csv"]


def run(m: RunManifest) -> int:
    """Execute a manifest; artifacts go to ``m.output_dir``. Returns the exit status."""
    m.validate()
    out = Path(m.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    prov = m.provenance_manifest()
    cfg = m.fit_config()
    try:
        if m.command == "synth":
            with open(m.input_path, encoding="utf-8") as fh:
                config = json.load(fh)
            specs = cohort_from_config(config, m.f_max)
            subjects = [synthesize_subject(s) for s in specs]
            save_subjects_csv(subjects, out / "subjects.csv")
            truth = [{"id": s.id, "model": s.model, "theta": list(s.theta), "r_app": s.r_app,
                      "heart_rate": s.heart_rate} for s in specs]
            dump_json({"provenance": provenance({**prov, "cohort": config}), "subjects": truth},
                      out / "ground_truth.json")
            outputs += ["subjects.csv", "ground_truth.json"]

        elif m.command == "fit":
            subjects = load_subjects_csv(m.input_path)
            if not subjects:
                raise FracompError("input has no subjects")
            if m.subject is None:
                subject = subjects[0]
            else:
                match = [s for s in subjects if s.id == m.subject]
                if not match:
                    raise FracompError(f"subject {m.subject!r} not in input")
                subject = match[0]
            data = subject.compliance(m.f_max)
            results = fit_models(data, m.models, cfg)
            for tag in m.models:
                name = f"fit_{subject.id}_{tag}.json"
                dump_json({"provenance": provenance(prov), "subject_id": subject.id,
                           "result": results[tag].to_dict()}, out / name)
                outputs.append(name)
            ranking = [r.model for r in sort_by_aicc(results.values())]
            dump_json({"provenance": provenance(prov), "subject_id": subject.id,
                       "ranking_by_aicc": ranking}, out / f"fit_{subject.id}_ranking.json")
            outputs.append(f"fit_{subject.id}_ranking.json")

        elif m.command in ("batch", "compare"):
            subjects = load_subjects_csv(m.input_path)
            batch = batch_fit(subjects, m.models, cfg, m.f_max, m.threads)
            _batch_outputs(m, batch, subjects, out, outputs)
            if m.command == "compare":
                write_summary_csv(model_summary(batch), out / "compare.csv", prov)
                outputs.append("compare.csv")

        elif m.command == "correlate":
            subjects = load_subjects_csv(m.input_path)
            if m.results_path:
                batch = read_results_csv(m.results_path)
            else:
                models = tuple(t for t in m.models if t in FRACTIONAL_TAGS)
                batch = batch_fit(subjects, models, cfg, m.f_max, m.threads)
                _batch_outputs(m, batch, subjects, out, outputs)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                reports = correlation_table(batch, subjects, bin_mmhg=m.bin_mmhg, bin_pwv=m.bin_pwv,
                                            confidence=m.confidence, binned=not m.raw_correlation)
            write_correlation_csv(reports, out / "correlation.csv", provenance_line(prov))
            outputs.append("correlation.csv")

        partial = _has_failures(out, outputs)
        _write_run_record(m, out, "partial" if partial else "ok", outputs)
        return 0
    except (FracompError, OSError, json.JSONDecodeError) as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
        _write_run_record(m, out, "failed", outputs, err)
        raise


def _has_failures(out: Path, outputs) -> bool:
    if "results.json" not in outputs:
        return False
    with open(out / "results.json", encoding="utf-8") as fh:
        rows = json.load(fh)["results"]
    return any("error" in r and r["error"] for r in rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracomp", description=(
        "Fit fractional-order apparent-compliance models to aortic pressure/flow waveforms."))
    p.add_argument("--version", action="version", version=f"fracomp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, models_default="A,B,C,D,E,F,G"):
        sp.add_argument("--input", help="subjects CSV (synth: cohort JSON)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--models", default=models_default, help="comma-separated model tags")
        sp.add_argument("--fmax", type=float, default=DEFAULT_FMAX, help="highest harmonic frequency, Hz")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=default_workers(), help="worker processes")
        sp.add_argument("--strict-paper-objective", action="store_true",
                        help="normalise imaginary residuals point-by-point")
        sp.add_argument("--max-iterations", type=int, default=FitConfig.max_iterations)
        sp.add_argument("--multistart", type=int, default=FitConfig.multistart_count)
        sp.add_argument("--gtol", type=float, default=FitConfig.gradient_tolerance)
        sp.add_argument("--xtol", type=float, default=FitConfig.step_tolerance)

    sp = sub.add_parser("fit", help="fit one subject, one JSON per model")
    common(sp)
    sp.add_argument("--subject", help="subject id (default: first in file)")
    common(sub.add_parser("batch", help="fit a cohort; results and group aggregates"))
    common(sub.add_parser("compare", help="per-model mean RMSE / Deviation / AICc"))
    common(sub.add_parser("synth", help="write a synthetic cohort from a cohort JSON"))
    sp = sub.add_parser("correlate", help="binned correlation of alpha / eta_r with hemodynamics")
    common(sp, models_default="A,B,C,D,E")
    sp.add_argument("--results", help="reuse a results.csv instead of refitting")
    sp.add_argument("--bin-mmhg", type=float, default=BIN_MMHG)
    sp.add_argument("--bin-pwv", type=float, default=BIN_PWV)
    sp.add_argument("--confidence", type=float, default=0.95)
    sp.add_argument("--raw", action="store_true", help="correlate per-subject values, no binning")
    sub.add_parser("models", help="print the model catalogue as JSON")
    return p


def manifest_from_args(a) -> RunManifest:
    fit_overrides = {
        "max_iterations": a.max_iterations,
        "multistart_count": a.multistart,
        "gradient_tolerance": a.gtol,
        "step_tolerance": a.xtol,
        "strict_paper_objective": a.strict_paper_objective,
    }
    return RunManifest(
        command=a.command,
        input_path=a.input,
        output_dir=a.out,
        f_max=a.fmax,
        models=parse_models(a.models),
        seed=a.seed,
        threads=max(1, a.threads),
        fit=fit_overrides,
        bin_mmhg=getattr(a, "bin_mmhg", BIN_MMHG),
        bin_pwv=getattr(a, "bin_pwv", BIN_PWV),
        confidence=getattr(a, "confidence", 0.95),
        raw_correlation=getattr(a, "raw", False),
        subject=getattr(a, "subject", None),
        results_path=getattr(a, "results", None),
    )


def _report_error(exc, code: int, out_dir=None) -> int:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps({"error": err}) + "\n")
    if out_dir:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            dump_json({"error": err}, Path(out_dir) / "error.json")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "models":
        json.dump(catalogue(), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    try:
        manifest = manifest_from_args(args)
        manifest.validate()
        FitConfig(seed=manifest.seed, **manifest.fit)
    except (FracompError, ValueError) as exc:
        return _report_error(exc, EXIT_USAGE, getattr(args, "out", None))
    try:
        return run(manifest)
    except (FracompError, OSError, json.JSONDecodeError) as exc:
        return _report_error(exc, EXIT_FAILURE, manifest.output_dir)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
