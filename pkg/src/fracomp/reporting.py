"""Result tables: CSV/JSON writers and a reader for the results CSV.

Every CSV starts with one ``#`` comment line carrying provenance; the
subject and results readers skip such lines.
"""

from __future__ import annotations

import csv
import json
import math

from . import __version__
from .errors import ParseError
from .fitting import FitResult
from .models import MODEL_TAGS, get_model
from .population import BatchEntry, BatchResult, GroupStat

FORMAT_VERSION = "1"

RESULT_COLUMNS = ("subject_id", "model", "converged", "iterations", "n_s", "rmse", "aicc",
                  "deviation_pct", "abs_deviation_pct", "param_names", "theta", "error")


def provenance(manifest: dict | None) -> dict:
    return {"package": "fracomp", "version": __version__, "format_version": FORMAT_VERSION,
            "manifest": manifest or {}}


def provenance_line(manifest: dict | None) -> str:
    return "# " + json.dumps(provenance(manifest), sort_keys=True) + "\n"


def _num(v) -> str:
    return repr(float(v))


def write_results_csv(batch: BatchResult, path, manifest=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(provenance_line(manifest))
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for e in batch.entries:
            r = e.result
            if r is None:
                w.writerow([e.subject_id, e.model, "", "", "", "", "", "", "", "", "", e.error])
                continue
            w.writerow([e.subject_id, e.model, int(r.converged), r.iterations, r.n_s,
                        _num(r.rmse), _num(r.aicc), _num(r.deviation_pct),
                        _num(r.abs_deviation_pct), ";".join(r.param_names),
                        ";".join(_num(v) for v in r.theta_hat), ""])


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_results_json(batch: BatchResult, path, manifest=None) -> None:
    rows = []
    for e in batch.entries:
        row = {"subject_id": e.subject_id, "model": e.model}
        if e.result is not None:
            d = e.result.to_dict()
            d.pop("objective_history")
            row.update(d)
        else:
            row["error"] = e.error
        rows.append(row)
    dump_json({"provenance": provenance(manifest), "results": rows}, path)


def write_groups_csv(stats: list[GroupStat], path, manifest=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(provenance_line(manifest))
        w = csv.writer(fh)
        w.writerow(("age_group", "heart_rate", "model", "quantity", "n", "mean", "std"))
        for s in stats:
            w.writerow(["all" if s.age_group is None else _num(s.age_group),
                        "all" if s.heart_rate is None else _num(s.heart_rate),
                        s.model, s.quantity, s.n, _num(s.mean), _num(s.std)])


def write_summary_csv(rows: list[dict], path, manifest=None) -> None:
    cols = ("model", "param_count", "n", "n_failed", "rmse_mean", "deviation_pct_mean",
            "abs_deviation_pct_mean", "aicc_mean")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(provenance_line(manifest))
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] if isinstance(row[c], (int, str)) else _num(row[c]) for c in cols])


def read_results_csv(path) -> BatchResult:
    """Rebuild a :class:`BatchResult` (without objective histories) from a results CSV."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError("results file lacks required columns", column=",".join(missing))
        for i, row in enumerate(reader, start=2):
            model = get_model(row["model"]).tag
            if row["error"]:
                entries.append(BatchEntry(row["subject_id"], model, None, row["error"]))
                continue
            try:
                theta = tuple(float(v) for v in row["theta"].split(";"))
                res = FitResult(
                    model=model,
                    theta_hat=theta,
                    param_names=tuple(row["param_names"].split(";")),
                    rmse=float(row["rmse"]),
                    aicc=float(row["aicc"]),
                    deviation_pct=float(row["deviation_pct"]),
                    abs_deviation_pct=float(row["abs_deviation_pct"]),
                    converged=bool(int(row["converged"])),
                    iterations=int(row["iterations"]),
                    n_s=int(row["n_s"]),
                )
            except ValueError as exc:
                raise ParseError(str(exc), row=i) from None
            entries.append(BatchEntry(row["subject_id"], model, res, None))
    models = tuple(m for m in MODEL_TAGS if any(e.model == m for e in entries))
    return BatchResult(tuple(entries), models)
