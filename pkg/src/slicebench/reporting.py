"""Dataset evaluation runs and report generation.

An evaluation writes one JSON file per case so long runs are
crash-resumable: cases whose result file already exists are skipped
unless forced. Per-case files contain no wall-clock data, so two runs
with the same seed produce byte-identical case records; timings live
in the run-level record only.
"""

import concurrent.futures
import csv
import dataclasses
import io
import json
import pathlib
import time
from typing import Dict, List

from . import click_protocol, metrics, svgplot, volume_io
from .backend_api import BackendApiError, open_session

RESERVED_FILES = {"run.json", "manifest.json"}
WEIGHTING_NOTE = "equal per-case weighting"


class ManifestError(Exception):
    pass


class NoRecords(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class ManifestCase:
    case_id: str
    image_path: pathlib.Path
    label_path: pathlib.Path


@dataclasses.dataclass(frozen=True)
class DatasetManifest:
    name: str
    cases: List[ManifestCase]
    labels: Dict[str, int]


@dataclasses.dataclass
class RunRecord:
    manifest_name: str
    organ: str
    backend: str
    config: click_protocol.ProtocolConfig
    cases: List[dict]

    @property
    def error_count(self):
        return sum(1 for c in self.cases if c["status"] == "error")


def load_manifest(path) -> DatasetManifest:
    path = pathlib.Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc

    for key in ("name", "cases", "labels"):
        if key not in raw:
            raise ManifestError(f"manifest missing {key!r}")
    base = path.parent
    cases = []
    seen = set()
    for entry in raw["cases"]:
        for key in ("case_id", "image_path", "label_path"):
            if key not in entry:
                raise ManifestError(f"case entry missing {key!r}: {entry}")
        case_id = entry["case_id"]
        if case_id in seen:
            raise ManifestError(f"duplicate case_id {case_id!r}")
        seen.add(case_id)
        image = base / entry["image_path"]
        label = base / entry["label_path"]
        for p in (image, label):
            if not p.exists():
                raise ManifestError(f"{case_id}: missing file {p}")
        cases.append(ManifestCase(case_id, image, label))
    labels = {str(k): int(v) for k, v in raw["labels"].items()}
    return DatasetManifest(name=str(raw["name"]), cases=cases, labels=labels)


def _result_to_json(result, organ, label_id, backend_spec, cfg):
    return {
        "case_id": result.case_id,
        "status": "ok",
        "organ": organ,
        "label_id": label_id,
        "backend": backend_spec,
        "config": dataclasses.asdict(cfg),
        "stop_reason": result.stop_reason,
        "best": {"with_removal": result.best.with_removal,
                 "without_removal": result.best.without_removal},
        "passes": [
            {
                "pass_index": p.pass_index,
                "annotated_slice": p.annotated_slice,
                "clicks": [
                    {"slice": c.slice, "row": c.point.row,
                     "col": c.point.col, "polarity": c.polarity}
                    for c in p.clicks
                ],
                "dice": {"with_removal": p.dice.with_removal,
                         "without_removal": p.dice.without_removal},
                "slice_scores": [[s.slice, s.dice, s.error_pixels]
                                 for s in p.slice_scores],
            }
            for p in result.passes
        ],
    }


def _write_json(path, payload):
    pathlib.Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _evaluate_case(case, organ, label_id, backend_spec, cfg, result_path,
                   force, timeout=None):
    if result_path.exists() and not force:
        cached = json.loads(result_path.read_text())
        return {"case_id": case.case_id,
                "status": cached.get("status", "ok"),
                "cached": True, "seconds": 0.0}

    started = time.monotonic()
    image = volume_io.read_nifti(case.image_path)
    labels = volume_io.read_nifti(case.label_path)
    if image.shape != labels.shape:
        raise ManifestError(
            f"{case.case_id}: image {image.shape} vs label {labels.shape}")
    gt = volume_io.binarize_label(labels, label_id)
    if not gt.any():
        _write_json(result_path, {
            "case_id": case.case_id, "status": "skipped",
            "organ": organ, "label_id": label_id,
            "reason": f"no voxels with label {label_id}",
        })
        return {"case_id": case.case_id, "status": "skipped",
                "seconds": round(time.monotonic() - started, 3)}

    session_kwargs = {} if timeout is None else {"timeout": timeout}

    def factory():
        return open_session(backend_spec, image,
                            volume_path=case.image_path.resolve(),
                            gt=gt, **session_kwargs)

    result = click_protocol.run_simulation(
        image, gt, factory, cfg, case.case_id, target_label=label_id)
    _write_json(result_path,
                _result_to_json(result, organ, label_id, backend_spec, cfg))
    return {"case_id": case.case_id, "status": "ok",
            "seconds": round(time.monotonic() - started, 3)}


def cmd_evaluate(manifest_path, organ, backend_spec, cfg, out_dir,
                 workers=1, force=False, timeout=None) -> RunRecord:
    """Run the simulation for every manifest case against one target.

    Cases run in parallel up to `workers`; each owns its backend
    session exclusively. Empty-ground-truth cases are recorded as
    skipped. A case that raises is recorded as an error without
    aborting the run, and leaves no result file so a rerun retries it.
    """
    manifest = load_manifest(manifest_path)
    if organ not in manifest.labels:
        raise ManifestError(
            f"organ {organ!r} not in manifest labels {sorted(manifest.labels)}")
    label_id = manifest.labels[organ]
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def job(case):
        result_path = out / f"{case.case_id}.json"
        try:
            return _evaluate_case(case, organ, label_id, backend_spec, cfg,
                                  result_path, force, timeout=timeout)
        except (BackendApiError, volume_io.VolumeIoError, ManifestError,
                metrics.ShapeMismatch, metrics.EmptyGroundTruth, OSError) as exc:
            return {"case_id": case.case_id, "status": "error",
                    "message": f"{type(exc).__name__}: {exc}"}

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(job, manifest.cases))

    record = RunRecord(manifest_name=manifest.name, organ=organ,
                       backend=backend_spec, config=cfg, cases=rows)
    from . import __version__
    _write_json(out / "run.json", {
        "manifest": manifest.name,
        "organ": organ,
        "backend": backend_spec,
        "config": dataclasses.asdict(cfg),
        "harness_version": __version__,
        "cases": rows,
        "counts": {
            "ok": sum(1 for r in rows if r["status"] == "ok"),
            "skipped": sum(1 for r in rows if r["status"] == "skipped"),
            "error": record.error_count,
        },
    })
    return record


def _iter_record_files(inputs):
    for item in inputs:
        p = pathlib.Path(item)
        if p.is_dir():
            for child in sorted(p.glob("*.json")):
                if child.name not in RESERVED_FILES:
                    yield child
        else:
            yield p


def load_records(inputs):
    """Per-case records from files or directories of files.

    Returns (ok_records, skipped_count). Raises NoRecords when nothing
    usable is found.
    """
    ok, skipped = [], 0
    found = False
    for path in _iter_record_files(inputs):
        record = json.loads(path.read_text())
        if "status" not in record:
            continue
        found = True
        if record["status"] == "ok":
            ok.append(record)
        elif record["status"] == "skipped":
            skipped += 1
    if not found or not ok:
        raise NoRecords(f"no successful case records under {list(inputs)}")
    return ok, skipped


def _error_count(inputs):
    total = 0
    for item in inputs:
        run = pathlib.Path(item) / "run.json"
        if run.is_file():
            payload = json.loads(run.read_text())
            total += payload.get("counts", {}).get("error", 0)
    return total


def summary_rows(records, skipped=0, errors=0):
    by_organ = {}
    for record in records:
        by_organ.setdefault(record["organ"], []).append(record)
    rows = []
    for organ in sorted(by_organ):
        group = by_organ[organ]
        mean_with = sum(r["best"]["with_removal"] for r in group) / len(group)
        mean_without = sum(r["best"]["without_removal"] for r in group) / len(group)
        rows.append({
            "organ": organ,
            "best_with": mean_with,
            "best_without": mean_without,
            "cell": f"{mean_with:.3f}/{mean_without:.3f}",
            "n": len(group),
            "skipped": skipped,
            "errors": errors,
        })
    return rows


def render_summary_text(rows):
    lines = [f"# mean of per-case best dice, with/without background "
             f"slice removal ({WEIGHTING_NOTE})"]
    width = max(len("organ"), max(len(r["organ"]) for r in rows))
    lines.append(f"{'organ':<{width}}  {'with/without':>13}  {'n':>4}  "
                 f"{'skipped':>7}  {'errors':>6}")
    for r in rows:
        lines.append(f"{r['organ']:<{width}}  {r['cell']:>13}  {r['n']:>4}  "
                     f"{r['skipped']:>7}  {r['errors']:>6}")
    return "\n".join(lines) + "\n"


def render_summary_csv(rows):
    buf = io.StringIO()
    buf.write(f"# {WEIGHTING_NOTE}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["organ", "best_with", "best_without", "cell",
                     "n", "skipped", "errors"])
    for r in rows:
        writer.writerow([r["organ"], f"{r['best_with']:.6f}",
                         f"{r['best_without']:.6f}", r["cell"],
                         r["n"], r["skipped"], r["errors"]])
    return buf.getvalue()


def cmd_summarize(inputs, out_csv=None):
    """Mean best dice per organ, printed as "with/without" cells."""
    records, skipped = load_records(inputs)
    rows = summary_rows(records, skipped=skipped, errors=_error_count(inputs))
    text = render_summary_text(rows)
    if out_csv is not None:
        pathlib.Path(out_csv).write_text(render_summary_csv(rows))
    return text, rows


def case_series(record):
    """The per-pass DicePair series of one case record."""
    return [metrics.DicePair(p["dice"]["with_removal"],
                             p["dice"]["without_removal"])
            for p in record["passes"]]


def curve_table(records):
    """CurvePoints per organ and convention for a set of case records."""
    by_organ = {}
    for record in records:
        by_organ.setdefault(record["organ"], []).append(case_series(record))
    table = {}
    for organ in sorted(by_organ):
        series = by_organ[organ]
        table[organ] = {
            metrics.WITH_REMOVAL:
                metrics.aggregate_curve(series, metrics.WITH_REMOVAL),
            metrics.WITHOUT_REMOVAL:
                metrics.aggregate_curve(series, metrics.WITHOUT_REMOVAL),
        }
    return table


def cmd_curves(inputs, out_dir):
    """Write curves.csv plus one SVG per organ."""
    records, _ = load_records(inputs)
    table = curve_table(records)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    csv_path = out / "curves.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["organ", "convention", "k", "mean",
                         "ci_low", "ci_high", "n"])
        for organ, conventions in table.items():
            for convention in (metrics.WITH_REMOVAL, metrics.WITHOUT_REMOVAL):
                for p in conventions[convention]:
                    writer.writerow([organ, convention, p.annotated_slices,
                                     f"{p.mean:.6f}", f"{p.ci_low:.6f}",
                                     f"{p.ci_high:.6f}", p.n])
    for organ, conventions in table.items():
        svg = svgplot.curve_svg(organ, conventions)
        (out / f"curve_{organ}.svg").write_text(svg)
    return table
