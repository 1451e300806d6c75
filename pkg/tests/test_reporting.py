import json

import numpy as np
import pytest

from slicebench.click_protocol import ProtocolConfig
from slicebench.metrics import CURVE_PASSES
from slicebench.reporting import (ManifestError, NoRecords, cmd_curves,
                                  cmd_evaluate, cmd_summarize, load_manifest,
                                  load_records, summary_rows)
from slicebench.volume_io import Volume, write_nifti

CFG = ProtocolConfig(rng_seed=7)


def make_mini_dataset(root, n=2):
    """Two small cases with an organ box at label 1; label 7 never occurs."""
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        image = np.full((16, 16, 8), -100, dtype=np.int16)
        labels = np.zeros((16, 16, 8), dtype=np.uint8)
        labels[4 + i : 10 + i, 4:10, 2:5] = 1
        case_id = f"case{i:02d}"
        write_nifti(Volume(data=image, spacing=(1.0, 1.0, 2.0),
                           datatype="int16"), root / f"{case_id}_image.nii.gz")
        write_nifti(Volume(data=labels, spacing=(1.0, 1.0, 2.0),
                           datatype="uint8"), root / f"{case_id}_label.nii.gz")
        entries.append({"case_id": case_id,
                        "image_path": f"{case_id}_image.nii.gz",
                        "label_path": f"{case_id}_label.nii.gz"})
    manifest = {"name": "mini", "cases": entries,
                "labels": {"organ": 1, "missing": 7}}
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def write_record(path, organ, best_with, best_without):
    path.write_text(json.dumps({
        "case_id": path.stem, "status": "ok", "organ": organ,
        "best": {"with_removal": best_with, "without_removal": best_without},
        "passes": [],
    }))


# --- manifest loading ---

def test_load_manifest_resolves_relative_paths(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    manifest = load_manifest(manifest_path)
    assert manifest.name == "mini"
    assert [c.case_id for c in manifest.cases] == ["case00", "case01"]
    assert manifest.labels == {"organ": 1, "missing": 7}
    for case in manifest.cases:
        assert case.image_path.is_file()
        assert case.image_path.parent == tmp_path / "data"


def test_load_manifest_rejects_bad_json(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text("{nope")
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_load_manifest_rejects_missing_keys(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"name": "x", "cases": []}))
    with pytest.raises(ManifestError) as err:
        load_manifest(path)
    assert "labels" in str(err.value)


def test_load_manifest_rejects_incomplete_case(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"name": "x", "labels": {"organ": 1},
                                "cases": [{"case_id": "a"}]}))
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_load_manifest_rejects_duplicate_case_ids(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    raw = json.loads(manifest_path.read_text())
    raw["cases"].append(dict(raw["cases"][0]))
    manifest_path.write_text(json.dumps(raw))
    with pytest.raises(ManifestError) as err:
        load_manifest(manifest_path)
    assert "duplicate" in str(err.value)


def test_load_manifest_rejects_missing_volume_file(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    (tmp_path / "data" / "case00_image.nii.gz").unlink()
    with pytest.raises(ManifestError) as err:
        load_manifest(manifest_path)
    assert "case00" in str(err.value)


# --- evaluation runs ---

def test_evaluate_rejects_unknown_organ(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    with pytest.raises(ManifestError):
        cmd_evaluate(manifest_path, "spleen", "builtin:oracle", CFG,
                     tmp_path / "out")


def test_evaluate_oracle_end_to_end(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    out = tmp_path / "out"
    record = cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out)
    assert [r["status"] for r in record.cases] == ["ok", "ok"]
    assert record.error_count == 0

    run = json.loads((out / "run.json").read_text())
    assert run["counts"] == {"ok": 2, "skipped": 0, "error": 0}
    assert run["organ"] == "organ"
    assert run["backend"] == "builtin:oracle"
    assert run["config"]["rng_seed"] == 7
    assert "harness_version" in run

    case = json.loads((out / "case00.json").read_text())
    for key in ("case_id", "status", "organ", "label_id", "backend",
                "config", "stop_reason", "best", "passes"):
        assert key in case
    assert case["status"] == "ok"
    assert case["best"] == {"with_removal": 1.0, "without_removal": 1.0}
    assert case["stop_reason"] == "no_correctable_error"
    assert len(case["passes"]) == 1
    click = case["passes"][0]["clicks"][0]
    assert set(click) == {"slice", "row", "col", "polarity"}


def test_evaluate_skips_cases_without_target_label(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    out = tmp_path / "out"
    record = cmd_evaluate(manifest_path, "missing", "builtin:oracle", CFG, out)
    assert [r["status"] for r in record.cases] == ["skipped", "skipped"]
    case = json.loads((out / "case00.json").read_text())
    assert case["status"] == "skipped"
    assert "label 7" in case["reason"]
    with pytest.raises(NoRecords):
        load_records([out])


def test_evaluate_records_errors_and_leaves_no_case_file(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    out = tmp_path / "out"
    record = cmd_evaluate(manifest_path, "organ", "builtin:bogus", CFG, out)
    assert [r["status"] for r in record.cases] == ["error", "error"]
    assert record.error_count == 2
    for row in record.cases:
        assert "SpawnFailure" in row["message"]
    assert not (out / "case00.json").exists()
    run = json.loads((out / "run.json").read_text())
    assert run["counts"]["error"] == 2

    # a rerun with a working backend retries the failed cases
    record = cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out)
    assert [r["status"] for r in record.cases] == ["ok", "ok"]


def test_evaluate_reuses_cached_results(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    out = tmp_path / "out"
    cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out)
    before = (out / "case00.json").read_bytes()

    record = cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out)
    assert all(r.get("cached") for r in record.cases)
    assert all(r["status"] == "ok" for r in record.cases)
    assert (out / "case00.json").read_bytes() == before

    record = cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out,
                          force=True)
    assert not any(r.get("cached") for r in record.cases)
    assert (out / "case00.json").read_bytes() == before  # deterministic


# --- summaries ---

def test_summarize_oracle_run(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    out = tmp_path / "out"
    cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out)
    csv_path = tmp_path / "summary.csv"
    text, rows = cmd_summarize([out], out_csv=csv_path)
    assert len(rows) == 1
    assert rows[0]["organ"] == "organ"
    assert rows[0]["cell"] == "1.000/1.000"
    assert rows[0]["n"] == 2
    assert rows[0]["errors"] == 0
    assert "with/without" in text
    assert "equal per-case weighting" in text
    csv_text = csv_path.read_text()
    assert csv_text.splitlines()[1] == ("organ,best_with,best_without,"
                                        "cell,n,skipped,errors")
    assert "1.000000" in csv_text


def test_summary_rows_cell_format():
    rows = summary_rows([{"organ": "liver",
                          "best": {"with_removal": 0.9,
                                   "without_removal": 0.7}}])
    assert rows[0]["cell"] == "0.900/0.700"


def test_summary_rows_average_over_cases(tmp_path):
    write_record(tmp_path / "a.json", "liver", 0.9, 0.7)
    write_record(tmp_path / "b.json", "liver", 0.5, 0.3)
    write_record(tmp_path / "c.json", "kidney", 1.0, 1.0)
    records, skipped = load_records([tmp_path])
    assert skipped == 0
    rows = summary_rows(records)
    by_organ = {r["organ"]: r for r in rows}
    assert by_organ["liver"]["cell"] == "0.700/0.500"
    assert by_organ["liver"]["n"] == 2
    assert by_organ["kidney"]["cell"] == "1.000/1.000"
    assert [r["organ"] for r in rows] == ["kidney", "liver"]  # sorted


def test_summarize_requires_records(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(NoRecords):
        cmd_summarize([tmp_path / "empty"])


def test_summarize_counts_errors_across_runs(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    bad = tmp_path / "bad"
    good = tmp_path / "good"
    cmd_evaluate(manifest_path, "organ", "builtin:bogus", CFG, bad)
    cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, good)
    _, rows = cmd_summarize([bad, good])
    assert rows[0]["errors"] == 2
    assert rows[0]["n"] == 2


# --- curves ---

def test_curves_oracle_flat_at_one(tmp_path):
    manifest_path = make_mini_dataset(tmp_path / "data")
    out = tmp_path / "out"
    cmd_evaluate(manifest_path, "organ", "builtin:oracle", CFG, out)
    curve_dir = tmp_path / "curves"
    table = cmd_curves([out], curve_dir)

    lines = (curve_dir / "curves.csv").read_text().splitlines()
    assert lines[0] == "organ,convention,k,mean,ci_low,ci_high,n"
    assert len(lines) == 1 + 2 * CURVE_PASSES  # one organ, two conventions
    for line in lines[1:]:
        organ, convention, k, mean, lo, hi, n = line.split(",")
        assert organ == "organ"
        assert convention in ("with", "without")
        assert 1 <= int(k) <= CURVE_PASSES
        # a perfect backend pins the whole band to 1.0
        assert mean == lo == hi == "1.000000"
        assert n == "2"

    points = table["organ"]["with"]
    assert [p.annotated_slices for p in points] == list(range(1, 9))
    svg = (curve_dir / "curve_organ.svg").read_text()
    assert svg.startswith("<svg")
    assert "background slices removed" in svg
    assert "all slices" in svg
