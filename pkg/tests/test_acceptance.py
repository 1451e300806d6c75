"""End-to-end guarantees, one test per property.

Run with -v to read this file as a checklist: morphology kernels match
independent brute-force oracles, the dual dice conventions obey their
inequality, evaluation runs are byte-deterministic, the three reference
backends reproduce their regimes (perfect, improvable, over-tracking),
click budgets hold everywhere, the wire protocol fails the specified
ways, and volumes survive disk round trips in both byte orders.
"""

import json
import pathlib
import shlex
import sys
import time

import numpy as np
import pytest

import bruteforce as bf
from conftest import ORGANS, RUN_SEED, evaluate_all
from slicebench.backend_api import (BackendError, HandshakeTimeout,
                                    ProtocolViolation, SpawnFailure,
                                    open_session, rle_decode, rle_encode)
from slicebench.click_protocol import ClickPoint
from slicebench.mask_ops import (PixelPoint, connected_components, erode3x3,
                                 foreground_seed, interior_center)
from slicebench.metrics import dice3d, extend_series
from slicebench.reporting import cmd_curves, cmd_summarize
from slicebench.volume_io import Volume, binarize_label, read_nifti, write_nifti
from test_volume_io import ALL_DTYPES, make_volume, write_big_endian

FAKE = pathlib.Path(__file__).parent / "fake_backend.py"


def load_cases(run_dir):
    records = []
    for path in sorted(pathlib.Path(run_dir).glob("*.json")):
        if path.name == "run.json":
            continue
        records.append(json.loads(path.read_text()))
    assert records, f"no case records in {run_dir}"
    return records


def pass_series(record, convention):
    return [p["dice"][convention] for p in record["passes"]]


def test_01_morphology_matches_bruteforce_oracles():
    rng = np.random.default_rng(1001)
    started = time.monotonic()

    for _ in range(1000):
        shape = (int(rng.integers(1, 33)), int(rng.integers(1, 33)))
        mask = rng.random(shape) < rng.uniform(0.2, 0.8)
        assert np.array_equal(erode3x3(mask), bf.bf_erode3x3(mask))
        ours = connected_components(mask, 8)
        theirs = bf.bf_components(mask, 8)
        assert len(ours) == len(theirs)
        for a, b in zip(ours, theirs):
            assert np.array_equal(a, b)
        if mask.any():
            assert interior_center(mask) == bf.bf_interior_center(mask)

    for _ in range(1000):
        gt = np.random.default_rng(rng.integers(2**32)).random(
            (16, 16, 16)) < 0.04
        if not gt.any():
            gt[8, 8, 8] = True
        assert foreground_seed(gt) == bf.bf_foreground_seed(gt)

    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"oracle comparison took {elapsed:.1f}s"


def test_02_dice_convention_inequality_holds_exactly():
    rng = np.random.default_rng(2002)
    equal_cases = strict_cases = 0
    for _ in range(1000):
        shape = (10, 10, int(rng.integers(6, 14)))
        gt = np.zeros(shape, dtype=bool)
        z0 = int(rng.integers(0, shape[2] - 2))
        z1 = int(rng.integers(z0 + 1, shape[2]))
        gt[:, :, z0:z1] = rng.random((shape[0], shape[1], z1 - z0)) < 0.4
        if not gt.any():
            gt[5, 5, z0] = True

        if rng.random() < 0.5:
            pred = rng.random(shape) < 0.3  # may spill onto empty-gt slices
        else:
            pred = np.zeros(shape, dtype=bool)
            pred[:, :, z0:z1] = rng.random(
                (shape[0], shape[1], z1 - z0)) < 0.3
        # at least one true-positive voxel, so both scores share a
        # non-zero numerator and the equality condition is exact
        fg = np.argwhere(gt)
        pred[tuple(fg[int(rng.integers(len(fg)))])] = True

        w = dice3d(pred, gt, remove_background_slices=True)
        wo = dice3d(pred, gt, remove_background_slices=False)
        assert w >= wo
        spill = pred[:, :, ~gt.any(axis=(0, 1))].any()
        assert (w == wo) == (not spill)
        if w == wo:
            equal_cases += 1
        else:
            strict_cases += 1
    assert equal_cases >= 100 and strict_cases >= 100, \
        f"generator imbalance: {equal_cases} equal, {strict_cases} strict"


def test_03_evaluation_runs_are_byte_deterministic(
        phantom_manifest, eval_runs, tmp_path_factory):
    rerun_root = tmp_path_factory.mktemp("rerun")
    second = evaluate_all(phantom_manifest, rerun_root)

    for key, first_dir in eval_runs.items():
        second_dir = second[key]
        names = sorted(p.name for p in first_dir.glob("*.json")
                       if p.name != "run.json")
        assert names == sorted(p.name for p in second_dir.glob("*.json")
                               if p.name != "run.json")
        for name in names:
            assert (first_dir / name).read_bytes() == \
                (second_dir / name).read_bytes(), (key, name)

    outputs = tmp_path_factory.mktemp("reports")
    for label, runs in (("first", eval_runs), ("second", second)):
        cmd_summarize(sorted(runs.values()), outputs / f"{label}.csv")
        cmd_curves(sorted(runs.values()), outputs / label)
    assert (outputs / "first.csv").read_bytes() == \
        (outputs / "second.csv").read_bytes()
    assert (outputs / "first" / "curves.csv").read_bytes() == \
        (outputs / "second" / "curves.csv").read_bytes()


def test_04_perfect_backend_is_perfect_in_one_pass(eval_runs):
    for organ in ORGANS:
        for record in load_cases(eval_runs[("builtin:oracle", organ)]):
            assert record["best"] == {"with_removal": 1.0,
                                      "without_removal": 1.0}
            assert len(record["passes"]) == 1
            assert record["stop_reason"] == "no_correctable_error"


def test_05_overtracking_gap_persists_across_all_passes(eval_runs):
    gaps_by_slot = [[] for _ in range(8)]
    for organ in ORGANS:
        for record in load_cases(eval_runs[("builtin:leaky", organ)]):
            w = extend_series(pass_series(record, "with_removal"))
            wo = extend_series(pass_series(record, "without_removal"))
            for k in range(8):
                gaps_by_slot[k].append(w[k] - wo[k])
    for k, gaps in enumerate(gaps_by_slot, start=1):
        mean_gap = sum(gaps) / len(gaps)
        assert mean_gap >= 0.15, f"pass {k}: mean gap {mean_gap:.3f}"


def test_06_improvable_backend_reaches_one_within_budget(
        phantom_dir, eval_runs):
    manifest = json.loads((phantom_dir / "manifest.json").read_text())
    label_paths = {c["case_id"]: phantom_dir / c["label_path"]
                   for c in manifest["cases"]}
    label_ids = manifest["labels"]

    for organ in ORGANS:
        for record in load_cases(eval_runs[("builtin:noisy", organ)]):
            series = pass_series(record, "with_removal")
            assert all(a <= b for a, b in zip(series, series[1:])), \
                (record["case_id"], organ, series)
            labels = read_nifti(label_paths[record["case_id"]])
            gt = binarize_label(labels, label_ids[organ])
            n_fg = int(gt.any(axis=(0, 1)).sum())
            bound = min(8, n_fg)
            assert extend_series(series)[bound - 1] == 1.0, \
                (record["case_id"], organ, n_fg, series)


def test_07_click_budgets_hold_across_all_runs(eval_runs):
    for run_dir in eval_runs.values():
        for record in load_cases(run_dir):
            passes = record["passes"]
            assert len(passes) <= 8
            annotated = [p["annotated_slice"] for p in passes]
            assert len(set(annotated)) == len(annotated)
            assert len(passes[0]["clicks"]) <= 5
            for p in passes[1:]:
                assert 1 <= len(p["clicks"]) <= 3
            for p in passes:
                for c in p["clicks"]:
                    assert c["slice"] == p["annotated_slice"]


def test_08_wire_protocol_fails_the_specified_ways(tmp_path):
    vol = Volume(data=np.zeros((6, 5, 4), dtype=np.uint8),
                 spacing=(1.0, 1.0, 1.0), datatype="uint8")
    path = tmp_path / "v.nii"
    write_nifti(vol, path)

    def cmd(mode):
        return f"{shlex.quote(sys.executable)} {shlex.quote(str(FAKE))} {mode}"

    def click(k, r, c):
        return ClickPoint(slice=k, point=PixelPoint(r, c), polarity="positive")

    # every message kind, conformantly
    session = open_session(cmd("echo"), vol, volume_path=path)
    plane = session.add_points(1, [click(1, 2, 3)])
    assert plane[2, 3] and plane.shape == (6, 5)
    assert session.propagate().shape == (6, 5, 4)
    session.close()

    # oversized run-length
    session = open_session(cmd("badrle"), vol, volume_path=path)
    with pytest.raises(ProtocolViolation):
        session.add_points(0, [click(0, 0, 0)])
    session.close()

    # timeout and error replies, spawn failure, malformed streams
    with pytest.raises(HandshakeTimeout):
        open_session(cmd("hang-init"), vol, volume_path=path, timeout=0.5)
    session = open_session(cmd("error"), vol, volume_path=path)
    with pytest.raises(BackendError):
        session.add_points(0, [click(0, 0, 0)])
    session.close()
    with pytest.raises(SpawnFailure):
        open_session("/no/such/backend", vol, volume_path=path)
    for mode in ("wrongid", "badjson"):
        with pytest.raises(ProtocolViolation):
            open_session(cmd(mode), vol, volume_path=path)

    # lossless mask transport
    rng = np.random.default_rng(8008)
    for _ in range(1000):
        if rng.random() < 0.5:
            shape = (int(rng.integers(1, 24)), int(rng.integers(1, 24)))
        else:
            shape = (int(rng.integers(1, 12)), int(rng.integers(1, 12)),
                     int(rng.integers(1, 12)))
        mask = rng.random(shape) < rng.uniform(0, 1)
        rle = rle_encode(mask)
        assert sum(rle.runs) == mask.size
        assert np.array_equal(rle_decode(rle), mask)


def test_09_volumes_survive_disk_round_trips(tmp_path):
    for dtype in ALL_DTYPES:
        vol = make_volume(dtype, shape=(7, 6, 5), seed=9)
        path = tmp_path / f"{np.dtype(dtype).name}.nii.gz"
        write_nifti(vol, path)
        out = read_nifti(path)
        assert out.data.dtype == np.dtype(dtype)
        assert np.array_equal(out.data, vol.data)

    vol = make_volume(np.int16, shape=(9, 7, 5), seed=10)
    native = tmp_path / "native.nii"
    swapped = tmp_path / "swapped.nii"
    write_nifti(vol, native)
    write_big_endian(vol, swapped)
    a = read_nifti(native)
    b = read_nifti(swapped)
    assert np.array_equal(a.data, b.data)
    assert a.spacing == pytest.approx(b.spacing)
    assert a.datatype == b.datatype
