"""Plugging a custom segmentation backend into the harness.

A backend is any executable speaking newline-delimited JSON on stdio:

  request:  {"id": n, "kind": "init"|"add_points"|"propagate"|"close", ...}
  reply:    {"id": n, "kind": "ok"|"mask2d"|"mask3d"|"error", ...}

Masks travel as run-length encodings over the row-major flattening,
alternating background/foreground starting with background. This demo
writes a 60-line toy tracker to disk (pure python, no imports beyond
the stdlib), spawns it through the harness, and runs the full
annotation protocol against it.

Run:  python3 demos/04_custom_backend.py
"""

import shlex
import sys
import tempfile
import textwrap
from pathlib import Path

from slicebench import open_session, read_nifti
from slicebench.click_protocol import ProtocolConfig, run_simulation
from slicebench.phantoms import make_phantoms
from slicebench.volume_io import binarize_label

BACKEND_SOURCE = textwrap.dedent('''\
    """Toy tracker: remembers a box around the clicks on each annotated
    slice and copies the nearest annotated box to every other slice."""
    import json, sys

    def runs_from_bits(bits):
        runs, current, count = [], 0, 0
        for b in bits:
            if b == current:
                count += 1
            else:
                runs.append(count)
                current, count = b, 1
        runs.append(count)
        return runs

    def box_bits(shape2d, box):
        r0, r1, c0, c1 = box
        bits = []
        for r in range(shape2d[0]):
            for c in range(shape2d[1]):
                bits.append(1 if r0 <= r <= r1 and c0 <= c <= c1 else 0)
        return bits

    shape = None
    boxes = {}  # slice -> (r0, r1, c0, c1)

    for line in sys.stdin:
        msg = json.loads(line)
        rid, kind = msg["id"], msg["kind"]
        if kind == "init":
            shape = msg["shape"]
            reply = {"id": rid, "kind": "ok"}
        elif kind == "add_points":
            k = msg["slice"]
            pos = [(p["row"], p["col"]) for p in msg["points"] if p["positive"]]
            if pos:
                rows = [r for r, _ in pos]
                cols = [c for _, c in pos]
                grown = (min(rows) - 5, max(rows) + 5,
                         min(cols) - 5, max(cols) + 5)
                if k in boxes:
                    old = boxes[k]
                    grown = (min(old[0], grown[0]), max(old[1], grown[1]),
                             min(old[2], grown[2]), max(old[3], grown[3]))
                boxes[k] = grown
            elif k not in boxes:
                boxes[k] = (1, 0, 1, 0)  # negative-only: empty box
            bits = box_bits(shape[:2], boxes[k])
            reply = {"id": rid, "kind": "mask2d", "shape": shape[:2],
                     "runs": runs_from_bits(bits)}
        elif kind == "propagate":
            bits = []
            for x in range(shape[0]):
                for y in range(shape[1]):
                    for z in range(shape[2]):
                        src = min(boxes, key=lambda a: (abs(a - z), a))
                        r0, r1, c0, c1 = boxes[src]
                        bits.append(1 if r0 <= x <= r1 and c0 <= y <= c1 else 0)
            reply = {"id": rid, "kind": "mask3d", "shape": shape,
                     "runs": runs_from_bits(bits)}
        elif kind == "close":
            print(json.dumps({"id": rid, "kind": "ok"}), flush=True)
            break
        else:
            reply = {"id": rid, "kind": "error", "message": "unknown kind"}
        print(json.dumps(reply), flush=True)
''')

workspace = Path(tempfile.mkdtemp(prefix="slicebench-demo-"))
backend_path = workspace / "box_tracker.py"
backend_path.write_text(BACKEND_SOURCE)
print(f"wrote toy backend to {backend_path}\n")

make_phantoms(workspace / "phantoms", seed=7, cases=1)
image_path = workspace / "phantoms" / "case_000_image.nii.gz"
image = read_nifti(image_path)
labels = read_nifti(workspace / "phantoms" / "case_000_label.nii.gz")
gt = binarize_label(labels, 1)

# the {volume} placeholder is replaced by the volume's file path
command = f"{shlex.quote(sys.executable)} {shlex.quote(str(backend_path))}"


def factory():
    return open_session(command, image, volume_path=image_path)


print("running the 8-pass protocol against the box tracker...")
result = run_simulation(image, gt, factory, ProtocolConfig(rng_seed=7),
                        "case_000", target_label=1)

print(f"\nstop reason: {result.stop_reason}")
print("pass  slice  clicks  dice(bg removed)  dice(all slices)")
for p in result.passes:
    print(f"{p.pass_index:4d}  {p.annotated_slice:5d}  {len(p.clicks):6d}"
          f"  {p.dice.with_removal:16.3f}  {p.dice.without_removal:16.3f}")
print(f"best: {result.best.with_removal:.3f}/{result.best.without_removal:.3f}")
print()
print("A real integration looks the same from the harness's side: any")
print("command line that speaks the protocol can sit behind `--backend`.")
