"""Pluggable segmentation-backend boundary.

A backend is anything that can refine a 2D slice from click prompts
and propagate to the full volume. Three deterministic built-in mocks
cover the perfect, improvable, and over-tracking regimes; real models
plug in as subprocesses speaking newline-delimited JSON on stdio.

Wire schema (bit-exact):
  requests  {"id": n, "kind": "init"|"add_points"|"propagate"|"close", ...}
    init payload: {"volume_path": str, "shape": [nx, ny, nz],
                   "spacing": [sx, sy, sz], "datatype": str}
    add_points payload: {"slice": k,
                         "points": [{"row": r, "col": c, "positive": bool}]}
  responses {"id": n, "kind": "ok"|"mask2d"|"mask3d"|"error",
             "shape": [...], "runs": [...]} or
            {"id": n, "kind": "error", "message": str}

Masks travel as run-length encodings over the row-major flattening,
alternating background/foreground and starting with the background run
(possibly 0). Volumes pass by file path, never through the pipe.
"""

import itertools
import json
import queue
import shlex
import subprocess
import threading
from typing import List, NamedTuple

import numpy as np
from scipy import ndimage

DEFAULT_TIMEOUT = 300.0
BUILTIN_PREFIX = "builtin:"
NOISY_HALO = 3

_session_counter = itertools.count(1)


class BackendApiError(Exception):
    pass


class SpawnFailure(BackendApiError):
    pass


class HandshakeTimeout(BackendApiError):
    pass


class BackendError(BackendApiError):
    pass


class ProtocolViolation(BackendApiError):
    pass


class BadRunLength(BackendApiError):
    pass


class RleMask(NamedTuple):
    shape: tuple
    runs: List[int]


def rle_encode(mask: np.ndarray) -> RleMask:
    """Run-length encode a boolean mask over its row-major flattening."""
    mask = np.asarray(mask, dtype=bool)
    flat = mask.ravel(order="C")
    if flat.size == 0:
        return RleMask(shape=tuple(mask.shape), runs=[])
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        # the encoding always starts with a background run
        runs.insert(0, 0)
    return RleMask(shape=tuple(mask.shape), runs=[int(r) for r in runs])


def rle_decode(rle: RleMask) -> np.ndarray:
    """Inverse of rle_encode. Raises BadRunLength on inconsistent runs."""
    shape = tuple(int(d) for d in rle.shape)
    total = int(np.prod(shape)) if shape else 0
    runs = [int(r) for r in rle.runs]
    if any(r < 0 for r in runs):
        raise BadRunLength(f"negative run in {runs[:8]}...")
    if sum(runs) != total:
        raise BadRunLength(f"runs sum {sum(runs)} != {total} for shape {shape}")
    values = np.arange(len(runs)) % 2 == 1
    flat = np.repeat(values, runs)
    return flat.reshape(shape, order="C")


def _encode_points(slice_index, points):
    encoded = []
    for pt in points:
        if pt.slice != slice_index:
            raise ValueError(f"point on slice {pt.slice}, expected {slice_index}")
        encoded.append({
            "row": int(pt.point.row),
            "col": int(pt.point.col),
            "positive": pt.polarity == "positive",
        })
    return encoded


class _SessionBase:
    def __init__(self, volume_ref):
        self.session_id = f"session-{next(_session_counter)}"
        self.volume_ref = volume_ref
        self.state = "open"

    def _require_open(self):
        if self.state != "open":
            raise BackendError(f"{self.session_id} is {self.state}")

    def close(self):
        self.state = "closed"


class MockSession(_SessionBase):
    """Shared plumbing for the built-in mocks.

    Mocks hold the ground truth directly (a test-only capability that
    never crosses the wire) and are pure functions of (gt, accumulated
    prompts), so runs are bit-identical.
    """

    def __init__(self, gt):
        super().__init__(volume_ref="builtin")
        self.gt = np.asarray(gt, dtype=bool)
        self.annotated = set()
        self.prompt_count = 0

    def add_points(self, slice_index, points):
        self._require_open()
        if not points:
            raise BackendError("add_points with no points")
        _encode_points(slice_index, points)  # validates slice agreement
        if not 0 <= slice_index < self.gt.shape[2]:
            raise BackendError(f"slice {slice_index} out of range")
        self.annotated.add(int(slice_index))
        self.prompt_count += len(points)
        return np.array(self.gt[:, :, slice_index])

    def propagate(self):
        self._require_open()
        if not self.annotated:
            raise BackendError("propagate before any prompt")
        return self._propagate()

    def _propagate(self):
        raise NotImplementedError


class Oracle(MockSession):
    """Returns the ground truth everywhere. The perfect backend."""

    def _propagate(self):
        return np.array(self.gt)


class NoisyOracle(MockSession):
    """Exact on annotated slices, over-segmented elsewhere.

    Unannotated slices return the gt plane dilated by `halo` steps of
    the full 8-neighborhood, leaving a thick rind of false positives
    around the object that each annotation pass cleans up. The halo is
    3 steps so the rind survives the protocol's 3x3 error erosion and
    stays correctable.
    """

    def __init__(self, gt, halo=NOISY_HALO):
        super().__init__(gt)
        self.halo = halo
        self._structure = ndimage.generate_binary_structure(2, 2)

    def _propagate(self):
        out = np.zeros_like(self.gt)
        for k in range(self.gt.shape[2]):
            plane = self.gt[:, :, k]
            if k in self.annotated or not plane.any():
                out[:, :, k] = plane
            else:
                out[:, :, k] = ndimage.binary_dilation(
                    plane, structure=self._structure, iterations=self.halo)
        return out


class LeakyTracker(MockSession):
    """Copies the nearest annotated slice's mask to every slice.

    Annotated slices are exact; every other slice receives the gt plane
    of its nearest annotated slice (ties toward the lower index). This
    smears foreground across background slices, the over-tracking
    failure mode the harness is built to measure.
    """

    def _propagate(self):
        out = np.zeros_like(self.gt)
        annotated = sorted(self.annotated)
        for k in range(self.gt.shape[2]):
            src = min(annotated, key=lambda a: (abs(a - k), a))
            out[:, :, k] = self.gt[:, :, src]
        return out


_BUILTINS = {
    "oracle": Oracle,
    "noisy": NoisyOracle,
    "leaky": LeakyTracker,
}


class SubprocessSession(_SessionBase):
    """One backend subprocess, one synchronous JSON-lines channel.

    Request ids increase strictly; exactly one response is expected per
    request, in order. A per-request timeout distinguishes slow from
    hung (real model backends are slow).
    """

    def __init__(self, command, volume, volume_path, timeout=DEFAULT_TIMEOUT):
        super().__init__(volume_ref=str(volume_path))
        self.timeout = timeout
        self._ids = itertools.count(1)
        self._shape = tuple(int(d) for d in volume.shape)
        argv = [arg.replace("{volume}", str(volume_path))
                for arg in shlex.split(command)]
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        except OSError as exc:
            raise SpawnFailure(f"cannot spawn {argv[0]}: {exc}") from exc
        self._replies = queue.Queue()
        self._reader = threading.Thread(target=self._drain_stdout, daemon=True)
        self._reader.start()
        try:
            reply = self._request("init", handshake=True,
                                  volume_path=str(volume_path),
                                  shape=list(self._shape),
                                  spacing=[float(s) for s in volume.spacing],
                                  datatype=volume.datatype)
            if reply.get("kind") != "ok":
                raise ProtocolViolation(
                    f"init answered {reply.get('kind')!r}, not 'ok'")
        except BackendApiError:
            # failed handshake must not leak the child process
            self._proc.kill()
            self._proc.wait()
            raise

    def _drain_stdout(self):
        for line in self._proc.stdout:
            self._replies.put(line)
        self._replies.put(None)  # EOF marker

    def _request(self, kind, handshake=False, **payload):
        request_id = next(self._ids)
        message = {"id": request_id, "kind": kind}
        message.update(payload)
        try:
            self._proc.stdin.write(json.dumps(message, sort_keys=True) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise BackendError(f"backend pipe closed: {exc}") from exc
        try:
            line = self._replies.get(timeout=self.timeout)
        except queue.Empty:
            if handshake:
                raise HandshakeTimeout(f"no init reply within {self.timeout}s")
            raise BackendError(f"no reply to {kind!r} within {self.timeout}s")
        if line is None:
            raise BackendError(f"backend exited before replying to {kind!r}")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"reply is not JSON: {line[:120]!r}") from exc
        if not isinstance(reply, dict) or reply.get("id") != request_id:
            raise ProtocolViolation(
                f"reply id {reply.get('id')!r} does not echo request {request_id}")
        if reply.get("kind") == "error":
            raise BackendError(str(reply.get("message", "backend error")))
        return reply

    def _decode_mask(self, reply, kind, shape):
        if reply.get("kind") != kind:
            raise ProtocolViolation(f"expected {kind!r}, got {reply.get('kind')!r}")
        got_shape = tuple(reply.get("shape", ()))
        if got_shape != shape:
            raise ProtocolViolation(f"mask shape {got_shape} != {shape}")
        try:
            return rle_decode(RleMask(shape=got_shape, runs=reply.get("runs", [])))
        except BadRunLength as exc:
            raise ProtocolViolation(str(exc)) from exc

    def add_points(self, slice_index, points):
        self._require_open()
        reply = self._request("add_points", slice=int(slice_index),
                              points=_encode_points(slice_index, points))
        return self._decode_mask(reply, "mask2d", self._shape[:2])

    def propagate(self):
        self._require_open()
        reply = self._request("propagate")
        return self._decode_mask(reply, "mask3d", self._shape)

    def close(self):
        if self.state != "open":
            return
        self.state = "closed"
        try:
            self._request("close")
        except BackendApiError:
            pass
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


def open_session(backend_spec, volume, volume_path=None, gt=None,
                 timeout=DEFAULT_TIMEOUT):
    """Open a backend session for one volume.

    `backend_spec` is either a builtin name ("builtin:oracle",
    "builtin:noisy", "builtin:leaky") or a command-line template for a
    subprocess backend; a "{volume}" placeholder in the template is
    replaced by the volume's file path. Builtins require `gt`;
    subprocesses require `volume_path`.
    """
    if backend_spec.startswith(BUILTIN_PREFIX):
        name = backend_spec[len(BUILTIN_PREFIX):]
        if name not in _BUILTINS:
            raise SpawnFailure(
                f"unknown builtin {name!r}; have {sorted(_BUILTINS)}")
        if gt is None:
            raise BackendError(f"builtin {name!r} needs a ground truth mask")
        return _BUILTINS[name](gt)
    if volume_path is None:
        raise BackendError("subprocess backends need volume_path")
    return SubprocessSession(backend_spec, volume, volume_path, timeout=timeout)
