"""NIfTI-1 volume reading and writing.

Single-file NIfTI-1 only (.nii, optionally gzip-compressed). The slice
axis is fixed to the third array dimension; orientation and affine
handling are out of scope because every dataset we evaluate stores
axial stacks in that layout.
"""

import dataclasses
import gzip
import struct

import numpy as np

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
GZIP_MAGIC = b"\x1f\x8b"

# NIfTI-1 datatype codes we accept. Everything else is rejected rather
# than guessed at.
DTYPE_CODES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    512: np.dtype(np.uint16),
}
CODE_FOR_DTYPE = {dt.name: code for code, dt in DTYPE_CODES.items()}


class VolumeIoError(Exception):
    """Base class for file parsing and writing failures."""


class UnsupportedDatatype(VolumeIoError):
    pass


class BadMagic(VolumeIoError):
    pass


class TruncatedFile(VolumeIoError):
    pass


class Not3D(VolumeIoError):
    pass


class UnsupportedFormat(VolumeIoError):
    pass


class IoFailure(VolumeIoError):
    pass


class IndexOutOfRange(VolumeIoError):
    pass


@dataclasses.dataclass(frozen=True)
class Volume:
    """A 3D scalar grid with voxel spacing in millimeters.

    ``data`` is indexed [x, y, z] with z as the slice axis. When the
    file carried a scale (scl_slope != 0 and not the identity) the grid
    holds the scaled float32 values and ``scl_slope``/``scl_inter``
    record what was applied. ``datatype`` is the on-disk dtype name.
    Instances are immutable; the grid is marked read-only.
    """

    data: np.ndarray
    spacing: tuple
    datatype: str
    scl_slope: float = 0.0
    scl_inter: float = 0.0

    def __post_init__(self):
        self.data.setflags(write=False)

    @property
    def shape(self):
        return self.data.shape

    @property
    def nz(self):
        return self.data.shape[2]


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if raw[:2] == GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise TruncatedFile(f"bad gzip stream in {path}: {exc}") from exc
    return raw


def _header_order(raw):
    # Endianness is detected from dim[0], which must lie in 1..7 for
    # whichever byte order the file was written in.
    (dim0,) = struct.unpack_from("<h", raw, 40)
    if 1 <= dim0 <= 7:
        return "<"
    (dim0,) = struct.unpack_from(">h", raw, 40)
    if 1 <= dim0 <= 7:
        return ">"
    raise BadMagic("dim[0] outside 1..7 in both byte orders")


def read_nifti(path):
    """Parse a NIfTI-1 file (raw or gzipped) into a Volume.

    Raises UnsupportedFormat for NIfTI-2 and header/data pairs,
    BadMagic for anything that is not a NIfTI-1 header, TruncatedFile
    when voxel data is missing, UnsupportedDatatype for datatype codes
    outside the supported set, and Not3D when more than three non-unit
    dimensions remain after squeezing trailing singletons.
    """
    raw = _read_bytes(path)
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, header needs {HEADER_SIZE}")

    for order in ("<", ">"):
        (sizeof_hdr,) = struct.unpack_from(order + "i", raw, 0)
        if sizeof_hdr == 540:
            raise UnsupportedFormat("NIfTI-2 is not supported")

    magic = raw[344:348]
    if magic == MAGIC_PAIR:
        raise UnsupportedFormat("two-file NIfTI-1 (.hdr/.img) is not supported")
    if magic != MAGIC_SINGLE:
        raise BadMagic(f"magic {magic!r} is not {MAGIC_SINGLE!r}")

    order = _header_order(raw)
    dim = struct.unpack_from(order + "8h", raw, 40)
    (datatype_code,) = struct.unpack_from(order + "h", raw, 70)
    pixdim = struct.unpack_from(order + "8f", raw, 76)
    (vox_offset,) = struct.unpack_from(order + "f", raw, 108)
    (scl_slope,) = struct.unpack_from(order + "f", raw, 112)
    (scl_inter,) = struct.unpack_from(order + "f", raw, 116)

    ndim = dim[0]
    if ndim < 3:
        raise Not3D(f"{ndim} dimensions, expected 3")
    dims = list(dim[1 : 1 + ndim])
    if any(d != 1 for d in dims[3:]):
        raise Not3D(f"non-singleton trailing dimensions in {tuple(dims)}")
    shape = tuple(dims[:3])
    if any(d < 1 for d in shape):
        raise Not3D(f"non-positive dimension in {shape}")

    if datatype_code not in DTYPE_CODES:
        raise UnsupportedDatatype(f"datatype code {datatype_code}")
    disk_dtype = DTYPE_CODES[datatype_code].newbyteorder(order)

    count = shape[0] * shape[1] * shape[2]
    offset = int(vox_offset)
    need = offset + count * disk_dtype.itemsize
    if len(raw) < need:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, voxel data needs {need}")

    flat = np.frombuffer(raw, dtype=disk_dtype, count=count, offset=offset)
    grid = np.ascontiguousarray(flat.reshape(shape, order="F"))
    if order == ">":
        grid = grid.astype(grid.dtype.newbyteorder("="))

    slope = float(scl_slope)
    inter = float(scl_inter)
    # scl_slope = 0 means "no scaling", per the format convention.
    if slope != 0.0 and (slope != 1.0 or inter != 0.0):
        grid = grid.astype(np.float32) * np.float32(slope) + np.float32(inter)

    spacing = tuple(float(p) if p > 0 else 1.0 for p in pixdim[1:4])
    return Volume(
        data=grid,
        spacing=spacing,
        datatype=DTYPE_CODES[datatype_code].name,
        scl_slope=slope,
        scl_inter=inter,
    )


def write_nifti(volume, path):
    """Write a Volume as a single-file NIfTI-1, gzipped for .gz paths.

    The grid is written as-is (no scaling; scl_slope 1, scl_inter 0),
    so read_nifti(write_nifti(v)) reproduces the exact values.
    """
    data = np.asarray(volume.data)
    if data.ndim != 3:
        raise ValueError(f"volume must be 3D, got {data.ndim}D")
    if any(d < 1 for d in data.shape):
        raise ValueError(f"non-positive dimension in {data.shape}")
    dtype = np.dtype(data.dtype).newbyteorder("=")
    if dtype.name not in CODE_FOR_DTYPE:
        raise ValueError(f"unsupported grid dtype {dtype.name}")

    nx, ny, nz = data.shape
    sx, sy, sz = volume.spacing

    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, CODE_FOR_DTYPE[dtype.name])
    struct.pack_into("<h", header, 72, dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, float(VOX_OFFSET))
    struct.pack_into("<f", header, 112, 1.0)
    struct.pack_into("<f", header, 116, 0.0)
    header[344:348] = MAGIC_SINGLE

    payload = bytes(header) + b"\x00\x00\x00\x00"
    payload += data.astype(dtype.newbyteorder("<")).tobytes(order="F")

    try:
        if str(path).endswith(".gz"):
            # mtime pinned so identical volumes produce identical bytes.
            with open(path, "wb") as fh:
                with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
                    gz.write(payload)
        else:
            with open(path, "wb") as fh:
                fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def binarize_label(labels, label_id):
    """Foreground mask of the voxels whose label equals label_id."""
    if label_id <= 0:
        raise ValueError(f"label_id must be positive, got {label_id}")
    data = np.asarray(labels.data)
    if not np.issubdtype(data.dtype, np.integer):
        raise ValueError(f"label grid must be integer, got {data.dtype}")
    return data == label_id


def slice_of(mask, k):
    """The k-th plane along the slice axis, as an independent copy."""
    nz = mask.shape[2]
    if not 0 <= k < nz:
        raise IndexOutOfRange(f"slice {k} outside 0..{nz - 1}")
    return np.array(mask[:, :, k])
