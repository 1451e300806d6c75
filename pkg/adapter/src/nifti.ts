/**
 * Minimal NIfTI-1 reader: single-file volumes (.nii, optionally
 * gzipped), axial stacks with the slice axis third. Orientation and
 * affine handling are out of scope; grids are read exactly as stored.
 */
import * as fs from 'node:fs';
import * as zlib from 'node:zlib';

const HEADER_SIZE = 348;
const MAGIC_SINGLE = 'n+1\0';
const MAGIC_PAIR = 'ni1\0';

export class NiftiError extends Error {}

export type TypedGrid =
  | Uint8Array
  | Int16Array
  | Int32Array
  | Float32Array
  | Float64Array
  | Uint16Array;

export interface Volume {
  /** Voxels in file order: x fastest, then y, then z. */
  data: TypedGrid;
  shape: [number, number, number];
  spacing: [number, number, number];
  /** On-disk scalar type name, e.g. "int16". */
  datatype: string;
}

interface DtypeSpec {
  name: string;
  bytes: number;
  read: (view: DataView, offset: number, little: boolean) => number;
  alloc: (n: number) => TypedGrid;
}

const DTYPE_CODES: Record<number, DtypeSpec> = {
  2: { name: 'uint8', bytes: 1, read: (v, o) => v.getUint8(o), alloc: (n) => new Uint8Array(n) },
  4: { name: 'int16', bytes: 2, read: (v, o, le) => v.getInt16(o, le), alloc: (n) => new Int16Array(n) },
  8: { name: 'int32', bytes: 4, read: (v, o, le) => v.getInt32(o, le), alloc: (n) => new Int32Array(n) },
  16: { name: 'float32', bytes: 4, read: (v, o, le) => v.getFloat32(o, le), alloc: (n) => new Float32Array(n) },
  64: { name: 'float64', bytes: 8, read: (v, o, le) => v.getFloat64(o, le), alloc: (n) => new Float64Array(n) },
  512: { name: 'uint16', bytes: 2, read: (v, o, le) => v.getUint16(o, le), alloc: (n) => new Uint16Array(n) },
};

export function readNifti(path: string): Volume {
  let raw: Buffer;
  try {
    raw = fs.readFileSync(path);
  } catch (err) {
    throw new NiftiError(`cannot read ${path}: ${(err as Error).message}`);
  }
  if (raw.length >= 2 && raw[0] === 0x1f && raw[1] === 0x8b) {
    try {
      raw = zlib.gunzipSync(raw);
    } catch (err) {
      throw new NiftiError(`bad gzip stream in ${path}: ${(err as Error).message}`);
    }
  }
  if (raw.length < HEADER_SIZE) {
    throw new NiftiError(`${path}: ${raw.length} bytes, header needs ${HEADER_SIZE}`);
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);

  // NIfTI-2 stores 540 in sizeof_hdr; check both byte orders.
  if (view.getInt32(0, true) === 540 || view.getInt32(0, false) === 540) {
    throw new NiftiError('NIfTI-2 is not supported');
  }
  const magic = raw.toString('latin1', 344, 348);
  if (magic === MAGIC_PAIR) {
    throw new NiftiError('two-file NIfTI-1 (.hdr/.img) is not supported');
  }
  if (magic !== MAGIC_SINGLE) {
    throw new NiftiError(`magic ${JSON.stringify(magic)} is not the NIfTI-1 single-file magic`);
  }

  // Endianness is detected from dim[0], which must lie in 1..7 for
  // whichever byte order the file was written in.
  let little: boolean;
  if (inDimRange(view.getInt16(40, true))) {
    little = true;
  } else if (inDimRange(view.getInt16(40, false))) {
    little = false;
  } else {
    throw new NiftiError('dim[0] outside 1..7 in both byte orders');
  }

  const ndim = view.getInt16(40, little);
  if (ndim < 3) {
    throw new NiftiError(`${ndim} dimensions, expected 3`);
  }
  const dims: number[] = [];
  for (let i = 1; i <= ndim; i++) {
    dims.push(view.getInt16(40 + 2 * i, little));
  }
  for (const d of dims.slice(3)) {
    if (d !== 1) {
      throw new NiftiError(`non-singleton trailing dimensions in [${dims.join(', ')}]`);
    }
  }
  const shape: [number, number, number] = [dims[0], dims[1], dims[2]];
  if (shape.some((d) => d < 1)) {
    throw new NiftiError(`non-positive dimension in [${shape.join(', ')}]`);
  }

  const datatypeCode = view.getInt16(70, little);
  const spec = DTYPE_CODES[datatypeCode];
  if (!spec) {
    throw new NiftiError(`datatype code ${datatypeCode} is not supported`);
  }

  const voxOffset = Math.trunc(view.getFloat32(108, little));
  const sclSlope = view.getFloat32(112, little);
  const sclInter = view.getFloat32(116, little);

  const count = shape[0] * shape[1] * shape[2];
  const need = voxOffset + count * spec.bytes;
  if (raw.length < need) {
    throw new NiftiError(`${path}: ${raw.length} bytes, voxel data needs ${need}`);
  }

  let data: TypedGrid = spec.alloc(count);
  for (let i = 0; i < count; i++) {
    data[i] = spec.read(view, voxOffset + i * spec.bytes, little);
  }
  // scl_slope = 0 means "no scaling", per the format convention; the
  // identity scale is skipped so integer grids stay integer.
  if (sclSlope !== 0 && (sclSlope !== 1 || sclInter !== 0)) {
    const scaled = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      scaled[i] = Math.fround(Math.fround(data[i] * sclSlope) + sclInter);
    }
    data = scaled;
  }

  const spacing: [number, number, number] = [
    positiveOr1(view.getFloat32(80, little)),
    positiveOr1(view.getFloat32(84, little)),
    positiveOr1(view.getFloat32(88, little)),
  ];
  return { data, shape, spacing, datatype: spec.name };
}

function inDimRange(dim0: number): boolean {
  return dim0 >= 1 && dim0 <= 7;
}

function positiveOr1(p: number): number {
  return p > 0 ? p : 1.0;
}
