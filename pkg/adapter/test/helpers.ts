/** Fixture builders: a small NIfTI-1 writer and a synthetic case pair. */
import * as fs from 'node:fs';
import * as path from 'node:path';
import * as zlib from 'node:zlib';

export type Scalar = 'uint8' | 'int16' | 'int32' | 'float32' | 'float64' | 'uint16';

interface ScalarSpec {
  code: number;
  bytes: number;
  write: (view: DataView, offset: number, value: number, little: boolean) => void;
}

const SCALARS: Record<Scalar, ScalarSpec> = {
  uint8: { code: 2, bytes: 1, write: (v, o, x) => v.setUint8(o, x) },
  int16: { code: 4, bytes: 2, write: (v, o, x, le) => v.setInt16(o, x, le) },
  int32: { code: 8, bytes: 4, write: (v, o, x, le) => v.setInt32(o, x, le) },
  float32: { code: 16, bytes: 4, write: (v, o, x, le) => v.setFloat32(o, x, le) },
  float64: { code: 64, bytes: 8, write: (v, o, x, le) => v.setFloat64(o, x, le) },
  uint16: { code: 512, bytes: 2, write: (v, o, x, le) => v.setUint16(o, x, le) },
};

export interface WriteSpec {
  shape: [number, number, number];
  /** Voxel value at (x, y, z). */
  values: (x: number, y: number, z: number) => number;
  datatype?: Scalar;
  spacing?: [number, number, number];
  bigEndian?: boolean;
  sclSlope?: number;
  sclInter?: number;
}

export function writeNifti(filePath: string, spec: WriteSpec): void {
  const { shape } = spec;
  const datatype = spec.datatype ?? 'int16';
  const spacing = spec.spacing ?? [1, 1, 1];
  const little = !spec.bigEndian;
  const scalar = SCALARS[datatype];
  const [nx, ny, nz] = shape;
  const count = nx * ny * nz;

  const buffer = new ArrayBuffer(352 + count * scalar.bytes);
  const view = new DataView(buffer);
  view.setInt32(0, 348, little);
  view.setInt16(40, 3, little);
  view.setInt16(42, nx, little);
  view.setInt16(44, ny, little);
  view.setInt16(46, nz, little);
  for (let i = 4; i <= 7; i++) view.setInt16(40 + 2 * i, 1, little);
  view.setInt16(70, scalar.code, little);
  view.setInt16(72, scalar.bytes * 8, little);
  view.setFloat32(76, 1.0, little);
  view.setFloat32(80, spacing[0], little);
  view.setFloat32(84, spacing[1], little);
  view.setFloat32(88, spacing[2], little);
  view.setFloat32(108, 352, little);
  view.setFloat32(112, spec.sclSlope ?? 1.0, little);
  view.setFloat32(116, spec.sclInter ?? 0.0, little);
  const magic = new Uint8Array(buffer, 344, 4);
  magic.set([0x6e, 0x2b, 0x31, 0x00]); // "n+1\0"

  // voxel data in Fortran order: x fastest
  let at = 352;
  for (let z = 0; z < nz; z++) {
    for (let y = 0; y < ny; y++) {
      for (let x = 0; x < nx; x++) {
        scalar.write(view, at, spec.values(x, y, z), little);
        at += scalar.bytes;
      }
    }
  }

  let payload = Buffer.from(buffer);
  if (filePath.endsWith('.gz')) {
    payload = zlib.gzipSync(payload);
  }
  fs.writeFileSync(filePath, payload);
}

export interface CaseSpec {
  shape: [number, number, number];
  labelId: number;
  /** True where the object lives. */
  fg: (x: number, y: number, z: number) => boolean;
}

/** An image/label pair following the <stem>_image / <stem>_label layout. */
export function writeCasePair(
  dir: string,
  stem: string,
  spec: CaseSpec,
): { imagePath: string; labelPath: string } {
  const imagePath = path.join(dir, `${stem}_image.nii.gz`);
  const labelPath = path.join(dir, `${stem}_label.nii.gz`);
  writeNifti(imagePath, {
    shape: spec.shape,
    datatype: 'int16',
    // object at +150 HU on a -500 HU background, with one air and one
    // bone voxel so the default window has both extremes to clamp
    values: (x, y, z) => {
      if (x === 0 && y === 0 && z === 0) return -1000;
      if (x === 1 && y === 0 && z === 0) return 1000;
      return spec.fg(x, y, z) ? 150 : -500;
    },
  });
  writeNifti(labelPath, {
    shape: spec.shape,
    datatype: 'uint8',
    values: (x, y, z) => (spec.fg(x, y, z) ? spec.labelId : 0),
  });
  return { imagePath, labelPath };
}

/** Deterministic PRNG for reproducible random masks. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
