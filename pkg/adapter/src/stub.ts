/**
 * A stand-in segmenter that answers with the ground truth.
 *
 * Useful for conformance runs when no model is at hand: prompts
 * return the true mask of the prompted frame, and each propagation
 * direction covers exactly the frames a prompted-frame propagation
 * would reach (forward from the first prompt onward, backward up to
 * the last).
 */
import type { FrameSequence } from './frames.js';
import { NiftiError, readNifti } from './nifti.js';
import type { Direction, PromptPoint, VideoSegmenter } from './model.js';

/** case_000_image.nii.gz -> case_000_label.nii.gz */
export function deriveLabelPath(volumePath: string): string {
  const swapped = volumePath.replace(/_image\.(nii(\.gz)?)$/, '_label.$1');
  if (swapped === volumePath) {
    throw new Error(
      `cannot derive a label path from ${volumePath} (expected an _image.nii[.gz] suffix)`);
  }
  return swapped;
}

export class GroundTruthStub implements VideoSegmenter {
  private readonly labelPath: string;
  private readonly labelId: number;
  private planes: Uint8Array[] = []; // per frame, row-major rows*cols
  private prompted = new Set<number>();

  constructor(labelPath: string, labelId: number) {
    this.labelPath = labelPath;
    this.labelId = labelId;
  }

  init(frames: FrameSequence): void {
    const labels = readNifti(this.labelPath);
    const [nx, ny, nz] = labels.shape;
    if (nx !== frames.rows || ny !== frames.cols || nz !== frames.count) {
      throw new NiftiError(
        `label grid ${nx}x${ny}x${nz} does not match the ` +
        `${frames.rows}x${frames.cols}x${frames.count} volume`);
    }
    this.planes = [];
    for (let k = 0; k < nz; k++) {
      const plane = new Uint8Array(nx * ny);
      for (let x = 0; x < nx; x++) {
        for (let y = 0; y < ny; y++) {
          plane[x * ny + y] = labels.data[x + nx * (y + ny * k)] === this.labelId ? 1 : 0;
        }
      }
      this.planes.push(plane);
    }
  }

  addPoints(frame: number, _points: PromptPoint[]): Uint8Array {
    this.prompted.add(frame);
    return this.planes[frame].slice();
  }

  propagate(direction: Direction): Array<Uint8Array | null> {
    const prompted = [...this.prompted].sort((a, b) => a - b);
    const first = prompted[0];
    const last = prompted[prompted.length - 1];
    return this.planes.map((plane, k) => {
      const reached = direction === 'forward' ? k >= first : k <= last;
      return reached ? plane.slice() : null;
    });
  }

  close(): void {
    this.planes = [];
    this.prompted.clear();
  }
}
