/**
 * Intensity windowing: a CT volume becomes a sequence of 8-bit RGB
 * frames, one per slice, the form a video-segmentation model expects.
 */
import type { Volume } from './nifti.js';

export class BadWindow extends Error {}

export interface Window {
  low: number;
  high: number;
}

/** Abdominal soft-tissue default, in Hounsfield units. */
export const DEFAULT_WINDOW: Window = { low: -200, high: 300 };

export const WINDOW_ENV = 'VIDSEG_ADAPTER_WINDOW';

export interface FrameSequence {
  rows: number;
  cols: number;
  count: number;
  window: Window;
  /** One frame per slice: rows*cols*3 interleaved RGB, row-major. */
  frames: Uint8Array[];
}

/** Round half away from zero: the exact midpoint maps up, to 128. */
export function roundHalfAway(x: number): number {
  return x < 0 ? -Math.round(-x) : Math.round(x);
}

/** Parse "low,high" from the environment; unset means the default. */
export function windowFromEnv(env: NodeJS.ProcessEnv = process.env): Window {
  const raw = env[WINDOW_ENV];
  if (raw === undefined || raw === '') return DEFAULT_WINDOW;
  const parts = raw.split(',').map((part) => Number(part.trim()));
  if (parts.length !== 2 || parts.some((p) => !Number.isFinite(p))) {
    throw new BadWindow(`${WINDOW_ENV} must be "low,high", got ${JSON.stringify(raw)}`);
  }
  return checkWindow({ low: parts[0], high: parts[1] });
}

export function checkWindow(window: Window): Window {
  if (!(window.low < window.high)) {
    throw new BadWindow(`window low ${window.low} must be below high ${window.high}`);
  }
  return window;
}

/**
 * Clamp to [low, high], rescale linearly to [0, 255], replicate to
 * three channels. Frames are indexed [row, col] row-major, matching
 * the wire order of 2D masks.
 */
export function windowToFrames(volume: Volume, window: Window): FrameSequence {
  checkWindow(window);
  const [nx, ny, nz] = volume.shape;
  const { low, high } = window;
  const scale = 255 / (high - low);
  const frames: Uint8Array[] = [];
  for (let k = 0; k < nz; k++) {
    const frame = new Uint8Array(nx * ny * 3);
    for (let x = 0; x < nx; x++) {
      for (let y = 0; y < ny; y++) {
        let value = volume.data[x + nx * (y + ny * k)]; // file order: x fastest
        if (value < low) value = low;
        if (value > high) value = high;
        const pixel = roundHalfAway((value - low) * scale);
        const at = (x * ny + y) * 3;
        frame[at] = pixel;
        frame[at + 1] = pixel;
        frame[at + 2] = pixel;
      }
    }
    frames.push(frame);
  }
  return { rows: nx, cols: ny, count: nz, window, frames };
}
