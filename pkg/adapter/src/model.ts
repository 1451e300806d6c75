/**
 * The pluggable model behind the adapter.
 *
 * A segmenter sees the volume as a video (one frame per slice), takes
 * point prompts on single frames, and propagates masks through the
 * stack one direction at a time. Masks are flat row-major rows*cols
 * 0/1 arrays; propagation returns null for frames a direction never
 * reached.
 */
import * as path from 'node:path';
import { pathToFileURL } from 'node:url';
import type { FrameSequence } from './frames.js';

export type Direction = 'forward' | 'backward';

export interface PromptPoint {
  row: number;
  col: number;
  positive: boolean;
}

export interface VideoSegmenter {
  init(frames: FrameSequence): Promise<void> | void;
  addPoints(frame: number, points: PromptPoint[]): Promise<Uint8Array> | Uint8Array;
  propagate(direction: Direction): Promise<Array<Uint8Array | null>> | Array<Uint8Array | null>;
  close(): Promise<void> | void;
}

export type SegmenterFactory = (
  volumePath: string,
  env: NodeJS.ProcessEnv,
) => Promise<VideoSegmenter>;

export const STUB_LABEL_ENV = 'VIDSEG_ADAPTER_STUB_LABEL';
export const MODEL_ENV = 'VIDSEG_ADAPTER_MODEL';
export const CHECKPOINT_ENV = 'VIDSEG_ADAPTER_CHECKPOINT';

/**
 * Pick the segmenter from the environment: the ground-truth stub when
 * VIDSEG_ADAPTER_STUB_LABEL is set, otherwise the module named by
 * VIDSEG_ADAPTER_MODEL, whose createSegmenter({ checkpoint }) builds
 * the real model binding. The checkpoint is configuration, never
 * code: VIDSEG_ADAPTER_CHECKPOINT passes through untouched.
 */
export async function loadSegmenter(
  volumePath: string,
  env: NodeJS.ProcessEnv,
): Promise<VideoSegmenter> {
  const stubLabel = env[STUB_LABEL_ENV];
  if (stubLabel !== undefined && stubLabel !== '') {
    const labelId = Number(stubLabel);
    if (!Number.isInteger(labelId) || labelId <= 0) {
      throw new Error(
        `${STUB_LABEL_ENV} must be a positive integer, got ${JSON.stringify(stubLabel)}`);
    }
    const { GroundTruthStub, deriveLabelPath } = await import('./stub.js');
    return new GroundTruthStub(deriveLabelPath(volumePath), labelId);
  }
  const modulePath = env[MODEL_ENV];
  if (modulePath) {
    const url = pathToFileURL(path.resolve(modulePath)).href;
    const mod = await import(url);
    if (typeof mod.createSegmenter !== 'function') {
      throw new Error(`${modulePath} does not export createSegmenter()`);
    }
    return mod.createSegmenter({ checkpoint: env[CHECKPOINT_ENV] });
  }
  throw new Error(
    `no model configured: set ${MODEL_ENV} (and ${CHECKPOINT_ENV}) or ${STUB_LABEL_ENV}`);
}
