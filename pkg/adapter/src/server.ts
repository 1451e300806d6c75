/**
 * The stdio protocol loop.
 *
 * Requests arrive one JSON object per line on standard input; every
 * request is answered with exactly one JSON line echoing its id.
 *
 *   init       {"id", "kind", "volume_path", "shape", "spacing", "datatype"}
 *              -> {"id", "kind": "ok"}
 *   add_points {"id", "kind", "slice", "points": [{"row","col","positive"}]}
 *              -> {"id", "kind": "mask2d", "shape": [rows, cols], "runs": [...]}
 *   propagate  {"id", "kind"}
 *              -> {"id", "kind": "mask3d", "shape": [rows, cols, count], "runs": [...]}
 *   close      {"id", "kind"} -> {"id", "kind": "ok"}, then exit 0
 *
 * Masks are run-length encoded over the row-major flattening. Any
 * handler failure becomes a kind=error reply with a message; the
 * process never dies silently mid-protocol.
 */
import * as readline from 'node:readline';
import { windowFromEnv, windowToFrames, type FrameSequence } from './frames.js';
import { loadSegmenter, type PromptPoint, type SegmenterFactory, type VideoSegmenter } from './model.js';
import { mergeDirections } from './merge.js';
import { readNifti } from './nifti.js';
import { rleEncode } from './rle.js';

export interface ServeOptions {
  input: NodeJS.ReadableStream;
  output: NodeJS.WritableStream;
  env?: NodeJS.ProcessEnv;
  exit?: (code: number) => void;
  /** Test seam; defaults to the environment-driven model loading. */
  factory?: SegmenterFactory;
}

interface Session {
  segmenter: VideoSegmenter;
  frames: FrameSequence;
  prompted: Set<number>;
}

export async function serve(options: ServeOptions): Promise<void> {
  const env = options.env ?? process.env;
  const exit = options.exit ?? ((code: number) => process.exit(code));
  const factory = options.factory ?? loadSegmenter;
  const write = (reply: Record<string, unknown>) => {
    options.output.write(JSON.stringify(reply) + '\n');
  };

  let session: Session | null = null;

  const rl = readline.createInterface({ input: options.input, terminal: false });
  for await (const line of rl) {
    if (line.trim() === '') continue;
    let message: Record<string, unknown>;
    try {
      message = JSON.parse(line);
    } catch {
      write({ id: null, kind: 'error', message: `request is not JSON: ${line.slice(0, 120)}` });
      continue;
    }
    const id = message?.id ?? null;
    try {
      switch (message?.kind) {
        case 'init': {
          if (session) throw new Error('init sent twice');
          session = await handleInit(message, env, factory);
          write({ id, kind: 'ok' });
          break;
        }
        case 'add_points': {
          if (!session) throw new Error('add_points before init');
          const runs = await handleAddPoints(session, message);
          write({
            id,
            kind: 'mask2d',
            shape: [session.frames.rows, session.frames.cols],
            runs,
          });
          break;
        }
        case 'propagate': {
          if (!session) throw new Error('propagate before init');
          const runs = await handlePropagate(session);
          write({
            id,
            kind: 'mask3d',
            shape: [session.frames.rows, session.frames.cols, session.frames.count],
            runs,
          });
          break;
        }
        case 'close': {
          if (session) await session.segmenter.close();
          session = null;
          write({ id, kind: 'ok' });
          rl.close();
          exit(0);
          return;
        }
        default:
          throw new Error(`unknown kind ${JSON.stringify(message?.kind)}`);
      }
    } catch (err) {
      write({ id, kind: 'error', message: (err as Error).message });
    }
  }
}

async function handleInit(
  message: Record<string, unknown>,
  env: NodeJS.ProcessEnv,
  factory: SegmenterFactory,
): Promise<Session> {
  const volumePath = message.volume_path;
  if (typeof volumePath !== 'string' || volumePath === '') {
    throw new Error('init needs a volume_path');
  }
  const volume = readNifti(volumePath);
  const declared = message.shape;
  if (Array.isArray(declared) && declared.length === 3) {
    const [nx, ny, nz] = volume.shape;
    if (declared[0] !== nx || declared[1] !== ny || declared[2] !== nz) {
      throw new Error(
        `declared shape [${declared.join(', ')}] does not match the ${nx}x${ny}x${nz} file`);
    }
  }
  const frames = windowToFrames(volume, windowFromEnv(env));
  const segmenter = await factory(volumePath, env);
  await segmenter.init(frames);
  return { segmenter, frames, prompted: new Set() };
}

async function handleAddPoints(
  session: Session,
  message: Record<string, unknown>,
): Promise<number[]> {
  const { frames } = session;
  const k = message.slice;
  if (typeof k !== 'number' || !Number.isInteger(k) || k < 0 || k >= frames.count) {
    throw new Error(`slice ${k} outside 0..${frames.count - 1}`);
  }
  const raw = message.points;
  if (!Array.isArray(raw) || raw.length === 0) {
    throw new Error('add_points with no points');
  }
  const points: PromptPoint[] = raw.map((p) => {
    const { row, col, positive } = p ?? {};
    if (!Number.isInteger(row) || row < 0 || row >= frames.rows
        || !Number.isInteger(col) || col < 0 || col >= frames.cols) {
      throw new Error(`point (${row}, ${col}) outside the ${frames.rows}x${frames.cols} frame`);
    }
    return { row, col, positive: Boolean(positive) };
  });
  const mask = await session.segmenter.addPoints(k, points);
  session.prompted.add(k);
  return encodeChecked(mask, frames.rows * frames.cols);
}

async function handlePropagate(session: Session): Promise<number[]> {
  const { frames, segmenter, prompted } = session;
  if (prompted.size === 0) throw new Error('propagate before any prompt');
  const pixels = frames.rows * frames.cols;
  const forward = checkDirection(
    await segmenter.propagate('forward'), frames.count, pixels, 'forward');
  const backward = checkDirection(
    await segmenter.propagate('backward'), frames.count, pixels, 'backward');
  const merged = mergeDirections(forward, backward, [...prompted], pixels);
  // reorder per-frame [row, col] planes into the row-major 3D flattening
  const flat = new Uint8Array(pixels * frames.count);
  for (let k = 0; k < frames.count; k++) {
    const plane = merged[k];
    for (let i = 0; i < pixels; i++) {
      flat[i * frames.count + k] = plane[i];
    }
  }
  return encodeChecked(flat, flat.length);
}

function checkDirection(
  masks: Array<Uint8Array | null>,
  count: number,
  pixels: number,
  name: string,
): Array<Uint8Array | null> {
  if (!Array.isArray(masks) || masks.length !== count) {
    throw new Error(`${name} propagation returned ${masks?.length} frames, expected ${count}`);
  }
  for (const mask of masks) {
    if (mask !== null && mask.length !== pixels) {
      throw new Error(`${name} propagation frame has ${mask.length} pixels, expected ${pixels}`);
    }
  }
  return masks;
}

/** Replies never carry runs that disagree with the declared shape. */
function encodeChecked(mask: Uint8Array, total: number): number[] {
  if (!(mask instanceof Uint8Array) || mask.length !== total) {
    throw new Error(`model produced ${(mask as Uint8Array)?.length} pixels, expected ${total}`);
  }
  const runs = rleEncode(mask);
  let sum = 0;
  for (const run of runs) sum += run;
  if (sum !== total) {
    throw new Error(`encoded runs sum ${sum} != ${total}`);
  }
  return runs;
}
