/**
 * Run-length coding for binary masks.
 *
 * Masks travel over the wire as a list of run lengths covering the
 * row-major flattening, alternating background/foreground and always
 * starting with the background run (which may be zero-length).
 */

export class BadRunLength extends Error {}

/** Encode a flat 0/1 mask. The empty mask encodes to []. */
export function rleEncode(flat: Uint8Array): number[] {
  if (flat.length === 0) return [];
  const runs: number[] = [];
  let current = flat[0] !== 0 ? 1 : 0;
  if (current === 1) runs.push(0); // encoding always starts with background
  let length = 0;
  for (let i = 0; i < flat.length; i++) {
    const bit = flat[i] !== 0 ? 1 : 0;
    if (bit === current) {
      length++;
    } else {
      runs.push(length);
      current = bit;
      length = 1;
    }
  }
  runs.push(length);
  return runs;
}

/** Decode run lengths back into a flat 0/1 mask of `total` elements. */
export function rleDecode(runs: number[], total: number): Uint8Array {
  let sum = 0;
  for (const run of runs) {
    if (!Number.isInteger(run) || run < 0) {
      throw new BadRunLength(`bad run ${run} in [${runs.slice(0, 8).join(', ')}...]`);
    }
    sum += run;
  }
  if (sum !== total) {
    throw new BadRunLength(`runs sum ${sum} != ${total}`);
  }
  const flat = new Uint8Array(total);
  let at = 0;
  for (let i = 0; i < runs.length; i++) {
    if (i % 2 === 1) flat.fill(1, at, at + runs[i]); // odd runs are foreground
    at += runs[i];
  }
  return flat;
}
