/**
 * Combining forward and backward propagation into one volume.
 *
 * Where both directions produced a mask for a frame, the one that
 * propagated from the nearer prompted frame wins; ties go forward.
 * Forward propagation flows from the nearest prompted frame at or
 * below a position, backward from the nearest at or above.
 */

export function mergeDirections(
  forward: Array<Uint8Array | null>,
  backward: Array<Uint8Array | null>,
  prompted: number[],
  pixels: number,
): Uint8Array[] {
  const merged: Uint8Array[] = [];
  for (let k = 0; k < forward.length; k++) {
    const fwd = forward[k];
    const bwd = backward[k];
    if (fwd && bwd) {
      merged.push(forwardWins(k, prompted) ? fwd : bwd);
    } else if (fwd) {
      merged.push(fwd);
    } else if (bwd) {
      merged.push(bwd);
    } else {
      merged.push(new Uint8Array(pixels)); // neither direction reached
    }
  }
  return merged;
}

function forwardWins(k: number, prompted: number[]): boolean {
  let below = -Infinity;
  let above = Infinity;
  for (const p of prompted) {
    if (p <= k && p > below) below = p;
    if (p >= k && p < above) above = p;
  }
  return k - below <= above - k;
}
