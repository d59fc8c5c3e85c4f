/**
 * Coordinate mapping between the browser projection and the device.
 *
 * The service consumes resolution-relative coordinates in [0, 1]; the
 * projection is just a scaled view of the device screen, so a click at
 * projection pixel p corresponds to device pixel p * (device / projection)
 * and both reduce to the same relative point.
 */

export interface Rect {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface RelPoint {
  x: number;
  y: number;
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/** Map a client (viewport) coordinate inside the projection to a relative point. */
export function projectionToRel(clientX: number, clientY: number, rect: Rect): RelPoint {
  if (rect.width <= 0 || rect.height <= 0) {
    throw new Error("projection has no size");
  }
  return {
    x: clamp01((clientX - rect.left) / rect.width),
    y: clamp01((clientY - rect.top) / rect.height),
  };
}

/** Scale a relative point to device pixels. */
export function relToDevice(p: RelPoint, deviceW: number, deviceH: number): { x: number; y: number } {
  return { x: p.x * deviceW, y: p.y * deviceH };
}

/** Scale a device-pixel box into projection pixels (for the layout overlay). */
export function deviceBoxToProjection(
  box: { x0: number; y0: number; x1: number; y1: number },
  deviceW: number,
  deviceH: number,
  rect: Rect,
): { left: number; top: number; width: number; height: number } {
  const sx = rect.width / deviceW;
  const sy = rect.height / deviceH;
  return {
    left: box.x0 * sx,
    top: box.y0 * sy,
    width: (box.x1 - box.x0 + 1) * sx,
    height: (box.y1 - box.y0 + 1) * sy,
  };
}

/** Euclidean distance in projection pixels; used to tell taps from drags. */
export function projectionDistance(
  a: { x: number; y: number },
  b: { x: number; y: number },
): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}
