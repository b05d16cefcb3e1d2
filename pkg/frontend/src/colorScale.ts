/** Sequential color scale for concentration fields (light -> dark). */

export interface RGB {
  r: number;
  g: number;
  b: number;
}

const STOPS: Array<[number, RGB]> = [
  [0.0, { r: 255, g: 255, b: 229 }],
  [0.25, { r: 254, g: 227, b: 145 }],
  [0.5, { r: 254, g: 153, b: 41 }],
  [0.75, { r: 204, g: 76, b: 2 }],
  [1.0, { r: 102, g: 37, b: 6 }],
];

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/** Map a value in [lo, hi] to an interpolated color; clamps outside. */
export function colorFor(value: number, lo: number, hi: number): RGB {
  const span = hi - lo;
  const t = span > 0 ? Math.min(1, Math.max(0, (value - lo) / span)) : 0;
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    const [t0, c0] = STOPS[i - 1];
    if (t <= t1) {
      const u = (t - t0) / (t1 - t0);
      return {
        r: Math.round(lerp(c0.r, c1.r, u)),
        g: Math.round(lerp(c0.g, c1.g, u)),
        b: Math.round(lerp(c0.b, c1.b, u)),
      };
    }
  }
  return STOPS[STOPS.length - 1][1];
}

export function cssColor(c: RGB): string {
  return `rgb(${c.r}, ${c.g}, ${c.b})`;
}
