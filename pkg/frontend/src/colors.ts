// Fixed color ramps for the heatmap overlay. Each measured parameter keeps
// the same ramp for the life of the console so an operator can compare
// frames by eye; cells without data stay fully transparent.

export type Rgb = readonly [number, number, number];

const RAMPS: Record<string, readonly Rgb[]> = {
  depth: [
    [222, 235, 247],
    [107, 174, 214],
    [33, 113, 181],
    [8, 48, 107],
  ],
  temperature: [
    [49, 54, 149],
    [171, 217, 233],
    [254, 224, 144],
    [215, 48, 39],
  ],
  ph: [
    [118, 42, 131],
    [231, 212, 232],
    [217, 240, 211],
    [27, 120, 55],
  ],
  conductivity: [
    [237, 248, 251],
    [102, 194, 164],
    [35, 139, 69],
    [0, 68, 27],
  ],
  turbidity: [
    [255, 247, 188],
    [254, 196, 79],
    [217, 95, 14],
    [102, 37, 6],
  ],
  default: [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
  ],
};

export function rampFor(param: string): readonly Rgb[] {
  return RAMPS[param] ?? RAMPS["default"]!;
}

export function colorAt(ramp: readonly Rgb[], t: number): Rgb {
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (ramp.length - 1);
  const i = Math.min(ramp.length - 2, Math.floor(pos));
  const frac = pos - i;
  const a = ramp[i]!;
  const b = ramp[i + 1]!;
  return [
    Math.round(a[0] + (b[0] - a[0]) * frac),
    Math.round(a[1] + (b[1] - a[1]) * frac),
    Math.round(a[2] + (b[2] - a[2]) * frac),
  ];
}

/** CSS color for one heatmap cell; null (no data) renders transparent. */
export function cellColor(
  param: string,
  value: number | null,
  lo: number,
  hi: number,
  alpha = 0.65,
): string {
  if (value === null || !Number.isFinite(value)) {
    return "rgba(0,0,0,0)";
  }
  const span = hi - lo;
  const t = span > 0 ? (value - lo) / span : 0.5;
  const [r, g, b] = colorAt(rampFor(param), t);
  return `rgba(${r},${g},${b},${alpha})`;
}

/** Min/max over the finite entries of a grid, or null if it is all gaps. */
export function finiteRange(
  rows: readonly (number | null)[][],
): { lo: number; hi: number } | null {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of rows) {
    for (const v of row) {
      if (v !== null && Number.isFinite(v)) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
  }
  return lo <= hi ? { lo, hi } : null;
}
