/** Color scales: a perceptually ordered sequential map for mel energy and
 * a diverging warm/cool map for differences (warm = large, cool = small). */

type Rgb = [number, number, number];

function lerpStops(stops: Rgb[], t: number): Rgb {
  const clamped = Math.max(0, Math.min(1, t));
  const span = stops.length - 1;
  const seg = clamped * span;
  const low = Math.min(Math.floor(seg), span - 1);
  const frac = seg - low;
  const a = stops[low];
  const b = stops[low + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * frac),
    Math.round(a[1] + (b[1] - a[1]) * frac),
    Math.round(a[2] + (b[2] - a[2]) * frac),
  ];
}

const MEL_STOPS: Rgb[] = [
  [0, 0, 4],
  [40, 11, 84],
  [101, 21, 110],
  [188, 55, 84],
  [237, 105, 37],
  [249, 168, 9],
  [252, 255, 164],
];

// cool blues/greens for small differences through warm oranges/reds for large
const DIFF_STOPS: Rgb[] = [
  [33, 102, 172],
  [103, 169, 207],
  [144, 194, 139],
  [254, 224, 144],
  [239, 138, 71],
  [178, 24, 43],
];

export function melColor(t: number): Rgb {
  return lerpStops(MEL_STOPS, t);
}

export function diffColor(t: number): Rgb {
  return lerpStops(DIFF_STOPS, t);
}

export function buildLut(fn: (t: number) => Rgb, size = 256): Uint8ClampedArray {
  const lut = new Uint8ClampedArray(size * 3);
  for (let i = 0; i < size; i++) {
    const [r, g, b] = fn(i / (size - 1));
    lut[i * 3] = r;
    lut[i * 3 + 1] = g;
    lut[i * 3 + 2] = b;
  }
  return lut;
}
