// Minimal software rasterizer over an RGBA byte buffer. The canvas panes
// draw through this so the exact same pixels can be produced headlessly
// (the golden-image tests render with it), keeping screenshots
// deterministic across environments.

export interface Rgba {
  r: number;
  g: number;
  b: number;
  a?: number;
}

export class PixelBuffer {
  readonly data: Uint8ClampedArray;

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    this.data = new Uint8ClampedArray(width * height * 4);
  }

  fill(c: Rgba): void {
    for (let i = 0; i < this.width * this.height; i++) {
      this.set(i % this.width, Math.floor(i / this.width), c);
    }
  }

  set(x: number, y: number, c: Rgba): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    this.data[i] = c.r;
    this.data[i + 1] = c.g;
    this.data[i + 2] = c.b;
    this.data[i + 3] = c.a ?? 255;
  }

  get(x: number, y: number): [number, number, number, number] {
    const i = (y * this.width + x) * 4;
    return [this.data[i], this.data[i + 1], this.data[i + 2], this.data[i + 3]];
  }

  line(x0: number, y0: number, x1: number, y1: number, c: Rgba): void {
    // Bresenham on rounded endpoints: integer stepping keeps output
    // identical regardless of platform float rendering
    let ax = Math.round(x0);
    let ay = Math.round(y0);
    const bx = Math.round(x1);
    const by = Math.round(y1);
    const dx = Math.abs(bx - ax);
    const dy = -Math.abs(by - ay);
    const sx = ax < bx ? 1 : -1;
    const sy = ay < by ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(ax, ay, c);
      if (ax === bx && ay === by) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        ax += sx;
      }
      if (e2 <= dx) {
        err += dx;
        ay += sy;
      }
    }
  }

  disc(cx: number, cy: number, radius: number, c: Rgba): void {
    const r = Math.max(0, Math.round(radius));
    const x0 = Math.round(cx);
    const y0 = Math.round(cy);
    for (let y = -r; y <= r; y++) {
      for (let x = -r; x <= r; x++) {
        if (x * x + y * y <= r * r) this.set(x0 + x, y0 + y, c);
      }
    }
  }

  circle(cx: number, cy: number, radius: number, c: Rgba): void {
    const steps = Math.max(12, Math.round(radius * 4));
    let px = cx + radius;
    let py = cy;
    for (let i = 1; i <= steps; i++) {
      const t = (2 * Math.PI * i) / steps;
      const nx = cx + radius * Math.cos(t);
      const ny = cy + radius * Math.sin(t);
      this.line(px, py, nx, ny, c);
      px = nx;
      py = ny;
    }
  }

  polyline(points: Array<[number, number]>, closed: boolean, c: Rgba): void {
    for (let i = 0; i + 1 < points.length; i++) {
      this.line(points[i][0], points[i][1], points[i + 1][0], points[i + 1][1], c);
    }
    if (closed && points.length > 2) {
      const last = points[points.length - 1];
      this.line(last[0], last[1], points[0][0], points[0][1], c);
    }
  }

  differingPixels(other: PixelBuffer): number {
    if (other.width !== this.width || other.height !== this.height) {
      return this.width * this.height;
    }
    let diff = 0;
    for (let i = 0; i < this.data.length; i += 4) {
      if (
        this.data[i] !== other.data[i] ||
        this.data[i + 1] !== other.data[i + 1] ||
        this.data[i + 2] !== other.data[i + 2]
      ) {
        diff++;
      }
    }
    return diff;
  }
}

// PPM (P6) keeps goldens diffable and dependency-free.
export function encodePpm(buf: PixelBuffer): Uint8Array {
  const header = `P6\n${buf.width} ${buf.height}\n255\n`;
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + buf.width * buf.height * 3);
  out.set(head, 0);
  let o = head.length;
  for (let i = 0; i < buf.data.length; i += 4) {
    out[o++] = buf.data[i];
    out[o++] = buf.data[i + 1];
    out[o++] = buf.data[i + 2];
  }
  return out;
}

export function decodePpm(data: Uint8Array): PixelBuffer {
  const text = new TextDecoder().decode(data.slice(0, 64));
  const match = /^P6\s+(\d+)\s+(\d+)\s+255\n/.exec(text);
  if (!match) throw new Error("not a P6 PPM");
  const width = parseInt(match[1], 10);
  const height = parseInt(match[2], 10);
  const offset = match[0].length;
  const buf = new PixelBuffer(width, height);
  for (let i = 0; i < width * height; i++) {
    buf.data[i * 4] = data[offset + i * 3];
    buf.data[i * 4 + 1] = data[offset + i * 3 + 1];
    buf.data[i * 4 + 2] = data[offset + i * 3 + 2];
    buf.data[i * 4 + 3] = 255;
  }
  return buf;
}
