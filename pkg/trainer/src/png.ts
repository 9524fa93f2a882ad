/**
 * Minimal PNG decoder: 8-bit depth, color types 0/2/4/6, non-interlaced.
 * Covers everything the corpus pipeline writes (RGB composites) plus
 * grayscale/alpha variants; anything else is rejected loudly.
 */

import { inflateSync } from "node:zlib";

export interface DecodedImage {
  width: number;
  height: number;
  /** Packed RGB, row-major, 3 bytes per pixel. */
  rgb: Uint8Array;
}

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CHANNELS: Record<number, number> = { 0: 1, 2: 3, 4: 2, 6: 4 };

export function decodePng(buffer: Uint8Array): DecodedImage {
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (buffer[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);

  let width = 0;
  let height = 0;
  let colorType = -1;
  const idat: Uint8Array[] = [];
  let pos = 8;
  while (pos < buffer.length) {
    const length = view.getUint32(pos);
    const type = String.fromCharCode(buffer[pos + 4], buffer[pos + 5], buffer[pos + 6], buffer[pos + 7]);
    const dataStart = pos + 8;
    if (type === "IHDR") {
      width = view.getUint32(dataStart);
      height = view.getUint32(dataStart + 4);
      const bitDepth = buffer[dataStart + 8];
      colorType = buffer[dataStart + 9];
      const interlace = buffer[dataStart + 12];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (!(colorType in CHANNELS)) throw new Error(`unsupported color type ${colorType}`);
      if (interlace !== 0) throw new Error("interlaced PNGs are not supported");
    } else if (type === "IDAT") {
      idat.push(buffer.subarray(dataStart, dataStart + length));
    } else if (type === "IEND") {
      break;
    }
    pos = dataStart + length + 4; // skip CRC
  }
  if (width === 0 || height === 0) throw new Error("missing IHDR");

  const compressed = Buffer.concat(idat.map((c) => Buffer.from(c)));
  const raw = inflateSync(compressed);
  const channels = CHANNELS[colorType];
  const stride = width * channels;
  if (raw.length < height * (stride + 1)) throw new Error("truncated PNG data");

  const scanlines = new Uint8Array(height * stride);
  let prev: Uint8Array | null = null;
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const line = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = scanlines.subarray(y * stride, (y + 1) * stride);
    unfilterLine(filter, line, out, prev, channels);
    prev = out;
  }

  const rgb = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    const src = i * channels;
    if (channels >= 3) {
      rgb[i * 3] = scanlines[src];
      rgb[i * 3 + 1] = scanlines[src + 1];
      rgb[i * 3 + 2] = scanlines[src + 2];
    } else {
      rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = scanlines[src];
    }
  }
  return { width, height, rgb };
}

function unfilterLine(
  filter: number,
  line: Uint8Array,
  out: Uint8Array,
  prev: Uint8Array | null,
  bpp: number,
): void {
  const n = line.length;
  switch (filter) {
    case 0:
      out.set(line);
      return;
    case 1:
      for (let i = 0; i < n; i++) out[i] = (line[i] + (i >= bpp ? out[i - bpp] : 0)) & 0xff;
      return;
    case 2:
      for (let i = 0; i < n; i++) out[i] = (line[i] + (prev ? prev[i] : 0)) & 0xff;
      return;
    case 3:
      for (let i = 0; i < n; i++) {
        const left = i >= bpp ? out[i - bpp] : 0;
        const up = prev ? prev[i] : 0;
        out[i] = (line[i] + ((left + up) >> 1)) & 0xff;
      }
      return;
    case 4:
      for (let i = 0; i < n; i++) {
        const left = i >= bpp ? out[i - bpp] : 0;
        const up = prev ? prev[i] : 0;
        const upLeft = prev && i >= bpp ? prev[i - bpp] : 0;
        out[i] = (line[i] + paeth(left, up, upLeft)) & 0xff;
      }
      return;
    default:
      throw new Error(`unknown PNG filter ${filter}`);
  }
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

/** Nearest-neighbor resize to a square; returns RGB floats in [0, 1]. */
export function resizeToFloat(image: DecodedImage, size: number): Float64Array {
  const out = new Float64Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    const sy = Math.min(image.height - 1, Math.floor((y * image.height) / size));
    for (let x = 0; x < size; x++) {
      const sx = Math.min(image.width - 1, Math.floor((x * image.width) / size));
      const src = (sy * image.width + sx) * 3;
      const dst = (y * size + x) * 3;
      out[dst] = image.rgb[src] / 255;
      out[dst + 1] = image.rgb[src + 1] / 255;
      out[dst + 2] = image.rgb[src + 2] / 255;
    }
  }
  return out;
}
