/**
 * Toy vision-language model: a learned linear patch embedding with fixed
 * sinusoidal position terms, a linear vision-language adapter, and a small
 * pre-norm decoder-only transformer. Parameters are partitioned into
 * encoder / adapter / lm so the curriculum's freeze sets are enforceable.
 */

import { ShapeError } from "./errors.js";
import { gauss, mulberry32 } from "./rng.js";
import {
  Tensor,
  add,
  addRow,
  concatCols,
  constant,
  gatherRows,
  matmul,
  matmulBT,
  param,
  relu,
  rmsnormRows,
  scale,
  sliceCols,
  softmaxRows,
} from "./tensor.js";
import { ToyLMConfig, VisionEncoderConfig, nPatches, validateVisionConfig } from "./config.js";

export type Partition = "encoder" | "adapter" | "lm";

export interface ParamEntry {
  name: string;
  partition: Partition;
  tensor: Tensor;
}

export interface AttentionCapture {
  rows: number;
  cols: number;
  data: Float64Array;
}

interface Block {
  wq: Tensor;
  wk: Tensor;
  wv: Tensor;
  wo: Tensor;
  fc1: Tensor;
  fc2: Tensor;
}

export class ToyVlm {
  readonly vision: VisionEncoderConfig;
  readonly lm: ToyLMConfig;
  readonly params: ParamEntry[] = [];

  patchW!: Tensor;
  patchB!: Tensor;
  adapterW!: Tensor;
  adapterB!: Tensor;
  wte!: Tensor;
  wpe!: Tensor;
  head!: Tensor;
  blocks: Block[] = [];

  private readonly visionPos: Tensor;

  constructor(vision: VisionEncoderConfig, lm: ToyLMConfig, seed = 0) {
    validateVisionConfig(vision);
    if (lm.dLm % lm.nHeads !== 0) throw new Error("dLm must be divisible by nHeads");
    this.vision = vision;
    this.lm = lm;
    const rng = mulberry32(seed);
    const patchDim = vision.patchSize * vision.patchSize * 3;

    const mat = (name: string, partition: Partition, rows: number, cols: number, std: number): Tensor => {
      const t = param(rows, cols);
      for (let i = 0; i < t.size; i++) t.data[i] = gauss(rng, 0, std);
      this.params.push({ name, partition, tensor: t });
      return t;
    };

    this.patchW = mat("encoder.patch_w", "encoder", patchDim, vision.dV, 1 / Math.sqrt(patchDim));
    this.patchB = mat("encoder.patch_b", "encoder", 1, vision.dV, 0);
    this.adapterW = mat("adapter.w", "adapter", vision.dV, lm.dLm, 1 / Math.sqrt(vision.dV));
    this.adapterB = mat("adapter.b", "adapter", 1, lm.dLm, 0);
    this.wte = mat("lm.wte", "lm", lm.vocabSize, lm.dLm, 0.08);
    this.wpe = mat("lm.wpe", "lm", lm.maxLen, lm.dLm, 0.08);
    for (let l = 0; l < lm.nLayers; l++) {
      this.blocks.push({
        wq: mat(`lm.layer${l}.wq`, "lm", lm.dLm, lm.dLm, 1 / Math.sqrt(lm.dLm)),
        wk: mat(`lm.layer${l}.wk`, "lm", lm.dLm, lm.dLm, 1 / Math.sqrt(lm.dLm)),
        wv: mat(`lm.layer${l}.wv`, "lm", lm.dLm, lm.dLm, 1 / Math.sqrt(lm.dLm)),
        wo: mat(`lm.layer${l}.wo`, "lm", lm.dLm, lm.dLm, 1 / Math.sqrt(lm.dLm)),
        fc1: mat(`lm.layer${l}.fc1`, "lm", lm.dLm, 4 * lm.dLm, 1 / Math.sqrt(lm.dLm)),
        fc2: mat(`lm.layer${l}.fc2`, "lm", 4 * lm.dLm, lm.dLm, 1 / Math.sqrt(4 * lm.dLm)),
      });
    }
    this.head = mat("lm.head", "lm", lm.dLm, lm.vocabSize, 1 / Math.sqrt(lm.dLm));
    this.visionPos = sinusoidalPositions(nPatches(vision), vision.dV);
  }

  partition(name: Partition): ParamEntry[] {
    return this.params.filter((p) => p.partition === name);
  }

  /** Raster-order patch embeddings for one image (RGB floats in [0, 1]). */
  encodeImage(pixels: Float64Array): Tensor {
    const { imageSize, patchSize } = this.vision;
    if (pixels.length !== imageSize * imageSize * 3) {
      throw new ShapeError(
        `expected ${imageSize}x${imageSize} RGB pixels, got length ${pixels.length}`,
      );
    }
    const side = imageSize / patchSize;
    const patchDim = patchSize * patchSize * 3;
    const patches = constant(side * side, patchDim);
    for (let py = 0; py < side; py++) {
      for (let px = 0; px < side; px++) {
        const row = (py * side + px) * patchDim;
        let k = 0;
        for (let y = 0; y < patchSize; y++) {
          const sy = py * patchSize + y;
          for (let x = 0; x < patchSize; x++) {
            const sx = px * patchSize + x;
            const src = (sy * imageSize + sx) * 3;
            patches.data[row + k++] = pixels[src];
            patches.data[row + k++] = pixels[src + 1];
            patches.data[row + k++] = pixels[src + 2];
          }
        }
      }
    }
    return add(addRow(matmul(patches, this.patchW), this.patchB), this.visionPos);
  }

  /** Linear vision-language adapter: features x W + b. */
  project(features: Tensor): Tensor {
    if (features.cols !== this.vision.dV) {
      throw new ShapeError(`adapter expects ${this.vision.dV} columns, got ${features.cols}`);
    }
    return addRow(matmul(features, this.adapterW), this.adapterB);
  }

  /**
   * Decoder forward over an already-embedded sequence; returns logits [L, V].
   * When `captureAttention` is given, every head's row-stochastic attention
   * matrix is appended to it.
   */
  forward(embeddings: Tensor, captureAttention?: AttentionCapture[]): Tensor {
    const L = embeddings.rows;
    if (L > this.lm.maxLen) throw new ShapeError(`sequence ${L} exceeds max_len ${this.lm.maxLen}`);
    const positions = new Int32Array(L);
    for (let i = 0; i < L; i++) positions[i] = i;
    let x = add(embeddings, gatherRows(this.wpe, positions));

    const headDim = this.lm.dLm / this.lm.nHeads;
    for (const block of this.blocks) {
      const xn = rmsnormRows(x);
      const q = matmul(xn, block.wq);
      const k = matmul(xn, block.wk);
      const v = matmul(xn, block.wv);
      const headsOut: Tensor[] = [];
      for (let h = 0; h < this.lm.nHeads; h++) {
        const lo = h * headDim;
        const hi = lo + headDim;
        const scores = scale(matmulBT(sliceCols(q, lo, hi), sliceCols(k, lo, hi)), 1 / Math.sqrt(headDim));
        const probs = softmaxRows(scores, true);
        captureAttention?.push({ rows: probs.rows, cols: probs.cols, data: Float64Array.from(probs.data) });
        headsOut.push(matmul(probs, sliceCols(v, lo, hi)));
      }
      x = add(x, matmul(concatCols(headsOut), block.wo));
      const mn = rmsnormRows(x);
      x = add(x, matmul(relu(matmul(mn, block.fc1)), block.fc2));
    }
    return matmul(rmsnormRows(x), this.head);
  }
}

/** Fixed sin/cos position terms, the classic interleaved layout. */
export function sinusoidalPositions(n: number, dim: number): Tensor {
  const out = constant(n, dim);
  for (let pos = 0; pos < n; pos++) {
    for (let i = 0; i < dim; i += 2) {
      const angle = pos / Math.pow(10000, i / dim);
      out.data[pos * dim + i] = Math.sin(angle);
      if (i + 1 < dim) out.data[pos * dim + i + 1] = Math.cos(angle);
    }
  }
  return out;
}
