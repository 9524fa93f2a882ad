/**
 * Minimal reverse-mode autograd over dense 2D float64 tensors.
 *
 * Each op allocates an output tensor and registers a closure that scatters
 * gradients back into its parents; `backward(loss)` topologically sorts the
 * graph and runs the closures in reverse. Heavy math stays in flat loops over
 * Float64Array so a toy transformer trains in seconds, while float64
 * precision keeps finite-difference gradient checks tight.
 */

export class Tensor {
  readonly rows: number;
  readonly cols: number;
  data: Float64Array;
  grad: Float64Array | null = null;
  readonly requiresGrad: boolean;
  parents: Tensor[] = [];
  backFn: (() => void) | null = null;

  constructor(rows: number, cols: number, data?: Float64Array, requiresGrad = false) {
    this.rows = rows;
    this.cols = cols;
    this.data = data ?? new Float64Array(rows * cols);
    if (this.data.length !== rows * cols) {
      throw new Error(`data length ${this.data.length} != ${rows}x${cols}`);
    }
    this.requiresGrad = requiresGrad;
  }

  get size(): number {
    return this.rows * this.cols;
  }

  ensureGrad(): Float64Array {
    if (this.grad === null) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  item(): number {
    if (this.size !== 1) throw new Error("item() requires a 1x1 tensor");
    return this.data[0];
  }
}

export function param(rows: number, cols: number, data?: Float64Array): Tensor {
  return new Tensor(rows, cols, data, true);
}

export function constant(rows: number, cols: number, data?: Float64Array): Tensor {
  return new Tensor(rows, cols, data, false);
}

function track(out: Tensor, parents: Tensor[], backFn: () => void): Tensor {
  if (parents.some((p) => p.requiresGrad)) {
    (out as { requiresGrad: boolean }).requiresGrad = true;
    out.parents = parents;
    out.backFn = backFn;
  }
  return out;
}

export function backward(loss: Tensor): void {
  const topo: Tensor[] = [];
  const seen = new Set<Tensor>();
  const stack: Array<[Tensor, number]> = [[loss, 0]];
  // Iterative DFS; training graphs can exceed the JS recursion limit.
  while (stack.length > 0) {
    const top = stack[stack.length - 1];
    const [node, idx] = top;
    if (idx < node.parents.length) {
      top[1] += 1;
      const child = node.parents[idx];
      if (!seen.has(child)) {
        seen.add(child);
        stack.push([child, 0]);
      }
    } else {
      stack.pop();
      topo.push(node);
    }
  }
  loss.ensureGrad().fill(0);
  loss.grad![0] = 1;
  for (let i = topo.length - 1; i >= 0; i--) {
    const node = topo[i];
    if (node.backFn && node.requiresGrad) node.backFn();
  }
}

export function matmul(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.rows) throw new Error(`matmul shape mismatch ${a.cols} vs ${b.rows}`);
  const m = a.rows;
  const k = a.cols;
  const n = b.cols;
  const out = new Tensor(m, n);
  const od = out.data;
  for (let i = 0; i < m; i++) {
    const ar = i * k;
    const or_ = i * n;
    for (let p = 0; p < k; p++) {
      const av = a.data[ar + p];
      if (av === 0) continue;
      const br = p * n;
      for (let j = 0; j < n; j++) od[or_ + j] += av * b.data[br + j];
    }
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < m; i++) {
        const or_ = i * n;
        const ar = i * k;
        for (let p = 0; p < k; p++) {
          const br = p * n;
          let acc = 0;
          for (let j = 0; j < n; j++) acc += g[or_ + j] * b.data[br + j];
          ga[ar + p] += acc;
        }
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < m; i++) {
        const or_ = i * n;
        const ar = i * k;
        for (let p = 0; p < k; p++) {
          const av = a.data[ar + p];
          if (av === 0) continue;
          const br = p * n;
          for (let j = 0; j < n; j++) gb[br + j] += av * g[or_ + j];
        }
      }
    }
  });
}

/** a[m,k] x b[n,k]^T -> [m,n]; avoids materializing transposes for attention. */
export function matmulBT(a: Tensor, b: Tensor): Tensor {
  if (a.cols !== b.cols) throw new Error(`matmulBT shape mismatch ${a.cols} vs ${b.cols}`);
  const m = a.rows;
  const k = a.cols;
  const n = b.rows;
  const out = new Tensor(m, n);
  for (let i = 0; i < m; i++) {
    const ar = i * k;
    const or_ = i * n;
    for (let j = 0; j < n; j++) {
      const br = j * k;
      let acc = 0;
      for (let p = 0; p < k; p++) acc += a.data[ar + p] * b.data[br + p];
      out.data[or_ + j] = acc;
    }
  }
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < m; i++) {
        const or_ = i * n;
        const ar = i * k;
        for (let j = 0; j < n; j++) {
          const gv = g[or_ + j];
          if (gv === 0) continue;
          const br = j * k;
          for (let p = 0; p < k; p++) ga[ar + p] += gv * b.data[br + p];
        }
      }
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < m; i++) {
        const or_ = i * n;
        const ar = i * k;
        for (let j = 0; j < n; j++) {
          const gv = g[or_ + j];
          if (gv === 0) continue;
          const br = j * k;
          for (let p = 0; p < k; p++) gb[br + p] += gv * a.data[ar + p];
        }
      }
    }
  });
}

export function add(a: Tensor, b: Tensor): Tensor {
  if (a.rows !== b.rows || a.cols !== b.cols) throw new Error("add shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] + b.data[i];
  return track(out, [a, b], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (b.requiresGrad) {
      const gb = b.ensureGrad();
      for (let i = 0; i < g.length; i++) gb[i] += g[i];
    }
  });
}

/** a[m,n] + row[1,n] broadcast over rows. */
export function addRow(a: Tensor, row: Tensor): Tensor {
  if (row.rows !== 1 || row.cols !== a.cols) throw new Error("addRow shape mismatch");
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < a.rows; i++) {
    const r = i * a.cols;
    for (let j = 0; j < a.cols; j++) out.data[r + j] = a.data[r + j] + row.data[j];
  }
  return track(out, [a, row], () => {
    const g = out.grad!;
    if (a.requiresGrad) {
      const ga = a.ensureGrad();
      for (let i = 0; i < g.length; i++) ga[i] += g[i];
    }
    if (row.requiresGrad) {
      const gr = row.ensureGrad();
      for (let i = 0; i < a.rows; i++) {
        const r = i * a.cols;
        for (let j = 0; j < a.cols; j++) gr[j] += g[r + j];
      }
    }
  });
}

export function scale(a: Tensor, s: number): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * s;
  return track(out, [a], () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const g = out.grad!;
    for (let i = 0; i < g.length; i++) ga[i] += g[i] * s;
  });
}

export function relu(a: Tensor): Tensor {
  const out = new Tensor(a.rows, a.cols);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] > 0 ? a.data[i] : 0;
  return track(out, [a], () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const g = out.grad!;
    for (let i = 0; i < g.length; i++) if (a.data[i] > 0) ga[i] += g[i];
  });
}

/** Row-wise RMS normalization (no learned gain). */
export function rmsnormRows(a: Tensor, eps = 1e-5): Tensor {
  const out = new Tensor(a.rows, a.cols);
  const n = a.cols;
  const inv = new Float64Array(a.rows);
  for (let i = 0; i < a.rows; i++) {
    const r = i * n;
    let ms = 0;
    for (let j = 0; j < n; j++) ms += a.data[r + j] * a.data[r + j];
    const invR = 1 / Math.sqrt(ms / n + eps);
    inv[i] = invR;
    for (let j = 0; j < n; j++) out.data[r + j] = a.data[r + j] * invR;
  }
  return track(out, [a], () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const g = out.grad!;
    for (let i = 0; i < a.rows; i++) {
      const r = i * n;
      const invR = inv[i];
      let dot = 0;
      for (let j = 0; j < n; j++) dot += g[r + j] * a.data[r + j];
      const k = (dot * invR * invR * invR) / n;
      for (let j = 0; j < n; j++) ga[r + j] += g[r + j] * invR - a.data[r + j] * k;
    }
  });
}

/**
 * Row-wise softmax over columns; with `causal`, row i only sees columns <= i
 * (masked columns come out exactly 0).
 */
export function softmaxRows(a: Tensor, causal = false): Tensor {
  const out = new Tensor(a.rows, a.cols);
  const n = a.cols;
  for (let i = 0; i < a.rows; i++) {
    const limit = causal ? Math.min(i + 1, n) : n;
    const r = i * n;
    let max = -Infinity;
    for (let j = 0; j < limit; j++) if (a.data[r + j] > max) max = a.data[r + j];
    let total = 0;
    for (let j = 0; j < limit; j++) {
      const e = Math.exp(a.data[r + j] - max);
      out.data[r + j] = e;
      total += e;
    }
    for (let j = 0; j < limit; j++) out.data[r + j] /= total;
  }
  return track(out, [a], () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const g = out.grad!;
    for (let i = 0; i < a.rows; i++) {
      const limit = causal ? Math.min(i + 1, n) : n;
      const r = i * n;
      let dot = 0;
      for (let j = 0; j < limit; j++) dot += g[r + j] * out.data[r + j];
      for (let j = 0; j < limit; j++) ga[r + j] += (g[r + j] - dot) * out.data[r + j];
    }
  });
}

/** Gather rows of `table` by index; backward scatter-adds into the table. */
export function gatherRows(table: Tensor, indices: Int32Array): Tensor {
  const n = table.cols;
  const out = new Tensor(indices.length, n);
  for (let i = 0; i < indices.length; i++) {
    const idx = indices[i];
    if (idx < 0 || idx >= table.rows) throw new Error(`gather index ${idx} out of range`);
    out.data.set(table.data.subarray(idx * n, idx * n + n), i * n);
  }
  return track(out, [table], () => {
    if (!table.requiresGrad) return;
    const gt = table.ensureGrad();
    const g = out.grad!;
    for (let i = 0; i < indices.length; i++) {
      const dst = indices[i] * n;
      const src = i * n;
      for (let j = 0; j < n; j++) gt[dst + j] += g[src + j];
    }
  });
}

export function concatRows(parts: Tensor[]): Tensor {
  if (parts.length === 0) throw new Error("concatRows of nothing");
  const cols = parts[0].cols;
  const rows = parts.reduce((acc, p) => {
    if (p.cols !== cols) throw new Error("concatRows column mismatch");
    return acc + p.rows;
  }, 0);
  const out = new Tensor(rows, cols);
  let offset = 0;
  for (const p of parts) {
    out.data.set(p.data, offset * cols);
    offset += p.rows;
  }
  return track(out, parts, () => {
    const g = out.grad!;
    let off = 0;
    for (const p of parts) {
      if (p.requiresGrad) {
        const gp = p.ensureGrad();
        const base = off * cols;
        for (let i = 0; i < p.size; i++) gp[i] += g[base + i];
      }
      off += p.rows;
    }
  });
}

export function sliceCols(a: Tensor, start: number, end: number): Tensor {
  const n = end - start;
  const out = new Tensor(a.rows, n);
  for (let i = 0; i < a.rows; i++) {
    out.data.set(a.data.subarray(i * a.cols + start, i * a.cols + end), i * n);
  }
  return track(out, [a], () => {
    if (!a.requiresGrad) return;
    const ga = a.ensureGrad();
    const g = out.grad!;
    for (let i = 0; i < a.rows; i++) {
      const src = i * n;
      const dst = i * a.cols + start;
      for (let j = 0; j < n; j++) ga[dst + j] += g[src + j];
    }
  });
}

export function concatCols(parts: Tensor[]): Tensor {
  const rows = parts[0].rows;
  const cols = parts.reduce((acc, p) => {
    if (p.rows !== rows) throw new Error("concatCols row mismatch");
    return acc + p.cols;
  }, 0);
  const out = new Tensor(rows, cols);
  let offset = 0;
  for (const p of parts) {
    for (let i = 0; i < rows; i++) out.data.set(p.data.subarray(i * p.cols, (i + 1) * p.cols), i * cols + offset);
    offset += p.cols;
  }
  return track(out, parts, () => {
    const g = out.grad!;
    let off = 0;
    for (const p of parts) {
      if (p.requiresGrad) {
        const gp = p.ensureGrad();
        for (let i = 0; i < rows; i++) {
          const src = i * cols + off;
          const dst = i * p.cols;
          for (let j = 0; j < p.cols; j++) gp[dst + j] += g[src + j];
        }
      }
      off += p.cols;
    }
  });
}

/**
 * Summed cross-entropy over label positions where mask is set.
 * Unmasked positions contribute nothing and their label values are ignored,
 * so perturbing them leaves the loss bit-identical.
 */
export function crossEntropySumMasked(
  logits: Tensor,
  labels: Int32Array,
  mask: Uint8Array,
): { loss: Tensor; count: number } {
  if (labels.length !== logits.rows || mask.length !== logits.rows) {
    throw new Error("labels/mask length must equal logits rows");
  }
  const n = logits.cols;
  const probs: Array<Float64Array | null> = new Array(logits.rows).fill(null);
  let total = 0;
  let count = 0;
  for (let t = 0; t < logits.rows; t++) {
    if (!mask[t]) continue;
    const r = t * n;
    let max = -Infinity;
    for (let j = 0; j < n; j++) if (logits.data[r + j] > max) max = logits.data[r + j];
    let z = 0;
    const p = new Float64Array(n);
    for (let j = 0; j < n; j++) {
      const e = Math.exp(logits.data[r + j] - max);
      p[j] = e;
      z += e;
    }
    for (let j = 0; j < n; j++) p[j] /= z;
    probs[t] = p;
    total += Math.log(z) + max - logits.data[r + labels[t]];
    count += 1;
  }
  const out = new Tensor(1, 1, Float64Array.of(total));
  if (count === 0) return { loss: out, count };
  return {
    loss: track(out, [logits], () => {
      if (!logits.requiresGrad) return;
      const gl = logits.ensureGrad();
      const g = out.grad![0];
      for (let t = 0; t < logits.rows; t++) {
        const p = probs[t];
        if (!p) continue;
        const r = t * n;
        for (let j = 0; j < n; j++) gl[r + j] += g * p[j];
        gl[r + labels[t]] -= g;
      }
    }),
    count,
  };
}
