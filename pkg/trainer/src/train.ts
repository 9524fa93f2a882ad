/**
 * Two-stage curriculum training with verifiable freezing contracts.
 *
 * Stage "alignment" freezes the image encoder and the language model and fits
 * only the vision-language adapter; stage "instruction" keeps the encoder
 * frozen and fits adapter + language model. Frozen partitions are never
 * written by the optimizer and carry no optimizer state, so their bytes are
 * unchanged across any number of steps.
 */

import { CurriculumConfig, Stage } from "./config.js";
import { NonFiniteLoss, StageMismatch } from "./errors.js";
import { PreparedSample } from "./data.js";
import { Partition, ToyVlm } from "./model.js";
import { mulberry32, shuffleInPlace } from "./rng.js";
import { Tensor, add, backward, concatRows, crossEntropySumMasked, gatherRows, scale } from "./tensor.js";

const ADAM_BETA1 = 0.9;
const ADAM_BETA2 = 0.999;
const ADAM_EPS = 1e-8;

export function frozenForStage(stage: Stage): Set<Partition> {
  return stage === "alignment" ? new Set<Partition>(["encoder", "lm"]) : new Set<Partition>(["encoder"]);
}

interface Moments {
  m: Float64Array;
  v: Float64Array;
}

export interface TrainState {
  model: ToyVlm;
  stage: Stage;
  frozen: Set<Partition>;
  step: number;
  /** Optimizer updates actually applied (bias-correction clock). */
  updates: number;
  moments: Map<string, Moments>;
}

export function initTrainState(model: ToyVlm, stage: Stage): TrainState {
  const frozen = frozenForStage(stage);
  const moments = new Map<string, Moments>();
  for (const entry of model.params) {
    if (!frozen.has(entry.partition)) {
      moments.set(entry.name, {
        m: new Float64Array(entry.tensor.size),
        v: new Float64Array(entry.tensor.size),
      });
    }
  }
  return { model, stage, frozen, step: 0, updates: 0, moments };
}

export function lrAt(step: number, totalSteps: number, cfg: CurriculumConfig): number {
  const warmupSteps = Math.max(1, Math.round(cfg.warmupRatio * totalSteps));
  if (step < warmupSteps) return (cfg.learningRate * (step + 1)) / warmupSteps;
  return cfg.learningRate;
}

export function forwardBatch(
  model: ToyVlm,
  batch: PreparedSample[],
): { loss: Tensor; count: number } {
  let sum: Tensor | null = null;
  let count = 0;
  for (const sample of batch) {
    const vision = model.project(model.encodeImage(sample.pixels));
    const parts: Tensor[] = [];
    if (sample.preIds.length > 0) parts.push(gatherRows(model.wte, sample.preIds));
    parts.push(vision);
    if (sample.afterIds.length > 0) parts.push(gatherRows(model.wte, sample.afterIds));
    const logits = model.forward(concatRows(parts));
    const { loss, count: c } = crossEntropySumMasked(logits, sample.labels, sample.mask);
    count += c;
    sum = sum === null ? loss : add(sum, loss);
  }
  if (sum === null || count === 0) {
    return { loss: new Tensor(1, 1), count: 0 };
  }
  return { loss: scale(sum, 1 / count), count };
}

export function trainStep(
  state: TrainState,
  batch: PreparedSample[],
  cfg: CurriculumConfig,
  lr?: number,
): number {
  const expected = frozenForStage(cfg.stage);
  if (state.stage !== cfg.stage || !sameSet(state.frozen, expected)) {
    throw new StageMismatch(`state frozen set does not match stage ${cfg.stage}`);
  }
  for (const entry of state.model.params) entry.tensor.zeroGrad();

  const { loss, count } = forwardBatch(state.model, batch);
  const lossValue = loss.item();
  if (!Number.isFinite(lossValue)) throw new NonFiniteLoss(`loss = ${lossValue}`);
  if (count === 0) {
    state.step += 1;
    return 0;
  }
  backward(loss);

  const rate = lr ?? cfg.learningRate;
  state.updates += 1;
  const t = state.updates;
  const c1 = 1 - Math.pow(ADAM_BETA1, t);
  const c2 = 1 - Math.pow(ADAM_BETA2, t);
  for (const entry of state.model.params) {
    const moments = state.moments.get(entry.name);
    if (!moments) continue; // frozen partition: no state, no update
    const p = entry.tensor;
    const g = p.grad;
    if (!g) continue;
    for (let i = 0; i < p.size; i++) {
      moments.m[i] = ADAM_BETA1 * moments.m[i] + (1 - ADAM_BETA1) * g[i];
      moments.v[i] = ADAM_BETA2 * moments.v[i] + (1 - ADAM_BETA2) * g[i] * g[i];
      const mHat = moments.m[i] / c1;
      const vHat = moments.v[i] / c2;
      p.data[i] -= rate * (mHat / (Math.sqrt(vHat) + ADAM_EPS) + cfg.weightDecay * p.data[i]);
    }
  }
  state.step += 1;
  return lossValue;
}

function sameSet(a: Set<Partition>, b: Set<Partition>): boolean {
  if (a.size !== b.size) return false;
  for (const x of a) if (!b.has(x)) return false;
  return true;
}

export interface CurvePoint {
  stage: Stage;
  step: number;
  loss: number;
  lr: number;
}

export function runStage(
  model: ToyVlm,
  data: PreparedSample[],
  cfg: CurriculumConfig,
  curves: CurvePoint[],
  maxSteps?: number,
): TrainState {
  const state = initTrainState(model, cfg.stage);
  if (data.length === 0 || cfg.epochs <= 0) return state;
  const stepsPerEpoch = Math.ceil(data.length / cfg.batchSize);
  let totalSteps = stepsPerEpoch * cfg.epochs;
  if (maxSteps !== undefined) totalSteps = Math.min(totalSteps, maxSteps);
  const rng = mulberry32(cfg.seed + (cfg.stage === "alignment" ? 1 : 2));
  let step = 0;
  outer: for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const order = data.map((_, i) => i);
    shuffleInPlace(order, rng);
    for (let b = 0; b < stepsPerEpoch; b++) {
      if (step >= totalSteps) break outer;
      const batch = order.slice(b * cfg.batchSize, (b + 1) * cfg.batchSize).map((i) => data[i]);
      const lr = lrAt(step, totalSteps, cfg);
      const loss = trainStep(state, batch, cfg, lr);
      curves.push({ stage: cfg.stage, step, loss, lr });
      step += 1;
    }
  }
  return state;
}

export interface CurriculumResult {
  state: TrainState;
  curves: CurvePoint[];
}

/** Alignment stage, then instruction tuning on the same adapter. */
export function runCurriculum(
  model: ToyVlm,
  alignmentData: PreparedSample[],
  instructionData: PreparedSample[],
  alignmentCfg: CurriculumConfig,
  instructionCfg: CurriculumConfig,
): CurriculumResult {
  const curves: CurvePoint[] = [];
  let state = runStage(model, alignmentData, alignmentCfg, curves);
  state = runStage(model, instructionData, instructionCfg, curves);
  return { state, curves };
}

export function curvesToCsv(curves: CurvePoint[]): string {
  const lines = ["stage,step,loss,lr"];
  for (const p of curves) lines.push(`${p.stage},${p.step},${p.loss},${p.lr}`);
  return lines.join("\n") + "\n";
}
