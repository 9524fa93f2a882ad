/** Model and training configuration with the curriculum's stage defaults. */

import { readFileSync } from "node:fs";

export type Stage = "alignment" | "instruction";

export interface VisionEncoderConfig {
  imageSize: number;
  patchSize: number;
  dV: number;
}

export interface ToyLMConfig {
  vocabSize: number;
  dLm: number;
  nLayers: number;
  nHeads: number;
  maxLen: number;
}

export interface CurriculumConfig {
  stage: Stage;
  learningRate: number;
  warmupRatio: number;
  batchSize: number;
  epochs: number;
  seed: number;
  weightDecay: number;
}

// Stage defaults: alignment trains at 1e-3, instruction tuning at 2e-5,
// both with 3% linear warmup and a single epoch.
export const STAGE_DEFAULTS: Record<Stage, Omit<CurriculumConfig, "stage">> = {
  alignment: { learningRate: 1e-3, warmupRatio: 0.03, batchSize: 4, epochs: 1, seed: 0, weightDecay: 0 },
  instruction: { learningRate: 2e-5, warmupRatio: 0.03, batchSize: 4, epochs: 1, seed: 0, weightDecay: 0 },
};

export function curriculumConfig(stage: Stage, overrides: Partial<CurriculumConfig> = {}): CurriculumConfig {
  const cfg = { stage, ...STAGE_DEFAULTS[stage], ...overrides };
  if (cfg.learningRate <= 0) throw new Error("learningRate > 0");
  if (cfg.warmupRatio < 0 || cfg.warmupRatio > 1) throw new Error("warmupRatio in [0, 1]");
  return cfg;
}

export interface TrainerConfig {
  data: string;
  out: string;
  vision: VisionEncoderConfig;
  lm: Omit<ToyLMConfig, "vocabSize">;
  stages: { alignment: CurriculumConfig; instruction: CurriculumConfig };
  /**
   * Restrict stage 1 to caption-like pairs. Shard records do not carry the
   * pair category, so the filter keeps alignment samples whose target text
   * is at most captionMaxChars characters (contexts are long paragraphs).
   */
  captionOnly: boolean;
  captionMaxChars: number;
}

export function validateVisionConfig(cfg: VisionEncoderConfig): void {
  if (cfg.imageSize % cfg.patchSize !== 0) {
    throw new Error(`imageSize ${cfg.imageSize} not divisible by patchSize ${cfg.patchSize}`);
  }
}

export function nPatches(cfg: VisionEncoderConfig): number {
  const side = cfg.imageSize / cfg.patchSize;
  return side * side;
}

export function loadTrainerConfig(path: string): TrainerConfig {
  const obj = JSON.parse(readFileSync(path, "utf-8"));
  const vision: VisionEncoderConfig = { imageSize: 32, patchSize: 8, dV: 24, ...obj.vision };
  validateVisionConfig(vision);
  const lm = { dLm: 64, nLayers: 3, nHeads: 4, maxLen: 256, ...obj.lm };
  if (lm.dLm % lm.nHeads !== 0) throw new Error("dLm must be divisible by nHeads");
  const stages = obj.stages ?? {};
  return {
    data: obj.data,
    out: obj.out ?? "runs/toyvlm",
    vision,
    lm,
    stages: {
      alignment: curriculumConfig("alignment", stages.alignment),
      instruction: curriculumConfig("instruction", stages.instruction),
    },
    captionOnly: obj.captionOnly ?? false,
    captionMaxChars: obj.captionMaxChars ?? 120,
  };
}
