/**
 * Trainer CLI.
 *
 *   train    --config <file> [--stage alignment|instruction|all] [--init <ckpt>]
 *   generate --checkpoint <file> --image <png> --prompt <text with <image>>
 *   evaluate --checkpoint <file> --data <pipeline out dir> [--subset instruction]
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { loadCheckpoint, saveCheckpoint } from "./checkpoint.js";
import { Stage, loadTrainerConfig, nPatches } from "./config.js";
import { loadCorpus, prepareAll, vocabFromCorpus } from "./data.js";
import { evaluateModel } from "./evaluate.js";
import { generateGreedy } from "./generate.js";
import { ToyVlm } from "./model.js";
import { decodePng, resizeToFloat } from "./png.js";
import { CurvePoint, curvesToCsv, runStage } from "./train.js";

function cmdTrain(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      config: { type: "string" },
      stage: { type: "string", default: "all" },
      init: { type: "string" },
    },
  });
  if (!values.config) throw new Error("--config is required");
  const cfg = loadTrainerConfig(values.config);
  const corpus = loadCorpus(cfg.data);

  let model: ToyVlm;
  let tokenizer;
  if (values.init) {
    ({ model, tokenizer } = loadCheckpoint(values.init));
  } else {
    tokenizer = vocabFromCorpus(corpus);
    model = new ToyVlm(cfg.vision, { ...cfg.lm, vocabSize: tokenizer.vocabSize }, 0);
  }

  const patches = nPatches(model.vision);
  let alignData = prepareAll(corpus.alignment, tokenizer, cfg.data, patches, model.lm.maxLen, model.vision.imageSize);
  if (cfg.captionOnly) {
    alignData = alignData.filter((s) => s.reference.length <= cfg.captionMaxChars);
  }
  const instrData = prepareAll(corpus.instruction, tokenizer, cfg.data, patches, model.lm.maxLen, model.vision.imageSize);

  const stage = values.stage as Stage | "all";
  const curves: CurvePoint[] = [];
  if (stage === "alignment" || stage === "all") {
    runStage(model, alignData, cfg.stages.alignment, curves);
  }
  if (stage === "instruction" || stage === "all") {
    runStage(model, instrData, cfg.stages.instruction, curves);
  }

  mkdirSync(cfg.out, { recursive: true });
  saveCheckpoint(join(cfg.out, "model.bin"), model, tokenizer);
  writeFileSync(join(cfg.out, "losses.csv"), curvesToCsv(curves), "utf-8");
  const last = curves[curves.length - 1];
  console.log(
    `trained ${curves.length} steps (stage=${stage}); final loss ${last ? last.loss.toFixed(4) : "n/a"}; ` +
      `checkpoint ${join(cfg.out, "model.bin")}`,
  );
}

function cmdGenerate(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      image: { type: "string" },
      prompt: { type: "string" },
      "max-new-tokens": { type: "string", default: "64" },
    },
  });
  if (!values.checkpoint || !values.image || !values.prompt) {
    throw new Error("--checkpoint, --image and --prompt are required");
  }
  const { model, tokenizer } = loadCheckpoint(values.checkpoint);
  const pixels = resizeToFloat(decodePng(readFileSync(values.image)), model.vision.imageSize);
  const text = generateGreedy(model, tokenizer, pixels, values.prompt, Number(values["max-new-tokens"]));
  console.log(text);
}

function cmdEvaluate(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: "string" },
      data: { type: "string" },
      subset: { type: "string", default: "instruction" },
      "max-new-tokens": { type: "string", default: "32" },
    },
  });
  if (!values.checkpoint || !values.data) throw new Error("--checkpoint and --data are required");
  const { model, tokenizer } = loadCheckpoint(values.checkpoint);
  const corpus = loadCorpus(values.data);
  const samples = values.subset === "alignment" ? corpus.alignment : corpus.instruction;
  const prepared = prepareAll(
    samples, tokenizer, values.data, nPatches(model.vision), model.lm.maxLen, model.vision.imageSize,
  );
  const metrics = evaluateModel(model, tokenizer, prepared, Number(values["max-new-tokens"]));
  console.log(JSON.stringify({ exact_match: metrics.exactMatch, token_f1: metrics.tokenF1 }));
}

function main(): void {
  const [command, ...rest] = process.argv.slice(2);
  switch (command) {
    case "train":
      cmdTrain(rest);
      break;
    case "generate":
      cmdGenerate(rest);
      break;
    case "evaluate":
      cmdEvaluate(rest);
      break;
    default:
      console.error("usage: cli <train|generate|evaluate> [options]");
      process.exitCode = 1;
  }
}

main();
