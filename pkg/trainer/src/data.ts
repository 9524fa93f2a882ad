/**
 * Reads the corpus pipeline's output tree (alignment/ and instruction/ shard
 * JSONL plus images/) and turns dialog samples into training sequences.
 *
 * A sample becomes the token stream
 *     [human-pre] [vision x P] [human-post] [assistant ... <eot>] ...
 * where the vision block replaces the "<image>" placeholder. Inputs are the
 * stream without its final <eot>; labels are the stream shifted left by one
 * (so the final <eot> is predicted at the last assistant position); the loss
 * mask is true exactly where the predicted token belongs to an assistant
 * turn, including its end-of-turn token.
 */

import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { TooLong } from "./errors.js";
import { decodePng, resizeToFloat } from "./png.js";
import { CharTokenizer, EOT } from "./tokenizer.js";

export const IMAGE_PLACEHOLDER = "<image>";

export interface DialogTurn {
  role: "human" | "assistant";
  text: string;
}

export interface DialogSample {
  id: string;
  image_ref: string;
  turns: DialogTurn[];
  task: "caption" | "vqa";
  template_id: number;
}

export interface Corpus {
  alignment: DialogSample[];
  instruction: DialogSample[];
}

export function readShardDir(dir: string): DialogSample[] {
  let names: string[];
  try {
    names = readdirSync(dir).filter((n) => n.endsWith(".jsonl")).sort();
  } catch {
    return [];
  }
  const samples: DialogSample[] = [];
  for (const name of names) {
    for (const line of readFileSync(join(dir, name), "utf-8").split("\n")) {
      if (!line.trim()) continue;
      samples.push(JSON.parse(line) as DialogSample);
    }
  }
  return samples;
}

export function loadCorpus(dataRoot: string): Corpus {
  return {
    alignment: readShardDir(join(dataRoot, "alignment")),
    instruction: readShardDir(join(dataRoot, "instruction")),
  };
}

export function loadImagePixels(dataRoot: string, imageRef: string, imageSize: number): Float64Array {
  const decoded = decodePng(readFileSync(join(dataRoot, imageRef)));
  return resizeToFloat(decoded, imageSize);
}

export function vocabFromCorpus(corpus: Corpus): CharTokenizer {
  const texts: string[] = [];
  for (const sample of [...corpus.alignment, ...corpus.instruction]) {
    for (const turn of sample.turns) texts.push(turn.text.split(IMAGE_PLACEHOLDER).join(""));
  }
  return CharTokenizer.fromTexts(texts);
}

export interface PreparedSample {
  id: string;
  pixels: Float64Array;
  /** Human tokens preceding the vision block. */
  preIds: Int32Array;
  /** Everything after the vision block, final <eot> excluded (label-only). */
  afterIds: Int32Array;
  /** Per input position, the id of the next stream token (-1 under vision). */
  labels: Int32Array;
  /** True where the predicted token belongs to an assistant turn. */
  mask: Uint8Array;
  /** Input length: nPatches + text tokens. */
  length: number;
  prompt: string;
  reference: string;
}

const KIND_HUMAN = 0;
const KIND_VISION = 1;
const KIND_ASSISTANT = 2;

export function prepareSample(
  sample: DialogSample,
  tokenizer: CharTokenizer,
  patches: number,
  maxLen: number,
  pixels: Float64Array,
): PreparedSample {
  const first = sample.turns[0].text;
  const at = first.indexOf(IMAGE_PLACEHOLDER);
  if (at < 0) throw new Error(`sample ${sample.id} has no image placeholder`);
  const pre = first.slice(0, at);
  const post = first.slice(at + IMAGE_PLACEHOLDER.length);

  const ids: number[] = [];
  const kinds: number[] = [];
  const push = (tokenIds: ArrayLike<number>, kind: number) => {
    for (let i = 0; i < tokenIds.length; i++) {
      ids.push(tokenIds[i]);
      kinds.push(kind);
    }
  };
  push(tokenizer.encode(pre), KIND_HUMAN);
  const preLen = ids.length;
  for (let i = 0; i < patches; i++) {
    ids.push(-1);
    kinds.push(KIND_VISION);
  }
  push(tokenizer.encode(post), KIND_HUMAN);
  for (let t = 1; t < sample.turns.length; t++) {
    const turn = sample.turns[t];
    if (turn.role === "assistant") {
      push(tokenizer.encode(turn.text), KIND_ASSISTANT);
      push([EOT], KIND_ASSISTANT);
    } else {
      push(tokenizer.encode(turn.text), KIND_HUMAN);
    }
  }

  const total = ids.length;
  const length = total - 1; // final <eot> is label-only
  if (length > maxLen) {
    throw new TooLong(`sample ${sample.id}: ${length} positions exceed max_len ${maxLen}`);
  }
  const labels = new Int32Array(length);
  const mask = new Uint8Array(length);
  for (let t = 0; t < length; t++) {
    labels[t] = ids[t + 1];
    mask[t] = kinds[t + 1] === KIND_ASSISTANT ? 1 : 0;
  }
  const afterIds = new Int32Array(length - preLen - patches);
  for (let i = 0; i < afterIds.length; i++) afterIds[i] = ids[preLen + patches + i];

  const assistantTurns = sample.turns.filter((t) => t.role === "assistant");
  return {
    id: sample.id,
    pixels,
    preIds: tokenizer.encode(pre),
    afterIds,
    labels,
    mask,
    length,
    prompt: first,
    reference: assistantTurns[assistantTurns.length - 1]?.text ?? "",
  };
}

export function prepareAll(
  samples: DialogSample[],
  tokenizer: CharTokenizer,
  dataRoot: string,
  patches: number,
  maxLen: number,
  imageSize: number,
): PreparedSample[] {
  return samples.map((s) =>
    prepareSample(s, tokenizer, patches, maxLen, loadImagePixels(dataRoot, s.image_ref, imageSize)),
  );
}
