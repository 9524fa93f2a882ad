/** Greedy decoding: deterministic argmax until end-of-turn or the budget. */

import { TooLong } from "./errors.js";
import { IMAGE_PLACEHOLDER } from "./data.js";
import { ToyVlm } from "./model.js";
import { CharTokenizer, EOT } from "./tokenizer.js";
import { Tensor, concatRows, gatherRows } from "./tensor.js";

export function generateGreedy(
  model: ToyVlm,
  tokenizer: CharTokenizer,
  pixels: Float64Array,
  prompt: string,
  maxNewTokens: number,
): string {
  const at = prompt.indexOf(IMAGE_PLACEHOLDER);
  if (at < 0) throw new Error("prompt must contain the image placeholder");
  const preIds = tokenizer.encode(prompt.slice(0, at));
  const postIds = Array.from(tokenizer.encode(prompt.slice(at + IMAGE_PLACEHOLDER.length)));

  const generated: number[] = [];
  for (let i = 0; i < maxNewTokens; i++) {
    const vision = model.project(model.encodeImage(pixels));
    const parts: Tensor[] = [];
    if (preIds.length > 0) parts.push(gatherRows(model.wte, preIds));
    parts.push(vision);
    const tail = Int32Array.from([...postIds, ...generated]);
    if (tail.length > 0) parts.push(gatherRows(model.wte, tail));
    const length = preIds.length + vision.rows + tail.length;
    if (length + 1 > model.lm.maxLen) {
      throw new TooLong(`generation would exceed max_len ${model.lm.maxLen}`);
    }
    const logits = model.forward(concatRows(parts));
    const next = argmaxRow(logits, logits.rows - 1);
    if (next === EOT) break;
    generated.push(next);
  }
  return tokenizer.decode(generated.concat([EOT]));
}

function argmaxRow(t: Tensor, row: number): number {
  const base = row * t.cols;
  let best = 0;
  let bestVal = -Infinity;
  for (let j = 0; j < t.cols; j++) {
    if (t.data[base + j] > bestVal) {
      bestVal = t.data[base + j];
      best = j;
    }
  }
  return best;
}
