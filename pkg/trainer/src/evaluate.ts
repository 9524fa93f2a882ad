/** Exact-match and token-F1 evaluation over pipeline-format eval samples. */

import { PreparedSample } from "./data.js";
import { generateGreedy } from "./generate.js";
import { ToyVlm } from "./model.js";
import { CharTokenizer, ruleTokens } from "./tokenizer.js";

export interface EvalMetrics {
  exactMatch: number;
  tokenF1: number;
}

export function normalizeWhitespace(text: string): string {
  return text.split(/\s+/).filter(Boolean).join(" ");
}

/** Multiset F1 over rule-based tokens (CJK chars + ASCII alnum runs). */
export function tokenF1(generated: string, reference: string): number {
  const gen = ruleTokens(generated);
  const ref = ruleTokens(reference);
  if (gen.length === 0 && ref.length === 0) return 1;
  if (gen.length === 0 || ref.length === 0) return 0;
  const counts = new Map<string, number>();
  for (const t of ref) counts.set(t, (counts.get(t) ?? 0) + 1);
  let overlap = 0;
  for (const t of gen) {
    const c = counts.get(t) ?? 0;
    if (c > 0) {
      overlap += 1;
      counts.set(t, c - 1);
    }
  }
  if (overlap === 0) return 0;
  const precision = overlap / gen.length;
  const recall = overlap / ref.length;
  return (2 * precision * recall) / (precision + recall);
}

export function evaluateModel(
  model: ToyVlm,
  tokenizer: CharTokenizer,
  samples: PreparedSample[],
  maxNewTokens = 32,
): EvalMetrics {
  if (samples.length === 0) return { exactMatch: 0, tokenF1: 0 };
  let exact = 0;
  let f1 = 0;
  for (const sample of samples) {
    const generated = generateGreedy(model, tokenizer, sample.pixels, sample.prompt, maxNewTokens);
    if (normalizeWhitespace(generated) === normalizeWhitespace(sample.reference)) exact += 1;
    f1 += tokenF1(generated, sample.reference);
  }
  return { exactMatch: exact / samples.length, tokenF1: f1 / samples.length };
}
