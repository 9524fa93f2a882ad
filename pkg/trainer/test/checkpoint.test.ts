import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import { loadCheckpoint, saveCheckpoint } from "../src/checkpoint.js";
import { ToyVlm } from "../src/model.js";
import { CharTokenizer } from "../src/tokenizer.js";

const dir = mkdtempSync(join(tmpdir(), "toyvlm-ckpt-"));

afterAll(() => rmSync(dir, { recursive: true, force: true }));

describe("checkpoints", () => {
  it("round-trips parameters, configs and vocab bit-exactly", () => {
    const vision = { imageSize: 16, patchSize: 8, dV: 8 };
    const lm = { vocabSize: 12, dLm: 16, nLayers: 1, nHeads: 2, maxLen: 32 };
    const model = new ToyVlm(vision, lm, 42);
    const tokenizer = new CharTokenizer([..."abc一二三"]);
    const path = join(dir, "model.bin");
    saveCheckpoint(path, model, tokenizer);

    const loaded = loadCheckpoint(path);
    expect(loaded.model.vision).toEqual(vision);
    expect(loaded.model.lm).toEqual(lm);
    expect(loaded.tokenizer.chars).toEqual(tokenizer.chars);
    expect(loaded.model.params.length).toBe(model.params.length);
    for (let i = 0; i < model.params.length; i++) {
      expect(loaded.model.params[i].name).toBe(model.params[i].name);
      expect(loaded.model.params[i].tensor.data).toEqual(model.params[i].tensor.data);
    }
  });

  it("rejects non-checkpoint files", () => {
    expect(() => loadCheckpoint("/etc/hostname")).toThrow();
  });
});
