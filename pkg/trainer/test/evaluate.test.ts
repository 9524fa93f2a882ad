import { describe, expect, it } from "vitest";

import { normalizeWhitespace, tokenF1 } from "../src/evaluate.js";
import { ruleTokens } from "../src/tokenizer.js";

describe("rule tokens", () => {
  it("mixes CJK chars and ascii runs", () => {
    expect(ruleTokens("CT扫描显示肿瘤")).toEqual(["CT", "扫", "描", "显", "示", "肿", "瘤"]);
    expect(ruleTokens("X-ray image")).toEqual(["X", "ray", "image"]);
    expect(ruleTokens("")).toEqual([]);
  });
});

describe("token f1", () => {
  it("matches the hand-computed partial overlap", () => {
    // reference 4 tokens, generation 3, overlap 3: F1 = 2*(1)*(3/4)/(1+3/4) = 6/7
    expect(tokenF1("肾肿瘤", "右肾肿瘤")).toBeCloseTo(6 / 7, 12);
  });

  it("is 1 on equal strings and 0 on empty generations", () => {
    expect(tokenF1("右肾肿瘤", "右肾肿瘤")).toBe(1);
    expect(tokenF1("", "右肾肿瘤")).toBe(0);
    expect(tokenF1("", "")).toBe(1);
  });

  it("uses multiset overlap", () => {
    // gen has one extra repeated char beyond the reference's count
    expect(tokenF1("肿肿", "肿")).toBeCloseTo((2 * (1 / 2) * 1) / (1 / 2 + 1), 12);
  });
});

describe("whitespace normalization", () => {
  it("collapses runs and trims", () => {
    expect(normalizeWhitespace("  右肾  肿瘤\n")).toBe("右肾 肿瘤");
    expect(normalizeWhitespace("右肾肿瘤")).toBe("右肾肿瘤");
  });
});
