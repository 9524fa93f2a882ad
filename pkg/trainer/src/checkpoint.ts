/**
 * Checkpoint format: "TVLM" magic, uint32-LE header length, JSON header
 * (configs, vocab, tensor directory), then raw little-endian float64 tensor
 * data at the offsets the header records.
 */

import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { dirname } from "node:path";

import { ToyLMConfig, VisionEncoderConfig } from "./config.js";
import { ToyVlm } from "./model.js";
import { CharTokenizer } from "./tokenizer.js";

const MAGIC = "TVLM";

interface TensorRecord {
  name: string;
  partition: string;
  rows: number;
  cols: number;
  offset: number;
}

interface Header {
  version: number;
  vision: VisionEncoderConfig;
  lm: ToyLMConfig;
  vocab: string[];
  seed: number;
  tensors: TensorRecord[];
}

export function saveCheckpoint(path: string, model: ToyVlm, tokenizer: CharTokenizer, seed = 0): void {
  const tensors: TensorRecord[] = [];
  let offset = 0;
  for (const entry of model.params) {
    tensors.push({
      name: entry.name,
      partition: entry.partition,
      rows: entry.tensor.rows,
      cols: entry.tensor.cols,
      offset,
    });
    offset += entry.tensor.size * 8;
  }
  const header: Header = {
    version: 1,
    vision: model.vision,
    lm: model.lm,
    vocab: tokenizer.chars,
    seed,
    tensors,
  };
  const headerBytes = Buffer.from(JSON.stringify(header), "utf-8");
  const out = Buffer.alloc(MAGIC.length + 4 + headerBytes.length + offset);
  out.write(MAGIC, 0, "ascii");
  out.writeUInt32LE(headerBytes.length, MAGIC.length);
  headerBytes.copy(out, MAGIC.length + 4);
  let cursor = MAGIC.length + 4 + headerBytes.length;
  for (const entry of model.params) {
    for (let i = 0; i < entry.tensor.size; i++) {
      out.writeDoubleLE(entry.tensor.data[i], cursor);
      cursor += 8;
    }
  }
  mkdirSync(dirname(path), { recursive: true });
  writeFileSync(path, out);
}

export interface LoadedCheckpoint {
  model: ToyVlm;
  tokenizer: CharTokenizer;
}

export function loadCheckpoint(path: string): LoadedCheckpoint {
  const buf = readFileSync(path);
  if (buf.toString("ascii", 0, MAGIC.length) !== MAGIC) {
    throw new Error("not a trainer checkpoint");
  }
  const headerLen = buf.readUInt32LE(MAGIC.length);
  const headerStart = MAGIC.length + 4;
  const header = JSON.parse(buf.toString("utf-8", headerStart, headerStart + headerLen)) as Header;
  if (header.version !== 1) throw new Error(`unsupported checkpoint version ${header.version}`);

  const model = new ToyVlm(header.vision, header.lm, header.seed);
  const dataStart = headerStart + headerLen;
  const byName = new Map(model.params.map((p) => [p.name, p.tensor]));
  for (const record of header.tensors) {
    const tensor = byName.get(record.name);
    if (!tensor || tensor.rows !== record.rows || tensor.cols !== record.cols) {
      throw new Error(`checkpoint tensor ${record.name} does not fit the model`);
    }
    let cursor = dataStart + record.offset;
    for (let i = 0; i < tensor.size; i++) {
      tensor.data[i] = buf.readDoubleLE(cursor);
      cursor += 8;
    }
  }
  return { model, tokenizer: new CharTokenizer(header.vocab) };
}
