#!/usr/bin/env python3
"""Regenerates fixtures/corpus8: a tiny training corpus produced by the
vlcorpus pipeline (install the package from the repository root first).

Usage: python3 make_fixture.py
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

from PIL import Image

HERE = Path(__file__).parent

CAPTIONS = [
    ("chest radiograph with left lower lobe consolidation", "左下肺实变"),
    ("abdominal scan showing an enlarged liver", "肝脏肿大"),
    ("head scan with no acute abnormality", "颅内未见异常"),
    ("ultrasound image of a simple renal cyst", "右肾单纯囊肿"),
    ("bone film demonstrating a healing fracture", "骨折愈合中"),
    ("cardiac silhouette appears enlarged on this film", "心影增大"),
    ("small pleural effusion on the right side", "右侧胸腔积液"),
    ("solitary pulmonary nodule in the upper zone", "肺上野孤立结节"),
]

QA = [
    ("where is the tumor located in this scan", "右肾肿瘤"),
    ("what does the liver image show", "肝脏囊肿"),
    ("what is abnormal about the heart", "心脏扩大"),
    ("what is seen in the lung field", "肺部结节"),
    ("what does the head image reveal", "脑部出血"),
    ("what is the state of the fracture", "骨折愈合"),
    ("what is present in the pleural space", "胸腔积液"),
    ("what does the spleen look like", "脾脏肿大"),
]


def main() -> None:
    work = Path(tempfile.mkdtemp())
    images = work / "src_images"
    images.mkdir()

    records = []
    mappings = {}
    for i, (text, zh) in enumerate(CAPTIONS):
        rec_id = f"cap-{i}"
        img = Image.new("RGB", (48, 48), ((i * 31) % 256, (i * 77) % 256, (i * 13 + 40) % 256))
        for x in range(0, 48, i + 2):
            for y in range(48):
                img.putpixel((x, y), (255 - i * 20, i * 25, x * 5 % 256))
        img.save(images / f"{rec_id}.png")
        records.append({"schema_version": 1, "id": rec_id, "source": "pmc_oa",
                        "image_paths": [f"src_images/{rec_id}.png"],
                        "text_role": "inline_description", "text": text, "qa": None})
        mappings[text] = zh
    oa_manifest = work / "pmc_oa.jsonl"
    oa_manifest.write_text("\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n", "utf-8")

    records = []
    for i, (question, answer_zh) in enumerate(QA):
        rec_id = f"qa-{i}"
        img = Image.new("RGB", (48, 48), ((i * 53 + 90) % 256, (i * 11) % 256, (i * 97) % 256))
        for y in range(0, 48, i + 2):
            for x in range(48):
                img.putpixel((x, y), (i * 30 % 256, 255 - i * 18, y * 4 % 256))
        img.save(images / f"{rec_id}.png")
        answer_src = f"finding number {i} on this image"
        records.append({"schema_version": 1, "id": rec_id, "source": "pmc_vqa",
                        "image_paths": [f"src_images/{rec_id}.png"],
                        "text_role": "question_answer", "text": "",
                        "qa": {"question": question, "answer": answer_src}})
        mappings[question] = f"图中所见为何（{i}）？"
        mappings[answer_src] = answer_zh
    vqa_manifest = work / "pmc_vqa.jsonl"
    vqa_manifest.write_text("\n".join(json.dumps(r, ensure_ascii=False) for r in records) + "\n", "utf-8")

    (work / "mock.json").write_text(json.dumps({"mappings": mappings}, ensure_ascii=False, indent=1), "utf-8")
    (work / "templates.jsonl").write_text(
        '{"template_id": 1, "task": "caption", "body": "<image>描述。"}\n'
        '{"template_id": 2, "task": "vqa", "body": "<image>{question}"}\n', "utf-8")

    config = {
        "dataset_root": ".",
        "manifests": {"pmc_oa": "pmc_oa.jsonl", "pmc_vqa": "pmc_vqa.jsonl"},
        "out_dir": "out",
        "seed": 7,
        "shard_size": 100,
        "error_budget": 0.0,
        "composition": {"min_edge_px": 16},
        "qc": {"min_source_tokens": 1, "min_translated_chars": 2},
        "backend": {"kind": "mock", "fixture": "mock.json", "model": "mock-translator",
                    "prompt_version": "v1", "requests_per_second": 10000},
        "templates_path": "templates.jsonl",
    }
    (work / "config.json").write_text(json.dumps(config), "utf-8")

    subprocess.run([sys.executable, "-m", "vlcorpus.cli", "build", "--config", str(work / "config.json")],
                   check=True)

    dest = HERE / "corpus8"
    if dest.exists():
        shutil.rmtree(dest)
    dest.mkdir(parents=True)
    out = work / "out"
    for entry in ("images", "alignment", "instruction"):
        shutil.copytree(out / entry, dest / entry)
    shutil.copy(out / "manifest.json", dest / "manifest.json")
    print(f"fixture written to {dest}")


if __name__ == "__main__":
    main()
