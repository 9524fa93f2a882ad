"""Deterministic synthetic corpus fixtures for pipeline and acceptance tests.

Generates three source manifests (with deliberate dirt), their images, a mock
backend fixture and a pipeline config under a root directory. Everything is
derived from one seed so repeated generation is byte-identical.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from PIL import Image

WORDS = (
    "lesion mass opacity nodule effusion consolidation fracture stenosis "
    "atrophy edema tumor cyst infiltrate calcification thickening dilation "
    "left right upper lower lobe lung kidney liver spleen cardiac hepatic "
    "renal chest abdominal pelvic scan radiograph ultrasound contrast axial "
    "coronal sagittal view shows reveals demonstrates consistent suggestive "
    "margin density signal enhancement segment region zone finding patient"
).split()

KNOWN_SOURCE_TEXT = (
    "frontal chest radiograph shows consolidation in the left lower lobe region "
    "consistent with pneumonia and small pleural effusion"
)
KNOWN_TRANSLATION = "胸部X光片显示左下肺实变，考虑肺炎可能，伴少量胸腔积液。"

LATIN_OUTPUT_TEXT = "axial contrast scan shows hepatic mass with enhancement margin in segment four region"
SHORT_OUTPUT_TEXT = "ultrasound view reveals renal cyst with thin margin in the upper pole region zone"
REFUSED_ANSWER = "the finding demonstrates a malignant tumor with irregular margin and local infiltration present"
FLAKY_QUESTION = "which anatomical region of the abdominal scan demonstrates the dominant mass lesion here"

REFUSAL_RESPONSE = "抱歉，我不能翻译该内容。"


def _sentence(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_words))


def _write_image(path: Path, size: tuple[int, int], color: tuple[int, int, int], fmt: str = "PNG",
                 mode: str = "RGB") -> None:
    img = Image.new("RGB", size, color)
    # Cheap structure so resizes are not flat fills.
    for x in range(0, size[0], 7):
        for y in range(0, size[1], 11):
            img.putpixel((x, y), ((color[0] + x) % 256, (color[1] + y) % 256, color[2]))
    if mode != "RGB":
        img = img.convert(mode)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format=fmt)


def _record(rec_id: str, source: str, image_paths: list[str], text_role: str,
            text: str = "", qa: dict | None = None) -> dict:
    return {
        "schema_version": 1,
        "id": rec_id,
        "source": source,
        "image_paths": image_paths,
        "text_role": text_role,
        "text": text,
        "qa": qa,
    }


def _make_images(root: Path, rng: random.Random, rec_id: str, dims: list[tuple[int, int]],
                 fmt: str = "PNG", mode: str = "RGB") -> list[str]:
    paths = []
    for i, size in enumerate(dims):
        suffix = "jpg" if fmt == "JPEG" else "png"
        rel = f"src_images/{rec_id}-{i}.{suffix}"
        color = (rng.randrange(256), rng.randrange(256), rng.randrange(256))
        _write_image(root / rel, size, color, fmt=fmt, mode=mode)
        paths.append(rel)
    return paths


def _random_dims(rng: random.Random, n: int) -> list[tuple[int, int]]:
    # Near-square tiles keep most records inside the default policy.
    return [(rng.randrange(72, 144), rng.randrange(72, 144)) for _ in range(n)]


def build_fixture_corpus(root: Path, seed: int = 42) -> Path:
    """Populate ``root`` with manifests, images, mock fixture, config; returns config path."""
    rng = random.Random(seed)
    manifests_dir = root / "manifests"
    manifests_dir.mkdir(parents=True, exist_ok=True)

    oa_lines: list[str] = []
    for i in range(30):
        rec_id = f"oa-{i:03d}"
        if i == 5:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 5))
            text = _sentence(rng, 20)
        elif i == 7:
            paths = _make_images(root, rng, rec_id, [(300, 40), (300, 40)])
            text = _sentence(rng, 18)
        elif i == 9:
            paths = _make_images(root, rng, rec_id, [(100, 100), (100, 30)])
            text = _sentence(rng, 18)
        elif i == 11:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 1))
            text = _sentence(rng, 5)  # below min_source_tokens
        elif i == 13:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 1))
            text = LATIN_OUTPUT_TEXT
        elif i == 15:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 1))
            full = (root / paths[0]).read_bytes()
            (root / paths[0]).write_bytes(full[: len(full) // 2])  # truncated file
            text = _sentence(rng, 16)
        elif i == 17:
            paths = [f"src_images/{rec_id}-missing.png"]
            text = _sentence(rng, 16)
        elif i == 19:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 1))
            text = SHORT_OUTPUT_TEXT
        elif i == 21:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 1), mode="L")
            text = _sentence(rng, 17)
        elif i == 23:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, 2), fmt="JPEG")
            text = _sentence(rng, 22)
        else:
            paths = _make_images(root, rng, rec_id, _random_dims(rng, rng.randrange(1, 4)))
            text = _sentence(rng, rng.randrange(12, 40))
        oa_lines.append(json.dumps(_record(rec_id, "pmc_oa", paths, "inline_description", text),
                                   ensure_ascii=False))
    (manifests_dir / "pmc_oa.jsonl").write_text("\n".join(oa_lines) + "\n", encoding="utf-8")

    cr_lines: list[str] = []
    for i in range(40):
        rec_id = f"cr-{i:03d}"
        # Records whose translate-stage behavior is scripted keep one image so
        # the compositor never rejects them first.
        n_images = 1 if i in (0, 15, 16, 31, 33, 35) else rng.randrange(1, 5)
        paths = _make_images(root, rng, rec_id, _random_dims(rng, n_images))
        if i < 15:
            text = KNOWN_SOURCE_TEXT if i == 0 else _sentence(rng, rng.randrange(30, 80))
            cr_lines.append(json.dumps(_record(rec_id, "pmc_casereport", paths, "context", text),
                                       ensure_ascii=False))
        elif i < 25:
            # Two records sharing one text exercise cross-record cache hits.
            text = KNOWN_SOURCE_TEXT + " in a second view" if i in (15, 16) else _sentence(rng, rng.randrange(12, 40))
            cr_lines.append(json.dumps(_record(rec_id, "pmc_casereport", paths, "inline_description", text),
                                       ensure_ascii=False))
        else:
            question = FLAKY_QUESTION if i == 33 else _sentence(rng, rng.randrange(12, 20))
            if i == 31:
                answer = REFUSED_ANSWER
            elif i == 35:
                answer = "yes definitely"  # below min_source_tokens
            else:
                answer = _sentence(rng, rng.randrange(12, 30))
            cr_lines.append(json.dumps(
                _record(rec_id, "pmc_casereport", paths, "question_answer",
                        qa={"question": question, "answer": answer}),
                ensure_ascii=False))
    (manifests_dir / "pmc_casereport.jsonl").write_text("\n".join(cr_lines) + "\n", encoding="utf-8")

    vqa_lines: list[str] = []
    for i in range(30):
        rec_id = f"vqa-{i:03d}"
        paths = _make_images(root, rng, rec_id, _random_dims(rng, rng.randrange(1, 3)))
        qa = {"question": _sentence(rng, rng.randrange(12, 20)), "answer": _sentence(rng, rng.randrange(12, 25))}
        vqa_lines.append(json.dumps(_record(rec_id, "pmc_vqa", paths, "question_answer", qa=qa),
                                    ensure_ascii=False))
    # Manifest dirt: unparseable line, invalid record, duplicate id.
    vqa_lines.append('{"schema_version": 1, "id": "vqa-bad"')
    vqa_lines.append(json.dumps(_record("vqa-bad-1", "pmc_vqa", [], "question_answer",
                                        qa={"question": "q " * 12, "answer": "a " * 12}), ensure_ascii=False))
    vqa_lines.append(vqa_lines[3])
    (manifests_dir / "pmc_vqa.jsonl").write_text("\n".join(vqa_lines) + "\n", encoding="utf-8")

    mock_fixture = {
        "mappings": {
            KNOWN_SOURCE_TEXT: KNOWN_TRANSLATION,
            LATIN_OUTPUT_TEXT: "The CT scan shows a hepatic mass with rim enhancement",
            SHORT_OUTPUT_TEXT: "好",
        },
        "transient_failures": {FLAKY_QUESTION: 2},
        "refusals": [REFUSED_ANSWER],
        "refusal_response": REFUSAL_RESPONSE,
    }
    (root / "mock_backend.json").write_text(json.dumps(mock_fixture, ensure_ascii=False, indent=1),
                                            encoding="utf-8")

    config = {
        "dataset_root": ".",
        "manifests": {
            "pmc_oa": "manifests/pmc_oa.jsonl",
            "pmc_casereport": "manifests/pmc_casereport.jsonl",
            "pmc_vqa": "manifests/pmc_vqa.jsonl",
        },
        "out_dir": "out",
        "seed": 1234,
        "shard_size": 10,
        "error_budget": 0.2,
        "review_every": 10,
        "composition": {"max_images": 4, "max_extremeness": 3.0, "min_edge_px": 32,
                        "resize_filter": "bilinear"},
        "qc": {"min_source_tokens": 10, "min_translated_chars": 8, "max_latin_ratio": 0.7},
        "backend": {"kind": "mock", "fixture": "mock_backend.json", "model": "mock-translator",
                    "prompt_version": "v1", "max_retries": 3, "requests_per_second": 10000,
                    "timeout": 5, "endpoint": ""},
        "tokenizer": "cjk_latin_default",
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=1), encoding="utf-8")
    return config_path
