"""Stage orchestration: ingest -> compose -> translate -> template -> stats.

Builds are deterministic and resumable. Each stage records its config digest
and input digests in ``<out>/state/``; rerunning a completed stage with
unchanged inputs is a no-op, and rerunning with a changed config raises
ConfigMismatch. All stage outputs are keyed and ordered by record id so the
final tree is independent of processing order.

Output tree:
    images/                  composite PNGs, one per kept record
    alignment/shard-*.jsonl  caption DialogSamples
    instruction/shard-*.jsonl  vqa DialogSamples
    stats/*.txt|*.json       per-subset token statistics
    manifest.json            build manifest (counts, shard digests)
    rejections.jsonl         every rejected input, with stage and reason
    work/, state/, cache/    intermediates, stage state, translation cache
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from . import templates as templating
from .compose import REJECT_UNREADABLE, CompositionPolicy, Rejection, apply_policy
from .ingest import DecodeError, load_image, read_manifest
from .records import (
    SCHEMA_VERSION,
    DialogSample,
    SourceRecord,
    decode_alignment_pair,
    decode_dialog_sample,
    decode_instruction_pair,
    decode_source_record,
    encode_alignment_pair,
    encode_dialog_sample,
    encode_instruction_pair,
    encode_source_record,
    validate_dialog,
)
from .stats import CorpusStats, EmptyInput, TokenizerSpec, render_stats_table, stats_to_json, summarize_field
from .translate import (
    AlignmentPair,
    BackendConfig,
    Discard,
    HttpBackend,
    MockBackend,
    QcPolicy,
    TranslationCache,
    translate_record,
)

STAGE_ORDER = ("ingest", "compose", "translate", "template", "stats")

DEFAULT_SHARD_SIZE = 10_000
DEFAULT_REVIEW_EVERY = 100


class ConfigMismatch(Exception):
    pass


class MissingUpstream(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    dataset_root: Path
    manifests: dict[str, Path]
    out_dir: Path
    seed: int = 0
    shard_size: int = DEFAULT_SHARD_SIZE
    error_budget: float = 0.01
    review_every: int = DEFAULT_REVIEW_EVERY
    composition: CompositionPolicy = CompositionPolicy()
    qc: QcPolicy = QcPolicy()
    backend: BackendConfig = BackendConfig()
    backend_kind: str = "mock"
    backend_fixture: Path | None = None
    tokenizer: TokenizerSpec = TokenizerSpec()
    templates_path: Path | None = None
    cache_path: Path | None = None

    def __post_init__(self) -> None:
        if self.shard_size < 1:
            raise ValueError("shard_size >= 1")
        if self.backend_kind not in ("mock", "http"):
            raise ValueError("backend_kind in ('mock', 'http')")

    def digest(self) -> str:
        """Digest of every build-affecting field (out_dir and cache location excluded)."""
        payload = {
            "dataset_root": str(self.dataset_root),
            "manifests": {k: str(v) for k, v in sorted(self.manifests.items())},
            "seed": self.seed,
            "shard_size": self.shard_size,
            "error_budget": self.error_budget,
            "review_every": self.review_every,
            "composition": asdict(self.composition),
            "qc": asdict(self.qc),
            "backend": asdict(self.backend),
            "backend_kind": self.backend_kind,
            "backend_fixture": str(self.backend_fixture) if self.backend_fixture else None,
            "tokenizer": asdict(self.tokenizer),
            "templates_path": str(self.templates_path) if self.templates_path else None,
            "schema_version": SCHEMA_VERSION,
        }
        blob = json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def resolved_cache_path(self) -> Path:
        return self.cache_path if self.cache_path is not None else self.out_dir / "cache" / "translations.jsonl"


def load_config(
    path: str | Path,
    seed: int | None = None,
    out_dir: str | Path | None = None,
    templates_path: str | Path | None = None,
) -> PipelineConfig:
    """Load a config file (JSON); relative paths resolve against its directory."""
    cfg_path = Path(path)
    base = cfg_path.parent
    with open(cfg_path, encoding="utf-8") as fh:
        obj = json.load(fh)

    def _respath(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    root = _respath(obj.get("dataset_root", "."))
    backend_obj = dict(obj.get("backend", {}))
    backend_kind = backend_obj.pop("kind", "mock")
    fixture = backend_obj.pop("fixture", None)
    return PipelineConfig(
        dataset_root=root,
        manifests={src: root / m for src, m in obj["manifests"].items()},
        out_dir=Path(out_dir) if out_dir is not None else _respath(obj.get("out_dir", "out")),
        seed=seed if seed is not None else obj.get("seed", 0),
        shard_size=obj.get("shard_size", DEFAULT_SHARD_SIZE),
        error_budget=obj.get("error_budget", 0.01),
        review_every=obj.get("review_every", DEFAULT_REVIEW_EVERY),
        composition=CompositionPolicy(**obj.get("composition", {})),
        qc=QcPolicy(**{
            k: tuple(v) if k == "refusal_markers" else v for k, v in obj.get("qc", {}).items()
        }),
        backend=BackendConfig(**backend_obj),
        backend_kind=backend_kind,
        backend_fixture=_respath(fixture) if fixture else None,
        tokenizer=_tokenizer_spec(obj.get("tokenizer", "cjk_latin_default")),
        templates_path=(
            Path(templates_path)
            if templates_path is not None
            else _respath(obj["templates_path"]) if obj.get("templates_path") else None
        ),
        cache_path=_respath(obj["cache_path"]) if obj.get("cache_path") else None,
    )


def _tokenizer_spec(tokenizer_id: str) -> TokenizerSpec:
    rule = "cjk_latin_default" if tokenizer_id == "cjk_latin_default" else "external"
    return TokenizerSpec(id=tokenizer_id, rule=rule)


# --- small helpers -------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest_inputs(paths: list[Path], extra: bytes = b"") -> str:
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.name.encode("utf-8"))
        h.update(_sha256_file(p).encode("ascii") if p.is_file() else b"missing")
    h.update(extra)
    return h.hexdigest()


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        return []
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _rejection_line(stage: str, reason: str, detail: str, record_id: str | None, line_no: int | None = None,
                    source: str | None = None) -> str:
    return json.dumps(
        {"stage": stage, "id": record_id, "line_no": line_no, "source": source,
         "reason": reason, "detail": detail},
        ensure_ascii=False,
    )


class _StageState:
    """Per-out-dir stage bookkeeping under state/."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir / "state"

    def config_check(self, config: PipelineConfig) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / "config.json"
        digest = config.digest()
        if path.is_file():
            stored = json.loads(path.read_text("utf-8"))["digest"]
            if stored != digest:
                raise ConfigMismatch(f"config digest {digest[:12]} != stored {stored[:12]}")
            return
        path.write_text(json.dumps({"digest": digest}) + "\n", encoding="utf-8")

    def load(self, stage: str) -> dict | None:
        path = self.dir / f"{stage}.json"
        if not path.is_file():
            return None
        return json.loads(path.read_text("utf-8"))

    def store(self, stage: str, report: dict) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / f"{stage}.json").write_text(
            json.dumps(report, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )


def _check_conservation(report: dict) -> dict:
    rejected = sum(report["rejected"].values())
    if report["kept"] + rejected != report["input"]:
        raise AssertionError(
            f"stage {report['stage']}: kept {report['kept']} + rejected {rejected} != input {report['input']}"
        )
    return report


# --- stages --------------------------------------------------------------------


def _stage_ingest(config: PipelineConfig, out: Path) -> dict:
    records: list[SourceRecord] = []
    rejections: list[str] = []
    counts: dict[str, int] = {}
    total_input = 0
    seen: dict[str, str] = {}
    for source in sorted(config.manifests):
        reader = read_manifest(config.manifests[source], config.error_budget)
        for record in reader:
            if record.id in seen:
                rejections.append(
                    _rejection_line("ingest", "duplicate_id", f"already in {seen[record.id]}", record.id, source=source)
                )
                continue
            seen[record.id] = source
            records.append(record)
        total_input += reader.total
        counts[source] = reader.total
        for skip in reader.skips:
            rejections.append(
                _rejection_line("ingest", skip.reason, skip.detail, skip.id, line_no=skip.line_no, source=source)
            )

    records.sort(key=lambda r: r.id)
    _write_lines(out / "work" / "ingest" / "records.jsonl", [encode_source_record(r) for r in records])
    _write_lines(out / "work" / "ingest" / "rejections.jsonl", rejections)

    rejected: dict[str, int] = {}
    for line in rejections:
        reason = json.loads(line)["reason"]
        rejected[reason] = rejected.get(reason, 0) + 1
    return _check_conservation({
        "stage": "ingest",
        "input": total_input,
        "kept": len(records),
        "rejected": rejected,
        "lines_per_source": counts,
    })


def image_ref_for(record_id: str) -> str:
    return f"images/{record_id}.png"


def _stage_compose(config: PipelineConfig, out: Path) -> dict:
    lines = _read_lines(out / "work" / "ingest" / "records.jsonl")
    kept_lines: list[str] = []
    rejections: list[str] = []
    (out / "images").mkdir(parents=True, exist_ok=True)
    for line in lines:
        record = decode_source_record(line)
        try:
            images = [load_image(config.dataset_root / p) for p in record.image_paths]
        except (FileNotFoundError, DecodeError) as exc:
            rejections.append(_rejection_line("compose", REJECT_UNREADABLE, str(exc), record.id, source=record.source))
            continue
        result = apply_policy(record, images, config.composition)
        if isinstance(result, Rejection):
            rejections.append(_rejection_line("compose", result.reason, result.detail, record.id, source=record.source))
            continue
        result.image.save(out / image_ref_for(record.id), format="PNG")
        kept_lines.append(line)

    _write_lines(out / "work" / "compose" / "records.jsonl", kept_lines)
    _write_lines(out / "work" / "compose" / "rejections.jsonl", rejections)
    rejected: dict[str, int] = {}
    for line in rejections:
        reason = json.loads(line)["reason"]
        rejected[reason] = rejected.get(reason, 0) + 1
    return _check_conservation({
        "stage": "compose",
        "input": len(lines),
        "kept": len(kept_lines),
        "rejected": rejected,
    })


def _make_backend(config: PipelineConfig):
    if config.backend_kind == "mock":
        if config.backend_fixture is not None:
            return MockBackend.from_fixture(config.backend_fixture, config.backend)
        return MockBackend(config.backend)
    return HttpBackend(config.backend)


def _stage_translate(config: PipelineConfig, out: Path) -> dict:
    lines = _read_lines(out / "work" / "compose" / "records.jsonl")
    backend = _make_backend(config)
    cache = TranslationCache(config.resolved_cache_path())
    alignment: list[str] = []
    instruction: list[str] = []
    rejections: list[str] = []
    review: list[str] = []
    kept = 0
    for line in lines:
        record = decode_source_record(line)
        result = translate_record(record, backend, cache, config.qc, image_ref_for(record.id))
        if isinstance(result, Discard):
            rejections.append(_rejection_line("translate", result.reason, result.detail, record.id, source=record.source))
            continue
        kept += 1
        if isinstance(result, AlignmentPair):
            alignment.append(encode_alignment_pair(result))
            source_text = record.text
            translated = result.text_zh
        else:
            instruction.append(encode_instruction_pair(result))
            source_text = f"Q: {record.qa.question}\nA: {record.qa.answer}"
            translated = f"Q: {result.question_zh}\nA: {result.answer_zh}"
        # Sampled export for manual expert review of translation quality.
        if config.review_every > 0 and kept % config.review_every == 0:
            review.append(json.dumps(
                {"id": record.id, "source": record.source, "text": source_text, "text_zh": translated},
                ensure_ascii=False,
            ))

    _write_lines(out / "work" / "translate" / "alignment.jsonl", alignment)
    _write_lines(out / "work" / "translate" / "instruction.jsonl", instruction)
    _write_lines(out / "work" / "translate" / "rejections.jsonl", rejections)
    _write_lines(out / "work" / "translate" / "review.jsonl", review)
    rejected: dict[str, int] = {}
    for line in rejections:
        reason = json.loads(line)["reason"]
        rejected[reason] = rejected.get(reason, 0) + 1
    return _check_conservation({
        "stage": "translate",
        "input": len(lines),
        "kept": kept,
        "rejected": rejected,
        "pairs": {"alignment": len(alignment), "instruction": len(instruction)},
        "backend_calls": backend.calls,
        "backend_attempts": backend.attempts,
    })


def write_shards(samples: list[DialogSample], shard_size: int, out_dir: Path) -> list[dict]:
    """Write id-ordered JSONL shards of at most ``shard_size`` records each.

    Output bytes are independent of the order samples arrive in; returns the
    shard list with 256-bit content digests for the build manifest.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(samples, key=lambda s: s.id)
    shards = []
    n_shards = (len(ordered) + shard_size - 1) // shard_size
    for index in range(n_shards):
        chunk = ordered[index * shard_size : (index + 1) * shard_size]
        name = f"shard-{index:05d}.jsonl"
        payload = "".join(encode_dialog_sample(s) + "\n" for s in chunk).encode("utf-8")
        (out_dir / name).write_bytes(payload)
        shards.append({"name": name, "records": len(chunk), "sha256": hashlib.sha256(payload).hexdigest()})
    return shards


def _stage_template(config: PipelineConfig, out: Path) -> dict:
    template_set = templating.TemplateSet.load(config.templates_path)
    align_pairs = [decode_alignment_pair(l) for l in _read_lines(out / "work" / "translate" / "alignment.jsonl")]
    instr_pairs = [decode_instruction_pair(l) for l in _read_lines(out / "work" / "translate" / "instruction.jsonl")]

    align_samples = []
    for pair in align_pairs:
        template = templating.select_template("caption", pair.id, config.seed, template_set)
        sample = templating.render_alignment_dialog(pair, template)
        assert validate_dialog(sample) == []
        align_samples.append(sample)
    instr_samples = []
    for pair in instr_pairs:
        template = templating.select_template("vqa", pair.id, config.seed, template_set)
        sample = templating.render_instruction_dialog(pair, template)
        assert validate_dialog(sample) == []
        instr_samples.append(sample)

    align_shards = write_shards(align_samples, config.shard_size, out / "alignment")
    instr_shards = write_shards(instr_samples, config.shard_size, out / "instruction")
    return _check_conservation({
        "stage": "template",
        "input": len(align_pairs) + len(instr_pairs),
        "kept": len(align_samples) + len(instr_samples),
        "rejected": {},
        "shards": {"alignment": align_shards, "instruction": instr_shards},
    })


def _stage_stats(config: PipelineConfig, out: Path) -> dict:
    source_by_id: dict[str, str] = {}
    for line in _read_lines(out / "work" / "ingest" / "records.jsonl"):
        record = decode_source_record(line)
        source_by_id[record.id] = record.source
    align_pairs = [decode_alignment_pair(l) for l in _read_lines(out / "work" / "translate" / "alignment.jsonl")]
    instr_pairs = [decode_instruction_pair(l) for l in _read_lines(out / "work" / "translate" / "instruction.jsonl")]
    stats_dir = out / "stats"
    stats_dir.mkdir(parents=True, exist_ok=True)

    def _summaries(pairs, fields: list[tuple[str, Callable]], label: str) -> tuple[str, dict]:
        sources = sorted({source_by_id[p.id] for p in pairs})
        pair_counts = {src: sum(1 for p in pairs if source_by_id[p.id] == src) for src in sources}
        pair_counts["Total"] = len(pairs)
        rows: list[CorpusStats] = []
        for field, selector in fields:
            for src in sources + ["Total"]:
                subset = pairs if src == "Total" else [p for p in pairs if source_by_id[p.id] == src]
                try:
                    rows.append(summarize_field(subset, selector, field=field, source=src,
                                                tokenizer=config.tokenizer))
                except EmptyInput:
                    continue
        return render_stats_table(rows, pair_counts, label), stats_to_json(rows, pair_counts)

    align_txt, align_json = _summaries(
        align_pairs,
        [
            ("C tokens", lambda p: p.text_zh if p.category == "context" else None),
            ("I tokens", lambda p: p.text_zh if p.category == "description" else None),
        ],
        "Image-Text pairs",
    )
    instr_txt, instr_json = _summaries(
        instr_pairs,
        [("Q tokens", lambda p: p.question_zh), ("A tokens", lambda p: p.answer_zh)],
        "QA pairs",
    )
    (stats_dir / "alignment.txt").write_text(align_txt, encoding="utf-8")
    (stats_dir / "instruction.txt").write_text(instr_txt, encoding="utf-8")
    (stats_dir / "alignment.json").write_text(json.dumps(align_json, ensure_ascii=False, indent=1) + "\n", "utf-8")
    (stats_dir / "instruction.json").write_text(json.dumps(instr_json, ensure_ascii=False, indent=1) + "\n", "utf-8")

    n = len(align_pairs) + len(instr_pairs)
    return _check_conservation({"stage": "stats", "input": n, "kept": n, "rejected": {}})


_STAGE_FN = {
    "ingest": _stage_ingest,
    "compose": _stage_compose,
    "translate": _stage_translate,
    "template": _stage_template,
    "stats": _stage_stats,
}


def _stage_inputs(stage: str, config: PipelineConfig, out: Path) -> str:
    work = out / "work"
    if stage == "ingest":
        return _digest_inputs(list(config.manifests.values()))
    if stage == "compose":
        return _digest_inputs([work / "ingest" / "records.jsonl"])
    if stage == "translate":
        extra = b""
        if config.backend_fixture is not None and config.backend_fixture.is_file():
            extra = config.backend_fixture.read_bytes()
        return _digest_inputs([work / "compose" / "records.jsonl"], extra)
    if stage == "template":
        if config.templates_path is not None:
            extra = Path(config.templates_path).read_bytes()
        else:
            extra = resources.files("vlcorpus.assets").joinpath(templating.DEFAULT_ASSET).read_bytes()
        return _digest_inputs(
            [work / "translate" / "alignment.jsonl", work / "translate" / "instruction.jsonl"], extra
        )
    if stage == "stats":
        return _digest_inputs([
            work / "translate" / "alignment.jsonl",
            work / "translate" / "instruction.jsonl",
            work / "ingest" / "records.jsonl",
        ])
    raise ValueError(f"unknown stage: {stage}")


def run_stage(stage: str, config: PipelineConfig) -> dict:
    """Run one stage; a completed stage with unchanged config+inputs is a no-op."""
    if stage not in STAGE_ORDER:
        raise ValueError(f"unknown stage: {stage}")
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    state = _StageState(out)
    state.config_check(config)

    position = STAGE_ORDER.index(stage)
    if position > 0:
        upstream = STAGE_ORDER[position - 1]
        upstream_state = state.load(upstream)
        if upstream_state is None or not upstream_state.get("complete"):
            raise MissingUpstream(f"stage {stage!r} requires completed {upstream!r}")

    input_digest = _stage_inputs(stage, config, out)
    stored = state.load(stage)
    if stored is not None and stored.get("complete") and stored.get("input_digest") == input_digest:
        stored["processed"] = 0
        return stored

    report = _STAGE_FN[stage](config, out)
    report["complete"] = True
    report["input_digest"] = input_digest
    report["processed"] = report["input"]
    state.store(stage, report)
    return report


def build_all(config: PipelineConfig) -> dict:
    """Run every stage and assemble the build manifest and rejection report."""
    reports = {stage: run_stage(stage, config) for stage in STAGE_ORDER}
    out = config.out_dir

    rejections: list[str] = []
    for stage in STAGE_ORDER:
        rejections.extend(_read_lines(out / "work" / stage / "rejections.jsonl"))
    _write_lines(out / "rejections.jsonl", rejections)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": config.digest(),
        "seed": config.seed,
        "stages": reports,
        "shards": reports["template"]["shards"],
    }
    # The on-disk manifest omits per-run "processed" counts (0 on a resumed
    # stage, input-sized on a fresh one) so resumed and uninterrupted builds
    # stay bit-identical.
    file_manifest = dict(manifest)
    file_manifest["stages"] = {
        stage: {k: v for k, v in report.items() if k != "processed"}
        for stage, report in reports.items()
    }
    (out / "manifest.json").write_text(
        json.dumps(file_manifest, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return manifest
