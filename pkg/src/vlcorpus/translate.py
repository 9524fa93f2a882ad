"""Translation of source text to Chinese through a pluggable chat backend.

Every translation is content-addressed in an append-only cache keyed by
(source text, prompt version, model), so reruns over the same corpus make
zero backend calls. Quality control runs before any network activity (source
brevity) and after (length, script ratio, refusal markers).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from . import stats
from .records import CATEGORY_BY_ROLE, AlignmentPair, InstructionPair, SourceRecord

CREDENTIAL_ENV_VAR = "VLCORPUS_API_KEY"

# Shipped translation instruction; revise prompt_version whenever this changes.
SYSTEM_PROMPT = (
    "You are a professional medical translator. Translate the user's text into "
    "simplified Chinese. Preserve clinical terminology, measurements and "
    "negations exactly; output only the translation."
)

DISCARD_TOO_BRIEF = "TooBrief"
DISCARD_TOO_SHORT = "TooShort"
DISCARD_NOT_TRANSLATED = "NotTranslated"
DISCARD_REFUSAL = "Refusal"

DEFAULT_REFUSAL_MARKERS = (
    "无法翻译",
    "抱歉，我不能",
    "I'm sorry",
    "I cannot translate",
    "As an AI",
)


class InvalidInput(ValueError):
    pass


class BackendExhausted(Exception):
    pass


class BackendRefusal(Exception):
    pass


class TransientBackendError(Exception):
    """Retryable failure: timeouts, rate limits, 5xx responses."""


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = ""
    model: str = "mock-translator"
    max_retries: int = 3
    requests_per_second: float = 8.0
    timeout: float = 30.0
    prompt_version: str = "v1"

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries >= 0")
        if self.requests_per_second <= 0:
            raise ValueError("requests_per_second > 0")


@dataclass(frozen=True)
class QcPolicy:
    min_source_tokens: int = 10
    min_translated_chars: int = 8
    max_latin_ratio: float = 0.7
    refusal_markers: tuple[str, ...] = DEFAULT_REFUSAL_MARKERS

    def __post_init__(self) -> None:
        if self.min_source_tokens < 0 or self.min_translated_chars < 0:
            raise ValueError("thresholds non-negative")
        if not 0.0 <= self.max_latin_ratio <= 1.0:
            raise ValueError("max_latin_ratio in [0, 1]")


@dataclass(frozen=True)
class Discard:
    reason: str
    detail: str = ""


class _RateLimiter:
    """Enforces a global minimum interval between backend requests."""

    def __init__(self, requests_per_second: float):
        self._interval = 1.0 / requests_per_second
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if delay > 0:
            time.sleep(delay)


def cache_key(text: str, prompt_version: str, model: str) -> str:
    digest = hashlib.sha256()
    for part in (text, prompt_version, model):
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


class TranslationCache:
    """Content-addressed key-value store persisted as append-only JSONL.

    Concurrent readers are safe; appends are serialized by a lock. Entries are
    {"key", "value", "ts"}; on reload the last entry for a key wins.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.is_file():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    self._entries[obj["key"]] = obj["value"]

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, value: str) -> None:
        if not value:
            raise ValueError("cache values must be non-empty")
        with self._lock:
            self._entries[key] = value
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                entry = {"key": key, "value": value, "ts": time.time()}
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


class MockBackend:
    """Deterministic in-process stand-in for the chat-completion service.

    Configured from a fixture of input->output mappings plus scripted
    transient failures and refusals. Unmapped text falls back to a
    hash-derived pseudo-Chinese string so large fixtures need no exhaustive
    mapping. ``calls`` counts successful completions, ``attempts`` every try.
    """

    def __init__(
        self,
        config: BackendConfig,
        mapping: dict[str, str] | None = None,
        transient_failures: dict[str, int] | None = None,
        refuse: set[str] | None = None,
        refusal_response: str = "抱歉，我不能翻译该内容。",
    ):
        self.config = config
        self.mapping = dict(mapping or {})
        self.refuse = set(refuse or ())
        self.refusal_response = refusal_response
        self.calls = 0
        self.attempts = 0
        self._remaining_failures = dict(transient_failures or {})
        self._limiter = _RateLimiter(config.requests_per_second)

    @classmethod
    def from_fixture(cls, path: str | Path, config: BackendConfig) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            config,
            mapping=obj.get("mappings", {}),
            transient_failures=obj.get("transient_failures", {}),
            refuse=set(obj.get("refusals", [])),
            refusal_response=obj.get("refusal_response", "抱歉，我不能翻译该内容。"),
        )

    def peek(self, text: str) -> str:
        """The response ``complete`` will eventually return, without side effects."""
        if text in self.refuse:
            return self.refusal_response
        if text in self.mapping:
            return self.mapping[text]
        return _pseudo_chinese(text)

    def complete(self, text: str) -> str:
        self._limiter.wait()
        self.attempts += 1
        if self._remaining_failures.get(text, 0) > 0:
            self._remaining_failures[text] -= 1
            raise TransientBackendError("scripted transient failure")
        self.calls += 1
        return self.peek(text)


def _pseudo_chinese(text: str, min_length: int = 8, max_length: int = 48) -> str:
    # Length tracks the input so corpus statistics stay non-degenerate.
    length = min_length + (len(text) * 7) % (max_length - min_length + 1)
    raw = hashlib.shake_128(text.encode("utf-8")).digest(2 * length)
    span = 0x9FFF - 0x4E00 + 1
    chars = []
    for i in range(length):
        cp = 0x4E00 + (int.from_bytes(raw[2 * i : 2 * i + 2], "big") % span)
        chars.append(chr(cp))
    return "".join(chars)


class HttpBackend:
    """Chat-completion-style HTTP backend; credential read from the env var.

    Not exercised by the test suite (all tests run against MockBackend).
    """

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise ValueError("HttpBackend requires an endpoint")
        self.config = config
        self.calls = 0
        self.attempts = 0
        self._limiter = _RateLimiter(config.requests_per_second)
        self._session = requests.Session()

    def complete(self, text: str) -> str:
        self._limiter.wait()
        self.attempts += 1
        headers = {}
        credential = os.environ.get(CREDENTIAL_ENV_VAR)
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        payload = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": text},
            ],
        }
        try:
            resp = self._session.post(
                self.config.endpoint, json=payload, headers=headers, timeout=self.config.timeout
            )
        except requests.RequestException as exc:
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        body = resp.json()
        self.calls += 1
        return body["choices"][0]["message"]["content"]


def qc_source(text: str, policy: QcPolicy) -> Discard | None:
    """Discard overly brief source text before it reaches the backend."""
    n = stats.count_tokens(text)
    if n < policy.min_source_tokens:
        return Discard(DISCARD_TOO_BRIEF, f"{n} tokens < {policy.min_source_tokens}")
    return None


def qc_translation(text_zh: str, policy: QcPolicy) -> Discard | None:
    """Automated proxy for post-translation quality control."""
    if len(text_zh) < policy.min_translated_chars:
        return Discard(DISCARD_TOO_SHORT, f"{len(text_zh)} chars < {policy.min_translated_chars}")
    letters = [ch for ch in text_zh if ch.isalpha()]
    if letters:
        latin = sum(1 for ch in letters if ("a" <= ch <= "z") or ("A" <= ch <= "Z"))
        ratio = latin / len(letters)
        if ratio > policy.max_latin_ratio:
            return Discard(DISCARD_NOT_TRANSLATED, f"latin ratio {ratio:.2f} > {policy.max_latin_ratio}")
    for marker in policy.refusal_markers:
        if marker in text_zh:
            return Discard(DISCARD_REFUSAL, f"marker: {marker}")
    return None


def translate_text(
    text: str,
    backend,
    cache: TranslationCache,
    refusal_markers: tuple[str, ...] = (),
) -> tuple[str, str]:
    """Translate one string, returning (translation, "hit"|"miss").

    On a cache miss exactly one successful backend call is made, after at
    most ``max_retries`` retries of transient failures. Responses are cached
    before the refusal check so that a rerun over the same corpus stays at
    zero backend calls even for refused inputs; BackendRefusal is raised on
    both the hit and the miss path.
    """
    if not text.strip():
        raise InvalidInput("text must be non-empty")
    cfg: BackendConfig = backend.config
    key = cache_key(text, cfg.prompt_version, cfg.model)
    result = cache.get(key)
    outcome = "hit"
    if result is None:
        outcome = "miss"
        last_error: Exception | None = None
        for _ in range(cfg.max_retries + 1):
            try:
                result = backend.complete(text)
                break
            except TransientBackendError as exc:
                last_error = exc
        else:
            raise BackendExhausted(f"backend failed after {cfg.max_retries + 1} attempts: {last_error}")
        cache.put(key, result)

    for marker in refusal_markers:
        if marker in result:
            raise BackendRefusal(f"marker: {marker}")
    return result, outcome


def translate_record(
    record: SourceRecord,
    backend,
    cache: TranslationCache,
    policy: QcPolicy,
    image_ref: str,
) -> AlignmentPair | InstructionPair | Discard:
    """Translate one record into its pair type, or discard it with a reason.

    Question-answer records translate question then answer as two independent
    (and independently cached) calls; a discard on either part discards the
    whole record. Source QC always precedes the part's backend call.
    """

    def _translate_part(text: str) -> tuple[str, Discard | None]:
        discard = qc_source(text, policy)
        if discard is not None:
            return "", discard
        try:
            text_zh, _ = translate_text(text, backend, cache, policy.refusal_markers)
        except BackendRefusal as exc:
            return "", Discard(DISCARD_REFUSAL, str(exc))
        return text_zh, qc_translation(text_zh, policy)

    if record.text_role == "question_answer":
        assert record.qa is not None
        question_zh, discard = _translate_part(record.qa.question)
        if discard is not None:
            return discard
        answer_zh, discard = _translate_part(record.qa.answer)
        if discard is not None:
            return discard
        return InstructionPair(
            id=record.id, image_ref=image_ref, question_zh=question_zh, answer_zh=answer_zh
        )

    text_zh, discard = _translate_part(record.text)
    if discard is not None:
        return discard
    return AlignmentPair(
        id=record.id,
        image_ref=image_ref,
        text_zh=text_zh,
        category=CATEGORY_BY_ROLE[record.text_role],
    )
