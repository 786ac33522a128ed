"""LLM-derived adjacency: prompt rendering, answer parsing, matrices,
and a minimal chat-completion client.

Raw responses are always persisted to JSONL ({"icd_code": ..., "response":
...} per line) before any parsing, so matrix construction replays offline
and deterministically from the file.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .codes import Vocabulary, is_valid_code
from .errors import FormatError, LlmParseError, ValidationError
from .matrix import InterconnectionMatrix

log = logging.getLogger(__name__)

PROMPT_HEADER = (
    "I'll give you ICD-10 categories (for example, C25, NOT C25.0!) and their "
    "descriptions. You have to tell me, If a patient has an ICD code for a given "
    "category in their medical record, what other categories of codes are also "
    "likely to be in their medical record?\n"
    "\n"
    "ANSWER IN JSON FORMAT:\n"
    "{\n"
    '    "comment": <your thoughts and explanations>,\n'
    '    "answer": <list of categories in square brackets, separated by comma, '
    "for example: [A01, C05, ..., H12]>\n"
    "}\n"
    "DO NOT ADD ANYTHING ELSE IN YOUR ANSWER."
)

TEMPLATE_MULTI = "{{\n    icd_code: {},\n    description: {},\n}}"

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class LlmAnswer:
    """Parsed model reply for one source code.

    answer_codes are validated three-character categories, deduplicated,
    with the source itself removed. out_of_vocab lists the subset of
    answer_codes absent from the reference vocabulary; dropped counts
    entries that failed the category pattern.
    """

    source_code: str
    comment: str
    answer_codes: tuple[str, ...]
    raw: str
    out_of_vocab: tuple[str, ...] = ()
    dropped: int = 0


def render_prompt(code: str, description: str) -> str:
    """Instruction block plus the filled two-field template; byte-stable."""
    if not description or not description.strip():
        raise ValidationError(f"empty description for code {code}")
    return PROMPT_HEADER + "\n\n" + TEMPLATE_MULTI.format(code, description)


def _first_json_object(text: str) -> dict:
    """Extract the first JSON object, tolerating code fences and prose."""
    cleaned = text
    if "```" in cleaned:
        parts = cleaned.split("```")
        # fenced payloads sit at odd indices; strip a language tag line
        candidates = []
        for i in range(1, len(parts), 2):
            block = parts[i]
            first_line, _, rest = block.partition("\n")
            if first_line.strip().lower() in ("json", ""):
                block = rest
            candidates.append(block)
        cleaned = "\n".join(candidates) + "\n" + cleaned
    decoder = json.JSONDecoder()
    idx = cleaned.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(cleaned, idx)
        except json.JSONDecodeError:
            idx = cleaned.find("{", idx + 1)
            continue
        if isinstance(obj, dict):
            return obj
        idx = cleaned.find("{", idx + 1)
    raise LlmParseError("no JSON object found in response", raw=text)


def parse_answer(raw: str, source: str, vocab: Vocabulary) -> LlmAnswer:
    """Parse one reply. Malformed list entries are dropped and counted;
    codes outside `vocab` are kept and flagged in out_of_vocab."""
    obj = _first_json_object(raw)
    if "answer" not in obj:
        raise LlmParseError("response JSON has no `answer` field", raw=raw)
    answer = obj["answer"]
    if isinstance(answer, str):
        answer = [part.strip(" []") for part in answer.split(",")]
    if not isinstance(answer, list):
        raise LlmParseError("`answer` field is not a list", raw=raw)
    codes: list[str] = []
    seen: set[str] = set()
    dropped = 0
    for entry in answer:
        if not isinstance(entry, str):
            dropped += 1
            continue
        code = entry.strip().upper()
        if not is_valid_code(code):
            dropped += 1
            continue
        if code == source or code in seen:
            continue
        seen.add(code)
        codes.append(code)
    comment = obj.get("comment", "")
    if not isinstance(comment, str):
        comment = json.dumps(comment, sort_keys=True)
    out_of_vocab = tuple(c for c in codes if c not in vocab)
    return LlmAnswer(
        source_code=source,
        comment=comment,
        answer_codes=tuple(codes),
        raw=raw,
        out_of_vocab=out_of_vocab,
        dropped=dropped,
    )


def adjacency_matrix(
    answers: Sequence[LlmAnswer],
    vocab: Vocabulary,
    symmetrize: bool = True,
) -> InterconnectionMatrix:
    """Binary matrix with m[source][target] = 1 for every answered target
    present in `vocab`. Out-of-vocab targets have no cell and are skipped."""
    n = len(vocab)
    values = np.zeros((n, n), dtype=np.float64)
    for ans in answers:
        row = vocab.position(ans.source_code)
        for code in ans.answer_codes:
            if code in vocab:
                values[row, vocab.position(code)] = 1.0
    matrix = InterconnectionMatrix(
        vocab=vocab,
        values=values,
        kind="binary",
        symmetric=False,
        method_name="llm",
    )
    return matrix.symmetrize() if symmetrize else matrix


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    auth_env_var: str = ""
    max_concurrency: int = 4
    max_retries: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValidationError("max_concurrency must be at least 1")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be non-negative")


def load_endpoint_config(path: str | Path) -> EndpointConfig:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "url" not in obj or "model" not in obj:
        raise FormatError(f"{path}: endpoint config needs url and model")
    known = {"url", "model", "auth_env_var", "max_concurrency", "max_retries",
             "backoff_base"}
    return EndpointConfig(**{k: v for k, v in obj.items() if k in known})


class TransportError(Exception):
    """HTTP-level failure; status None means a network error."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


def _http_transport(url: str, headers: dict[str, str], payload: dict) -> str:
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=120) as resp:
            return resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        raise TransportError(f"HTTP {exc.code}", status=exc.code) from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise TransportError(str(exc), status=None) from exc


def _extract_content(body: str) -> str:
    """Pull the assistant text out of a chat-completion body; pass the
    body through unchanged when it has some other shape."""
    try:
        obj = json.loads(body)
        return obj["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError):
        return body


@dataclass
class QueryRecord:
    icd_code: str
    response: str | None = None
    error: str | None = None
    attempts: int = 1


Transport = Callable[[str, dict[str, str], dict], str]


def _query_one(
    config: EndpointConfig,
    code: str,
    prompt: str,
    transport: Transport,
    sleep: Callable[[float], None],
) -> QueryRecord:
    headers = {"Content-Type": "application/json"}
    if config.auth_env_var:
        token = os.environ.get(config.auth_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
    }
    last_error = "no attempt made"
    for attempt in range(config.max_retries + 1):
        try:
            body = transport(config.url, headers, payload)
            return QueryRecord(icd_code=code, response=_extract_content(body),
                              attempts=attempt + 1)
        except TransportError as exc:
            last_error = str(exc)
            retryable = exc.status is None or exc.status in RETRYABLE_STATUSES
            if not retryable or attempt == config.max_retries:
                if not retryable:
                    log.warning("non-retryable failure for %s: %s", code, exc)
                    return QueryRecord(icd_code=code, error=last_error,
                                       attempts=attempt + 1)
                break
            log.info("retrying %s after %s (attempt %d)", code, exc, attempt + 1)
            sleep(config.backoff_base * (2 ** attempt))
    return QueryRecord(icd_code=code, error=last_error,
                       attempts=config.max_retries + 1)


def query_endpoint(
    config: EndpointConfig,
    items: Sequence[tuple[str, str]],
    out_path: str | Path,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[QueryRecord]:
    """Send one prompt per (code, prompt) item with bounded concurrency.

    Every outcome is appended to `out_path` as JSONL in input order before
    this function returns; failed prompts become error records and the run
    continues.
    """
    transport = transport or _http_transport
    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        records = list(pool.map(
            lambda item: _query_one(config, item[0], item[1], transport, sleep),
            items,
        ))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            if rec.response is not None:
                line = {"icd_code": rec.icd_code, "response": rec.response}
            else:
                line = {"icd_code": rec.icd_code, "error": rec.error or "failed"}
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    return records


def load_responses(path: str | Path) -> list[tuple[str, str]]:
    """Read persisted (icd_code, response) pairs; error records are
    skipped with a log line so replays keep working."""
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON line") from exc
            if not isinstance(obj, dict) or "icd_code" not in obj:
                raise FormatError(f"{path}:{lineno}: expected icd_code field")
            if "response" not in obj:
                log.info("skipping error record for %s at %s:%d",
                         obj.get("icd_code"), path, lineno)
                continue
            pairs.append((str(obj["icd_code"]), str(obj["response"])))
    return pairs


def answers_from_responses(
    pairs: Sequence[tuple[str, str]],
    vocab: Vocabulary,
) -> tuple[list[LlmAnswer], int]:
    """Parse persisted responses; unparseable ones are counted, not fatal."""
    answers: list[LlmAnswer] = []
    failures = 0
    for code, raw in pairs:
        try:
            answers.append(parse_answer(raw, code, vocab))
        except LlmParseError as exc:
            failures += 1
            log.warning("unparseable response for %s: %s", code, exc)
    return answers, failures
