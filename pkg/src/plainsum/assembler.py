"""Second-stage input assembly and generation brokering.

The seq2seq input is the narrative prompt, one more separator token, and
the extractive summary's sentences joined by spaces. Token budgeting
counts canonical-tokenizer tokens plus one token per separator; when an
input exceeds the budget, whole summary sentences are dropped from the
end first (the prompt stays intact), then prompt key phrases from the
end, never reordering what remains.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .corpus import tokenize
from .errors import DataError
from .narrative import NarrativePrompt, SEPARATOR
from .protocol import DecodeParams, GenerationClient
from .summarizer import ExtractiveSummary

DEFAULT_BUDGET = 1024


@dataclass(frozen=True)
class AssembledInput:
    doc_id: str
    prompt: NarrativePrompt
    summary: ExtractiveSummary
    rendered: str
    token_count: int
    dropped_sentences: int = 0
    dropped_phrases: int = 0


@dataclass(frozen=True)
class GenerationResult:
    doc_id: str
    generated_pls: str
    latency_s: float
    model_tag: str | None = None
    truncated_by_adapter: bool | None = None

    def __post_init__(self):
        if not self.generated_pls:
            raise DataError(f"doc {self.doc_id!r}: empty generation")


def _count_tokens(phrase_texts: list[str], sentence_texts: list[str]) -> int:
    # One separator token between adjacent phrases plus one before the
    # summary block, i.e. exactly len(phrase_texts) separators.
    phrase_tokens = sum(len(tokenize(t)) for t in phrase_texts)
    sentence_tokens = sum(len(tokenize(t)) for t in sentence_texts)
    return phrase_tokens + sentence_tokens + len(phrase_texts)


def assemble_input(
    prompt: NarrativePrompt,
    summary: ExtractiveSummary,
    budget: int = DEFAULT_BUDGET,
    doc_id: str | None = None,
) -> AssembledInput:
    """Compose prompt + separator + summary under the token budget."""
    if doc_id is None:
        doc_id = summary.doc_id or prompt.doc_id
    if prompt.doc_id and summary.doc_id and prompt.doc_id != summary.doc_id:
        raise DataError(
            f"prompt doc {prompt.doc_id!r} and summary doc {summary.doc_id!r} differ"
        )
    phrases = list(prompt.phrases)
    sentences = list(summary.selected)
    scores = list(summary.scores)
    if not phrases:
        raise DataError(f"doc {doc_id!r}: prompt has no key phrases")
    if not sentences:
        raise DataError(f"doc {doc_id!r}: summary has no sentences")

    def current_count() -> int:
        return _count_tokens([p.text for p in phrases], [s.text for s in sentences])

    dropped_sentences = 0
    while current_count() > budget and len(sentences) > 1:
        sentences.pop()
        scores.pop()
        dropped_sentences += 1
    dropped_phrases = 0
    while current_count() > budget and len(phrases) > 1:
        phrases.pop()
        dropped_phrases += 1
    token_count = current_count()
    if token_count > budget:
        raise DataError(
            f"doc {doc_id!r}: budget {budget} cannot fit one key phrase plus one "
            f"summary sentence ({token_count} tokens)"
        )

    truncated_prompt = NarrativePrompt(phrases=tuple(phrases), doc_id=prompt.doc_id)
    truncated_summary = ExtractiveSummary(
        doc_id=summary.doc_id, selected=tuple(sentences), scores=tuple(scores)
    )
    rendered = (
        truncated_prompt.rendered + SEPARATOR + " ".join(s.text for s in sentences)
    )
    return AssembledInput(
        doc_id=doc_id,
        prompt=truncated_prompt,
        summary=truncated_summary,
        rendered=rendered,
        token_count=token_count,
        dropped_sentences=dropped_sentences,
        dropped_phrases=dropped_phrases,
    )


def generate(
    assembled: AssembledInput,
    endpoint: str | GenerationClient,
    params: DecodeParams | None = None,
    timeout: float = 30.0,
    retries: int = 2,
) -> GenerationResult:
    """Send one assembled input through the generation protocol.

    Transport failures are retried idempotently (same request id) up to
    ``retries`` times; protocol violations are not retried.
    """
    params = params or DecodeParams()
    own_client = not isinstance(endpoint, GenerationClient)
    client = (
        GenerationClient(endpoint, timeout=timeout, retries=retries)
        if own_client
        else endpoint
    )
    try:
        started = time.monotonic()
        reply = client.generate_text(assembled.doc_id, assembled.rendered, params)
        latency = time.monotonic() - started
    finally:
        if own_client:
            client.close()
    return GenerationResult(
        doc_id=assembled.doc_id,
        generated_pls=reply["output"],
        latency_s=latency,
        model_tag=reply["model"],
        truncated_by_adapter=reply["truncated"],
    )
