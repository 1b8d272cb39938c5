"""Jaccard sentence matching: label abstract sentences as summary-positive.

Each summary sentence is matched to the abstract sentence with the
minimum Jaccard distance over token sets; the union of winners (dedup'd)
is the positive set, everything else is negative. Ties are broken by the
lowest abstract index, via a strict less-than update on the running
minimum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, Sentence, SPLITS
from .errors import DataError


@dataclass(frozen=True)
class MatchResult:
    """Winner of one summary sentence's scan over the abstract."""

    pls_index: int
    best_abs_index: int
    best_distance: float


@dataclass(frozen=True)
class LabeledSentence:
    doc_id: str
    sentence: Sentence
    label: int
    matched_by: tuple[int, ...] = ()

    def __post_init__(self):
        if (self.label == 1) != bool(self.matched_by):
            raise DataError(
                f"doc {self.doc_id!r} sentence {self.sentence.index}: "
                "label must be 1 iff matched_by is non-empty"
            )


@dataclass
class LabeledSentenceDataset:
    """Labeled abstract sentences for every document, grouped by split."""

    entries: list[LabeledSentence] = field(default_factory=list)
    splits: dict[str, str] = field(default_factory=dict)  # doc_id -> split
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (doc_id, reason)

    def split_of(self, doc_id: str) -> str:
        return self.splits[doc_id]

    def entries_for_split(self, split: str) -> list[LabeledSentence]:
        if split == "all":
            return list(self.entries)
        return [e for e in self.entries if self.splits[e.doc_id] == split]

    def documents(self, split: str = "all") -> list[list[LabeledSentence]]:
        """Entries regrouped per document, in corpus order."""
        grouped: dict[str, list[LabeledSentence]] = {}
        for entry in self.entries_for_split(split):
            grouped.setdefault(entry.doc_id, []).append(entry)
        return list(grouped.values())

    def sentence_counts(self) -> dict[str, int]:
        counts = {split: 0 for split in SPLITS}
        for entry in self.entries:
            counts[self.splits[entry.doc_id]] += 1
        return counts

    def positive_ratio(self, split: str = "all") -> float:
        entries = self.entries_for_split(split)
        if not entries:
            return 0.0
        return sum(e.label for e in entries) / len(entries)


def jaccard_distance(a: Iterable[str], b: Iterable[str]) -> float:
    """1 - |a n b| / |a u b| over token sets.

    Two empty sets count as identical (distance 0); one empty set against
    a non-empty one is maximally distant (distance 1).
    """
    set_a, set_b = frozenset(a), frozenset(b)
    union = set_a | set_b
    if not union:
        return 0.0
    return 1.0 - len(set_a & set_b) / len(union)


def match_pls_sentence(pls: Sentence, abs_sents: Sequence[Sentence]) -> MatchResult:
    """Find the abstract sentence closest to one summary sentence.

    The running minimum is updated on strict improvement only, so the
    first (lowest-index) abstract sentence attaining the minimum wins.
    """
    if not abs_sents:
        raise DataError("cannot match against an empty abstract")
    pls_tokens = frozenset(pls.tokens)
    best_distance = float("inf")
    best_index = 0
    for sent in abs_sents:
        distance = jaccard_distance(pls_tokens, sent.tokens)
        if distance < best_distance:
            best_distance = distance
            best_index = sent.index
    return MatchResult(pls_index=pls.index, best_abs_index=best_index, best_distance=best_distance)


def label_abstract(
    abs_sents: Sequence[Sentence], pls_sents: Sequence[Sentence], doc_id: str = ""
) -> list[LabeledSentence]:
    """Label every abstract sentence 0/1 by minimum-distance matching.

    The positive set is the union of per-summary-sentence winners; a
    sentence already selected is not added twice, but every summary
    sentence that selected it is recorded in ``matched_by``. Output
    preserves the abstract's sentence order.
    """
    if not abs_sents:
        raise DataError(f"doc {doc_id!r}: empty abstract sentence list")
    if not pls_sents:
        raise DataError(f"doc {doc_id!r}: empty summary sentence list")
    matched_by: dict[int, list[int]] = {}
    for pls in pls_sents:
        result = match_pls_sentence(pls, abs_sents)
        matched_by.setdefault(result.best_abs_index, []).append(result.pls_index)
    return [
        LabeledSentence(
            doc_id=doc_id,
            sentence=sent,
            label=1 if sent.index in matched_by else 0,
            matched_by=tuple(matched_by.get(sent.index, ())),
        )
        for sent in abs_sents
    ]


def build_summary_dataset(corpus: Corpus) -> LabeledSentenceDataset:
    """Run the matcher over a corpus, skipping degenerate documents.

    Documents whose abstract or summary segments to zero sentences, or
    to sentences with zero tokens overall, are skipped with a warning
    record rather than aborting the build.
    """
    dataset = LabeledSentenceDataset()
    for pair in corpus:
        abs_sents = pair.abstract_sentences()
        pls_sents = pair.pls_sentences()
        if not any(s.tokens for s in abs_sents):
            dataset.skipped.append((pair.id, "abstract segments to no usable sentences"))
            continue
        if not any(s.tokens for s in pls_sents):
            dataset.skipped.append((pair.id, "pls segments to no usable sentences"))
            continue
        dataset.entries.extend(label_abstract(abs_sents, pls_sents, doc_id=pair.id))
        dataset.splits[pair.id] = pair.split
    return dataset


def save_dataset(dataset: LabeledSentenceDataset, path: str | Path) -> None:
    """Write one JSONL row per labeled sentence."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for entry in dataset.entries:
            row = {
                "doc_id": entry.doc_id,
                "split": dataset.splits[entry.doc_id],
                "sent_index": entry.sentence.index,
                "text": entry.sentence.text,
                "label": entry.label,
                "matched_by": list(entry.matched_by),
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_dataset(path: str | Path) -> LabeledSentenceDataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    dataset = LabeledSentenceDataset()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataError(f"malformed JSON at line {lineno}: {err.msg}") from err
            try:
                entry = LabeledSentence(
                    doc_id=row["doc_id"],
                    sentence=Sentence.from_text(row["sent_index"], row["text"]),
                    label=row["label"],
                    matched_by=tuple(row["matched_by"]),
                )
                split = row["split"]
            except KeyError as err:
                raise DataError(f"missing field {err.args[0]} at line {lineno}") from err
            if split not in SPLITS:
                raise DataError(f"unknown split {split!r} at line {lineno}")
            previous = dataset.splits.setdefault(entry.doc_id, split)
            if previous != split:
                raise DataError(f"doc {entry.doc_id!r} appears in multiple splits")
            dataset.entries.append(entry)
    return dataset


def dataset_stats(dataset: LabeledSentenceDataset) -> dict:
    """Per-split sentence counts, document counts, and positive ratios."""
    stats: dict = {"splits": {}, "skipped": len(dataset.skipped)}
    for split in SPLITS:
        entries = dataset.entries_for_split(split)
        docs = {e.doc_id for e in entries}
        stats["splits"][split] = {
            "documents": len(docs),
            "sentences": len(entries),
            "positive_ratio": dataset.positive_ratio(split) if entries else None,
        }
    stats["total_sentences"] = len(dataset.entries)
    stats["positive_ratio"] = dataset.positive_ratio("all") if dataset.entries else None
    return stats
