"""Corpus ingestion, sentence segmentation, and tokenization.

All downstream stages (sentence matching, n-gram metrics, token budgets)
run on the output of the two canonical functions defined here:
``segment_sentences`` and ``tokenize``. Both are deterministic and
dependency-free so that dataset statistics are reproducible.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError

SPLITS = ("train", "dev", "test")

# Combined abstract+PLS token count above which a pair is flagged at
# ingestion. Truncation itself happens later, at input assembly.
COMBINED_TOKEN_BUDGET = 1024

_TOKEN_RE = re.compile(r"[^\W_]+")
_TERMINALS = frozenset(".!?")

# Words whose trailing period never ends a sentence. Matched
# case-insensitively against the whitespace-delimited word ending at the
# period, after stripping leading brackets/quotes.
_ABBREVIATIONS = frozenset(
    {
        "e.g.", "i.e.", "vs.", "cf.", "ca.", "approx.", "al.",
        "dr.", "mr.", "mrs.", "ms.", "prof.", "fig.", "figs.",
    }
)
# These only block a split when the next sentence candidate starts with a
# digit ("No. 5" stays together; "No. Patients were..." splits).
_ABBREVIATIONS_BEFORE_DIGIT = frozenset({"no.", "nos."})


@dataclass(frozen=True)
class Sentence:
    """One sentence of a source document.

    ``index`` is the 0-based position within the document; ``tokens`` is
    the canonical tokenization of ``text``.
    """

    index: int
    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, index: int, text: str) -> "Sentence":
        return cls(index=index, text=text, tokens=tuple(tokenize(text)))


@dataclass(frozen=True)
class DocumentPair:
    """A parallel technical-abstract / plain-language-summary instance."""

    id: str
    abstract_text: str
    pls_text: str
    split: str
    over_budget: bool = False

    def __post_init__(self):
        if not self.abstract_text.strip():
            raise DataError(f"document {self.id!r}: empty abstract")
        if not self.pls_text.strip():
            raise DataError(f"document {self.id!r}: empty pls")
        if self.split not in SPLITS:
            raise DataError(
                f"document {self.id!r}: split must be one of {SPLITS}, got {self.split!r}"
            )

    def abstract_sentences(self) -> list[Sentence]:
        return segment_sentences(self.abstract_text)

    def pls_sentences(self) -> list[Sentence]:
        return segment_sentences(self.pls_text)


@dataclass
class Corpus:
    pairs: list[DocumentPair] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for pair in self.pairs:
            if pair.id in seen:
                raise DataError(f"duplicate document id {pair.id!r}")
            seen.add(pair.id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[DocumentPair]:
        return iter(self.pairs)

    def split_counts(self) -> dict[str, int]:
        counts = {split: 0 for split in SPLITS}
        for pair in self.pairs:
            counts[pair.split] += 1
        return counts

    def subset(self, split: str) -> list[DocumentPair]:
        if split == "all":
            return list(self.pairs)
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r}")
        return [p for p in self.pairs if p.split == split]


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal alphanumeric runs.

    Punctuation and underscores are dropped; "IAS/CAS" becomes
    ["ias", "cas"]. Used uniformly for Jaccard matching, n-gram metrics,
    and token budgets.
    """
    return _TOKEN_RE.findall(text.lower())


def _word_before(text: str, end: int) -> str:
    """Whitespace-delimited word ending at text[end] inclusive."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start : end + 1]
    # Strip leading brackets/quotes so "(e.g." matches "e.g.".
    return word.lstrip("([{'\"‘“").lower()


def _blocks_split(text: str, punct_idx: int, next_idx: int) -> bool:
    if text[punct_idx] != ".":
        return False
    word = _word_before(text, punct_idx)
    if word in _ABBREVIATIONS:
        return True
    if word in _ABBREVIATIONS_BEFORE_DIGIT and text[next_idx].isdigit():
        return True
    return False


def segment_sentences(text: str) -> list[Sentence]:
    """Split text into sentences with a deterministic rule-based splitter.

    A sentence boundary is placed after '.', '!', or '?' when it is
    followed by whitespace and then an uppercase letter or a digit,
    unless the terminating word is a known abbreviation. Joining the
    sentence texts with single spaces reconstructs the input up to
    inter-sentence whitespace.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINALS:
            j = i + 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if (
                k > j
                and k < n
                and (text[k].isupper() or text[k].isdigit())
                and not _blocks_split(text, i, k)
            ):
                piece = text[start:j].strip()
                if piece:
                    sentences.append(piece)
                start = k
                i = k
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return [Sentence.from_text(idx, s) for idx, s in enumerate(sentences)]


def _pair_from_record(record: dict, where: str) -> DocumentPair:
    for key in ("id", "abstract", "pls", "split"):
        if key not in record:
            raise DataError(f"missing field {key} at {where}")
    abstract = record["abstract"]
    pls = record["pls"]
    combined = len(tokenize(abstract)) + len(tokenize(pls))
    return DocumentPair(
        id=str(record["id"]),
        abstract_text=abstract,
        pls_text=pls,
        split=record["split"],
        over_budget=combined > COMBINED_TOKEN_BUDGET,
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load the canonical JSONL corpus: one document pair per line.

    Each line is an object {"id", "abstract", "pls", "split"}. Errors
    name the offending line.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    pairs: list[DocumentPair] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataError(f"malformed JSON at line {lineno}: {err.msg}") from err
            if not isinstance(record, dict):
                raise DataError(f"expected an object at line {lineno}")
            pairs.append(_pair_from_record(record, f"line {lineno}"))
    return Corpus(pairs)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the canonical JSONL form (UTF-8, LF line endings)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for pair in corpus:
            record = {
                "id": pair.id,
                "abstract": pair.abstract_text,
                "pls": pair.pls_text,
                "split": pair.split,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


_RELEASE_SPLIT_FILES = {
    "train": "train",
    "dev": "val",
    "test": "test",
}


def import_cochrane(path: str | Path) -> Corpus:
    """Import the published Cochrane release into the canonical form.

    Two layouts are accepted:

    * a directory holding line-aligned ``train/val/test`` files named
      ``<split>.source`` and ``<split>.target`` (one abstract / summary
      per line; an optional ``<split>.doi`` sidecar provides ids);
    * a single JSON file holding a list of objects with ``doi`` (or
      ``id``), ``abstract``, ``pls``, and ``split`` keys, where split
      values ``val``/``valid``/``validation`` map to ``dev``.
    """
    path = Path(path)
    if path.is_dir():
        return _import_release_dir(path)
    if not path.exists():
        raise DataError(f"corpus release not found: {path}")
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise DataError(f"{path}: not valid JSON: {err.msg}") from err
    if not isinstance(records, list):
        raise DataError(f"{path}: expected a JSON list of records")
    pairs = []
    for idx, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise DataError(f"{path}: record {idx} is not an object")
        split = str(rec.get("split", "")).lower()
        if split in ("val", "valid", "validation"):
            split = "dev"
        normalized = {
            "id": rec.get("doi", rec.get("id", f"doc-{idx:05d}")),
            "abstract": rec.get("abstract"),
            "pls": rec.get("pls"),
            "split": split,
        }
        if normalized["abstract"] is None or normalized["pls"] is None:
            raise DataError(f"{path}: record {idx} lacks abstract/pls")
        pairs.append(_pair_from_record(normalized, f"record {idx}"))
    return Corpus(pairs)


def _import_release_dir(path: Path) -> Corpus:
    pairs: list[DocumentPair] = []
    found_any = False
    for split, stem in _RELEASE_SPLIT_FILES.items():
        source = path / f"{stem}.source"
        target = path / f"{stem}.target"
        if not source.exists() and not target.exists():
            continue
        if not (source.exists() and target.exists()):
            raise DataError(f"{path}: {stem}.source/{stem}.target must both exist")
        found_any = True
        abstracts = source.read_text(encoding="utf-8").splitlines()
        summaries = target.read_text(encoding="utf-8").splitlines()
        if len(abstracts) != len(summaries):
            raise DataError(
                f"{path}: {stem}.source has {len(abstracts)} lines but "
                f"{stem}.target has {len(summaries)}"
            )
        ids = _sidecar_ids(path / f"{stem}.doi", split, len(abstracts))
        for doc_id, abstract, summary in zip(ids, abstracts, summaries):
            record = {"id": doc_id, "abstract": abstract, "pls": summary, "split": split}
            pairs.append(_pair_from_record(record, f"{stem}.source"))
    if not found_any:
        raise DataError(f"{path}: no <split>.source/<split>.target files found")
    return Corpus(pairs)


def _sidecar_ids(doi_path: Path, split: str, count: int) -> list[str]:
    if doi_path.exists():
        ids = doi_path.read_text(encoding="utf-8").splitlines()
        if len(ids) != count:
            raise DataError(f"{doi_path}: expected {count} ids, found {len(ids)}")
        return ids
    return [f"{split}-{i:05d}" for i in range(count)]


def join_tokens(tokens: Iterable[str]) -> str:
    return " ".join(tokens)
