"""Readability, lexical-similarity, and simplification metrics.

Everything here is computed from first principles on the toolkit's
canonical tokenizer output (no stemming, no stopword removal) so that
scores are reproducible from the corpus alone. Readability formulas use
the deterministic syllable heuristic documented on ``count_syllables``.

Score ranges: ROUGE/BLEU/SARI values live in [0, 1] in memory and are
scaled by 100 when a report is serialized; FK/ARI are unbounded grade
levels.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Protocol, Sequence

from .corpus import segment_sentences, tokenize
from .errors import DataError

BLEU_EPSILON = 1e-9
_VOWEL_RUN_RE = re.compile(r"[aeiouy]+")


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


class SariScore(NamedTuple):
    sari: float
    add_f1: float
    keep_f1: float
    del_precision: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Readability
# ---------------------------------------------------------------------------


def count_syllables(word: str) -> int:
    """Heuristic syllable count: vowel-group runs, adjusted for silent e.

    Counts maximal runs of a/e/i/o/u/y, subtracts one for a terminal 'e'
    unless the word ends in 'le', and never returns less than 1.
    """
    w = word.lower()
    groups = len(_VOWEL_RUN_RE.findall(w))
    if w.endswith("e") and not w.endswith("le"):
        groups -= 1
    return max(groups, 1)


def _text_counts(text: str) -> tuple[int, int, list[str]]:
    words = tokenize(text)
    if not words:
        raise DataError("readability metrics need at least one word")
    n_sentences = max(len(segment_sentences(text)), 1)
    return len(words), n_sentences, words


def fk_grade(text: str) -> float:
    """Grade level from words-per-sentence and syllables-per-word:
    0.39 * (words/sentences) + 11.8 * (syllables/word) - 15.59.
    """
    n_words, n_sentences, words = _text_counts(text)
    n_syllables = sum(count_syllables(w) for w in words)
    return 0.39 * (n_words / n_sentences) + 11.8 * (n_syllables / n_words) - 15.59


def ari(text: str) -> float:
    """Grade level from characters-per-word and words-per-sentence:
    4.71 * (chars/word) + 0.5 * (words/sentence) - 21.43.

    Characters count letters and digits only.
    """
    n_words, n_sentences, words = _text_counts(text)
    n_chars = sum(len(w) for w in words)
    return 4.71 * (n_chars / n_words) + 0.5 * (n_words / n_sentences) - 21.43


# ---------------------------------------------------------------------------
# Lexical similarity
# ---------------------------------------------------------------------------


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> PRF:
    """Clipped n-gram overlap (multiset intersection) precision/recall/F1."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = _ngram_counts(candidate, n)
    ref = _ngram_counts(reference, n)
    total_cand = sum(cand.values())
    total_ref = sum(ref.values())
    if total_cand == 0 or total_ref == 0:
        return PRF(0.0, 0.0, 0.0)
    overlap = sum((cand & ref).values())
    precision = overlap / total_cand
    recall = overlap / total_ref
    return PRF(precision, recall, _f1(precision, recall))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> PRF:
    """Longest-common-subsequence precision/recall/F1."""
    if not candidate or not reference:
        return PRF(0.0, 0.0, 0.0)
    lcs = _lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return PRF(precision, recall, _f1(precision, recall))


def bleu(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
    epsilon: float = BLEU_EPSILON,
) -> float:
    """Geometric mean of modified n-gram precisions with brevity penalty.

    Zero-match (and zero-ngram) orders are smoothed by adding ``epsilon``
    to both match and total counts, so an exact candidate==reference pair
    still scores exactly 1.0. The effective reference length is the
    closest to the candidate's, ties going to the shorter reference.
    """
    if not references:
        raise DataError("bleu needs at least one reference")
    cand_len = len(candidate)
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_order + 1):
        cand = _ngram_counts(candidate, n)
        total = sum(cand.values())
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        matches = sum(min(count, max_ref[gram]) for gram, count in cand.items())
        log_sum += math.log((matches + epsilon) / (total + epsilon))
    geo_mean = math.exp(log_sum / max_order)
    ref_len = min((abs(len(r) - cand_len), len(r)) for r in references)[1]
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * geo_mean


# ---------------------------------------------------------------------------
# SARI
# ---------------------------------------------------------------------------


def _sari_ngram(
    src: Counter, cand: Counter, refs: Sequence[Counter], numref: int
) -> tuple[float, float, float]:
    """(add_f1, keep_f1, del_precision) for one n-gram order.

    Keep and delete are scored on reference-replicated counts, weighting
    each n-gram type by the fraction of its occurrences the references
    agree with. A component whose candidate-side and reference-side sets
    are both empty scores 1.0 (nothing to do, and nothing was done);
    a component with an empty denominator set on one side only inherits
    the other side through the harmonic mean.
    """
    ref_total: Counter = Counter()
    for ref in refs:
        ref_total.update(ref)
    src_rep = Counter({g: c * numref for g, c in src.items()})
    cand_rep = Counter({g: c * numref for g, c in cand.items()})

    keep_rep = src_rep & cand_rep
    keep_good = keep_rep & ref_total
    keep_all = src_rep & ref_total
    keep_p = (
        1.0
        if not keep_rep
        else sum(keep_good[g] / keep_rep[g] for g in keep_good) / len(keep_rep)
    )
    keep_r = (
        1.0
        if not keep_all
        else sum(keep_good[g] / keep_all[g] for g in keep_good) / len(keep_all)
    )

    del_rep = src_rep - cand_rep
    del_good = del_rep - ref_total
    del_p = (
        1.0
        if not del_rep
        else sum(del_good[g] / del_rep[g] for g in del_good) / len(del_rep)
    )

    add_cand = set(cand) - set(src)
    add_good = add_cand & set(ref_total)
    add_all = set(ref_total) - set(src)
    add_p = 1.0 if not add_cand else len(add_good) / len(add_cand)
    add_r = 1.0 if not add_all else len(add_good) / len(add_all)

    return _f1(add_p, add_r), _f1(keep_p, keep_r), del_p


def sari(
    source: Sequence[str],
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
) -> SariScore:
    """Simplification score over n-gram add/keep/delete operations.

    For n = 1..4: ADD is the F1 over n-grams the candidate introduced
    beyond the source, KEEP the reference-weighted F1 over n-grams shared
    by candidate and source, DELETE the precision of n-grams dropped from
    the source. Each component is averaged over n and the final score is
    the mean of the three averages.
    """
    if not references:
        raise DataError("sari needs at least one reference")
    numref = len(references)
    add_scores, keep_scores, del_scores = [], [], []
    for n in range(1, max_order + 1):
        add_f, keep_f, del_p = _sari_ngram(
            _ngram_counts(source, n),
            _ngram_counts(candidate, n),
            [_ngram_counts(ref, n) for ref in references],
            numref,
        )
        add_scores.append(add_f)
        keep_scores.append(keep_f)
        del_scores.append(del_p)
    add_avg = sum(add_scores) / max_order
    keep_avg = sum(keep_scores) / max_order
    del_avg = sum(del_scores) / max_order
    return SariScore((add_avg + keep_avg + del_avg) / 3, add_avg, keep_avg, del_avg)


# ---------------------------------------------------------------------------
# Corpus-level evaluation
# ---------------------------------------------------------------------------


class SemanticScorer(Protocol):
    def score(self, candidate: str, references: Sequence[str], doc_id: str = "") -> float: ...


@dataclass(frozen=True)
class EvalItem:
    source: str
    candidate: str
    references: tuple[str, ...]
    doc_id: str = ""


# Fields scaled by 100 when a report is written out.
_SCALED_FIELDS = (
    "rouge1_f", "rouge2_f", "rougeL_f", "bleu",
    "sari", "sari_add", "sari_keep", "sari_del",
)
_REPORT_FIELDS = ("fk", "ari") + _SCALED_FIELDS


@dataclass
class MetricReport:
    per_doc: list[dict] = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "per_doc": [self._scaled(row) for row in self.per_doc],
            "mean": self._scaled(self.mean),
            "config": self.config,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def write_csv(self, path: str | Path) -> None:
        fields = ["doc_id"] + [k for k in self.per_doc[0] if k != "doc_id"]
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            for row in self.per_doc:
                writer.writerow(self._scaled(row))

    @staticmethod
    def _scaled(row: dict) -> dict:
        return {
            k: (round(v * 100, 10) if k in _SCALED_FIELDS and v is not None else v)
            for k, v in row.items()
        }


def _evaluate_item(item: EvalItem, semantic_scorer: SemanticScorer | None) -> dict:
    src_tokens = tokenize(item.source)
    cand_tokens = tokenize(item.candidate)
    ref_token_lists = [tokenize(ref) for ref in item.references]
    try:
        fk_value = fk_grade(item.candidate)
        ari_value = ari(item.candidate)
    except DataError as err:
        raise DataError(f"doc {item.doc_id!r}: {err}") from err
    row: dict = {"doc_id": item.doc_id, "fk": fk_value, "ari": ari_value}
    for name, n in (("rouge1", 1), ("rouge2", 2)):
        best = max(
            (rouge_n(cand_tokens, ref, n) for ref in ref_token_lists),
            key=lambda prf: prf.f1,
        )
        row[f"{name}_f"] = best.f1
    best_l = max(
        (rouge_l(cand_tokens, ref) for ref in ref_token_lists),
        key=lambda prf: prf.f1,
    )
    row["rougeL_f"] = best_l.f1
    row["bleu"] = bleu(cand_tokens, ref_token_lists)
    sari_score = sari(src_tokens, cand_tokens, ref_token_lists)
    row["sari"] = sari_score.sari
    row["sari_add"] = sari_score.add_f1
    row["sari_keep"] = sari_score.keep_f1
    row["sari_del"] = sari_score.del_precision
    if semantic_scorer is not None:
        row["semantic"] = semantic_scorer.score(
            item.candidate, list(item.references), doc_id=item.doc_id
        )
    return row


def evaluate_corpus(
    items: Iterable[EvalItem | tuple],
    semantic_scorer: SemanticScorer | None = None,
) -> MetricReport:
    """Evaluate (source, candidate, references) triples document by document.

    Produces per-document rows plus unweighted means, in input order.
    """
    normalized: list[EvalItem] = []
    for idx, item in enumerate(items):
        if not isinstance(item, EvalItem):
            source, candidate, references = item
            item = EvalItem(source, candidate, tuple(references), doc_id=f"doc-{idx:05d}")
        if not item.references:
            raise DataError(f"doc {item.doc_id!r}: no references")
        normalized.append(item)
    if not normalized:
        raise DataError("nothing to evaluate: empty corpus")
    per_doc = [_evaluate_item(item, semantic_scorer) for item in normalized]
    metric_keys = [k for k in per_doc[0] if k != "doc_id"]
    mean = {k: sum(row[k] for row in per_doc) / len(per_doc) for k in metric_keys}
    config = {
        "tokenizer": "lowercase-alnum-runs",
        "bleu_smoothing_epsilon": BLEU_EPSILON,
        "multi_reference_rouge": "max-f1",
        "reported_scale": {"rouge_bleu_sari": 100, "fk_ari": 1},
        "semantic_scorer": getattr(semantic_scorer, "endpoint", None)
        if semantic_scorer is not None
        else None,
        "n_documents": len(per_doc),
    }
    return MetricReport(per_doc=per_doc, mean=mean, config=config)


def evaluate_aligned_corpus(
    sources: Sequence[str],
    candidates: Sequence[str],
    references: Sequence[Sequence[str]],
    ids: Sequence[str] | None = None,
    semantic_scorer: SemanticScorer | None = None,
) -> MetricReport:
    """Evaluate parallel lists, failing fast on any length mismatch."""
    lengths = {len(sources), len(candidates), len(references)}
    if ids is not None:
        lengths.add(len(ids))
    if len(lengths) != 1:
        raise DataError(
            "aligned evaluation inputs differ in length: "
            f"sources={len(sources)} candidates={len(candidates)} references={len(references)}"
            + (f" ids={len(ids)}" if ids is not None else "")
        )
    if ids is None:
        ids = [f"doc-{i:05d}" for i in range(len(sources))]
    items = [
        EvalItem(src, cand, tuple(refs), doc_id=doc_id)
        for src, cand, refs, doc_id in zip(sources, candidates, references, ids)
    ]
    return evaluate_corpus(items, semantic_scorer=semantic_scorer)
