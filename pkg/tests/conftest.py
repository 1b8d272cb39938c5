"""Shared fixtures: the structural matching fixture, synthetic corpora,
and CoNLL-U fixture builders."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from plainsum.corpus import Corpus, DocumentPair, Sentence
from plainsum.narrative import write_conllu

# A seven-sentence abstract with a four-sentence summary whose
# minimum-distance matches are sentences 1, 6, 5, and 7 (1-based), i.e.
# positives {1, 5, 6, 7}. Margins were checked by exact rational
# arithmetic when the fixture was frozen.
FIXTURE_ABSTRACT = [
    "Two trials involving 94 women were included in this review.",
    "The methodological quality of the included trials was moderate.",
    "Both trials compared rapid and standard methods in hospital settings.",
    "Participants were randomly assigned to treatment groups.",
    "There were no significant differences in pain scores between the groups.",
    "The rapid method was significantly faster than the standard method.",
    "The rapid method should be recommended for routine practice.",
]
FIXTURE_PLS = [
    "This review included two trials involving 94 women.",
    "The rapid method was faster than the standard method.",
    "There were no differences in pain between the groups.",
    "The rapid method should be recommended.",
]
FIXTURE_POSITIVE_1BASED = {1, 5, 6, 7}


def sentences_from(texts: list[str]) -> list[Sentence]:
    return [Sentence.from_text(i, t) for i, t in enumerate(texts)]


@pytest.fixture
def fixture_abstract() -> list[Sentence]:
    return sentences_from(FIXTURE_ABSTRACT)


@pytest.fixture
def fixture_pls() -> list[Sentence]:
    return sentences_from(FIXTURE_PLS)


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

_TREATMENTS = [
    "acupuncture", "ibuprofen", "massage", "splinting",
    "exercise", "vaccination", "hydration", "stretching",
]
_CONDITIONS = [
    "migraine", "arthritis", "asthma", "eczema",
    "insomnia", "bronchitis", "anxiety", "sprains",
]
_OUTCOMES = ["pain", "mobility", "sleep", "breathing", "recovery", "stiffness"]
_VERDICTS = ["recommended", "considered", "avoided", "monitored"]
_FILLERS = [
    "Randomisation procedures were unclear in most trials.",
    "Allocation concealment was adequately reported.",
    "Blinding of outcome assessors was not described.",
    "Follow up periods ranged from two weeks to one year.",
    "Trial quality was assessed using standard criteria.",
    "Funding sources were not reported consistently.",
    "Adverse events were recorded inconsistently across studies.",
    "Dropout rates varied widely between study arms.",
]


def synthetic_corpus(n_docs: int = 60, seed: int = 13) -> Corpus:
    """Documents whose summaries paraphrase the intro, results, and
    conclusion sentences, so matching yields learnable position/cue
    signal for the classifier."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n_docs):
        treatment = rng.choice(_TREATMENTS)
        condition = rng.choice(_CONDITIONS)
        outcome = rng.choice(_OUTCOMES)
        verdict = rng.choice(_VERDICTS)
        n_trials = rng.randint(2, 9)
        n_people = rng.randint(40, 900)
        intro = (
            f"We included {n_trials} trials with {n_people} participants "
            f"assessing {treatment} for {condition}."
        )
        fillers = rng.sample(_FILLERS, rng.randint(2, 5))
        results = (
            f"Results showed improved {outcome} with {treatment} "
            f"in {rng.randint(20, 300)} participants."
        )
        conclusion = f"Overall {treatment} should be {verdict} for {condition}."
        abstract = " ".join([intro, *fillers, results, conclusion])
        pls = " ".join(
            [
                f"This review included {n_trials} trials of {treatment} for {condition}.",
                f"Treatment with {treatment} improved {outcome} for participants.",
                f"Overall {treatment} should be {verdict}.",
            ]
        )
        split = "train" if i % 5 < 3 else ("dev" if i % 5 == 3 else "test")
        pairs.append(
            DocumentPair(
                id=f"syn-{i:04d}", abstract_text=abstract, pls_text=pls, split=split
            )
        )
    return Corpus(pairs)


@pytest.fixture
def small_corpus() -> Corpus:
    return synthetic_corpus(n_docs=5, seed=7)


# ---------------------------------------------------------------------------
# CoNLL-U helpers
# ---------------------------------------------------------------------------


def star_parse(text: str) -> list[tuple[str, int, str, str]]:
    """A flat single-root parse over whitespace words: the second word
    (or the only word) is the root and everything else hangs off it."""
    words = text.split()
    root_pos = 2 if len(words) >= 2 else 1
    rows = []
    for idx, word in enumerate(words, start=1):
        is_punct = not any(ch.isalnum() for ch in word)
        upos = "PUNCT" if is_punct else "X"
        if idx == root_pos:
            rows.append((word, 0, upos, "root"))
        else:
            rows.append((word, root_pos, upos, "dep"))
    return rows


def write_parses_dir(corpus: Corpus, directory: Path) -> Path:
    """One <doc_id>.conllu per document, one parse per abstract sentence."""
    from plainsum.cli import sanitize_doc_id

    directory.mkdir(parents=True, exist_ok=True)
    for pair in corpus:
        blocks = [star_parse(s.text) for s in pair.abstract_sentences()]
        write_conllu(directory / f"{sanitize_doc_id(pair.id)}.conllu", blocks)
    return directory


def random_conllu_sentence(rng: random.Random) -> list[tuple[str, int, str, str]]:
    """A random well-formed dependency tree over 1-12 tokens.

    Heads are sampled among already-attached tokens, which guarantees a
    single root and no cycles.
    """
    n = rng.randint(1, 12)
    order = list(range(1, n + 1))
    rng.shuffle(order)
    root = order[0]
    heads = {root: 0}
    attached = [root]
    for idx in order[1:]:
        heads[idx] = rng.choice(attached)
        attached.append(idx)
    rows = []
    for idx in range(1, n + 1):
        punct = rng.random() < 0.15
        form = "." if punct else f"w{rng.randint(0, 30)}"
        upos = "PUNCT" if punct else "NOUN"
        deprel = "root" if heads[idx] == 0 else ("punct" if punct else "dep")
        rows.append((form, heads[idx], upos, deprel))
    return rows
