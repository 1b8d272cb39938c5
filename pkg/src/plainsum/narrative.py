"""Narrative prompts from dependency parses.

One key phrase is derived per abstract sentence: the parse root plus its
closest non-punctuation child on each side, emitted in token order. The
phrases, joined by the model separator token, form the narrative prompt
that is later prepended to the extractive summary.

Parses are consumed from CoNLL-U files produced by any external parser;
no parsing happens in-process.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError

SEPARATOR = "</s>"


@dataclass(frozen=True)
class DepToken:
    form: str
    index: int  # 1-based position within the sentence
    head: int  # 0 for the root
    relation: str
    is_punctuation: bool


@dataclass(frozen=True)
class DepParse:
    sentence_index: int
    tokens: tuple[DepToken, ...]

    def root(self) -> DepToken:
        for token in self.tokens:
            if token.head == 0:
                return token
        raise DataError(f"parse {self.sentence_index}: no root token")

    def children_of(self, index: int) -> list[DepToken]:
        return [t for t in self.tokens if t.head == index]


@dataclass(frozen=True)
class KeyPhrase:
    sentence_index: int
    tokens: tuple[DepToken, ...]

    @property
    def text(self) -> str:
        return " ".join(t.form for t in self.tokens)


@dataclass(frozen=True)
class NarrativePrompt:
    phrases: tuple[KeyPhrase, ...]
    doc_id: str = ""

    @property
    def rendered(self) -> str:
        return SEPARATOR.join(p.text for p in self.phrases)


def _validate_tree(tokens: Sequence[DepToken], where: str) -> None:
    roots = [t for t in tokens if t.head == 0]
    if not roots:
        raise DataError(f"{where}: no root (no token with head 0)")
    if len(roots) > 1:
        raise DataError(f"{where}: multiple roots at token indices "
                        f"{[t.index for t in roots]}")
    n = len(tokens)
    by_index = {t.index: t for t in tokens}
    for token in tokens:
        if token.head < 0 or token.head > n or (token.head and token.head not in by_index):
            raise DataError(
                f"{where}: token {token.index} has head {token.head} outside the sentence"
            )
    # every token must reach the root; a cycle would loop longer than n steps
    for token in tokens:
        current, steps = token, 0
        while current.head != 0:
            current = by_index[current.head]
            steps += 1
            if steps > n:
                raise DataError(f"{where}: head indices contain a cycle at token {token.index}")


def read_conllu(path: str | Path) -> list[DepParse]:
    """Read one DepParse per blank-line-separated sentence block.

    Multiword-token ranges (ids like "3-4") and empty nodes (ids like
    "3.1") are skipped; UPOS "PUNCT" marks punctuation. Each block must
    contain exactly one root and an acyclic head structure.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"parse file not found: {path}")
    parses: list[DepParse] = []
    block: list[DepToken] = []
    block_start = 1

    def flush(end_line: int) -> None:
        nonlocal block, block_start
        if block:
            where = f"{path.name} block at lines {block_start}-{end_line}"
            _validate_tree(block, where)
            parses.append(DepParse(sentence_index=len(parses), tokens=tuple(block)))
        block = []

    with path.open(encoding="utf-8") as fh:
        lineno = 0
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno - 1)
                block_start = lineno + 1
                continue
            if line.startswith("#"):
                continue
            columns = line.split("\t")
            if len(columns) != 10:
                raise DataError(
                    f"{path.name} line {lineno}: expected 10 tab-separated columns, "
                    f"found {len(columns)}"
                )
            token_id, form, _lemma, upos, _xpos, _feats, head, deprel = columns[:8]
            if "-" in token_id or "." in token_id:
                continue  # multiword range or empty node
            try:
                index = int(token_id)
            except ValueError as err:
                raise DataError(f"{path.name} line {lineno}: non-integer id {token_id!r}") from err
            try:
                head_index = int(head)
            except ValueError as err:
                raise DataError(f"{path.name} line {lineno}: non-integer head {head!r}") from err
            block.append(
                DepToken(
                    form=form,
                    index=index,
                    head=head_index,
                    relation=deprel,
                    is_punctuation=upos == "PUNCT",
                )
            )
        flush(lineno)
    return parses


def key_phrase(parse: DepParse) -> KeyPhrase:
    """Root plus closest non-punctuation child on each side, in token order.

    Among the root's direct children, the left member is the one with the
    largest index below the root and the right member the one with the
    smallest index above it; a side with no such child is omitted.
    """
    root = parse.root()
    children = [c for c in parse.children_of(root.index) if not c.is_punctuation]
    left = [c for c in children if c.index < root.index]
    right = [c for c in children if c.index > root.index]
    members = []
    if left:
        members.append(max(left, key=lambda t: t.index))
    members.append(root)
    if right:
        members.append(min(right, key=lambda t: t.index))
    return KeyPhrase(sentence_index=parse.sentence_index, tokens=tuple(members))


def build_prompt(parses: Sequence[DepParse], doc_id: str = "") -> NarrativePrompt:
    """Join one key phrase per parse into the narrative prompt."""
    if not parses:
        raise DataError(f"doc {doc_id!r}: cannot build a prompt from zero parses")
    indices = [p.sentence_index for p in parses]
    if indices != sorted(indices):
        raise DataError(f"doc {doc_id!r}: parses must be ordered by sentence index")
    return NarrativePrompt(
        phrases=tuple(key_phrase(p) for p in parses),
        doc_id=doc_id,
    )


def prompt_from_file(path: str | Path, doc_id: str = "") -> NarrativePrompt:
    return build_prompt(read_conllu(path), doc_id=doc_id)


def write_conllu(
    path: str | Path,
    sentences: Iterable[Sequence[tuple[str, int, str, str]]],
) -> None:
    """Write (form, head, upos, deprel) tuples as a minimal CoNLL-U file.

    Utility for fixtures and round-trip checks; ids are assigned 1..n per
    sentence and unused columns are left as underscores.
    """
    lines: list[str] = []
    for sentence in sentences:
        for i, (form, head, upos, deprel) in enumerate(sentence, start=1):
            lines.append(
                "\t".join(
                    [str(i), form, "_", upos, "_", "_", str(head), deprel, "_", "_"]
                )
            )
        lines.append("")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
