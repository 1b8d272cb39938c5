"""Word-level vocabulary with the separator token handled natively.

Inputs arrive with literal "</s>" separators glued between segments
(prompt phrases and the summary block), so tokenization splits on that
marker first and lowercased alphanumeric runs inside each segment. The
separator shares an id with the decoder's end-of-sequence symbol, as in
common encoder-decoder vocabularies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SEP_TEXT = "</s>"
SPECIALS = ("<pad>", "<unk>", "<s>", SEP_TEXT)

_WORD_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens with explicit separator tokens between
    "</s>"-delimited segments."""
    tokens: list[str] = []
    for i, segment in enumerate(text.split(SEP_TEXT)):
        if i > 0:
            tokens.append(SEP_TEXT)
        tokens.extend(_WORD_RE.findall(segment.lower()))
    return tokens


@dataclass
class Vocab:
    words: list[str]  # includes the specials at their fixed ids

    def __post_init__(self):
        self._index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def build(cls, texts: Iterable[str], max_size: int = 4000) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for token in tokenize(text):
                if token == SEP_TEXT:
                    continue
                counts[token] = counts.get(token, 0) + 1
        ordered = sorted(counts, key=lambda w: (-counts[w], w))
        keep = ordered[: max(max_size - len(SPECIALS), 0)]
        return cls(words=list(SPECIALS) + keep)

    def encode(self, text: str) -> list[int]:
        return [self._index.get(tok, UNK) for tok in tokenize(text)]

    def render(self, ids: Iterable[int]) -> str:
        pieces = [
            self.words[i]
            for i in ids
            if i not in (PAD, BOS, EOS) and 0 <= i < len(self.words)
        ]
        return " ".join(pieces)
