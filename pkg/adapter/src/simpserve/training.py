"""Fine-tuning on (assembled input -> summary) pairs.

The training objective sums token negative log-likelihoods over the
target and divides by the INPUT length (prompt + extractive summary
tokens) by default; ``normalization="target_length"`` switches to the
standard mean NLL per target token. The active mode travels with the
checkpoint and is reported by the server.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import torch
from torch import nn

from .model import ModelConfig, TinySeq2Seq
from .vocab import BOS, EOS, PAD, Vocab

NORMALIZATIONS = ("input_length", "target_length")


@dataclass(frozen=True)
class TrainPair:
    doc_id: str
    input_text: str
    target_text: str

    def __post_init__(self):
        if not self.input_text.strip():
            raise ValueError(f"pair {self.doc_id!r}: empty input text")
        if not self.target_text.strip():
            raise ValueError(f"pair {self.doc_id!r}: empty target text")


@dataclass
class TrainSettings:
    steps: int = 50
    batch_size: int = 4
    learning_rate: float = 1e-3
    seed: int = 42
    normalization: str = "input_length"
    vocab_max: int = 4000
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 1
    dim_feedforward: int = 128
    max_positions: int = 128

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")

    def to_dict(self) -> dict:
        return asdict(self)


def sequence_loss(
    log_probs: torch.Tensor,
    target_ids: torch.Tensor,
    input_length: int,
    normalization: str = "input_length",
) -> torch.Tensor:
    """Summed target-token NLL divided by the configured length.

    log_probs: (T, V) log-probabilities; target_ids: (T,) gold ids.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    steps = torch.arange(target_ids.size(0), device=target_ids.device)
    total_nll = -log_probs[steps, target_ids].sum()
    if normalization == "input_length":
        denominator = max(int(input_length), 1)
    else:
        denominator = max(int(target_ids.size(0)), 1)
    return total_nll / denominator


@dataclass
class Checkpoint:
    state_dict: dict
    model_config: dict
    vocab_words: list[str]
    normalization: str
    settings: dict
    loss_history: list[float] = field(default_factory=list)
    truncated_pairs: int = 0

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "state_dict": self.state_dict,
                "model_config": self.model_config,
                "vocab_words": self.vocab_words,
                "normalization": self.normalization,
                "settings": self.settings,
                "loss_history": self.loss_history,
                "truncated_pairs": self.truncated_pairs,
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        payload = torch.load(path, map_location="cpu", weights_only=True)
        return cls(**payload)

    def build_model(self) -> tuple[TinySeq2Seq, Vocab]:
        model = TinySeq2Seq(ModelConfig(**self.model_config))
        model.load_state_dict(self.state_dict)
        model.eval()
        return model, Vocab(words=list(self.vocab_words))


def _encode_pairs(
    pairs: list[TrainPair], vocab: Vocab, max_positions: int
) -> tuple[list[tuple[list[int], list[int]]], int]:
    encoded = []
    truncated = 0
    for pair in pairs:
        src = vocab.encode(pair.input_text)
        tgt = vocab.encode(pair.target_text)
        if len(src) > max_positions or len(tgt) > max_positions - 1:
            truncated += 1
        src = src[:max_positions]
        tgt = tgt[: max_positions - 1]
        encoded.append((src, tgt))
    return encoded, truncated


def _pad_batch(rows: list[list[int]], pad_value: int = PAD) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor(
        [r + [pad_value] * (width - len(r)) for r in rows], dtype=torch.long
    )


def batch_loss(
    model: TinySeq2Seq,
    batch: list[tuple[list[int], list[int]]],
    normalization: str,
) -> torch.Tensor:
    """Mean of per-example losses over one batch."""
    src = _pad_batch([s for s, _ in batch])
    dec_in = _pad_batch([[BOS] + t for _, t in batch])
    dec_out = _pad_batch([t + [EOS] for _, t in batch])
    logits = model(src, dec_in)
    log_probs = nn.functional.log_softmax(logits, dim=-1)
    losses = []
    for row, (src_ids, tgt_ids) in enumerate(batch):
        n_targets = len(tgt_ids) + 1  # includes the end token
        losses.append(
            sequence_loss(
                log_probs[row, :n_targets],
                dec_out[row, :n_targets],
                input_length=len(src_ids),
                normalization=normalization,
            )
        )
    return torch.stack(losses).mean()


def finetune(pairs: list[TrainPair], settings: TrainSettings | None = None) -> Checkpoint:
    """Train the tiny encoder-decoder; deterministic under a fixed seed."""
    settings = settings or TrainSettings()
    if not pairs:
        raise ValueError("finetune needs at least one training pair")
    torch.manual_seed(settings.seed)
    vocab = Vocab.build(
        [p.input_text for p in pairs] + [p.target_text for p in pairs],
        max_size=settings.vocab_max,
    )
    encoded, truncated = _encode_pairs(pairs, vocab, settings.max_positions)
    config = ModelConfig(
        vocab_size=len(vocab),
        d_model=settings.d_model,
        n_heads=settings.n_heads,
        n_layers=settings.n_layers,
        dim_feedforward=settings.dim_feedforward,
        max_positions=settings.max_positions,
    )
    model = TinySeq2Seq(config)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=settings.learning_rate)
    sampler = torch.Generator().manual_seed(settings.seed)
    order: list[int] = []
    loss_history: list[float] = []
    for _ in range(settings.steps):
        if len(order) < settings.batch_size:
            order.extend(torch.randperm(len(encoded), generator=sampler).tolist())
        batch_indices = [order.pop(0) for _ in range(min(settings.batch_size, len(encoded)))]
        batch = [encoded[i] for i in batch_indices]
        optimizer.zero_grad()
        loss = batch_loss(model, batch, settings.normalization)
        loss.backward()
        optimizer.step()
        loss_history.append(float(loss.detach()))
    model.eval()
    return Checkpoint(
        state_dict=model.state_dict(),
        model_config=config.to_dict(),
        vocab_words=list(vocab.words),
        normalization=settings.normalization,
        settings=settings.to_dict(),
        loss_history=loss_history,
        truncated_pairs=truncated,
    )


def unlikelihood_penalty(*_args, **_kwargs) -> float:
    """Placeholder for an auxiliary token-demotion penalty used by some
    earlier simplification systems. Intentionally a no-op: no published
    formula is implemented here, and the generation objective above is
    the complete training loss."""
    return 0.0


def load_pairs_jsonl(path: str | Path) -> list[TrainPair]:
    """Read {"id"|"doc_id", "input", "target"} rows."""
    path = Path(path)
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                pairs.append(
                    TrainPair(
                        doc_id=str(row.get("id", row.get("doc_id", f"pair-{lineno}"))),
                        input_text=row["input"],
                        target_text=row["target"],
                    )
                )
            except KeyError as err:
                raise ValueError(f"{path} line {lineno}: missing field {err.args[0]}") from err
    return pairs
