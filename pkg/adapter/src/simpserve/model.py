"""A small transformer encoder-decoder over the word vocabulary."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
from torch import nn

from .vocab import PAD


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 1
    dim_feedforward: int = 128
    max_positions: int = 128
    dropout: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class TinySeq2Seq(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.d_model, padding_idx=PAD)
        self.position_embedding = nn.Embedding(config.max_positions, config.d_model)
        encoder_layer = nn.TransformerEncoderLayer(
            d_model=config.d_model,
            nhead=config.n_heads,
            dim_feedforward=config.dim_feedforward,
            dropout=config.dropout,
            batch_first=True,
        )
        # nested-tensor fast path is prototype-stage and adds no value at
        # this scale
        self.encoder = nn.TransformerEncoder(
            encoder_layer, config.n_layers, enable_nested_tensor=False
        )
        decoder_layer = nn.TransformerDecoderLayer(
            d_model=config.d_model,
            nhead=config.n_heads,
            dim_feedforward=config.dim_feedforward,
            dropout=config.dropout,
            batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(decoder_layer, config.n_layers)
        self.output_projection = nn.Linear(config.d_model, config.vocab_size)

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.size(1), device=ids.device).unsqueeze(0)
        return self.token_embedding(ids) + self.position_embedding(positions)

    def forward(self, src_ids: torch.Tensor, tgt_in_ids: torch.Tensor) -> torch.Tensor:
        """Logits over the vocabulary for each decoder position.

        src_ids: (B, S); tgt_in_ids: (B, T) teacher-forced decoder input.
        """
        src_padding = src_ids.eq(PAD)
        tgt_padding = tgt_in_ids.eq(PAD)
        # boolean causal mask, matching the padding masks' dtype
        size = tgt_in_ids.size(1)
        causal = torch.triu(
            torch.ones(size, size, dtype=torch.bool, device=tgt_in_ids.device),
            diagonal=1,
        )
        memory = self.encoder(self._embed(src_ids), src_key_padding_mask=src_padding)
        decoded = self.decoder(
            self._embed(tgt_in_ids),
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=tgt_padding,
            memory_key_padding_mask=src_padding,
        )
        return self.output_projection(decoded)
