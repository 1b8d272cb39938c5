"""Training-objective arithmetic, checked against hand computations."""

import math

import pytest
import torch

from simpserve.training import sequence_loss
from simpserve.vocab import SEP_TEXT, Vocab, tokenize


class TestSequenceLoss:
    def _log_probs(self, probabilities):
        # rows: per-step distributions over a 4-word vocabulary; the
        # gold token sits at index t for step t
        table = torch.full((len(probabilities), 4), math.log(1e-3), dtype=torch.float64)
        for step, p in enumerate(probabilities):
            table[step, step] = math.log(p)
        return table

    def test_three_token_example_input_length_mode(self):
        # gold probabilities 0.5, 0.25, 0.125; input is 4 tokens long:
        # loss = -(ln .5 + ln .25 + ln .125) / 4 = 6 ln 2 / 4
        log_probs = self._log_probs([0.5, 0.25, 0.125])
        targets = torch.tensor([0, 1, 2])
        loss = sequence_loss(log_probs, targets, input_length=4,
                             normalization="input_length")
        assert float(loss) == pytest.approx(6 * math.log(2) / 4, abs=1e-6)

    def test_three_token_example_target_length_mode(self):
        # same example normalized by target length: 6 ln 2 / 3 = 2 ln 2
        log_probs = self._log_probs([0.5, 0.25, 0.125])
        targets = torch.tensor([0, 1, 2])
        loss = sequence_loss(log_probs, targets, input_length=4,
                             normalization="target_length")
        assert float(loss) == pytest.approx(2 * math.log(2), abs=1e-6)

    def test_modes_differ_by_length_ratio(self):
        log_probs = self._log_probs([0.5, 0.25, 0.125])
        targets = torch.tensor([0, 1, 2])
        by_input = sequence_loss(log_probs, targets, 7, "input_length")
        by_target = sequence_loss(log_probs, targets, 7, "target_length")
        assert float(by_input) * 7 == pytest.approx(float(by_target) * 3, abs=1e-9)

    def test_unknown_normalization_rejected(self):
        with pytest.raises(ValueError):
            sequence_loss(self._log_probs([0.5]), torch.tensor([0]), 1, "tokens")


class TestVocab:
    def test_tokenize_splits_on_separator(self):
        assert tokenize("trials included</s>Pain fell.") == [
            "trials", "included", SEP_TEXT, "pain", "fell",
        ]

    def test_encode_round_trip_known_words(self):
        vocab = Vocab.build(["pain fell", "trials included"])
        ids = vocab.encode("pain fell")
        assert vocab.render(ids) == "pain fell"

    def test_unknown_words_map_to_unk(self):
        vocab = Vocab.build(["pain fell"])
        ids = vocab.encode("novel word")
        assert vocab.render(ids) == "<unk> <unk>"

    def test_separator_encodes_to_eos_id(self):
        from simpserve.vocab import EOS

        vocab = Vocab.build(["a b"])
        assert vocab.encode("a</s>b")[1] == EOS

    def test_deterministic_order(self):
        a = Vocab.build(["b a c a", "c a"])
        b = Vocab.build(["b a c a", "c a"])
        assert a.words == b.words
