"""Features, classifier training, and summary extraction."""

import json
import math

import numpy as np
import pytest

from plainsum.corpus import Corpus, DocumentPair, Sentence
from plainsum.errors import DataError
from plainsum.sentmatch import LabeledSentence, build_summary_dataset
from plainsum.summarizer import (
    OracleScorer,
    SentenceScorerModel,
    TrainConfig,
    evaluate_classifier,
    extract_summary,
    featurize,
    oracle_extract,
    train_classifier,
)

from conftest import FIXTURE_POSITIVE_1BASED, sentences_from, synthetic_corpus


class FixedScorer:
    def __init__(self, scores):
        self._scores = list(scores)

    def score_document(self, doc, doc_id=""):
        return list(self._scores)


def labeled_doc(texts, labels, doc_id="d"):
    return [
        LabeledSentence(
            doc_id=doc_id,
            sentence=Sentence.from_text(i, t),
            label=l,
            matched_by=(0,) if l else (),
        )
        for i, (t, l) in enumerate(zip(texts, labels))
    ]


class TestFeaturize:
    def test_relative_position_endpoints(self):
        doc = sentences_from(["A one.", "B two.", "C three.", "D four.", "E five."])
        assert featurize(doc[0], doc).relative_position == 0.0
        assert featurize(doc[-1], doc).relative_position == 1.0

    def test_single_sentence_document(self):
        doc = sentences_from(["Only one."])
        assert featurize(doc[0], doc).relative_position == 0.0

    def test_hand_computed_vector(self):
        doc = sentences_from(
            ["Two trials were included.", "Pain was lower.", "Overall the evidence was weak."]
        )
        features = featurize(doc[1], doc)
        # tokens: pain, was, lower; "was" appears twice in the document
        assert features.relative_position == pytest.approx(0.5)
        assert features.token_count == 3.0
        assert features.type_token_ratio == pytest.approx(1.0)
        # dot = 1*1 + 1*2 + 1*1 = 4; |sent| = sqrt(3); |doc| = sqrt(14)
        assert features.centroid_overlap == pytest.approx(4 / math.sqrt(3 * 14))
        assert features.numeric_ratio == 0.0
        assert features.starts_result_cue is False
        assert features.starts_conclusion_cue is False

    def test_numeric_ratio(self):
        doc = sentences_from(["Two trials with 94 women in 3 sites."])
        assert featurize(doc[0], doc).numeric_ratio == pytest.approx(2 / 8)

    def test_cue_flags(self):
        doc = sentences_from(
            ["Results showed improvement.", "Overall it worked.", "In conclusion it helped."]
        )
        assert featurize(doc[0], doc).starts_result_cue is True
        assert featurize(doc[1], doc).starts_conclusion_cue is True
        assert featurize(doc[2], doc).starts_conclusion_cue is True

    def test_foreign_sentence_rejected(self):
        doc = sentences_from(["A one.", "B two."])
        stray = Sentence.from_text(9, "Not in doc.")
        with pytest.raises(DataError):
            featurize(stray, doc)

    def test_all_features_finite(self):
        doc = sentences_from(["...", "Real words here."])
        for sent in doc:
            assert all(math.isfinite(v) for v in featurize(sent, doc).as_vector())


class TestTrainClassifier:
    def test_separable_dataset_perfect_training_accuracy(self):
        corpus = synthetic_corpus(n_docs=40, seed=3)
        dataset = build_summary_dataset(corpus)
        model = train_classifier(dataset, TrainConfig(epochs=400))
        report = evaluate_classifier(model, dataset, "train")
        assert report["accuracy"] > report["majority_baseline"]

    def test_loss_non_increasing_with_small_step(self):
        dataset = build_summary_dataset(synthetic_corpus(n_docs=20, seed=5))
        model = train_classifier(dataset, TrainConfig(learning_rate=0.05, epochs=200))
        history = model.metadata["loss_history"]
        assert all(a >= b - 1e-12 for a, b in zip(history, history[1:]))

    def test_same_seed_bitwise_identical(self, tmp_path):
        dataset = build_summary_dataset(synthetic_corpus(n_docs=20, seed=5))
        model_a = train_classifier(dataset, TrainConfig(seed=11))
        model_b = train_classifier(dataset, TrainConfig(seed=11))
        assert np.array_equal(model_a.weights, model_b.weights)
        assert model_a.bias == model_b.bias
        model_a.save(tmp_path / "a.json")
        model_b.save(tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_different_seed_different_init(self):
        dataset = build_summary_dataset(synthetic_corpus(n_docs=20, seed=5))
        model_a = train_classifier(dataset, TrainConfig(seed=1, epochs=1))
        model_b = train_classifier(dataset, TrainConfig(seed=2, epochs=1))
        assert not np.array_equal(model_a.weights, model_b.weights)

    def test_single_class_dataset_errors(self):
        corpus = Corpus(
            [
                DocumentPair(
                    id="one",
                    abstract_text="Alpha beta.",
                    pls_text="Alpha beta.",
                    split="train",
                )
            ]
        )
        dataset = build_summary_dataset(corpus)  # every sentence positive
        with pytest.raises(DataError, match="both classes"):
            train_classifier(dataset)

    def test_model_round_trip(self, tmp_path):
        dataset = build_summary_dataset(synthetic_corpus(n_docs=20, seed=5))
        model = train_classifier(dataset)
        model.save(tmp_path / "model.json")
        reloaded = SentenceScorerModel.load(tmp_path / "model.json")
        doc = sentences_from(["Results showed pain fell.", "Methods were sound."])
        assert reloaded.score_document(doc) == model.score_document(doc)


class TestExtractSummary:
    def test_threshold_rule(self):
        doc = sentences_from(["zero.", "one.", "two."])
        summary = extract_summary(doc, FixedScorer([0.9, 0.2, 0.7]))
        assert [s.index for s in summary.selected] == [0, 2]
        assert summary.scores == (0.9, 0.7)

    def test_fallback_to_argmax(self):
        doc = sentences_from(["zero.", "one.", "two."])
        summary = extract_summary(doc, FixedScorer([0.1, 0.4, 0.3]))
        assert [s.index for s in summary.selected] == [1]

    def test_argmax_tie_takes_first(self):
        doc = sentences_from(["zero.", "one.", "two."])
        summary = extract_summary(doc, FixedScorer([0.4, 0.4, 0.1]))
        assert [s.index for s in summary.selected] == [0]

    def test_exactly_threshold_not_selected(self):
        doc = sentences_from(["zero.", "one."])
        summary = extract_summary(doc, FixedScorer([0.5, 0.6]))
        assert [s.index for s in summary.selected] == [1]

    def test_output_is_ordered_subsequence(self):
        doc = sentences_from([f"s {i}." for i in range(6)])
        summary = extract_summary(doc, FixedScorer([0.9, 0.1, 0.8, 0.2, 0.7, 0.6]))
        indices = [s.index for s in summary.selected]
        assert indices == sorted(indices)
        assert set(indices) <= set(range(6))
        assert summary.selected

    def test_monotonicity_raising_a_score_keeps_selection(self):
        doc = sentences_from(["zero.", "one.", "two."])
        base_scores = [0.6, 0.2, 0.55]
        base = {s.index for s in extract_summary(doc, FixedScorer(base_scores)).selected}
        for i in range(3):
            raised = list(base_scores)
            raised[i] = min(1.0, raised[i] + 0.3)
            selected = {
                s.index for s in extract_summary(doc, FixedScorer(raised)).selected
            }
            assert base <= selected | {i}
            if i in base:
                assert i in selected

    def test_scorer_length_mismatch_rejected(self):
        doc = sentences_from(["zero.", "one."])
        with pytest.raises(DataError, match="scores"):
            extract_summary(doc, FixedScorer([0.9]))

    def test_empty_document_rejected(self):
        with pytest.raises(DataError):
            extract_summary([], FixedScorer([]))

    def test_oracle_scorer_matches_oracle_extract(self, fixture_abstract, fixture_pls):
        from plainsum.sentmatch import label_abstract

        labeled = label_abstract(fixture_abstract, fixture_pls, doc_id="fx")
        via_scorer = extract_summary(
            fixture_abstract, OracleScorer(labeled), doc_id="fx"
        )
        via_oracle = oracle_extract(labeled)
        assert via_scorer.selected == via_oracle.selected

    def test_fixture_positive_sentences_in_document_order(
        self, fixture_abstract, fixture_pls
    ):
        from plainsum.sentmatch import label_abstract

        labeled = label_abstract(fixture_abstract, fixture_pls, doc_id="fx")
        summary = oracle_extract(labeled)
        assert [s.index + 1 for s in summary.selected] == sorted(FIXTURE_POSITIVE_1BASED)


class TestOracleExtract:
    def test_basic(self):
        labeled = labeled_doc(["a one.", "b two.", "c three."], [1, 0, 1])
        summary = oracle_extract(labeled)
        assert [s.index for s in summary.selected] == [0, 2]

    def test_all_positive_returns_full_abstract(self):
        labeled = labeled_doc(["a one.", "b two."], [1, 1])
        assert len(oracle_extract(labeled).selected) == 2

    def test_all_zero_labels_error(self):
        labeled = labeled_doc(["a one.", "b two."], [0, 0])
        with pytest.raises(DataError, match="all labels are 0"):
            oracle_extract(labeled)
