"""plainsum: summarize-then-simplify toolkit for medical abstracts.

Pipeline stages: corpus ingestion and segmentation, Jaccard sentence
matching into a labeled summary dataset, sentence scoring and extractive
summarization, narrative prompts from dependency parses, seq2seq input
assembly, generation brokering to an external simplifier, and metric
evaluation (FK, ARI, ROUGE-1/2/L, BLEU, SARI).
"""

__version__ = "0.1.0"
