"""simpserve: reference simplifier behind the generation protocol.

Fine-tunes a small word-level transformer encoder-decoder on
(assembled input -> plain-language summary) pairs and serves
``POST /generate`` (or newline-delimited JSON over stdio) with greedy or
nucleus-sampling decoding, truncation flagging, and deterministic
behavior under fixed seeds.
"""

__version__ = "0.1.0"
