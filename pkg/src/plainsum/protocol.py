"""Wire protocols for external services: generation and scoring.

Three endpoint forms are understood everywhere an endpoint is accepted:

* ``http://host:port`` or ``https://...`` -- JSON over HTTP POST; the
  request path (``/generate`` or ``/score``) is appended when missing.
* ``cmd:<command line>`` -- the same JSON objects, newline-delimited
  over a subprocess's standard streams.
* ``echo:`` (optionally ``echo:<token limit>``) -- an in-process test
  double that returns its input, truncating and flagging when a token
  limit is configured.

Generation request/response:
  {"id": str, "input": str, "params": {"max_new_tokens": int, "seed": int,
   "strategy": "greedy"|"sample", "top_p": float}}
  -> {"id": str, "output": str, "meta"?: {"truncated"?: bool, "model"?: str}}

Sentence-scorer request/response:
  {"doc_id": str, "sentences": [str]} -> {"doc_id": str, "scores": [float]}

Semantic-scorer request/response:
  {"doc_id": str, "candidate": str, "references": [str]}
  -> {"doc_id": str, "score": float}
"""

from __future__ import annotations

import json
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

import requests

from .corpus import Sentence
from .errors import ConfigError, ProtocolError, TransportError


@dataclass
class DecodeParams:
    max_new_tokens: int = 128
    seed: int = 42
    strategy: str = "greedy"
    top_p: float = 1.0

    def __post_init__(self):
        if self.strategy not in ("greedy", "sample"):
            raise ConfigError(f"decode strategy must be greedy or sample, got {self.strategy!r}")

    def to_dict(self) -> dict:
        return asdict(self)


class CallableTransport:
    """Wraps a plain function for in-process testing."""

    def __init__(self, fn: Callable[[dict], dict]):
        self._fn = fn

    def call(self, payload: dict) -> dict:
        return self._fn(payload)

    def close(self) -> None:
        pass


class EchoTransport:
    """Generation double: output == input, with optional token limit.

    The limit counts whitespace-separated pieces, mimicking a model's
    hard input cap; over-limit inputs come back truncated and flagged.
    """

    def __init__(self, limit_tokens: int | None = None):
        self.limit_tokens = limit_tokens

    def call(self, payload: dict) -> dict:
        text = payload.get("input", "")
        truncated = False
        if self.limit_tokens is not None:
            pieces = text.split()
            if len(pieces) > self.limit_tokens:
                text = " ".join(pieces[: self.limit_tokens])
                truncated = True
        return {
            "id": payload.get("id"),
            "output": text,
            "meta": {"truncated": truncated, "model": "echo"},
        }

    def close(self) -> None:
        pass


class HttpTransport:
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout
        self._session = requests.Session()

    def call(self, payload: dict) -> dict:
        try:
            response = self._session.post(self.url, json=payload, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as err:
            raise TransportError(f"POST {self.url}: {err}") from err
        if response.status_code >= 500:
            raise TransportError(f"POST {self.url}: server error {response.status_code}")
        if response.status_code >= 400:
            raise ProtocolError(
                f"POST {self.url}: rejected with {response.status_code}", response.text
            )
        try:
            return response.json()
        except ValueError as err:
            raise ProtocolError(f"POST {self.url}: non-JSON response", response.text) from err

    def close(self) -> None:
        self._session.close()


class SubprocessTransport:
    """Newline-delimited JSON over a long-lived subprocess's stdio."""

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._argv = argv
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def call(self, payload: dict) -> dict:
        proc = self._proc
        if proc.poll() is not None:
            raise TransportError(f"{self._argv[0]}: subprocess exited ({proc.returncode})")
        try:
            proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise TransportError(f"{self._argv[0]}: broken pipe: {err}") from err
        ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
        if not ready:
            raise TransportError(f"{self._argv[0]}: no reply within {self.timeout}s")
        line = proc.stdout.readline()
        if not line:
            raise TransportError(f"{self._argv[0]}: subprocess closed its stdout")
        try:
            return json.loads(line)
        except json.JSONDecodeError as err:
            raise ProtocolError(f"{self._argv[0]}: non-JSON reply line", line) from err

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.terminate()
                self._proc.wait(timeout=2)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def make_transport(endpoint: str, default_path: str, timeout: float = 30.0):
    """Build a transport from an endpoint string (see module docstring)."""
    if endpoint == "echo" or endpoint == "echo:":
        return EchoTransport()
    if endpoint.startswith("echo:"):
        try:
            return EchoTransport(limit_tokens=int(endpoint.split(":", 1)[1]))
        except ValueError as err:
            raise ConfigError(f"bad echo endpoint {endpoint!r}: expected echo:<int>") from err
    if endpoint.startswith("cmd:"):
        return SubprocessTransport(endpoint[4:], timeout=timeout)
    if endpoint.startswith("http://") or endpoint.startswith("https://"):
        url = endpoint.rstrip("/")
        if not url.endswith(default_path):
            url += default_path
        return HttpTransport(url, timeout=timeout)
    raise ConfigError(
        f"unrecognized endpoint {endpoint!r}; expected echo:, cmd:..., or http(s)://..."
    )


def _retrying_call(transport, payload: dict, retries: int, backoff: float = 0.05) -> dict:
    """Call with idempotent retries on transport failures only.

    The request id is reused verbatim on retry so a receiving service can
    deduplicate within a run.
    """
    last_error: TransportError | None = None
    for attempt in range(retries + 1):
        try:
            return transport.call(payload)
        except TransportError as err:
            last_error = err
            if attempt < retries and backoff:
                time.sleep(backoff * (attempt + 1))
    raise last_error


class GenerationClient:
    """Client side of the /generate protocol with validation and retries."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.retries = retries
        self._transport = make_transport(endpoint, default_path="/generate", timeout=timeout)

    def generate_text(self, doc_id: str, input_text: str, params: DecodeParams) -> dict:
        """Returns {"output": str, "truncated": bool|None, "model": str|None}."""
        payload = {"id": doc_id, "input": input_text, "params": params.to_dict()}
        response = _retrying_call(self._transport, payload, self.retries)
        raw = json.dumps(response, ensure_ascii=False) if isinstance(response, dict) else str(response)
        if not isinstance(response, dict):
            raise ProtocolError("generation response is not an object", raw)
        if response.get("id") != doc_id:
            raise ProtocolError(
                f"generation response id {response.get('id')!r} != request id {doc_id!r}", raw
            )
        output = response.get("output")
        if not isinstance(output, str) or not output:
            raise ProtocolError("generation response lacks a non-empty output", raw)
        meta = response.get("meta") or {}
        if not isinstance(meta, dict):
            raise ProtocolError("generation response meta is not an object", raw)
        return {
            "output": output,
            "truncated": meta.get("truncated"),
            "model": meta.get("model"),
        }

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ExternalScorerClient:
    """Client side of the /score sentence-scorer protocol.

    Satisfies the same scorer contract as the built-in model: one
    probability in [0, 1] per sentence.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.retries = retries
        self._transport = make_transport(endpoint, default_path="/score", timeout=timeout)

    def score_texts(self, texts: Sequence[str], doc_id: str = "") -> list[float]:
        payload = {"doc_id": doc_id, "sentences": list(texts)}
        response = _retrying_call(self._transport, payload, self.retries)
        raw = json.dumps(response, ensure_ascii=False) if isinstance(response, dict) else str(response)
        scores = response.get("scores") if isinstance(response, dict) else None
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise ProtocolError(
                f"scorer must return exactly {len(texts)} scores", raw
            )
        values = []
        for score in scores:
            if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
                raise ProtocolError(f"score {score!r} outside [0, 1]", raw)
            values.append(float(score))
        return values

    def score_document(self, doc: Sequence[Sentence], doc_id: str = "") -> list[float]:
        return self.score_texts([s.text for s in doc], doc_id=doc_id)

    def close(self) -> None:
        self._transport.close()


class SemanticScorerClient:
    """Hook for external semantic metrics (one score per candidate)."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.retries = retries
        self._transport = make_transport(endpoint, default_path="/score", timeout=timeout)

    def score(self, candidate: str, references: Sequence[str], doc_id: str = "") -> float:
        payload = {"doc_id": doc_id, "candidate": candidate, "references": list(references)}
        response = _retrying_call(self._transport, payload, self.retries)
        raw = json.dumps(response, ensure_ascii=False) if isinstance(response, dict) else str(response)
        score = response.get("score") if isinstance(response, dict) else None
        if not isinstance(score, (int, float)):
            raise ProtocolError("semantic scorer must return a numeric score", raw)
        return float(score)

    def close(self) -> None:
        self._transport.close()


# ---------------------------------------------------------------------------
# Conformance suite
# ---------------------------------------------------------------------------


@dataclass
class ConformanceCheck:
    name: str
    passed: bool
    detail: str = ""


def run_generation_conformance(
    transport,
    sample_input: str = "two trials were included</s>no pain difference was found",
    oversize_tokens: int = 4096,
) -> list[ConformanceCheck]:
    """Exercise a generation endpoint against the protocol contract.

    Checks: response ids match request ids, outputs are non-empty for
    non-empty input, greedy decoding is deterministic, and oversized
    inputs come back flagged as truncated in the response metadata.
    """
    checks: list[ConformanceCheck] = []
    params = DecodeParams(max_new_tokens=32, seed=7, strategy="greedy", top_p=1.0).to_dict()

    def attempt(name: str, fn: Callable[[], tuple[bool, str]]) -> None:
        try:
            passed, detail = fn()
        except Exception as err:  # noqa: BLE001 - report, don't abort the suite
            passed, detail = False, f"{type(err).__name__}: {err}"
        checks.append(ConformanceCheck(name=name, passed=passed, detail=detail))

    def check_id_match():
        response = transport.call({"id": "conf-id-1", "input": sample_input, "params": params})
        ok = isinstance(response, dict) and response.get("id") == "conf-id-1"
        return ok, f"response id: {response.get('id')!r}" if isinstance(response, dict) else str(response)

    def check_non_empty():
        response = transport.call({"id": "conf-out-1", "input": sample_input, "params": params})
        output = response.get("output") if isinstance(response, dict) else None
        return bool(output) and isinstance(output, str), f"output length: {len(output or '')}"

    def check_greedy_determinism():
        first = transport.call({"id": "conf-det-1", "input": sample_input, "params": params})
        second = transport.call({"id": "conf-det-2", "input": sample_input, "params": params})
        same = first.get("output") == second.get("output")
        return same, "identical outputs" if same else "greedy outputs differ"

    def check_truncation_flag():
        oversized = " ".join(f"tok{i}" for i in range(oversize_tokens))
        response = transport.call({"id": "conf-trunc-1", "input": oversized, "params": params})
        meta = response.get("meta") or {}
        flagged = isinstance(meta, dict) and meta.get("truncated") is True
        return flagged, f"meta: {meta!r}"

    attempt("id_match", check_id_match)
    attempt("non_empty_output", check_non_empty)
    attempt("greedy_determinism", check_greedy_determinism)
    attempt("truncation_flagged", check_truncation_flag)
    return checks


def assert_conformance(checks: Sequence[ConformanceCheck]) -> None:
    failures = [c for c in checks if not c.passed]
    if failures:
        lines = ", ".join(f"{c.name} ({c.detail})" for c in failures)
        raise AssertionError(f"protocol conformance failures: {lines}")
