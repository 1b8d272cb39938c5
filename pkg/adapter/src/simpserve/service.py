"""Serving: request validation, decoding, HTTP and stdio front ends.

Implements the generation protocol:

  request  {"id": str, "input": str, "params": {"max_new_tokens": int,
            "seed": int, "strategy": "greedy"|"sample", "top_p": float}}
  response {"id": str, "output": str,
            "meta": {"truncated": bool, "model": str, "normalization": str}}

Greedy decoding is deterministic for a fixed checkpoint; sampling is
deterministic for a fixed seed. Inputs longer than the model's position
limit are truncated and flagged in the response metadata. Malformed
requests get a 400-style error body.
"""

from __future__ import annotations

import json
import sys
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch

from .training import Checkpoint
from .vocab import BOS, EOS, PAD, UNK


@dataclass
class RequestError(Exception):
    message: str

    def __str__(self) -> str:
        return self.message


_VALID_STRATEGIES = ("greedy", "sample")
_DEFAULT_PARAMS = {"max_new_tokens": 128, "seed": 42, "strategy": "greedy", "top_p": 1.0}


def _validate(payload) -> tuple[str, str, dict]:
    if not isinstance(payload, dict):
        raise RequestError("request body must be a JSON object")
    doc_id = payload.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise RequestError("request needs a non-empty string id")
    text = payload.get("input")
    if not isinstance(text, str) or not text:
        raise RequestError("request needs a non-empty string input")
    params = dict(_DEFAULT_PARAMS)
    supplied = payload.get("params", {})
    if supplied is None:
        supplied = {}
    if not isinstance(supplied, dict):
        raise RequestError("params must be an object")
    unknown = set(supplied) - set(_DEFAULT_PARAMS)
    if unknown:
        raise RequestError(f"unknown params: {sorted(unknown)}")
    params.update(supplied)
    if params["strategy"] not in _VALID_STRATEGIES:
        raise RequestError(f"strategy must be one of {_VALID_STRATEGIES}")
    if not isinstance(params["max_new_tokens"], int) or params["max_new_tokens"] < 1:
        raise RequestError("max_new_tokens must be a positive integer")
    if not isinstance(params["seed"], int):
        raise RequestError("seed must be an integer")
    if not isinstance(params["top_p"], (int, float)) or not 0 < params["top_p"] <= 1:
        raise RequestError("top_p must be in (0, 1]")
    return doc_id, text, params


class AdapterService:
    def __init__(self, checkpoint: Checkpoint, model_tag: str = "simpserve"):
        self.model, self.vocab = checkpoint.build_model()
        self.normalization = checkpoint.normalization
        self.max_positions = checkpoint.model_config["max_positions"]
        self.model_tag = model_tag
        self._lock = threading.Lock()

    # -- decoding ----------------------------------------------------------

    def _step_logits(self, src: torch.Tensor, generated: list[int]) -> torch.Tensor:
        dec_in = torch.tensor([[BOS] + generated], dtype=torch.long)
        logits = self.model(src, dec_in)
        step = logits[0, -1]
        step[PAD] = float("-inf")
        step[BOS] = float("-inf")
        return step

    def _decode(self, src_ids: list[int], params: dict) -> list[int]:
        src = torch.tensor([src_ids], dtype=torch.long)
        budget = min(params["max_new_tokens"], self.max_positions - 2)
        generator = torch.Generator().manual_seed(params["seed"])
        generated: list[int] = []
        with torch.no_grad():
            for step_index in range(budget):
                step = self._step_logits(src, generated)
                if step_index == 0:
                    step[EOS] = float("-inf")  # output must be non-empty
                if params["strategy"] == "greedy":
                    next_id = int(step.argmax())
                else:
                    next_id = self._sample_top_p(step, params["top_p"], generator)
                if next_id == EOS:
                    break
                generated.append(next_id)
        return generated

    @staticmethod
    def _sample_top_p(step: torch.Tensor, top_p: float, generator: torch.Generator) -> int:
        probs = torch.softmax(step, dim=-1)
        sorted_probs, sorted_ids = torch.sort(probs, descending=True)
        cumulative = torch.cumsum(sorted_probs, dim=-1)
        keep = cumulative <= top_p
        keep[0] = True  # always keep the best token
        kept_probs = sorted_probs[keep]
        kept_ids = sorted_ids[keep]
        choice = torch.multinomial(kept_probs / kept_probs.sum(), 1, generator=generator)
        return int(kept_ids[choice])

    # -- request handling ----------------------------------------------------

    def handle(self, payload) -> tuple[int, dict]:
        """(http_status, response body) for one generation request."""
        try:
            doc_id, text, params = _validate(payload)
        except RequestError as err:
            return 400, {"error": str(err), "id": payload.get("id") if isinstance(payload, dict) else None}
        src_ids = self.vocab.encode(text)
        truncated = len(src_ids) > self.max_positions
        src_ids = src_ids[: self.max_positions]
        if not src_ids:
            return 400, {"error": "input contains no tokens", "id": doc_id}
        with self._lock:
            generated = self._decode(src_ids, params)
        output = self.vocab.render(generated)
        if not output:
            # every non-special token renders to a visible word, so this
            # only guards a vocabulary of nothing but specials
            output = self.vocab.words[UNK]
        return 200, {
            "id": doc_id,
            "output": output,
            "meta": {
                "truncated": truncated,
                "model": self.model_tag,
                "normalization": self.normalization,
            },
        }


def serve_http(service: AdapterService, host: str = "127.0.0.1", port: int = 8800):
    """Blocking HTTP server exposing POST /generate; returns the server
    object when constructed with port 0 callers may introspect."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/generate":
                self._reply(404, {"error": f"no such endpoint {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length))
            except (ValueError, json.JSONDecodeError):
                self._reply(400, {"error": "request body is not valid JSON"})
                return
            status, body = service.handle(payload)
            self._reply(status, body)

        def _reply(self, status: int, body: dict):
            raw = json.dumps(body, ensure_ascii=False).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)


def serve_stdio(service: AdapterService, stdin=None, stdout=None) -> int:
    """Newline-delimited JSON over standard streams; one reply per line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError:
            body = {"error": "request line is not valid JSON", "id": None}
        else:
            _, body = service.handle(payload)
        stdout.write(json.dumps(body, ensure_ascii=False) + "\n")
        stdout.flush()
    return 0
