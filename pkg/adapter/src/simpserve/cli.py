"""Command line: prepare pairs, fine-tune, and serve.

Checkpoint path and device may come from flags or the environment
(SIMPSERVE_CHECKPOINT, SIMPSERVE_DEVICE; CPU is the default and the only
device this reference implementation is tuned for).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .service import AdapterService, serve_http, serve_stdio
from .training import Checkpoint, TrainSettings, finetune, load_pairs_jsonl


def cmd_prepare(args) -> int:
    """Join assembled inputs with reference summaries into pairs.jsonl.

    --assembled is the pipeline's assembled.jsonl ({"doc_id", "input"});
    --corpus is the canonical corpus JSONL ({"id", "pls", ...}).
    """
    references = {}
    with open(args.corpus, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                references[row["id"]] = row["pls"]
    written = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as out:
        with open(args.assembled, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                doc_id = row["doc_id"]
                if doc_id not in references:
                    print(f"skipping {doc_id}: not in corpus", file=sys.stderr)
                    continue
                out.write(
                    json.dumps(
                        {"id": doc_id, "input": row["input"], "target": references[doc_id]},
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                written += 1
    print(f"wrote {written} pairs to {args.out}")
    return 0


def cmd_finetune(args) -> int:
    pairs = load_pairs_jsonl(args.pairs)
    settings = TrainSettings(
        steps=args.steps,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        normalization=args.normalization,
        max_positions=args.max_positions,
        d_model=args.d_model,
        n_layers=args.n_layers,
    )
    checkpoint = finetune(pairs, settings)
    checkpoint.save(args.out)
    first, last = checkpoint.loss_history[0], checkpoint.loss_history[-1]
    print(
        f"trained {settings.steps} steps on {len(pairs)} pairs "
        f"(normalization={settings.normalization}): loss {first:.4f} -> {last:.4f}"
    )
    if checkpoint.truncated_pairs:
        print(
            f"warning: {checkpoint.truncated_pairs} pairs exceeded "
            f"{settings.max_positions} positions and were truncated"
        )
    print(f"checkpoint saved to {args.out}")
    return 0


def _checkpoint_path(args) -> str:
    path = args.checkpoint or os.environ.get("SIMPSERVE_CHECKPOINT")
    if not path:
        print("no checkpoint: pass --checkpoint or set SIMPSERVE_CHECKPOINT", file=sys.stderr)
        raise SystemExit(2)
    if not Path(path).exists():
        print(f"checkpoint not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    return path


def cmd_serve(args) -> int:
    service = AdapterService(Checkpoint.load(_checkpoint_path(args)))
    server = serve_http(service, host=args.host, port=args.port)
    print(f"serving /generate on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_stdio(args) -> int:
    service = AdapterService(Checkpoint.load(_checkpoint_path(args)))
    return serve_stdio(service)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simpserve", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="join assembled inputs with reference summaries")
    p.add_argument("--assembled", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("finetune", help="train on pairs.jsonl and save a checkpoint")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=4, dest="batch_size")
    p.add_argument("--learning-rate", type=float, default=1e-3, dest="learning_rate")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument(
        "--normalization",
        choices=["input_length", "target_length"],
        default="input_length",
        help="loss denominator: assembled-input length (default) or target length",
    )
    p.add_argument("--max-positions", type=int, default=128, dest="max_positions")
    p.add_argument("--d-model", type=int, default=64, dest="d_model")
    p.add_argument("--n-layers", type=int, default=1, dest="n_layers")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("serve", help="HTTP server for POST /generate")
    p.add_argument("--checkpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8800)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stdio", help="newline-delimited JSON over stdio")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_stdio)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
