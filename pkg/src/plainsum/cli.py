"""Command-line surface for the pipeline.

Subcommands: build-dataset, train, extract, prompt, assemble, simplify,
evaluate, pipeline. Every command takes an output directory, acquires an
exclusive lock file in it, and writes a manifest (config hash, seed,
toolkit version) next to its outputs. Configuration precedence is
flags > config file (TOML) > defaults.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4
adapter/transport error.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime
import hashlib
import json
import os
import re
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .assembler import DEFAULT_BUDGET, assemble_input
from .corpus import Corpus, Sentence, load_corpus, import_cochrane, save_corpus
from .errors import AdapterError, ConfigError, DataError, PlainsumError
from .metrics import EvalItem, evaluate_corpus
from .narrative import NarrativePrompt, KeyPhrase, DepToken, prompt_from_file
from .protocol import DecodeParams, ExternalScorerClient, GenerationClient, SemanticScorerClient
from .sentmatch import build_summary_dataset, dataset_stats, label_abstract, load_dataset, save_dataset
from .summarizer import (
    ExtractiveSummary,
    OracleScorer,
    SentenceScorerModel,
    TrainConfig,
    evaluate_classifier,
    extract_summary,
    train_classifier,
)

LOCK_NAME = ".plainsum.lock"

_CONFIG_DEFAULTS = {
    "seed": 42,
    "threshold": 0.5,
    "budget": DEFAULT_BUDGET,
    "split": "all",
    "scorer": "model",
    "adapter_url": "echo:",
    "epochs": 300,
    "learning_rate": 0.1,
    "l2": 1e-4,
    "max_new_tokens": 128,
    "strategy": "greedy",
    "top_p": 1.0,
    "timeout": 30.0,
    "retries": 2,
}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(f"config file not found: {file_path}")
    try:
        with file_path.open("rb") as fh:
            values = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config file {file_path}: {err}") from err
    unknown = set(values) - set(_CONFIG_DEFAULTS) - {
        "corpus", "parses", "dataset", "model", "out", "scorer_url", "semantic_url",
    }
    if unknown:
        raise ConfigError(f"config file {file_path}: unknown keys {sorted(unknown)}")
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config-file values, and explicit flags."""
    merged = dict(_CONFIG_DEFAULTS)
    merged.update({k: None for k in ("corpus", "parses", "dataset", "model", "out",
                                     "scorer_url", "semantic_url")})
    merged.update(_load_config_file(getattr(args, "config", None)))
    for key, value in vars(args).items():
        if key in ("config", "command", "func", "from_release"):
            continue
        if value is not None:
            merged[key] = value
    return merged


@contextlib.contextmanager
def _owned_output_dir(out: str | None):
    if out is None:
        raise ConfigError("an output directory is required (--out)")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if that run is dead)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def _write_manifest(out_dir: Path, command: str, config: dict, extra: dict | None = None) -> None:
    serializable = {k: v for k, v in sorted(config.items())}
    manifest = {
        "command": command,
        "config": serializable,
        "config_hash": hashlib.sha256(
            json.dumps(serializable, sort_keys=True).encode()
        ).hexdigest(),
        "seed": config.get("seed"),
        "toolkit_version": __version__,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError(f"file not found: {path}")
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as err:
                raise DataError(f"{path} line {lineno}: {err.msg}") from err
    return rows


def sanitize_doc_id(doc_id: str) -> str:
    """Filesystem-safe form of a document id (used for parse file names)."""
    return re.sub(r"[^A-Za-z0-9._-]", "_", doc_id)


def _require(config: dict, key: str) -> str:
    value = config.get(key)
    if value is None:
        raise ConfigError(f"--{key.replace('_', '-')} is required for this command")
    return value


def _load_any_corpus(path_str: str, from_release: bool) -> Corpus:
    return import_cochrane(path_str) if from_release else load_corpus(path_str)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_build_dataset(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    corpus = _load_any_corpus(_require(config, "corpus"), args.from_release)
    with _owned_output_dir(config["out"]) as out_dir:
        if args.from_release:
            save_corpus(corpus, out_dir / "corpus.jsonl")
        dataset = build_summary_dataset(corpus)
        save_dataset(dataset, out_dir / "dataset.jsonl")
        stats = dataset_stats(dataset)
        stats["corpus_documents"] = corpus.split_counts()
        (out_dir / "stats.json").write_text(
            json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(out_dir, "build-dataset", config)
        for split, info in stats["splits"].items():
            ratio = info["positive_ratio"]
            print(
                f"{split}: {info['documents']} documents, {info['sentences']} sentences"
                + (f", positive ratio {ratio:.4f}" if ratio is not None else "")
            )
        if dataset.skipped:
            print(f"skipped {len(dataset.skipped)} degenerate documents")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    dataset = load_dataset(_require(config, "dataset"))
    train_config = TrainConfig(
        seed=int(config["seed"]),
        epochs=int(config["epochs"]),
        learning_rate=float(config["learning_rate"]),
        l2=float(config["l2"]),
    )
    with _owned_output_dir(config["out"]) as out_dir:
        model = train_classifier(dataset, train_config)
        model.save(out_dir / "model.json")
        report = {"train": evaluate_classifier(model, dataset, "train")}
        if dataset.entries_for_split("dev"):
            report["dev"] = evaluate_classifier(model, dataset, "dev")
        (out_dir / "classifier_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(out_dir, "train", config)
        for split, values in report.items():
            print(
                f"{split}: accuracy {values['accuracy']:.4f}, f1 {values['f1']:.4f} "
                f"(majority baseline {values['majority_baseline']:.4f})"
            )
    return 0


def _scorer_for(config: dict):
    kind = config["scorer"]
    if kind == "model":
        return SentenceScorerModel.load(_require(config, "model"))
    if kind == "external":
        return ExternalScorerClient(
            _require(config, "scorer_url"),
            timeout=float(config["timeout"]),
            retries=int(config["retries"]),
        )
    if kind == "oracle":
        return None  # handled per document with gold labels
    raise ConfigError(f"unknown scorer {kind!r} (expected model, oracle, or external)")


def _extract_rows(corpus: Corpus, config: dict) -> list[dict]:
    scorer = _scorer_for(config)
    threshold = float(config["threshold"])
    rows = []
    try:
        for pair in corpus.subset(config["split"]):
            abs_sents = pair.abstract_sentences()
            if not abs_sents:
                continue
            if config["scorer"] == "oracle":
                pls_sents = pair.pls_sentences()
                if not pls_sents:
                    continue
                labeled = label_abstract(abs_sents, pls_sents, doc_id=pair.id)
                doc_scorer = OracleScorer(labeled)
            else:
                doc_scorer = scorer
            summary = extract_summary(
                abs_sents, doc_scorer, threshold=threshold, doc_id=pair.id
            )
            rows.append(
                {
                    "doc_id": pair.id,
                    "split": pair.split,
                    "indices": [s.index for s in summary.selected],
                    "sentences": [s.text for s in summary.selected],
                    "scores": list(summary.scores),
                }
            )
    finally:
        if hasattr(scorer, "close"):
            scorer.close()
    return rows


def cmd_extract(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    corpus = load_corpus(_require(config, "corpus"))
    with _owned_output_dir(config["out"]) as out_dir:
        rows = _extract_rows(corpus, config)
        _write_jsonl(out_dir / "summaries.jsonl", rows)
        _write_manifest(out_dir, "extract", config)
        print(f"extracted summaries for {len(rows)} documents")
    return 0


def _prompt_rows(corpus: Corpus, config: dict) -> list[dict]:
    parses_dir = Path(_require(config, "parses"))
    if not parses_dir.is_dir():
        raise DataError(f"parses directory not found: {parses_dir}")
    rows = []
    for pair in corpus.subset(config["split"]):
        parse_path = parses_dir / f"{sanitize_doc_id(pair.id)}.conllu"
        if not parse_path.exists():
            raise DataError(f"doc {pair.id!r}: no parse file {parse_path}")
        prompt = prompt_from_file(parse_path, doc_id=pair.id)
        n_abs = len(pair.abstract_sentences())
        if len(prompt.phrases) != n_abs:
            raise DataError(
                f"doc {pair.id!r}: {len(prompt.phrases)} parses for {n_abs} abstract sentences"
            )
        rows.append(
            {
                "doc_id": pair.id,
                "split": pair.split,
                "phrases": [p.text for p in prompt.phrases],
                "rendered": prompt.rendered,
            }
        )
    return rows


def cmd_prompt(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    corpus = load_corpus(_require(config, "corpus"))
    with _owned_output_dir(config["out"]) as out_dir:
        rows = _prompt_rows(corpus, config)
        _write_jsonl(out_dir / "prompts.jsonl", rows)
        _write_manifest(out_dir, "prompt", config)
        print(f"built prompts for {len(rows)} documents")
    return 0


def _phrase_from_text(text: str) -> KeyPhrase:
    # Reconstitute a phrase loaded from JSONL; token indices are
    # positional since assembly only needs the surface forms.
    tokens = tuple(
        DepToken(form=form, index=i + 1, head=0 if i == 0 else 1, relation="", is_punctuation=False)
        for i, form in enumerate(text.split())
    )
    return KeyPhrase(sentence_index=0, tokens=tokens)


def _assemble_rows(summary_rows: list[dict], prompt_rows: list[dict], config: dict) -> list[dict]:
    prompts_by_doc = {row["doc_id"]: row for row in prompt_rows}
    budget = int(config["budget"])
    rows = []
    for row in summary_rows:
        doc_id = row["doc_id"]
        if doc_id not in prompts_by_doc:
            raise DataError(f"doc {doc_id!r}: summary present but no prompt")
        prompt_row = prompts_by_doc[doc_id]
        prompt = NarrativePrompt(
            phrases=tuple(_phrase_from_text(t) for t in prompt_row["phrases"]),
            doc_id=doc_id,
        )
        summary = ExtractiveSummary(
            doc_id=doc_id,
            selected=tuple(
                Sentence.from_text(index, text)
                for index, text in zip(row["indices"], row["sentences"])
            ),
            scores=tuple(row["scores"]),
        )
        assembled = assemble_input(prompt, summary, budget=budget)
        rows.append(
            {
                "doc_id": doc_id,
                "split": row.get("split"),
                "input": assembled.rendered,
                "token_count": assembled.token_count,
                "dropped_sentences": assembled.dropped_sentences,
                "dropped_phrases": assembled.dropped_phrases,
            }
        )
    return rows


def cmd_assemble(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    summary_rows = _read_jsonl(Path(_require(config, "summaries")))
    prompt_rows = _read_jsonl(Path(_require(config, "prompts")))
    with _owned_output_dir(config["out"]) as out_dir:
        rows = _assemble_rows(summary_rows, prompt_rows, config)
        _write_jsonl(out_dir / "assembled.jsonl", rows)
        _write_manifest(out_dir, "assemble", config)
        print(f"assembled {len(rows)} inputs (budget {config['budget']})")
    return 0


def _simplify_rows(
    assembled_rows: list[dict], config: dict
) -> tuple[list[dict], list[dict], list[dict]]:
    params = DecodeParams(
        max_new_tokens=int(config["max_new_tokens"]),
        seed=int(config["seed"]),
        strategy=config["strategy"],
        top_p=float(config["top_p"]),
    )
    generations, failures, timings = [], [], []
    with GenerationClient(
        config["adapter_url"],
        timeout=float(config["timeout"]),
        retries=int(config["retries"]),
    ) as client:
        for row in assembled_rows:
            doc_id = row["doc_id"]
            started = time.monotonic()
            try:
                reply = client.generate_text(doc_id, row["input"], params)
            except AdapterError as err:
                failures.append({"doc_id": doc_id, "error": str(err)})
                continue
            timings.append(
                {"doc_id": doc_id, "latency_s": round(time.monotonic() - started, 6)}
            )
            generations.append(
                {
                    "doc_id": doc_id,
                    "split": row.get("split"),
                    "output": reply["output"],
                    "input": row["input"],
                    "truncated": reply["truncated"],
                    "model": reply["model"],
                }
            )
    return generations, failures, timings


def cmd_simplify(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    assembled_rows = _read_jsonl(Path(_require(config, "assembled")))
    with _owned_output_dir(config["out"]) as out_dir:
        generations, failures, timings = _simplify_rows(assembled_rows, config)
        _write_jsonl(out_dir / "generations.jsonl", generations)
        if failures:
            _write_jsonl(out_dir / "failures.jsonl", failures)
        # timing is run-specific, so it lives with the manifest, keeping
        # generations byte-identical across reruns
        (out_dir / "timings.json").write_text(
            json.dumps(timings, indent=2) + "\n", encoding="utf-8"
        )
        _write_manifest(
            out_dir, "simplify", config,
            extra={"n_generated": len(generations), "n_failed": len(failures)},
        )
        print(f"generated {len(generations)} outputs, {len(failures)} failures")
    return 0


def _evaluation_report(generation_rows: list[dict], corpus: Corpus, config: dict):
    pairs_by_id = {pair.id: pair for pair in corpus}
    wanted = {p.id for p in corpus.subset(config["split"])}
    items = []
    for row in generation_rows:
        doc_id = row["doc_id"]
        if doc_id not in pairs_by_id:
            raise DataError(f"generation for unknown doc {doc_id!r}")
        if doc_id not in wanted:
            continue
        pair = pairs_by_id[doc_id]
        items.append(
            EvalItem(
                source=pair.abstract_text,
                candidate=row["output"],
                references=(pair.pls_text,),
                doc_id=doc_id,
            )
        )
    scorer = None
    if config.get("semantic_url"):
        scorer = SemanticScorerClient(
            config["semantic_url"],
            timeout=float(config["timeout"]),
            retries=int(config["retries"]),
        )
    return evaluate_corpus(items, semantic_scorer=scorer)


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    corpus = load_corpus(_require(config, "corpus"))
    generation_rows = _read_jsonl(Path(_require(config, "generations")))
    with _owned_output_dir(config["out"]) as out_dir:
        report = _evaluation_report(generation_rows, corpus, config)
        report.write_json(out_dir / "report.json")
        report.write_csv(out_dir / "report.csv")
        _write_manifest(out_dir, "evaluate", config)
        shown = report.to_json_dict()["mean"]
        print(f"evaluated {len(report.per_doc)} documents")
        for key in ("fk", "ari", "rouge1_f", "rouge2_f", "rougeL_f", "bleu", "sari"):
            print(f"  {key}: {shown[key]:.2f}")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    """End to end: dataset, classifier, summaries, prompts, inputs,
    generations, and metric report in one output directory."""
    config = resolve_config(args)
    corpus = _load_any_corpus(_require(config, "corpus"), args.from_release)
    with _owned_output_dir(config["out"]) as out_dir:
        dataset = build_summary_dataset(corpus)
        save_dataset(dataset, out_dir / "dataset.jsonl")
        stats = dataset_stats(dataset)
        (out_dir / "stats.json").write_text(
            json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

        if config["scorer"] == "model":
            train_config = TrainConfig(
                seed=int(config["seed"]),
                epochs=int(config["epochs"]),
                learning_rate=float(config["learning_rate"]),
                l2=float(config["l2"]),
            )
            model = train_classifier(dataset, train_config)
            model.save(out_dir / "model.json")
            config = dict(config, model=str(out_dir / "model.json"))

        summary_rows = _extract_rows(corpus, config)
        _write_jsonl(out_dir / "summaries.jsonl", summary_rows)
        prompt_rows = _prompt_rows(corpus, config)
        _write_jsonl(out_dir / "prompts.jsonl", prompt_rows)
        assembled_rows = _assemble_rows(summary_rows, prompt_rows, config)
        _write_jsonl(out_dir / "assembled.jsonl", assembled_rows)
        generations, failures, timings = _simplify_rows(assembled_rows, config)
        _write_jsonl(out_dir / "generations.jsonl", generations)
        if failures:
            _write_jsonl(out_dir / "failures.jsonl", failures)
        (out_dir / "timings.json").write_text(
            json.dumps(timings, indent=2) + "\n", encoding="utf-8"
        )
        report = _evaluation_report(generations, corpus, config)
        report.write_json(out_dir / "report.json")
        report.write_csv(out_dir / "report.csv")
        _write_manifest(
            out_dir, "pipeline", config,
            extra={"n_generated": len(generations), "n_failed": len(failures)},
        )
        print(
            f"pipeline complete: {len(generations)} generations, "
            f"{len(failures)} failures, report at {out_dir / 'report.json'}"
        )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file; flags override its values")
    parser.add_argument("--out", help="output directory (locked for the run)")
    parser.add_argument("--seed", type=int, help="random seed recorded in the manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plainsum", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="label abstract sentences via Jaccard matching")
    _add_common(p)
    p.add_argument("--corpus", help="canonical corpus JSONL (or release path with --from-release)")
    p.add_argument("--from-release", action="store_true",
                   help="treat --corpus as a published release layout and import it")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="fit the sentence scorer on a labeled dataset")
    _add_common(p)
    p.add_argument("--dataset", help="dataset JSONL from build-dataset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--l2", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="extract per-document summaries")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--model", help="model.json from train (scorer=model)")
    p.add_argument("--split", choices=["train", "dev", "test", "all"])
    p.add_argument("--threshold", type=float, help="selection threshold (default 0.5)")
    p.add_argument("--scorer", choices=["model", "oracle", "external"])
    p.add_argument("--scorer-url", dest="scorer_url", help="external scorer endpoint")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("prompt", help="build narrative prompts from CoNLL-U parses")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--parses", help="directory of <doc_id>.conllu files")
    p.add_argument("--split", choices=["train", "dev", "test", "all"])
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("assemble", help="compose prompt + summary under the token budget")
    _add_common(p)
    p.add_argument("--summaries", help="summaries.jsonl from extract")
    p.add_argument("--prompts", help="prompts.jsonl from prompt")
    p.add_argument("--budget", type=int, help=f"token budget (default {DEFAULT_BUDGET})")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("simplify", help="send assembled inputs to the generation adapter")
    _add_common(p)
    p.add_argument("--assembled", help="assembled.jsonl from assemble")
    p.add_argument("--adapter-url", dest="adapter_url",
                   help="echo:, cmd:<command>, or http(s)://host:port")
    p.add_argument("--max-new-tokens", type=int, dest="max_new_tokens")
    p.add_argument("--strategy", choices=["greedy", "sample"])
    p.add_argument("--top-p", type=float, dest="top_p")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("evaluate", help="score generations against references")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--generations", help="generations.jsonl from simplify")
    p.add_argument("--split", choices=["train", "dev", "test", "all"])
    p.add_argument("--semantic-url", dest="semantic_url",
                   help="optional external semantic scorer endpoint")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--from-release", action="store_true")
    p.add_argument("--parses")
    p.add_argument("--split", choices=["train", "dev", "test", "all"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--scorer", choices=["model", "oracle", "external"])
    p.add_argument("--scorer-url", dest="scorer_url")
    p.add_argument("--adapter-url", dest="adapter_url")
    p.add_argument("--max-new-tokens", type=int, dest="max_new_tokens")
    p.add_argument("--strategy", choices=["greedy", "sample"])
    p.add_argument("--top-p", type=float, dest="top_p")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--l2", type=float)
    p.add_argument("--semantic-url", dest="semantic_url")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except AdapterError as err:
        print(f"adapter error: {err}", file=sys.stderr)
        return 4
    except (DataError, PlainsumError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
