"""paraalign command-line entry point.

Subcommands wire the two-phase workflow end to end: ingest/split corpora,
synthesize paraphrase pairs, emit the instruction-tuning dataset and sweep
subsets, drive translation runs, score results, and render reports.
Config-file-first; flags override config values. Exit codes: 0 success,
1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import SplitSpec, load_parallel, split, write_corpus
from .dataset import MixSpec, TrainerStub, emit, write_dataset
from .driver import new_run_id, resume, translate_corpus
from .errors import InputError, ParaAlignError
from .gateway import Gateway, GatewayConfig, ScriptedBackend
from .langs import direction_label, parse_direction
from .metrics import CONVENTIONS, CorpusScore, comet_batch, corpus_rouge
from .prompts import ShotPair, template_digests
from .runner import (
    ExperimentConfig,
    load_test_corpora,
    render_cases,
    render_report,
    render_sweep_csv,
    run_matrix,
    run_sweep,
    stub_comet_scores,
)
from .synthesis import FilterPolicy, read_paraphrases, synthesize, write_paraphrases

SCORER_URL_ENV = "PARAALIGN_SCORER_URL"


class _UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc}") from exc


def _write_manifest(output_dir: str | Path, payload: dict) -> Path:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    payload = dict(payload)
    payload.setdefault("conventions", CONVENTIONS)
    payload.setdefault("prompt_template_digests", template_digests())
    path.write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _mock_backend(spec: str) -> ScriptedBackend:
    if spec.startswith("lookup:"):
        table = _load_json(spec.split(":", 1)[1])
        return ScriptedBackend("lookup", table=table)
    return ScriptedBackend(spec)


def _gateway_config(cfg: dict, args) -> GatewayConfig:
    gw = dict(cfg.get("gateway", {}))
    if getattr(args, "model", None):
        gw["model_name"] = args.model
    if getattr(args, "base_url", None):
        gw["base_url"] = args.base_url
    return GatewayConfig(**gw)


def _shots_from(cfg_shots) -> list[ShotPair]:
    return [ShotPair(*pair) for pair in cfg_shots or []]


def _load_bitext(path: str, direction_text: str, format: str = "jsonl_bitext"):
    direction = parse_direction(direction_text)
    return load_parallel(path, None, format, direction)


def cmd_ingest(args) -> int:
    direction = parse_direction(args.direction)
    corpus = load_parallel(args.src_file, args.tgt_file, args.format, direction)
    out = Path(args.output)
    write_corpus(corpus, out, "jsonl_bitext")
    print(f"loaded {len(corpus)} pairs ({corpus.skipped} skipped); wrote {out}")
    _write_manifest(args.output_dir or out.parent, {
        "command": "ingest",
        "direction": direction_label(direction),
        "pairs": len(corpus),
        "skipped": corpus.skipped,
        "checksum": corpus.checksum,
    })
    return 0


def cmd_split(args) -> int:
    corpus = _load_bitext(args.input, args.direction)
    spec = SplitSpec(test_size=args.test_size, seed=args.seed, strategy=args.strategy)
    train, test = split(corpus, spec)
    out = Path(args.output_dir or ".")
    write_corpus(train, out / "train.jsonl")
    write_corpus(test, out / "test.jsonl")
    _write_manifest(out, {
        "command": "split",
        "direction": corpus.label,
        "strategy": spec.strategy,
        "seed": spec.seed,
        "test_size": spec.test_size,
        "train_size": len(train),
        "input_checksum": corpus.checksum,
        "train_checksum": train.checksum,
        "test_checksum": test.checksum,
        "test_ids_head": test.ids()[:20],
    })
    print(f"split {len(corpus)} pairs into train={len(train)} test={len(test)}")
    return 0


def cmd_synthesize(args) -> int:
    cfg = _load_json(args.config)
    bitext = _load_bitext(
        args.bitext or cfg["bitext"],
        args.direction or cfg["direction"],
        cfg.get("format", "jsonl_bitext"),
    )
    if args.dry_run:
        print(f"planned gateway calls: {len(bitext)}")
        return 0
    gw_cfg = _gateway_config(cfg, args)
    backend = _mock_backend(args.mock_backend) if args.mock_backend else None
    gateway = Gateway(gw_cfg, backend=backend)
    shots = _shots_from(cfg.get("shots"))
    policy = FilterPolicy(**cfg.get("policy", {}))
    pairs, report = synthesize(bitext, gateway, shots, policy)
    out_path = Path(args.output or cfg.get("output", "paraphrases.jsonl"))
    write_paraphrases(pairs, out_path)
    _write_manifest(args.output_dir or out_path.parent, {
        "command": "synthesize",
        "direction": bitext.label,
        "requested": report.requested,
        "generated": report.generated,
        "filtered_out": report.filtered_out,
        "cache_hits": report.cache_hits,
        "gateway_failures": report.gateway_failures,
        "model": gw_cfg.model_name,
        "temperature": gw_cfg.temperature,
        "bitext_checksum": bitext.checksum,
    })
    print(
        f"generated {report.generated}/{report.requested} paraphrase pairs "
        f"(filtered {sum(report.filtered_out.values())}, failures {report.gateway_failures}); wrote {out_path}"
    )
    return 0


def cmd_emit_dataset(args) -> int:
    bitext = _load_bitext(args.bitext, args.direction)
    pool = read_paraphrases(args.para) if args.para else []
    mix = MixSpec(n_paraphrase=args.n_para, seed=args.seed, shuffle_final=not args.no_shuffle)
    records = emit(bitext, pool, mix)
    stub = TrainerStub(base_model=args.base_model, dataset_path=str(args.output))
    path, manifest = write_dataset(
        records,
        args.output,
        stub=stub,
        mix=mix,
        prompt_digests=template_digests(),
        corpus_checksums={bitext.label: bitext.checksum},
    )
    print(f"wrote {manifest['records']} records to {path} (counts: {manifest['counts']})")
    return 0


def cmd_sweep(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",")]
    pool = read_paraphrases(args.para) if args.para else None
    stored = None
    if args.scores:
        stored_file = _load_json(args.scores)
        series = stored_file.get("sweep", {})
        stored = series.get(args.direction) if isinstance(series, dict) else series
        if stored is None:
            raise InputError(f"no sweep series for direction {args.direction} in {args.scores}")
    table = run_sweep(
        sizes,
        direction=args.direction,
        para_pool=pool,
        seed=args.seed,
        stored_series=stored,
        output_dir=args.output_dir,
    )
    out = Path(args.output_dir or ".")
    path = render_sweep_csv(table, out / "sweep.csv")
    print(f"wrote sweep table ({len(table.rows)} rows) to {path}")
    return 0


def cmd_translate(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    test = _load_bitext(args.test or cfg["test"], args.direction or cfg["direction"])
    mode = args.mode or cfg.get("mode", "fused")
    if args.dry_run:
        calls = 2 * len(test) if mode == "staged" else len(test)
        print(f"planned gateway calls: {calls}")
        return 0
    gw_cfg = _gateway_config(cfg, args)
    backend = _mock_backend(args.mock_backend) if args.mock_backend else None
    gateway = Gateway(gw_cfg, backend=backend)
    shots = _shots_from(cfg.get("shots")) if mode == "fewshot" else None
    run_id = args.run_id or new_run_id()
    run_dir = Path(args.output_dir or ".") / "runs" / run_id
    if args.resume:
        results, ledger = resume(run_dir, test, mode, gateway, shots=shots)
    else:
        results, ledger = translate_corpus(
            test, mode, gateway, shots=shots, run_dir=run_dir, run_id=run_id
        )
    _write_manifest(run_dir, {
        "command": "translate",
        "run_id": ledger.run_id,
        "direction": test.label,
        "mode": mode,
        "model": gw_cfg.model_name,
        "temperature": gw_cfg.temperature,
        "test_checksum": test.checksum,
        "completed": len(ledger.completed),
        "failures": len(ledger.failures),
    })
    print(
        f"run {ledger.run_id}: {len(ledger.completed)} completed, "
        f"{len(ledger.failures)} failed; results under {run_dir}"
    )
    return 0


def cmd_score(args) -> int:
    rows = []
    for line in Path(args.results).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    if not rows:
        raise InputError(f"no results in {args.results}")
    direction = parse_direction(args.direction)
    if args.metric == "rouge_l":
        refs = {int(r["pair_id"]): r["ref"] for r in rows if "ref" in r}
        score = corpus_rouge([(int(r["pair_id"]), r["hypothesis"]) for r in rows], refs, direction[1])
    else:
        items = [{"src": r["src"], "mt": r["hypothesis"], "ref": r["ref"]} for r in rows]
        if args.mock_scorer:
            scores = stub_comet_scores(items)
            score = CorpusScore("comet", 100.0 * sum(scores) / len(scores), len(items), tuple(scores))
        else:
            url = args.scorer_url
            if not url:
                raise InputError(f"need --scorer-url or ${SCORER_URL_ENV} for comet scoring")
            score = comet_batch(items, url)
    print(json.dumps({"metric": score.metric, "value": round(score.value, 4), "n": score.n}))
    return 0


def cmd_report(args) -> int:
    stored = _load_json(args.scores)
    directions = list(stored["matrix"].keys())
    labels: list[str] = []
    for per_system in stored["matrix"].values():
        for label in per_system:
            if label not in labels:
                labels.append(label)
    systems = [
        {
            "label": label,
            "stored_scores": {
                d: stored["matrix"][d][label] for d in directions if label in stored["matrix"][d]
            },
        }
        for label in labels
    ]
    cfg = ExperimentConfig.from_dict(
        {
            "directions": directions,
            "test_corpora": {d: "" for d in directions},
            "systems": systems,
            "baseline": args.baseline or stored.get("baseline", labels[0]),
            "output_dir": args.output_dir or "out",
        }
    )
    report = run_matrix(cfg, corpora={d: None for d in directions})
    out = Path(cfg.output_dir)
    paths = []
    for fmt in ("markdown", "csv", "json"):
        paths += render_report(report, fmt, out)
    if "sweep" in stored:
        for direction, series in stored["sweep"].items():
            table = run_sweep([int(r["size"]) for r in series], direction=direction, stored_series=series)
            paths.append(render_sweep_csv(table, out / "sweep.csv"))
    _write_manifest(out, {"command": "report", "source": str(args.scores), "baseline": cfg.baseline})
    print(f"wrote {', '.join(str(p) for p in paths)}")
    return 0


def cmd_run_matrix(args) -> int:
    cfg_dict = _load_json(args.config)
    if args.output_dir:
        cfg_dict["output_dir"] = args.output_dir
    cfg = ExperimentConfig.from_dict(cfg_dict)
    corpora = load_test_corpora(cfg)
    if args.dry_run:
        calls = 0
        for d in cfg.directions:
            n = len(corpora[direction_label(d)])
            for s in cfg.systems:
                if not s.is_stored:
                    calls += 2 * n if s.mode == "staged" else n
        print(f"planned gateway calls: {calls}")
        return 0
    backends = None
    if args.mock_backend:
        backends = {s.label: _mock_backend(args.mock_backend) for s in cfg.systems if not s.is_stored}
    report = run_matrix(cfg, corpora=corpora, backends=backends)
    out = Path(cfg.output_dir)
    paths = []
    for fmt in ("markdown", "csv", "json"):
        paths += render_report(report, fmt, out)
    _maybe_render_cases(cfg, report, corpora, out, paths)
    _write_manifest(out, {
        "command": "run-matrix",
        "baseline": cfg.baseline,
        "seed": cfg.seed,
        "corpus_checksums": report.metadata.get("corpus_checksums", {}),
    })
    holes = [c for c in report.cells if c.error]
    print(f"report: {len(report.cells)} cells, {len(report.deltas)} deltas, {len(holes)} holes -> {out}")
    return 0


def _maybe_render_cases(cfg: ExperimentConfig, report, corpora: dict, out: Path, paths: list) -> None:
    live = [s.label for s in cfg.systems if not s.is_stored]
    if cfg.baseline not in live or len(live) < 2:
        return
    other = next((label for label in live if label != cfg.baseline), None)
    if other is None:
        return
    for d in cfg.directions:
        label = direction_label(d)
        base_results = report.results.get((label, cfg.baseline))
        sys_results = report.results.get((label, other))
        if base_results and sys_results:
            paths.append(
                render_cases(corpora[label], base_results, sys_results, cfg.baseline, other, out / "cases.md")
            )
            break


def build_parser() -> _Parser:
    parser = _Parser(prog="paraalign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"paraalign {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="load and validate a parallel corpus")
    p.add_argument("--src-file", required=True)
    p.add_argument("--tgt-file", default=None)
    p.add_argument("--format", default="paired_plaintext", choices=["tsv_bitext", "jsonl_bitext", "paired_plaintext"])
    p.add_argument("--direction", required=True, help="e.g. Zh-En")
    p.add_argument("--output", required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="deterministic train/test split")
    p.add_argument("--input", required=True, help="jsonl corpus from ingest")
    p.add_argument("--direction", required=True)
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=22)
    p.add_argument("--strategy", default="seeded_shuffle", choices=["seeded_shuffle", "head", "tail"])
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synthesize", help="generate back-translation paraphrase pairs")
    p.add_argument("--config", required=True)
    p.add_argument("--bitext", default=None)
    p.add_argument("--direction", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--base-url", default=None)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--mock-backend", default=None, help="echo|reverse_words|lookup:<table.json>|fail_on_connect")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("emit-dataset", help="emit the instruction-tuning dataset")
    p.add_argument("--bitext", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--para", default=None, help="paraphrase pool jsonl")
    p.add_argument("--n-para", type=int, default=0)
    p.add_argument("--seed", type=int, default=22)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--base-model", default="llama-3-8b")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_emit_dataset)

    p = sub.add_parser("sweep", help="emit nested sweep subsets / stored-score sweep table")
    p.add_argument("--para", default=None)
    p.add_argument("--sizes", required=True, help="comma-separated ascending sizes")
    p.add_argument("--seed", type=int, default=22)
    p.add_argument("--direction", default="Zh-En")
    p.add_argument("--scores", default=None, help="stored scores json with a sweep series")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("translate", help="translate a test corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--direction", default=None)
    p.add_argument("--mode", default=None, choices=["fewshot", "fused", "staged"])
    p.add_argument("--model", default=None)
    p.add_argument("--base-url", default=None)
    p.add_argument("--run-id", default=None)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--mock-backend", default=None)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("score", help="score a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--metric", default="rouge_l", choices=["rouge_l", "comet"])
    p.add_argument("--scorer-url", default=None)
    p.add_argument("--mock-scorer", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="render reports from stored scores")
    p.add_argument("--scores", required=True)
    p.add_argument("--baseline", default=None)
    p.add_argument("--output-dir", default="out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run-matrix", help="run the full experiment matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--mock-backend", default=None)
    p.set_defaults(func=cmd_run_matrix)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
        if hasattr(args, "scorer_url") and not args.scorer_url:
            args.scorer_url = os.environ.get(SCORER_URL_ENV)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParaAlignError, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
