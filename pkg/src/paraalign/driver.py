"""Corpus translation driver: fewshot (P1), fused (P2), and staged (P3
rephrase, then P2 translate) modes, resumable through a run ledger.

Run layout on disk: ``<run_dir>/ledger.json`` plus ``<run_dir>/results.jsonl``
with one ``{pair_id, mode, src, hypothesis, intermediate?, ref, ...}``
object per line.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import ParallelCorpus
from .errors import InputError
from .gateway import Gateway, GatewayRequest
from .langs import direction_label
from .prompts import ShotsRequired, render

logger = logging.getLogger(__name__)

MODES = ("fewshot", "fused", "staged")


class LedgerMismatch(InputError):
    pass


@dataclass(frozen=True)
class TranslationResult:
    pair_id: int
    mode: str
    src: str
    ref: str
    hypothesis: str
    intermediate_paraphrase: str | None = None  # staged mode only
    prompt_digests: tuple[str, ...] = ()
    cached_fraction: float = 0.0
    fallback: bool = False  # staged: paraphrase came back empty, original used

    def to_row(self) -> dict:
        row = {
            "pair_id": self.pair_id,
            "mode": self.mode,
            "src": self.src,
            "hypothesis": self.hypothesis,
        }
        if self.intermediate_paraphrase is not None:
            row["intermediate"] = self.intermediate_paraphrase
        row["ref"] = self.ref
        row["prompt_digests"] = list(self.prompt_digests)
        row["cached_fraction"] = self.cached_fraction
        if self.fallback:
            row["fallback"] = True
        return row

    @classmethod
    def from_row(cls, row: dict) -> "TranslationResult":
        return cls(
            pair_id=int(row["pair_id"]),
            mode=row["mode"],
            src=row["src"],
            ref=row.get("ref", ""),
            hypothesis=row["hypothesis"],
            intermediate_paraphrase=row.get("intermediate"),
            prompt_digests=tuple(row.get("prompt_digests", ())),
            cached_fraction=float(row.get("cached_fraction", 0.0)),
            fallback=bool(row.get("fallback", False)),
        )


@dataclass
class RunLedger:
    run_id: str
    direction: str
    mode: str
    model: str
    completed: set[int] = field(default_factory=set)
    failures: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "direction": self.direction,
            "mode": self.mode,
            "model": self.model,
            "completed": sorted(self.completed),
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunLedger":
        return cls(
            run_id=d["run_id"],
            direction=d["direction"],
            mode=d["mode"],
            model=d["model"],
            completed=set(d.get("completed", ())),
            failures={int(k): v for k, v in d.get("failures", {}).items()},
        )


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


def save_run(run_dir: str | Path, ledger: RunLedger, results: list[TranslationResult]) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "ledger.json").write_text(
        json.dumps(ledger.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    lines = [json.dumps(r.to_row(), ensure_ascii=False) for r in sorted(results, key=lambda r: r.pair_id)]
    (run_dir / "results.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_run(run_dir: str | Path) -> tuple[RunLedger, list[TranslationResult]]:
    run_dir = Path(run_dir)
    ledger = RunLedger.from_dict(json.loads((run_dir / "ledger.json").read_text(encoding="utf-8")))
    results = []
    results_path = run_dir / "results.jsonl"
    if results_path.exists():
        for line in results_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                results.append(TranslationResult.from_row(json.loads(line)))
    return ledger, results


def _translate_pair(pair, mode, gateway, shots, src_name, tgt_name):
    digests = []
    calls = 0
    hits = 0

    def call(template_id, input_sentence, shot_list):
        nonlocal calls, hits
        rendered = render(template_id, src_name, tgt_name, shot_list, input_sentence)
        digests.append(rendered.binding_digest)
        completion = gateway.complete(
            GatewayRequest(
                prompt=rendered.text,
                template_id=template_id,
                tgt_display=tgt_name,
                tag=f"{mode}:{pair.id}",
            )
        )
        calls += 1
        hits += int(completion.cached)
        return completion.text

    intermediate = None
    fallback = False
    if mode == "fewshot":
        hypothesis = call("P1", pair.src_text, shots)
    elif mode == "fused":
        hypothesis = call("P2", pair.src_text, [])
    else:
        intermediate = call("P3", pair.src_text, [])
        if not intermediate:
            # never lose a test sentence: translate the original and flag it
            intermediate = pair.src_text
            fallback = True
        hypothesis = call("P2", intermediate, [])

    return TranslationResult(
        pair_id=pair.id,
        mode=mode,
        src=pair.src_text,
        ref=pair.tgt_text,
        hypothesis=hypothesis,
        intermediate_paraphrase=intermediate if mode == "staged" else None,
        prompt_digests=tuple(digests),
        cached_fraction=hits / calls if calls else 0.0,
        fallback=fallback,
    )


def translate_corpus(
    test: ParallelCorpus,
    mode: str,
    gateway: Gateway,
    shots=None,
    ledger: RunLedger | None = None,
    prior_results: list[TranslationResult] | None = None,
    run_dir: str | Path | None = None,
    run_id: str | None = None,
) -> tuple[list[TranslationResult], RunLedger]:
    """Translate every pair not already completed in the ledger.

    fewshot issues one P1 call per pair (shots required); fused one P2
    call; staged a P3 call followed by a P2 call on the extracted
    paraphrase. Per-pair failures are recorded in the ledger, never thrown.
    Returns the union of prior and new results, ordered by pair id.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}")
    if mode == "fewshot" and not shots:
        raise ShotsRequired("fewshot mode needs shots")
    if mode != "fewshot" and shots:
        raise InputError(f"{mode} mode takes no shots")

    label = direction_label(test.direction)
    model = gateway.cfg.model_name
    if ledger is None:
        ledger = RunLedger(run_id or new_run_id(), label, mode, model)
    else:
        _check_ledger(ledger, label, mode, model)

    src_name = test.direction[0].display_name
    tgt_name = test.direction[1].display_name
    results: dict[int, TranslationResult] = {r.pair_id: r for r in prior_results or []}
    todo = [p for p in test.pairs if p.id not in ledger.completed]

    lock = threading.Lock()

    def work(pair):
        try:
            result = _translate_pair(pair, mode, gateway, shots, src_name, tgt_name)
        except Exception as exc:
            logger.warning("pair %d failed: %s", pair.id, exc)
            with lock:
                ledger.failures[pair.id] = str(exc)
            return
        if not result.hypothesis:
            with lock:
                ledger.failures[pair.id] = "empty hypothesis"
            return
        with lock:
            results[pair.id] = result
            ledger.completed.add(pair.id)
            ledger.failures.pop(pair.id, None)

    workers = max(1, gateway.cfg.concurrency_limit)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(work, todo))

    ordered = [results[i] for i in sorted(results)]
    if run_dir is not None:
        save_run(run_dir, ledger, ordered)
    return ordered, ledger


def _check_ledger(ledger: RunLedger, label: str, mode: str, model: str) -> None:
    problems = []
    if ledger.direction != label:
        problems.append(f"direction {ledger.direction} != {label}")
    if ledger.mode != mode:
        problems.append(f"mode {ledger.mode} != {mode}")
    if ledger.model != model:
        problems.append(f"model {ledger.model} != {model}")
    if problems:
        raise LedgerMismatch("; ".join(problems))


def resume(
    run_dir: str | Path,
    test: ParallelCorpus,
    mode: str,
    gateway: Gateway,
    shots=None,
) -> tuple[list[TranslationResult], RunLedger]:
    """Continue an interrupted run: only missing pair ids are attempted."""
    ledger, prior = load_run(run_dir)
    _check_ledger(ledger, direction_label(test.direction), mode, gateway.cfg.model_name)
    return translate_corpus(
        test,
        mode,
        gateway,
        shots=shots,
        ledger=ledger,
        prior_results=prior,
        run_dir=run_dir,
    )
