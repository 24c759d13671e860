"""Instruction-tuning dataset emission.

Each bitext pair becomes one translation record (P2 instruction); a seeded
draw from the paraphrase pool adds rephrase records (P3 instruction) in the
source language only. Sweep subsets share one seeded permutation so they
are nested: each sweep point differs from the previous only by added data.
The trainer itself is external; a stub manifest pins the handoff.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .corpus import ParallelCorpus
from .errors import InputError, RuntimeFailure
from .gateway import DEFAULT_TEMPERATURE
from .langs import direction_label
from .prompts import instruction_line
from .synthesis import ParaphrasePair

DEFAULT_MIX_SEED = 22


class PoolTooSmall(InputError):
    pass


class SizesNotAscending(InputError):
    pass


class IoFailure(RuntimeFailure):
    pass


@dataclass(frozen=True)
class InstructionRecord:
    instruction: str
    input: str
    output: str
    task: str  # "translate" | "paraphrase"
    meta: str  # direction label for translate, language code for paraphrase

    def __post_init__(self):
        if self.task not in ("translate", "paraphrase"):
            raise InputError(f"unknown task {self.task!r}")
        if not self.output:
            raise InputError("record output must be non-empty")


@dataclass(frozen=True)
class MixSpec:
    n_paraphrase: int
    seed: int = DEFAULT_MIX_SEED
    shuffle_final: bool = True

    def __post_init__(self):
        if self.n_paraphrase < 0:
            raise InputError("n_paraphrase must be >= 0")


@dataclass(frozen=True)
class TrainerStub:
    base_model: str = "llama-3-8b"
    lora_rank: int = 128
    dataset_path: str = ""
    notes: str = "hand off to the external LoRA trainer; rank stays 128 unless overridden"


def _seeded_order(n: int, seed: int) -> list[int]:
    order = list(range(n))
    random.Random(seed).shuffle(order)
    return order


def emit(
    bitext_train: ParallelCorpus,
    para_pool: list[ParaphrasePair],
    mix: MixSpec,
) -> list[InstructionRecord]:
    """Build the mixed dataset; |records| = |bitext| + n_paraphrase.

    Without shuffle_final, translation records precede paraphrase records;
    with it, the combined order is one seeded permutation.
    """
    if mix.n_paraphrase > len(para_pool):
        raise PoolTooSmall(f"n_paraphrase {mix.n_paraphrase} > pool size {len(para_pool)}")
    src, tgt = bitext_train.direction
    p2_line = instruction_line("P2", src.display_name, tgt.display_name)
    p3_line = instruction_line("P3", src.display_name, tgt.display_name)

    records = [
        InstructionRecord(p2_line, p.src_text, p.tgt_text, "translate", direction_label(bitext_train.direction))
        for p in bitext_train.pairs
    ]
    rng = random.Random(mix.seed)
    order = list(range(len(para_pool)))
    rng.shuffle(order)
    records.extend(
        InstructionRecord(p3_line, para_pool[i].original, para_pool[i].paraphrase, "paraphrase", para_pool[i].lang.code)
        for i in order[: mix.n_paraphrase]
    )
    if mix.shuffle_final:
        rng.shuffle(records)
    return records


def sweep_subsets(para_pool: list[ParaphrasePair], sizes: list[int], seed: int) -> dict[int, list[ParaphrasePair]]:
    """Nested subsets under one seeded permutation, keyed by size."""
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise SizesNotAscending(f"sizes must be strictly ascending, got {sizes}")
    if sizes and sizes[-1] > len(para_pool):
        raise PoolTooSmall(f"largest sweep size {sizes[-1]} > pool size {len(para_pool)}")
    order = _seeded_order(len(para_pool), seed)
    return {k: [para_pool[i] for i in order[:k]] for k in sizes}


def write_dataset(
    records: list[InstructionRecord],
    path: str | Path,
    stub: TrainerStub | None = None,
    mix: MixSpec | None = None,
    prompt_digests: dict[str, str] | None = None,
    corpus_checksums: dict[str, str] | None = None,
    temperature: float = DEFAULT_TEMPERATURE,
) -> tuple[Path, dict]:
    """Write trainer-ready JSONL plus its manifest; both writes are atomic.

    The JSONL rows carry exactly {instruction, input, output}; everything
    else (counts per task, mix seed, digests, trainer stub, generation
    temperature) goes into ``<stem>.manifest.json`` alongside.
    """
    if not records:
        raise InputError("refusing to write an empty dataset")
    path = Path(path)
    stub = stub or TrainerStub(dataset_path=str(path))

    counts: dict[str, int] = {}
    for r in records:
        counts[r.task] = counts.get(r.task, 0) + 1
    manifest = {
        "records": len(records),
        "counts": counts,
        "mix": asdict(mix) if mix else None,
        "prompt_digests": prompt_digests or {},
        "corpus_checksums": corpus_checksums or {},
        "temperature": temperature,
        "trainer": asdict(stub),
    }

    lines = [
        json.dumps({"instruction": r.instruction, "input": r.input, "output": r.output}, ensure_ascii=False)
        for r in records
    ]
    manifest_path = path.with_suffix(".manifest.json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, "\n".join(lines) + "\n")
        _atomic_write(manifest_path, json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write dataset at {path}: {exc}") from exc
    return path, manifest


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)
