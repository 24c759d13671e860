"""Parallel-corpus ingestion, deterministic splitting, and dedup.

Supported on-disk layouts:
  - tsv_bitext: one record per line, exactly one tab between source and target
  - jsonl_bitext: one JSON object per line with keys "src" and "tgt"
  - paired_plaintext: two files, line i of each forming pair i (FLORES layout)

Input text is stored verbatim; the only validity rule at ingestion is
non-emptiness after whitespace trimming.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

from .errors import InputError
from .langs import Direction, LangCode, direction_label

logger = logging.getLogger(__name__)

DEFAULT_SPLIT_SEED = 22

FORMATS = ("tsv_bitext", "jsonl_bitext", "paired_plaintext")
STRATEGIES = ("seeded_shuffle", "head", "tail")


class MissingFile(InputError):
    pass


class LineCountMismatch(InputError):
    pass


class MalformedRecord(InputError):
    pass


class SplitTooLarge(InputError):
    pass


class Origin(str, Enum):
    wmt = "wmt"
    flores = "flores"
    other = "other"


@dataclass(frozen=True)
class ParallelPair:
    """One aligned sentence pair; ``line_no`` is the 1-based source-file line."""

    id: int
    src_text: str
    tgt_text: str
    src_lang: LangCode
    tgt_lang: LangCode
    origin: Origin = Origin.other
    line_no: int = -1

    def __post_init__(self):
        if not self.src_text.strip() or not self.tgt_text.strip():
            raise InputError(f"pair {self.id}: empty side after trimming")


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[ParallelPair, ...]
    direction: Direction
    skipped: int = field(default=0, compare=False)  # records dropped at load time

    def __post_init__(self):
        src, tgt = self.direction
        if src == tgt:
            raise InputError("corpus direction needs two distinct languages")
        seen = set()
        for p in self.pairs:
            if (p.src_lang, p.tgt_lang) != self.direction:
                raise InputError(f"pair {p.id} direction differs from corpus direction")
            if p.id in seen:
                raise InputError(f"duplicate pair id {p.id}")
            seen.add(p.id)

    def __len__(self) -> int:
        return len(self.pairs)

    @cached_property
    def checksum(self) -> str:
        """Digest over the ordered pair texts; ids and metadata excluded."""
        h = hashlib.sha256()
        for p in self.pairs:
            h.update(p.src_text.encode("utf-8"))
            h.update(b"\x1f")
            h.update(p.tgt_text.encode("utf-8"))
            h.update(b"\x1e")
        return h.hexdigest()

    @property
    def label(self) -> str:
        return direction_label(self.direction)

    def ids(self) -> list[int]:
        return [p.id for p in self.pairs]

    def by_id(self) -> dict[int, ParallelPair]:
        return {p.id: p for p in self.pairs}

    def refs(self) -> dict[int, str]:
        return {p.id: p.tgt_text for p in self.pairs}


@dataclass(frozen=True)
class SplitSpec:
    test_size: int
    seed: int = DEFAULT_SPLIT_SEED
    strategy: str = "seeded_shuffle"

    def __post_init__(self):
        if self.test_size <= 0:
            raise InputError(f"test_size must be positive, got {self.test_size}")
        if self.strategy not in STRATEGIES:
            raise InputError(f"unknown split strategy {self.strategy!r}")


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise MissingFile(str(path))
    return path.read_text(encoding="utf-8").splitlines()


def load_parallel(
    src_path: str | Path,
    tgt_path: str | Path | None,
    format: str,
    direction: Direction,
    origin: Origin = Origin.other,
) -> ParallelCorpus:
    """Load a corpus, skipping (and counting) records with an empty side.

    Ids are assigned 0..n-1 over the kept records in file order; the skip
    count is carried on the returned corpus.
    """
    if format not in FORMATS:
        raise InputError(f"unknown corpus format {format!r}")
    src_path = Path(src_path)

    if format == "paired_plaintext":
        if tgt_path is None:
            raise InputError("paired_plaintext needs both files")
        src_lines = _read_lines(src_path)
        tgt_lines = _read_lines(Path(tgt_path))
        if len(src_lines) != len(tgt_lines):
            raise LineCountMismatch(f"{len(src_lines)} vs {len(tgt_lines)} lines")
        records = list(enumerate(zip(src_lines, tgt_lines), start=1))
    elif format == "tsv_bitext":
        records = []
        for ln, line in enumerate(_read_lines(src_path), start=1):
            fields = line.split("\t")
            if len(fields) != 2:
                raise MalformedRecord(f"{src_path}:{ln}: expected 2 tab-separated fields, got {len(fields)}")
            records.append((ln, (fields[0], fields[1])))
    else:  # jsonl_bitext
        records = []
        for ln, line in enumerate(_read_lines(src_path), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{src_path}:{ln}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict) or "src" not in obj or "tgt" not in obj:
                raise MalformedRecord(f'{src_path}:{ln}: object missing "src" or "tgt"')
            records.append((ln, (str(obj["src"]), str(obj["tgt"]))))

    src_lang, tgt_lang = direction
    pairs: list[ParallelPair] = []
    skipped = 0
    for ln, (src_text, tgt_text) in records:
        if not src_text.strip() or not tgt_text.strip():
            skipped += 1
            logger.warning("%s:%d: skipping record with empty side", src_path, ln)
            continue
        pairs.append(
            ParallelPair(
                id=len(pairs),
                src_text=src_text,
                tgt_text=tgt_text,
                src_lang=src_lang,
                tgt_lang=tgt_lang,
                origin=origin,
                line_no=ln,
            )
        )
    if skipped:
        logger.info("%s: skipped %d record(s) failing non-empty validation", src_path, skipped)
    return ParallelCorpus(tuple(pairs), direction, skipped=skipped)


def split(corpus: ParallelCorpus, spec: SplitSpec) -> tuple[ParallelCorpus, ParallelCorpus]:
    """Partition into (train, test); pairs keep their ids and corpus order."""
    n = len(corpus)
    if spec.test_size >= n:
        raise SplitTooLarge(f"test_size {spec.test_size} >= corpus size {n}")

    if spec.strategy == "head":
        test_pos = set(range(spec.test_size))
    elif spec.strategy == "tail":
        test_pos = set(range(n - spec.test_size, n))
    else:
        order = list(range(n))
        random.Random(spec.seed).shuffle(order)
        test_pos = set(order[: spec.test_size])

    test_pairs = tuple(p for i, p in enumerate(corpus.pairs) if i in test_pos)
    train_pairs = tuple(p for i, p in enumerate(corpus.pairs) if i not in test_pos)
    train = ParallelCorpus(train_pairs, corpus.direction)
    test = ParallelCorpus(test_pairs, corpus.direction)
    return train, test


def dedupe(corpus: ParallelCorpus) -> tuple[ParallelCorpus, int]:
    """Drop repeat (src_text, tgt_text) pairs, keeping first occurrences."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for p in corpus.pairs:
        key = (p.src_text, p.tgt_text)
        if key in seen:
            continue
        seen.add(key)
        kept.append(p)
    removed = len(corpus.pairs) - len(kept)
    if removed == 0:
        return corpus, 0
    return ParallelCorpus(tuple(kept), corpus.direction), removed


def write_corpus(
    corpus: ParallelCorpus,
    path: str | Path,
    format: str = "jsonl_bitext",
    tgt_path: str | Path | None = None,
) -> None:
    """Serialize in one of the ingestion layouts (round-trips via load_parallel)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "jsonl_bitext":
        lines = [
            json.dumps({"src": p.src_text, "tgt": p.tgt_text, "id": p.id}, ensure_ascii=False)
            for p in corpus.pairs
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif format == "tsv_bitext":
        lines = [f"{p.src_text}\t{p.tgt_text}" for p in corpus.pairs]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif format == "paired_plaintext":
        if tgt_path is None:
            raise InputError("paired_plaintext needs both output paths")
        path.write_text("\n".join(p.src_text for p in corpus.pairs) + "\n", encoding="utf-8")
        Path(tgt_path).write_text("\n".join(p.tgt_text for p in corpus.pairs) + "\n", encoding="utf-8")
    else:
        raise InputError(f"unknown corpus format {format!r}")


def subset_by_ids(corpus: ParallelCorpus, ids: set[int]) -> ParallelCorpus:
    return ParallelCorpus(tuple(p for p in corpus.pairs if p.id in ids), corpus.direction)
