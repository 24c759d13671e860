"""Back-translation pair synthesis.

For each bilingual pair (X, Y) the target-side sentence Y is translated
back into the source language with few-shot P1 prompting; the extracted
answer X' becomes the structure-aligned paraphrase of X. A light filter
policy guards length ratio and identity; every drop is tallied by reason.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import ParallelCorpus
from .errors import InputError, RuntimeFailure
from .gateway import Gateway, GatewayRequest
from .langs import LangCode, lang as parse_lang
from .metrics import tokenize
from .prompts import render

logger = logging.getLogger(__name__)


class EmptyShotList(InputError):
    pass


class AllPairsFailed(RuntimeFailure):
    pass


@dataclass(frozen=True)
class ParaphrasePair:
    """Original source sentence and its back-translation-derived rewrite."""

    pair_id: int
    original: str
    paraphrase: str
    lang: LangCode
    provenance: tuple[str, str] = ("", "")  # (model_name, prompt digest)

    def __post_init__(self):
        if not self.original or not self.paraphrase:
            raise InputError("paraphrase pair sides must be non-empty")


@dataclass(frozen=True)
class FilterPolicy:
    min_len_ratio: float = 0.5
    max_len_ratio: float = 2.0
    drop_identical: bool = False
    require_langid: bool = False

    def __post_init__(self):
        if not (0 < self.min_len_ratio <= 1 <= self.max_len_ratio):
            raise InputError("need 0 < min_len_ratio <= 1 <= max_len_ratio")


@dataclass
class SynthesisReport:
    requested: int = 0
    generated: int = 0
    filtered_out: dict[str, int] = field(default_factory=dict)
    cache_hits: int = 0
    gateway_failures: int = 0

    def tally(self, reason: str) -> None:
        self.filtered_out[reason] = self.filtered_out.get(reason, 0) + 1


def apply_policy(pair: ParaphrasePair, policy: FilterPolicy, langid=None) -> tuple[bool, str | None]:
    """Keep/drop decision with reason; ratio bounds are inclusive.

    The length ratio is token-count(paraphrase) / token-count(original)
    under the language-aware tokenizer. ``langid`` is an optional callable
    text -> code; when required but unavailable the check passes with a
    warning.
    """
    if policy.drop_identical and pair.paraphrase == pair.original:
        return False, "identical"
    n_orig = len(tokenize(pair.original, pair.lang))
    n_para = len(tokenize(pair.paraphrase, pair.lang))
    if n_orig == 0 or n_para == 0:
        return False, "empty"
    ratio = n_para / n_orig
    if not (policy.min_len_ratio <= ratio <= policy.max_len_ratio):
        return False, "ratio"
    if policy.require_langid:
        if langid is None:
            logger.warning("langid check requested but no detector available; passing")
        elif langid(pair.paraphrase) != pair.lang.code:
            return False, "langid"
    return True, None


def synthesize(
    bitext: ParallelCorpus,
    gateway: Gateway,
    shots,
    policy: FilterPolicy = FilterPolicy(),
    langid=None,
) -> tuple[list[ParaphrasePair], SynthesisReport]:
    """Generate paraphrase pairs for a bitext; output ordered by pair id.

    P1 is rendered in the back-translation direction: SRC is the corpus
    target language, TGT the corpus source language, and the input sentence
    is the target-side text. Per-pair gateway failures are logged and
    skipped; the batch only aborts if every pair failed.
    """
    if not shots:
        raise EmptyShotList("synthesis needs at least one back-translation shot")
    if not bitext.pairs:
        raise InputError("empty bitext")

    src_lang, tgt_lang = bitext.direction
    report = SynthesisReport(requested=len(bitext.pairs))

    def back_translate(pair):
        rendered = render("P1", tgt_lang.display_name, src_lang.display_name, shots, pair.tgt_text)
        req = GatewayRequest(
            prompt=rendered.text,
            template_id="P1",
            tgt_display=src_lang.display_name,
            tag=f"synthesize:{pair.id}",
        )
        return rendered, gateway.complete(req)

    outcomes: dict[int, tuple] = {}
    workers = max(1, gateway.cfg.concurrency_limit)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(back_translate, p): p for p in bitext.pairs}
        for fut, pair in futures.items():
            try:
                outcomes[pair.id] = (pair, *fut.result())
            except Exception as exc:  # per-pair failure never aborts the batch
                outcomes[pair.id] = (pair, None, exc)

    emitted: list[ParaphrasePair] = []
    for pair_id in sorted(outcomes):
        pair, rendered, completion = outcomes[pair_id]
        if rendered is None:
            logger.warning("pair %d: gateway failure: %s", pair_id, completion)
            report.gateway_failures += 1
            continue
        if completion.cached:
            report.cache_hits += 1
        if not completion.text:
            report.tally("empty")
            continue
        candidate = ParaphrasePair(
            pair_id=pair.id,
            original=pair.src_text,
            paraphrase=completion.text,
            lang=src_lang,
            provenance=(gateway.cfg.model_name, rendered.binding_digest),
        )
        keep, reason = apply_policy(candidate, policy, langid=langid)
        if keep:
            emitted.append(candidate)
        else:
            report.tally(reason)

    report.generated = len(emitted)
    if report.gateway_failures == report.requested:
        raise AllPairsFailed("every back-translation call failed; endpoint misconfigured?")
    return emitted, report


def write_paraphrases(pairs: list[ParaphrasePair], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for p in pairs:
        lines.append(
            json.dumps(
                {
                    "pair_id": p.pair_id,
                    "lang": p.lang.code,
                    "original": p.original,
                    "paraphrase": p.paraphrase,
                    "model": p.provenance[0],
                    "prompt_digest": p.provenance[1],
                },
                ensure_ascii=False,
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_paraphrases(path: str | Path) -> list[ParaphrasePair]:
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        pairs.append(
            ParaphrasePair(
                pair_id=int(obj["pair_id"]),
                original=obj["original"],
                paraphrase=obj["paraphrase"],
                lang=parse_lang(obj["lang"]),
                provenance=(obj.get("model", ""), obj.get("prompt_digest", "")),
            )
        )
    return pairs
