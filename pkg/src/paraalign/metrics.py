"""ROUGE-L scoring with language-aware tokenization, corpus aggregation,
score deltas, and the client side of the quality-scorer wire contract.

Conventions pinned here (and recorded in run manifests): NFC normalization,
Chinese scored character-level with ASCII runs kept whole, all other
languages lowercased with punctuation dropped, F-measure with beta=1,
corpus values reported on a x100 scale.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

import requests

from .errors import InputError, RuntimeFailure
from .langs import LangCode, ZH

CONVENTIONS = {
    "unicode_normalization": "NFC",
    "tokenization": {
        "default": "lowercase, split on whitespace/punctuation, punctuation dropped",
        "Zh": "one token per character, ASCII runs kept whole",
    },
    "rouge_beta": 1.0,
    "score_scale": 100,
    "comet_model": "wmt22-comet-da",
}

DEFAULT_BATCH_CAP = 64


class MissingReference(InputError):
    pass


class MetricMismatch(InputError):
    pass


class SizeMismatch(InputError):
    pass


class ScorerUnreachable(RuntimeFailure):
    pass


class ContractViolation(RuntimeFailure):
    pass


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...]
    lang: LangCode
    scheme: str  # "whitespace" | "cjk_char"

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class RougeLScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class CorpusScore:
    metric: str  # "rouge_l" | "comet"
    value: float  # x100 scale
    n: int
    per_sentence: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ScoreDelta:
    metric: str
    system_a: str
    system_b: str
    delta: float  # a - b, rounded to 2 decimals


# Word = \w run, keeping internal apostrophes ("doesn't" stays one token).
_WORD_RE = re.compile(r"\w+(?:['’]\w+)*")
# For the character scheme: ASCII alnum runs, otherwise single non-space chars.
_CJK_PIECE_RE = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z0-9]+)*|\S")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str, lang: LangCode) -> TokenSeq:
    """NFC-normalize and tokenize; Chinese gets the per-character scheme."""
    norm = unicodedata.normalize("NFC", text)
    if lang == ZH:
        tokens = []
        for piece in _CJK_PIECE_RE.findall(norm):
            if len(piece) == 1 and _is_punct(piece):
                continue
            tokens.append(piece.lower())
        return TokenSeq(tuple(tokens), lang, "cjk_char")
    tokens = _WORD_RE.findall(norm.lower())
    return TokenSeq(tuple(tokens), lang, "whitespace")


def _tokens(seq) -> list[str]:
    if isinstance(seq, TokenSeq):
        return list(seq.tokens)
    return list(seq)


def lcs_length(a, b) -> int:
    """Longest common subsequence length via O(|a|*|b|) DP (two rows)."""
    xs, ys = _tokens(a), _tokens(b)
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        cur = [0]
        for j, y in enumerate(ys, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hyp, ref) -> RougeLScore:
    """LCS-based F-measure with beta=1; empty hyp or ref scores all-zero."""
    xs, ys = _tokens(hyp), _tokens(ref)
    if not xs or not ys:
        return RougeLScore(0.0, 0.0, 0.0)
    lcs = lcs_length(xs, ys)
    if lcs == 0:
        return RougeLScore(0.0, 0.0, 0.0)
    p = lcs / len(xs)
    r = lcs / len(ys)
    return RougeLScore(p, r, 2 * p * r / (p + r))


def rouge_l_text(hyp_text: str, ref_text: str, lang: LangCode) -> RougeLScore:
    return rouge_l(tokenize(hyp_text, lang), tokenize(ref_text, lang))


def _iter_hypotheses(results):
    for r in results:
        if hasattr(r, "pair_id") and hasattr(r, "hypothesis"):
            yield r.pair_id, r.hypothesis
        else:
            pair_id, hyp = r
            yield pair_id, hyp


def corpus_rouge(results, refs: dict[int, str], lang: LangCode) -> CorpusScore:
    """Mean per-sentence ROUGE-L F1 x100; order-independent.

    ``results`` may be TranslationResult-like objects or (pair_id, hypothesis)
    tuples; ``refs`` maps pair_id to reference text in the target language.
    """
    f1s = []
    for pair_id, hyp in sorted(_iter_hypotheses(results)):
        if pair_id not in refs:
            raise MissingReference(f"no reference for pair {pair_id}")
        f1s.append(rouge_l_text(hyp, refs[pair_id], lang).f1)
    if not f1s:
        raise InputError("no results to score")
    return CorpusScore(
        metric="rouge_l",
        value=100.0 * sum(f1s) / len(f1s),
        n=len(f1s),
        per_sentence=tuple(f1s),
    )


def _validate_items(items: list[dict]) -> None:
    if not items:
        raise InputError("scorer batches must be non-empty")
    for i, item in enumerate(items):
        for key in ("src", "mt", "ref"):
            if not isinstance(item.get(key), str) or not item[key]:
                raise InputError(f"item {i} missing or empty field {key!r}")


def comet_batch(
    items: list[dict],
    scorer_url: str,
    timeout: float = 120.0,
    batch_cap: int = DEFAULT_BATCH_CAP,
) -> CorpusScore:
    """POST items to the scorer service and aggregate to a corpus score.

    Batches larger than ``batch_cap`` are split client-side; the combined
    system score is then the mean of all per-sentence scores.
    """
    _validate_items(items)
    url = scorer_url.rstrip("/") + "/score"

    all_scores: list[float] = []
    single_system_score: float | None = None
    chunks = [items[i : i + batch_cap] for i in range(0, len(items), batch_cap)]
    for chunk in chunks:
        try:
            resp = requests.post(url, json={"items": chunk}, timeout=timeout)
        except requests.RequestException as exc:
            raise ScorerUnreachable(f"{url}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise ScorerUnreachable(f"{url}: HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ContractViolation(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ContractViolation(f"{url}: non-JSON response") from exc
        for field_name in ("scores", "system_score", "model"):
            if field_name not in payload:
                raise ContractViolation(f"response missing {field_name!r}")
        scores = payload["scores"]
        if not isinstance(scores, list) or len(scores) != len(chunk):
            raise ContractViolation(f"{len(chunk)} items but {len(scores)} scores")
        for s in scores:
            if not isinstance(s, (int, float)) or not (0.0 <= s <= 1.0):
                raise ContractViolation(f"score {s!r} outside [0, 1]")
        all_scores.extend(float(s) for s in scores)
        if len(chunks) == 1:
            single_system_score = float(payload["system_score"])

    if single_system_score is not None:
        value = 100.0 * single_system_score
    else:
        value = 100.0 * sum(all_scores) / len(all_scores)
    return CorpusScore(metric="comet", value=value, n=len(items), per_sentence=tuple(all_scores))


def delta(a: CorpusScore, b: CorpusScore, label_a: str = "a", label_b: str = "b") -> ScoreDelta:
    """a minus b on the x100 scale, rounded to 2 decimals."""
    if a.metric != b.metric:
        raise MetricMismatch(f"{a.metric} vs {b.metric}")
    if a.n != b.n:
        raise SizeMismatch(f"scores cover different test sets: n={a.n} vs n={b.n}")
    return ScoreDelta(a.metric, label_a, label_b, round(a.value - b.value, 2))
