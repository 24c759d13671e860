"""The three task prompts as templates with byte-exact rendering.

P1 is the few-shot translation prompt (the only one taking shots), P2 the
bare translation instruction, P3 the rephrase-for-structure instruction.
Template bodies live as text assets under ``templates/``; slots are
``{SRC}``, ``{TGT}``, ``{SHOTS}``, ``{INPUT}``. Rendering substitutes each
slot exactly once and never re-scans substituted values, so user text
cannot inject further slots.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import InputError

TEMPLATE_IDS = ("P1", "P2", "P3")


class ShotsRequired(InputError):
    pass


class ShotsForbidden(InputError):
    pass


class EmptyInput(InputError):
    pass


@dataclass(frozen=True)
class ShotPair:
    src_text: str
    tgt_text: str

    def __post_init__(self):
        if not self.src_text.strip() or not self.tgt_text.strip():
            raise InputError("shot sides must be non-empty")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def has_shots_slot(self) -> bool:
        return "{SHOTS}" in self.body


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    text: str
    binding_digest: str


_SLOT_RE = re.compile(r"\{(SRC|TGT|SHOTS|INPUT)\}")


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise InputError(f"unknown template id {template_id!r}")
    asset = resources.files("paraalign") / "templates" / f"{template_id.lower()}.txt"
    body = asset.read_text(encoding="utf-8")
    if body.endswith("\n"):
        body = body[:-1]
    return PromptTemplate(template_id, body)


def _coerce_shots(shots) -> tuple[ShotPair, ...]:
    out = []
    for s in shots or ():
        out.append(s if isinstance(s, ShotPair) else ShotPair(*s))
    return tuple(out)


def _binding_digest(template_id, src_lang, tgt_lang, shots, input_sentence) -> str:
    payload = json.dumps(
        [template_id, src_lang, tgt_lang, [[s.src_text, s.tgt_text] for s in shots], input_sentence],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def render(
    template_id: str,
    src_lang: str,
    tgt_lang: str,
    shots,
    input_sentence: str,
) -> RenderedPrompt:
    """Render a template with language display names, shots, and the input.

    P1 requires at least one shot; P2/P3 take none. Layout: P1 is the
    instruction line, a blank line, the shot blocks, then the input as one
    more source block with a trailing empty target cue; P2/P3 are the
    instruction line, a blank line, and the input sentence.
    """
    template = load_template(template_id)
    shots = _coerce_shots(shots)
    if not input_sentence or not input_sentence.strip():
        raise EmptyInput("input sentence is empty")
    if template_id == "P1" and not shots:
        raise ShotsRequired("P1 needs at least one shot")
    if template_id != "P1" and shots:
        raise ShotsForbidden(f"{template_id} takes no shots")

    shots_text = "\n".join(
        f"###{src_lang}: {s.src_text}\n###{tgt_lang}: {s.tgt_text}" for s in shots
    )
    values = {"SRC": src_lang, "TGT": tgt_lang, "SHOTS": shots_text, "INPUT": input_sentence}
    text = _SLOT_RE.sub(lambda m: values[m.group(1)], template.body)
    digest = _binding_digest(template_id, src_lang, tgt_lang, shots, input_sentence)
    return RenderedPrompt(template_id, text, digest)


def golden_digest(template_id: str, src_lang: str, tgt_lang: str, shots, input_sentence: str) -> str:
    """Stable digest of the rendered text, for regression pinning."""
    rendered = render(template_id, src_lang, tgt_lang, shots, input_sentence)
    return hashlib.sha256(rendered.text.encode("utf-8")).hexdigest()


def instruction_line(template_id: str, src_lang: str, tgt_lang: str) -> str:
    """First line of the template with languages bound (used as the
    instruction field of emitted training records)."""
    template = load_template(template_id)
    first = template.body.splitlines()[0]
    return _SLOT_RE.sub(lambda m: {"SRC": src_lang, "TGT": tgt_lang}[m.group(1)], first)


def template_digests() -> dict[str, str]:
    """Digest of each raw template body, recorded in run manifests."""
    return {
        tid: hashlib.sha256(load_template(tid).body.encode("utf-8")).hexdigest()
        for tid in TEMPLATE_IDS
    }
