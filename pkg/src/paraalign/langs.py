"""Language tags and the display names used inside prompts."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InputError

_DISPLAY = {
    "En": "English",
    "Zh": "Chinese",
    "De": "German",
    "Heb": "Hebrew",
    "Swh": "Swahili",
}

KNOWN_CODES = tuple(_DISPLAY)


@dataclass(frozen=True)
class LangCode:
    """Short language tag such as ``Zh``.

    Codes outside the known set are accepted as an escape hatch; they fall
    back to the raw code as display name unless one is supplied.
    """

    code: str
    display: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.code:
            raise InputError("empty language code")

    @property
    def display_name(self) -> str:
        if self.display:
            return self.display
        return _DISPLAY.get(self.code, self.code)

    def __str__(self) -> str:
        return self.code


EN = LangCode("En")
ZH = LangCode("Zh")
DE = LangCode("De")
HEB = LangCode("Heb")
SWH = LangCode("Swh")


def lang(code: str) -> LangCode:
    """Normalize a user-supplied code ('zh', 'ZH', 'Zh') onto the known set when possible."""
    for known in KNOWN_CODES:
        if code.lower() == known.lower():
            return LangCode(known)
    return LangCode(code)


Direction = tuple[LangCode, LangCode]


def direction(src: LangCode, tgt: LangCode) -> Direction:
    if src == tgt:
        raise InputError(f"direction needs two distinct languages, got {src}->{tgt}")
    return (src, tgt)


def parse_direction(text: str) -> Direction:
    """Parse 'Zh-En', 'zh_en', or 'Zh->En' into a (src, tgt) pair."""
    for sep in ("->", "-", "_", ":"):
        if sep in text:
            a, b = text.split(sep, 1)
            return direction(lang(a.strip()), lang(b.strip()))
    raise InputError(f"cannot parse direction {text!r}")


def direction_label(d: Direction) -> str:
    return f"{d[0].code}-{d[1].code}"
