import pytest

from paraalign.corpus import Origin, ParallelCorpus, ParallelPair
from paraalign.langs import EN, ZH

GOLDEN_DIR_NAME = "goldens"


def build_corpus(rows, direction=(ZH, EN), origin=Origin.other):
    src, tgt = direction
    pairs = tuple(
        ParallelPair(id=i, src_text=s, tgt_text=t, src_lang=src, tgt_lang=tgt, origin=origin, line_no=i + 1)
        for i, (s, t) in enumerate(rows)
    )
    return ParallelCorpus(pairs, direction)


@pytest.fixture
def goldens(request):
    return request.path.parent / GOLDEN_DIR_NAME


@pytest.fixture
def zh_en_corpus():
    return build_corpus(
        [
            ("他是一般人", "He is not famous enough."),
            ("以免再次发生这样的事情", "So that such a thing won't happen again."),
            ("你好世界", "Hello world."),
            ("我喜欢喝茶", "I like drinking tea."),
        ]
    )


@pytest.fixture
def flores_files(tmp_path):
    """FLORES-shaped paired plaintext fixture: two files, 2,007 lines each."""
    src = tmp_path / "devtest.heb"
    tgt = tmp_path / "devtest.eng"
    src.write_text("\n".join(f"משפט מספר {i}" for i in range(2007)) + "\n", encoding="utf-8")
    tgt.write_text("\n".join(f"sentence number {i}" for i in range(2007)) + "\n", encoding="utf-8")
    return src, tgt
