import hashlib
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraalign.corpus import (
    LineCountMismatch,
    MalformedRecord,
    MissingFile,
    Origin,
    SplitSpec,
    SplitTooLarge,
    dedupe,
    load_parallel,
    split,
    write_corpus,
)
from conftest import build_corpus

from paraalign.errors import InputError
from paraalign.langs import EN, HEB, ZH, parse_direction


class TestLoadParallel:
    def test_paired_plaintext_three_lines(self, tmp_path):
        src = tmp_path / "zh.txt"
        tgt = tmp_path / "en.txt"
        src.write_text("一\n二\n三\n", encoding="utf-8")
        tgt.write_text("one\ntwo\nthree\n", encoding="utf-8")
        corpus = load_parallel(src, tgt, "paired_plaintext", (ZH, EN))
        assert len(corpus) == 3
        assert corpus.ids() == [0, 1, 2]
        assert corpus.pairs[1].src_text == "二"
        assert corpus.pairs[1].tgt_text == "two"

    def test_flores_shape_2007(self, flores_files):
        src, tgt = flores_files
        corpus = load_parallel(src, tgt, "paired_plaintext", (HEB, EN), origin=Origin.flores)
        assert len(corpus) == 2007
        assert corpus.skipped == 0

    def test_tsv_empty_target_skipped(self, tmp_path):
        path = tmp_path / "bitext.tsv"
        path.write_text("你好\thello\n你好\t\n", encoding="utf-8")
        corpus = load_parallel(path, None, "tsv_bitext", (ZH, EN))
        assert len(corpus) == 1
        assert corpus.skipped == 1

    def test_tsv_wrong_field_count(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a\tb\tc\n", encoding="utf-8")
        with pytest.raises(MalformedRecord):
            load_parallel(path, None, "tsv_bitext", (ZH, EN))

    def test_jsonl_ok_and_missing_key(self, tmp_path):
        path = tmp_path / "bitext.jsonl"
        path.write_text('{"src": "一", "tgt": "one"}\n{"src": "二"}\n', encoding="utf-8")
        with pytest.raises(MalformedRecord):
            load_parallel(path, None, "jsonl_bitext", (ZH, EN))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_parallel(tmp_path / "nope.txt", None, "tsv_bitext", (ZH, EN))

    def test_line_count_mismatch(self, tmp_path):
        src = tmp_path / "a.txt"
        tgt = tmp_path / "b.txt"
        src.write_text("x\ny\n", encoding="utf-8")
        tgt.write_text("x\n", encoding="utf-8")
        with pytest.raises(LineCountMismatch):
            load_parallel(src, tgt, "paired_plaintext", (ZH, EN))


class TestSplit:
    def test_flores_505_1502(self, flores_files):
        src, tgt = flores_files
        corpus = load_parallel(src, tgt, "paired_plaintext", (HEB, EN))
        train, test = split(corpus, SplitSpec(test_size=505, seed=22))
        assert len(test) == 505
        assert len(train) == 1502
        assert not set(test.ids()) & set(train.ids())
        assert set(test.ids()) | set(train.ids()) == set(range(2007))

    def test_seeded_shuffle_matches_oracle_and_golden(self, flores_files, goldens):
        src, tgt = flores_files
        corpus = load_parallel(src, tgt, "paired_plaintext", (HEB, EN))
        _, test = split(corpus, SplitSpec(test_size=505, seed=22))

        order = list(range(2007))
        random.Random(22).shuffle(order)
        expected = sorted(order[:505])
        assert test.ids() == expected

        digest = hashlib.sha256(",".join(map(str, test.ids())).encode()).hexdigest()
        frozen = (goldens / "split_2007_505_seed22.txt").read_text().strip()
        assert digest == frozen

    def test_determinism_across_runs(self, flores_files):
        src, tgt = flores_files
        corpus = load_parallel(src, tgt, "paired_plaintext", (HEB, EN))
        spec = SplitSpec(test_size=505, seed=22)
        _, test_a = split(corpus, spec)
        _, test_b = split(corpus, spec)
        assert test_a.ids() == test_b.ids()

    def test_split_too_large(self):
        corpus = build_corpus([(f"s{i}", f"t{i}") for i in range(10)])
        with pytest.raises(SplitTooLarge):
            split(corpus, SplitSpec(test_size=10))

    def test_head_strategy(self):
        corpus = build_corpus([(f"s{i}", f"t{i}") for i in range(5)])
        train, test = split(corpus, SplitSpec(test_size=2, strategy="head"))
        assert test.ids() == [0, 1]
        assert train.ids() == [2, 3, 4]

    def test_tail_strategy(self):
        corpus = build_corpus([(f"s{i}", f"t{i}") for i in range(5)])
        train, test = split(corpus, SplitSpec(test_size=2, strategy="tail"))
        assert test.ids() == [3, 4]
        assert train.ids() == [0, 1, 2]

    def test_invalid_test_size(self):
        with pytest.raises(InputError):
            SplitSpec(test_size=0)

    @given(n=st.integers(min_value=2, max_value=60), seed=st.integers(min_value=0, max_value=2**63 - 1))
    @settings(max_examples=50, deadline=None)
    def test_partition_property(self, n, seed):
        corpus = build_corpus([(f"s{i}", f"t{i}") for i in range(n)])
        test_size = max(1, n // 3)
        train, test = split(corpus, SplitSpec(test_size=test_size, seed=seed))
        assert len(test) == test_size
        assert len(train) == n - test_size
        assert sorted(train.ids() + test.ids()) == list(range(n))


class TestDedupe:
    def test_removes_repeat(self):
        corpus = build_corpus([("a", "b"), ("c", "d"), ("a", "b")])
        deduped, removed = dedupe(corpus)
        assert removed == 1
        assert [(p.src_text, p.tgt_text) for p in deduped.pairs] == [("a", "b"), ("c", "d")]

    def test_identity_on_unique(self, zh_en_corpus):
        deduped, removed = dedupe(zh_en_corpus)
        assert removed == 0
        assert deduped.checksum == zh_en_corpus.checksum

    def test_keyed_on_full_pair(self):
        corpus = build_corpus([("a", "b"), ("a", "c")])
        _, removed = dedupe(corpus)
        assert removed == 0

    def test_idempotent(self):
        corpus = build_corpus([("a", "b"), ("a", "b"), ("c", "d"), ("c", "d")])
        once, _ = dedupe(corpus)
        twice, removed = dedupe(once)
        assert removed == 0
        assert twice.checksum == once.checksum


class TestRoundTrip:
    @pytest.mark.parametrize("fmt", ["jsonl_bitext", "tsv_bitext", "paired_plaintext"])
    def test_write_then_load_checksum(self, tmp_path, zh_en_corpus, fmt):
        path = tmp_path / "out.txt"
        tgt_path = tmp_path / "out.tgt.txt" if fmt == "paired_plaintext" else None
        write_corpus(zh_en_corpus, path, fmt, tgt_path=tgt_path)
        loaded = load_parallel(path, tgt_path, fmt, zh_en_corpus.direction)
        assert loaded.checksum == zh_en_corpus.checksum

    def test_checksum_tracks_text_changes(self, zh_en_corpus):
        mutated = build_corpus(
            [(p.src_text, p.tgt_text + "!") for p in zh_en_corpus.pairs]
        )
        assert mutated.checksum != zh_en_corpus.checksum


def test_direction_parsing():
    assert parse_direction("Zh-En") == (ZH, EN)
    assert parse_direction("zh_en") == (ZH, EN)
    with pytest.raises(InputError):
        parse_direction("En-En")


def test_corpus_rejects_duplicate_ids():
    from paraalign.corpus import ParallelCorpus, ParallelPair

    pair = ParallelPair(0, "a", "b", ZH, EN)
    with pytest.raises(InputError):
        ParallelCorpus((pair, pair), (ZH, EN))


def test_jsonl_writer_emits_ids(tmp_path, zh_en_corpus):
    path = tmp_path / "c.jsonl"
    write_corpus(zh_en_corpus, path, "jsonl_bitext")
    rows = [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines()]
    assert [r["id"] for r in rows] == [0, 1, 2, 3]
