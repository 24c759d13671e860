import json

import pytest
from conftest import build_corpus

from paraalign.dataset import (
    MixSpec,
    PoolTooSmall,
    SizesNotAscending,
    TrainerStub,
    emit,
    sweep_subsets,
    write_dataset,
)
from paraalign.errors import InputError
from paraalign.langs import EN, ZH
from paraalign.prompts import instruction_line
from paraalign.synthesis import ParaphrasePair


def make_pool(n, lang=ZH):
    return [ParaphrasePair(i, f"原句{i}", f"改写{i}", lang) for i in range(n)]


@pytest.fixture
def bitext100():
    return build_corpus([(f"句子{i}", f"sentence {i}") for i in range(100)], direction=(ZH, EN))


class TestEmit:
    @pytest.mark.parametrize("n_para,total", [(0, 100), (10, 110), (25, 125)])
    def test_count_identity(self, bitext100, n_para, total):
        records = emit(bitext100, make_pool(25), MixSpec(n_paraphrase=n_para))
        assert len(records) == total

    def test_pool_too_small(self):
        bitext = build_corpus([("a", "b")])
        with pytest.raises(PoolTooSmall):
            emit(bitext, make_pool(10), MixSpec(n_paraphrase=11))

    def test_full_scale_count(self):
        # the production-size mix: 21,966 bitext pairs + 1,000 paraphrases
        bitext = build_corpus([(f"源{i}", f"tgt {i}") for i in range(21966)], direction=(ZH, EN))
        records = emit(bitext, make_pool(1000), MixSpec(n_paraphrase=1000, shuffle_final=False))
        assert len(records) == 22966

    def test_zero_paraphrase_is_plain_baseline(self, bitext100):
        records = emit(bitext100, make_pool(5), MixSpec(n_paraphrase=0, shuffle_final=False))
        assert all(r.task == "translate" for r in records)

    def test_instruction_lines_match_templates(self, bitext100):
        records = emit(bitext100, make_pool(25), MixSpec(n_paraphrase=25, shuffle_final=False))
        p2 = instruction_line("P2", "Chinese", "English")
        p3 = instruction_line("P3", "Chinese", "English")
        for r in records:
            if r.task == "translate":
                assert r.instruction == p2
            else:
                assert r.instruction == p3

    def test_translate_records_carry_bitext(self, bitext100):
        records = emit(bitext100, [], MixSpec(n_paraphrase=0, shuffle_final=False))
        assert records[0].input == "句子0"
        assert records[0].output == "sentence 0"
        assert records[0].meta == "Zh-En"

    def test_paraphrase_records_source_language_only(self, bitext100):
        records = emit(bitext100, make_pool(10), MixSpec(n_paraphrase=10, shuffle_final=False))
        para = [r for r in records if r.task == "paraphrase"]
        assert len(para) == 10
        assert all(r.meta == "Zh" for r in para)
        assert all(r.input.startswith("原句") and r.output.startswith("改写") for r in para)

    def test_unshuffled_order_translate_first(self, bitext100):
        records = emit(bitext100, make_pool(10), MixSpec(n_paraphrase=10, shuffle_final=False))
        tasks = [r.task for r in records]
        assert tasks == ["translate"] * 100 + ["paraphrase"] * 10

    def test_shuffle_deterministic(self, bitext100):
        a = emit(bitext100, make_pool(25), MixSpec(n_paraphrase=25, seed=7))
        b = emit(bitext100, make_pool(25), MixSpec(n_paraphrase=25, seed=7))
        assert a == b
        c = emit(bitext100, make_pool(25), MixSpec(n_paraphrase=25, seed=8))
        assert a != c

    def test_selection_matches_sweep_subset(self, bitext100):
        pool = make_pool(25)
        records = emit(bitext100, pool, MixSpec(n_paraphrase=10, seed=3, shuffle_final=False))
        subset = sweep_subsets(pool, [10], seed=3)[10]
        emitted = [(r.input, r.output) for r in records if r.task == "paraphrase"]
        assert emitted == [(p.original, p.paraphrase) for p in subset]


class TestSweepSubsets:
    def test_nested_with_exact_cardinalities(self):
        pool = make_pool(10000)
        sizes = [0, 500, 1000, 2500, 5000, 10000]
        subsets = sweep_subsets(pool, sizes, seed=22)
        assert [len(subsets[k]) for k in sizes] == sizes
        previous = set()
        for k in sizes:
            current = {p.pair_id for p in subsets[k]}
            assert previous <= current
            previous = current

    def test_single_empty(self):
        assert sweep_subsets(make_pool(5), [0], seed=1) == {0: []}

    def test_same_seed_identical(self):
        pool = make_pool(50)
        assert sweep_subsets(pool, [10, 20], 9) == sweep_subsets(pool, [10, 20], 9)

    def test_not_ascending(self):
        with pytest.raises(SizesNotAscending):
            sweep_subsets(make_pool(2000), [1000, 500], seed=1)

    def test_pool_too_small(self):
        with pytest.raises(PoolTooSmall):
            sweep_subsets(make_pool(10), [5, 11], seed=1)


class TestWriteDataset:
    def test_rows_and_manifest_counts(self, tmp_path):
        bitext = build_corpus([("一", "one"), ("二", "two")])
        records = emit(bitext, make_pool(1), MixSpec(n_paraphrase=1, shuffle_final=False))
        path, manifest = write_dataset(records, tmp_path / "dataset.jsonl")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3
        assert set(json.loads(lines[0])) == {"instruction", "input", "output"}
        assert manifest["counts"] == {"translate": 2, "paraphrase": 1}

    def test_manifest_pins_trainer_and_temperature(self, tmp_path):
        bitext = build_corpus([("一", "one")])
        records = emit(bitext, [], MixSpec(n_paraphrase=0))
        _, manifest = write_dataset(records, tmp_path / "d.jsonl")
        assert manifest["trainer"]["lora_rank"] == 128
        assert manifest["temperature"] == 0.001
        on_disk = json.loads((tmp_path / "d.manifest.json").read_text(encoding="utf-8"))
        assert on_disk == manifest

    def test_reemission_byte_identical(self, tmp_path, bitext100):
        path = tmp_path / "dataset.jsonl"

        def emit_and_write():
            records = emit(bitext100, make_pool(25), MixSpec(n_paraphrase=10, seed=5))
            write_dataset(records, path, mix=MixSpec(10, 5))
            return path.read_bytes(), (tmp_path / "dataset.manifest.json").read_bytes()

        first = emit_and_write()
        second = emit_and_write()
        assert first == second

    def test_empty_records_rejected(self, tmp_path):
        with pytest.raises(InputError):
            write_dataset([], tmp_path / "d.jsonl")

    def test_stub_overrides(self, tmp_path):
        bitext = build_corpus([("一", "one")])
        records = emit(bitext, [], MixSpec(n_paraphrase=0))
        stub = TrainerStub(base_model="llama-3-70b", dataset_path="x")
        _, manifest = write_dataset(records, tmp_path / "d.jsonl", stub=stub)
        assert manifest["trainer"]["base_model"] == "llama-3-70b"
        assert manifest["trainer"]["lora_rank"] == 128
