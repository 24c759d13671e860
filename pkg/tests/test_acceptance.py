"""Acceptance suite: one test per release criterion, each printing a
PASS line on success (run with `pytest -v tests/test_acceptance.py -s`
to see them)."""

import json
import random
import threading
import time

import pytest
from conftest import build_corpus
from test_metrics import lcs_brute_force

from paraalign.corpus import SplitSpec, load_parallel, split
from paraalign.dataset import MixSpec, emit, sweep_subsets, write_dataset
from paraalign.gateway import Gateway, GatewayConfig, GatewayRequest, scripted_backend
from paraalign.langs import EN, HEB, ZH
from paraalign.metrics import CorpusScore, delta, lcs_length, rouge_l_text
from paraalign.prompts import ShotPair, render
from paraalign.runner import ExperimentConfig, run_matrix, run_sweep
from test_cli import FIXTURES


def _ok(name):
    print(f"ACCEPTANCE PASS: {name}")


def test_c1_rouge_oracle_equivalence():
    """DP LCS matches the exhaustive brute-force oracle on 1,000+ random
    cases (|a|,|b| <= 10, 4-symbol alphabet) in under 10 seconds."""
    rng = random.Random(1234)
    start = time.monotonic()
    mismatches = 0
    cases = 0
    for _ in range(1200):
        a = [rng.choice("ABCD") for _ in range(rng.randint(0, 10))]
        b = [rng.choice("ABCD") for _ in range(rng.randint(0, 10))]
        if lcs_length(a, b) != lcs_brute_force(a, b):
            mismatches += 1
        cases += 1
    elapsed = time.monotonic() - start
    assert cases >= 1000
    assert mismatches == 0
    assert elapsed < 10.0
    _ok(f"ROUGE-L oracle equivalence ({cases} cases, {elapsed:.2f}s, 0 mismatches)")


def test_c2_metric_spot_values():
    """rouge_l('the cat sat', 'the cat sat on the mat') = P 1.0 / R 0.5 /
    F1 0.6667; identity and disjoint cases exact."""
    score = rouge_l_text("the cat sat", "the cat sat on the mat", EN)
    assert score.precision == 1.0
    assert score.recall == 0.5
    assert abs(score.f1 - 0.6667) <= 1e-4
    identical = rouge_l_text("hello world", "hello world", EN)
    assert (identical.precision, identical.recall, identical.f1) == (1.0, 1.0, 1.0)
    disjoint = rouge_l_text("aaa bbb", "ccc ddd", EN)
    assert (disjoint.precision, disjoint.recall, disjoint.f1) == (0.0, 0.0, 0.0)
    _ok("metric spot values")


def test_c3_delta_reproduction():
    """Stored-score deltas: Heb->En +2.71 COMET / +7.11 ROUGE-L exactly;
    every published delta carries the correct sign, including the negative
    En->Swh COMET delta -6.04."""
    stored = json.loads((FIXTURES / "stored_scores.json").read_text(encoding="utf-8"))

    def d(direction, metric):
        rows = stored["matrix"][direction]
        a = CorpusScore(metric, rows["paraalign"][metric], 0)
        b = CorpusScore(metric, rows["llama3-8b"][metric], 0)
        return delta(a, b, "paraalign", "llama3-8b").delta

    assert d("Heb-En", "comet") == 2.71
    assert d("Heb-En", "rouge_l") == 7.11
    assert d("En-Swh", "comet") == -6.04

    expected_signs = {
        ("Zh-En", "comet"): +1, ("Zh-En", "rouge_l"): +1,
        ("En-Zh", "comet"): +1, ("En-Zh", "rouge_l"): +1,
        ("De-En", "comet"): +1, ("De-En", "rouge_l"): +1,
        ("En-De", "comet"): +1, ("En-De", "rouge_l"): +1,
        ("Heb-En", "comet"): +1, ("Heb-En", "rouge_l"): +1,
        ("En-Heb", "comet"): +1, ("En-Heb", "rouge_l"): -1,
        ("Swh-En", "comet"): +1, ("Swh-En", "rouge_l"): +1,
        ("En-Swh", "comet"): -1, ("En-Swh", "rouge_l"): -1,
    }
    for (direction, metric), sign in expected_signs.items():
        value = d(direction, metric)
        assert value != 0
        assert (value > 0) == (sign > 0), (direction, metric, value)

    variants = stored["variants"]["Zh-En"]
    for label, signs in {
        "paraalign": (+1, +1),
        "llama3-70b-fewshot": (+1, +1),
    }.items():
        for metric, sign in zip(("comet", "rouge_l"), signs):
            a = CorpusScore(metric, variants[label][metric], 0)
            b = CorpusScore(metric, variants["fine-tuning"][metric], 0)
            value = delta(a, b).delta
            assert (value > 0) == (sign > 0), (label, metric, value)
    _ok("delta reproduction (+2.71 / +7.11 exact; all signs correct incl. -6.04)")


def test_c4_figure_sweep_reproduction():
    """Sweep table from stored values equals the six plotted coordinates to
    4 decimals; score(500) < score(0) < score(1000) for both metrics."""
    stored = json.loads((FIXTURES / "stored_scores.json").read_text(encoding="utf-8"))
    series = stored["sweep"]["Zh-En"]
    table = run_sweep([int(r["size"]) for r in series], stored_series=series)
    expected = [
        (0, 47.2892, 79.1109),
        (500, 44.7229, 75.7251),
        (1000, 51.2182, 80.0284),
        (2500, 51.0748, 79.8441),
        (5000, 51.1289, 80.1084),
        (10000, 51.5051, 80.0022),
    ]
    for row, (size, rouge, comet) in zip(table.rows, expected):
        assert row.size == size
        assert row.rouge_l == pytest.approx(rouge, abs=1e-4)
        assert row.comet == pytest.approx(comet, abs=1e-4)
    by_size = {r.size: r for r in table.rows}
    assert by_size[500].rouge_l < by_size[0].rouge_l < by_size[1000].rouge_l
    assert by_size[500].comet < by_size[0].comet < by_size[1000].comet
    _ok("data-size sweep reproduction (6 coordinates, dip-then-recovery ordering)")


def test_c5_prompt_golden_files(goldens):
    """Rendered P1/P2/P3 for Chinese->English match the checked-in goldens
    byte for byte; the instruction strings appear verbatim."""
    shots = [
        ShotPair("他是不夠有名的人。", "He is not famous enough."),
        ShotPair("以免再次发生这样的事情", "So that it doesn't happen again."),
    ]
    rendered = {
        "prompt_p1_zh_en.txt": render("P1", "Chinese", "English", shots, "他是一般人").text,
        "prompt_p2_zh_en.txt": render("P2", "Chinese", "English", [], "以免再次发生这样的事情").text,
        "prompt_p3_zh_en.txt": render("P3", "Chinese", "English", [], "他是一般人").text,
    }
    for name, text in rendered.items():
        golden = (goldens / name).read_text(encoding="utf-8")
        assert text + "\n" == golden, name

    assert "Please translate the following sentence from Chinese to English." in rendered["prompt_p1_zh_en.txt"]
    assert "Here is some examples:" in rendered["prompt_p1_zh_en.txt"]
    assert "Please translate the following sentence from Chinese to English." in rendered["prompt_p2_zh_en.txt"]
    assert (
        "Convert the following Chinese sentence into another Chinese sentence that "
        "maintains the same meaning but is more likely to translate into natural, "
        "native-sounding English." in rendered["prompt_p3_zh_en.txt"]
    )
    _ok("prompt golden files byte-exact")


def test_c6_end_to_end_mock_run():
    """run-matrix over 8 sentences in 2 directions with lookup-scripted
    backends: < 5 s, 4-row report, staged intermediates recorded, and the
    per-mode gateway call law holds."""
    zh_en = build_corpus([(f"中文句{i}", f"english sentence {i}") for i in range(4)], direction=(ZH, EN))
    en_zh = build_corpus([(f"source sentence {i}", f"中文译文{i}") for i in range(4)], direction=(EN, ZH))
    corpora = {"Zh-En": zh_en, "En-Zh": en_zh}

    base_table = {}
    pt_table = {}
    for corpus in corpora.values():
        for p in corpus.pairs:
            base_table[p.src_text] = f"base hyp {p.id}"
            pt_table[p.src_text] = f"rephrased {p.src_text}"
            pt_table[f"rephrased {p.src_text}"] = f"pt hyp {p.id}"
    backends = {
        "base": scripted_backend("lookup", table=base_table),
        "pt": scripted_backend("lookup", table=pt_table),
    }
    cfg = ExperimentConfig.from_dict(
        {
            "directions": ["Zh-En", "En-Zh"],
            "test_corpora": {"Zh-En": "", "En-Zh": ""},
            "systems": [
                {"label": "base", "mode": "fused", "gateway": {}},
                {"label": "pt", "mode": "staged", "gateway": {}},
            ],
            "baseline": "base",
            "scorer": "mock",
        }
    )
    start = time.monotonic()
    report = run_matrix(cfg, corpora=corpora, backends=backends)
    elapsed = time.monotonic() - start

    assert elapsed < 5.0
    assert len(report.cells) == 4
    assert all(c.error is None for c in report.cells)
    assert backends["base"].total_calls == 8  # fused: |test| per direction
    assert backends["pt"].total_calls == 16  # staged: 2 * |test|
    for direction in ("Zh-En", "En-Zh"):
        for result in report.results[(direction, "pt")]:
            assert result.intermediate_paraphrase
    _ok(f"end-to-end mock run ({elapsed:.2f}s, 4 rows, call law holds)")


def test_c7_dataset_invariants(tmp_path):
    """emit on a 100-pair bitext with n_paraphrase in {0, 10, 25} yields
    {100, 110, 125} records; sweep subsets nest; re-emission is
    byte-identical; the manifest pins lora_rank=128 and temperature 0.001."""
    from paraalign.synthesis import ParaphrasePair

    bitext = build_corpus([(f"句子{i}", f"sentence {i}") for i in range(100)], direction=(ZH, EN))
    pool = [ParaphrasePair(i, f"原{i}", f"改{i}", ZH) for i in range(25)]

    for n, total in ((0, 100), (10, 110), (25, 125)):
        assert len(emit(bitext, pool, MixSpec(n_paraphrase=n, seed=22))) == total

    subsets = sweep_subsets(pool, [0, 10, 25], seed=22)
    assert {p.pair_id for p in subsets[0]} <= {p.pair_id for p in subsets[10]} <= {p.pair_id for p in subsets[25]}

    path = tmp_path / "dataset.jsonl"

    def write_once():
        records = emit(bitext, pool, MixSpec(n_paraphrase=10, seed=22))
        _, manifest = write_dataset(records, path, mix=MixSpec(10, 22))
        return path.read_bytes(), manifest

    first_bytes, manifest = write_once()
    second_bytes, _ = write_once()
    assert first_bytes == second_bytes
    assert manifest["trainer"]["lora_rank"] == 128
    assert manifest["temperature"] == 0.001
    _ok("dataset invariants (counts, nesting, byte-identical re-emission, pinned manifest)")


def test_c8_split_invariants(flores_files):
    """A FLORES-shaped 2,007-line fixture splits into exactly 505/1,502
    disjoint sets, deterministically across two runs."""
    src, tgt = flores_files
    corpus = load_parallel(src, tgt, "paired_plaintext", (HEB, EN))
    assert len(corpus) == 2007
    spec = SplitSpec(test_size=505, seed=22)
    train_a, test_a = split(corpus, spec)
    train_b, test_b = split(corpus, spec)
    assert len(test_a) == 505
    assert len(train_a) == 1502
    assert not set(test_a.ids()) & set(train_a.ids())
    assert test_a.ids() == test_b.ids()
    assert train_a.ids() == train_b.ids()
    _ok("split invariants (505/1502 disjoint, deterministic)")


def test_c9_cache_soundness():
    """50 concurrent identical requests produce exactly one backend call."""
    backend = scripted_backend("echo")
    gateway = Gateway(GatewayConfig(concurrency_limit=8, backoff_base=0.001), backend=backend)
    rendered = render("P2", "Chinese", "English", [], "同一个句子")
    req = GatewayRequest(prompt=rendered.text, template_id="P2", tgt_display="English")

    errors = []

    def worker():
        try:
            gateway.complete(req)
        except Exception as exc:  # pragma: no cover - failure path
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(50)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert backend.total_calls == 1
    _ok("cache soundness (50 concurrent callers, 1 backend call)")
