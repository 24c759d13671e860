#!/usr/bin/env python3
"""Run the whole two-phase workflow offline against scripted backends.

Phase 1: split a toy bitext, back-translate its target side into aligned
paraphrase pairs. Phase 2: emit the mixed instruction dataset, then drive
fused and staged translation over the held-out test set, score with
ROUGE-L plus the stub quality scorer, and render the report and case dump.

    python scripts/run_mock_pipeline.py --output-dir out/mock
"""

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from paraalign.corpus import ParallelCorpus, ParallelPair, SplitSpec, split  # noqa: E402
from paraalign.dataset import MixSpec, write_dataset, emit  # noqa: E402
from paraalign.gateway import Gateway, GatewayConfig, scripted_backend  # noqa: E402
from paraalign.langs import EN, ZH  # noqa: E402
from paraalign.prompts import template_digests  # noqa: E402
from paraalign.runner import ExperimentConfig, render_cases, render_report, run_matrix  # noqa: E402
from paraalign.synthesis import synthesize, write_paraphrases  # noqa: E402

TOY_BITEXT = [
    ("他是一般人", "He is not famous enough."),
    ("以免再次发生这样的事情", "So that such a thing won't happen again."),
    ("你好世界", "Hello world."),
    ("我喜欢喝茶", "I like drinking tea."),
    ("天气很好", "The weather is nice."),
    ("他们正在开会", "They are in a meeting."),
    ("这本书很有趣", "This book is interesting."),
    ("我们明天出发", "We leave tomorrow."),
    ("请关上门", "Please close the door."),
    ("时间不早了", "It is getting late."),
]


def toy_corpus() -> ParallelCorpus:
    pairs = tuple(
        ParallelPair(i, src, tgt, ZH, EN, line_no=i + 1) for i, (src, tgt) in enumerate(TOY_BITEXT)
    )
    return ParallelCorpus(pairs, (ZH, EN))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-dir", default="out/mock")
    parser.add_argument("--seed", type=int, default=22)
    args = parser.parse_args()
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = toy_corpus()
    train, test = split(corpus, SplitSpec(test_size=3, seed=args.seed))
    print(f"[1/4] split: {len(train)} train / {len(test)} test pairs")

    # phase 1: back-translate the English side into aligned Chinese rewrites
    bt_table = {p.tgt_text: f"{p.src_text}(对齐改写)" for p in train.pairs}
    bt_gateway = Gateway(
        GatewayConfig(cache_dir=str(out / "cache")),
        backend=scripted_backend("lookup", table=bt_table),
    )
    pool, synth_report = synthesize(train, bt_gateway, shots=[("Hello world.", "你好世界")])
    write_paraphrases(pool, out / "paraphrases.jsonl")
    print(f"[2/4] synthesized {synth_report.generated}/{synth_report.requested} paraphrase pairs")

    # phase 2a: trainer-ready dataset
    records = emit(train, pool, MixSpec(n_paraphrase=len(pool), seed=args.seed))
    write_dataset(
        records,
        out / "dataset.jsonl",
        mix=MixSpec(len(pool), args.seed),
        prompt_digests=template_digests(),
        corpus_checksums={train.label: train.checksum},
    )
    print(f"[3/4] emitted {len(records)} instruction records")

    # phase 2b: fused vs staged inference over the test set
    base_table = {p.src_text: p.tgt_text for p in test.pairs}
    pt_table = {}
    for p in test.pairs:
        pt_table[p.src_text] = f"{p.src_text}(对齐改写)"
        pt_table[f"{p.src_text}(对齐改写)"] = p.tgt_text
    backends = {
        "base-fused": scripted_backend("lookup", table=base_table),
        "pt-staged": scripted_backend("lookup", table=pt_table),
    }
    cfg = ExperimentConfig.from_dict(
        {
            "directions": ["Zh-En"],
            "test_corpora": {"Zh-En": ""},
            "systems": [
                {"label": "base-fused", "mode": "fused", "gateway": {}},
                {"label": "pt-staged", "mode": "staged", "gateway": {}},
            ],
            "baseline": "base-fused",
            "scorer": "mock",
            "output_dir": str(out),
        }
    )
    report = run_matrix(cfg, corpora={"Zh-En": test}, backends=backends)
    for fmt in ("markdown", "csv", "json"):
        render_report(report, fmt, out)
    render_cases(
        test,
        report.results[("Zh-En", "base-fused")],
        report.results[("Zh-En", "pt-staged")],
        "base-fused",
        "pt-staged",
        out / "cases.md",
    )
    print(f"[4/4] report + cases under {out}")
    for cell in report.cells:
        scores = ", ".join(f"{m}={s.value:.2f}" for m, s in sorted(cell.scores.items()))
        print(f"  {cell.direction} {cell.system}: {scores}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
