#!/usr/bin/env python3
"""Rebuild the result tables, deltas, and the data-size sweep from the
stored published scores in fixtures/stored_scores.json.

Everything here is desk-scale: no model calls, just the report machinery.

    python scripts/reproduce_reported_tables.py --output-dir out/reported
"""

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from paraalign.runner import (  # noqa: E402
    ExperimentConfig,
    render_report,
    render_sweep_csv,
    run_matrix,
    run_sweep,
)


def stored_systems(matrix: dict) -> list[dict]:
    labels: list[str] = []
    for per_system in matrix.values():
        for label in per_system:
            if label not in labels:
                labels.append(label)
    return [
        {
            "label": label,
            "stored_scores": {d: matrix[d][label] for d in matrix if label in matrix[d]},
        }
        for label in labels
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scores", default=str(REPO / "fixtures" / "stored_scores.json"))
    parser.add_argument("--output-dir", default="out/reported")
    args = parser.parse_args()

    stored = json.loads(Path(args.scores).read_text(encoding="utf-8"))
    out = Path(args.output_dir)

    # main matrix (resource-rich + low-resource directions)
    cfg = ExperimentConfig.from_dict(
        {
            "directions": list(stored["matrix"].keys()),
            "test_corpora": {d: "" for d in stored["matrix"]},
            "systems": stored_systems(stored["matrix"]),
            "baseline": stored["baseline"],
            "output_dir": str(out),
        }
    )
    report = run_matrix(cfg, corpora={d: None for d in stored["matrix"]})
    for fmt in ("markdown", "csv", "json"):
        render_report(report, fmt, out)

    # ablation/model-size variants table
    for direction, variants in stored.get("variants", {}).items():
        vcfg = ExperimentConfig.from_dict(
            {
                "directions": [direction],
                "test_corpora": {direction: ""},
                "systems": [
                    {"label": label, "stored_scores": {direction: scores}}
                    for label, scores in variants.items()
                ],
                "baseline": "fine-tuning",
            }
        )
        vreport = run_matrix(vcfg, corpora={direction: None})
        render_report(vreport, "markdown", out / "variants")

    # paraphrase-count sweep
    for direction, series in stored.get("sweep", {}).items():
        table = run_sweep([int(r["size"]) for r in series], direction=direction, stored_series=series)
        render_sweep_csv(table, out / "sweep.csv")

    print(f"wrote report.md / report.csv / report.json / variants/ / sweep.csv under {out}")
    for d in report.deltas:
        print(f"  {d['direction']:7s} {d['metric']:8s} {d['system']} vs {d['baseline']}: {d['delta']:+.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
