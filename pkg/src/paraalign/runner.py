"""Config-driven orchestration of the experiment matrix and report rendering.

A system is either live (a gateway endpoint driven in one of the three
translation modes) or stored (published corpus scores fed straight into the
report path, so the table and delta machinery is verifiable without any
model). Reports are deterministic: same inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics
from .corpus import ParallelCorpus, load_parallel
from .dataset import SizesNotAscending, sweep_subsets
from .driver import TranslationResult, translate_corpus
from .errors import InputError
from .gateway import Gateway, GatewayConfig, ScriptedBackend
from .langs import Direction, direction_label, parse_direction
from .metrics import CorpusScore
from .prompts import ShotPair, template_digests
from .synthesis import ParaphrasePair

logger = logging.getLogger(__name__)

METRICS = ("comet", "rouge_l")


class NoSystems(InputError):
    pass


@dataclass(frozen=True)
class SystemSpec:
    """One row of the experiment matrix.

    Live systems carry a mode + gateway config (and shots for fewshot);
    stored systems carry per-direction published scores instead.
    """

    label: str
    mode: str | None = None
    gateway: GatewayConfig | None = None
    shots: dict[str, tuple[ShotPair, ...]] = field(default_factory=dict)
    stored_scores: dict[str, dict[str, float]] = field(default_factory=dict)
    scripted_backend: dict | None = None  # {"mode": ..., "table": ...} for offline runs

    @property
    def is_stored(self) -> bool:
        return bool(self.stored_scores)

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        shots = {
            label: tuple(ShotPair(*pair) for pair in pairs)
            for label, pairs in (d.get("shots") or {}).items()
        }
        gateway = GatewayConfig(**d["gateway"]) if d.get("gateway") else None
        return cls(
            label=d["label"],
            mode=d.get("mode"),
            gateway=gateway,
            shots=shots,
            stored_scores=d.get("stored_scores") or {},
            scripted_backend=d.get("scripted_backend"),
        )


@dataclass
class ExperimentConfig:
    directions: list[Direction]
    test_corpora: dict[str, str]  # direction label -> corpus path (jsonl_bitext)
    systems: list[SystemSpec]
    baseline: str
    output_dir: str = "out"
    scorer: str | None = None  # scorer service URL, or "mock" for the in-process stub
    sweep_sizes: list[int] = field(default_factory=list)
    seed: int = 22

    def __post_init__(self):
        labels = [s.label for s in self.systems]
        if len(labels) != len(set(labels)):
            raise InputError("system labels must be unique")
        for d in self.directions:
            if direction_label(d) not in self.test_corpora:
                raise InputError(f"no test corpus path for direction {direction_label(d)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(
            directions=[parse_direction(x) for x in d["directions"]],
            test_corpora=dict(d.get("test_corpora", {})),
            systems=[SystemSpec.from_dict(s) for s in d["systems"]],
            baseline=d["baseline"],
            output_dir=d.get("output_dir", "out"),
            scorer=d.get("scorer"),
            sweep_sizes=list(d.get("sweep_sizes", [])),
            seed=int(d.get("seed", 22)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class ReportCell:
    direction: str
    system: str
    scores: dict[str, CorpusScore] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        scores = {}
        for m, s in sorted(self.scores.items()):
            entry = {"metric": s.metric, "value": s.value, "n": s.n}
            if s.per_sentence is not None:
                entry["per_sentence"] = list(s.per_sentence)
            scores[m] = entry
        return {
            "direction": self.direction,
            "system": self.system,
            "scores": scores,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportCell":
        scores = {}
        for m, s in d["scores"].items():
            per = s.get("per_sentence")
            scores[m] = CorpusScore(
                metric=s["metric"],
                value=s["value"],
                n=s["n"],
                per_sentence=None if per is None else tuple(per),
            )
        return cls(
            direction=d["direction"],
            system=d["system"],
            scores=scores,
            error=d.get("error"),
        )


@dataclass
class EvalReport:
    cells: list[ReportCell]
    deltas: list[dict]  # {direction, metric, system, baseline, delta}
    metadata: dict
    results: dict = field(default_factory=dict, compare=False, repr=False)  # (direction, system) -> results

    def cell(self, direction: str, system: str) -> ReportCell | None:
        for c in self.cells:
            if c.direction == direction and c.system == system:
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "deltas": self.deltas,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            cells=[ReportCell.from_dict(c) for c in d["cells"]],
            deltas=list(d["deltas"]),
            metadata=dict(d["metadata"]),
        )


def stub_comet_scores(items: list[dict]) -> list[float]:
    """Deterministic stand-in for the neural scorer: 0.5 + 0.5 * unigram
    LCS F1 of mt against ref. Useful only for plumbing tests."""
    out = []
    for item in items:
        f1 = metrics.rouge_l(item["mt"].split(), item["ref"].split()).f1
        out.append(0.5 + 0.5 * f1)
    return out


def _comet_score(items: list[dict], scorer: str | None) -> CorpusScore | None:
    if scorer is None:
        return None
    if scorer == "mock":
        scores = stub_comet_scores(items)
        return CorpusScore("comet", 100.0 * sum(scores) / len(scores), len(items), tuple(scores))
    return metrics.comet_batch(items, scorer)


def _score_results(
    results: list[TranslationResult],
    test: ParallelCorpus,
    scorer: str | None,
) -> dict[str, CorpusScore]:
    refs = test.refs()
    scores = {"rouge_l": metrics.corpus_rouge(results, refs, test.direction[1])}
    items = [{"src": r.src, "mt": r.hypothesis, "ref": r.ref} for r in results]
    comet = _comet_score(items, scorer)
    if comet is not None:
        scores["comet"] = comet
    return scores


def _backend_for(system: SystemSpec):
    if system.scripted_backend is None:
        return None
    spec = dict(system.scripted_backend)
    return ScriptedBackend(
        spec["mode"],
        table=spec.get("table"),
        text=spec.get("text", ""),
        n=int(spec.get("n", 0)),
    )


def load_test_corpora(cfg: ExperimentConfig) -> dict[str, ParallelCorpus]:
    corpora = {}
    for d in cfg.directions:
        label = direction_label(d)
        corpora[label] = load_parallel(cfg.test_corpora[label], None, "jsonl_bitext", d)
    return corpora


def run_matrix(
    cfg: ExperimentConfig,
    corpora: dict[str, ParallelCorpus] | None = None,
    backends: dict[str, object] | None = None,
) -> EvalReport:
    """Evaluate every (direction, system) cell and assemble the report.

    ``backends`` optionally maps system label to a backend instance,
    overriding config-declared scripted backends (used by tests and the
    --mock-backend CLI flag). Per-cell failures become explicit holes.
    """
    if not cfg.systems:
        raise NoSystems("experiment config lists no systems")
    corpora = corpora if corpora is not None else load_test_corpora(cfg)

    cells: list[ReportCell] = []
    results_by_cell: dict[tuple[str, str], list[TranslationResult]] = {}
    for d in cfg.directions:
        label = direction_label(d)
        test = corpora[label]
        for system in cfg.systems:
            cell = ReportCell(direction=label, system=system.label)
            try:
                if system.is_stored:
                    stored = system.stored_scores.get(label)
                    if stored is None:
                        raise InputError(f"no stored scores for {label}")
                    n = len(test) if test is not None else 0
                    cell.scores = {
                        m: CorpusScore(metric=m, value=float(v), n=n) for m, v in stored.items()
                    }
                else:
                    backend = None
                    if backends and system.label in backends:
                        backend = backends[system.label]
                    else:
                        backend = _backend_for(system)
                    gateway = Gateway(system.gateway or GatewayConfig(), backend=backend)
                    results, ledger = translate_corpus(
                        test, system.mode, gateway, shots=system.shots.get(label)
                    )
                    if ledger.failures:
                        cell.error = f"{len(ledger.failures)} pair(s) failed"
                    if not results:
                        raise InputError("no pairs translated")
                    results_by_cell[(label, system.label)] = results
                    cell.scores = _score_results(results, test, cfg.scorer)
            except Exception as exc:
                logger.warning("cell (%s, %s) failed: %s", label, system.label, exc)
                cell.error = str(exc)
                cell.scores = {}
            cells.append(cell)

    deltas = _compute_deltas(cells, cfg.baseline)
    metadata = {
        "baseline": cfg.baseline,
        "seed": cfg.seed,
        "scorer": cfg.scorer,
        "systems": {
            s.label: {"mode": s.mode, "stored": s.is_stored, "model": s.gateway.model_name if s.gateway else None}
            for s in cfg.systems
        },
        "corpus_checksums": {label: c.checksum for label, c in corpora.items() if c is not None},
        "prompt_template_digests": template_digests(),
        "conventions": metrics.CONVENTIONS,
    }
    report = EvalReport(cells=cells, deltas=deltas, metadata=metadata)
    report.results = results_by_cell
    return report


def _compute_deltas(cells: list[ReportCell], baseline: str) -> list[dict]:
    by_key = {(c.direction, c.system): c for c in cells}
    directions = []
    systems = []
    for c in cells:
        if c.direction not in directions:
            directions.append(c.direction)
        if c.system not in systems:
            systems.append(c.system)
    deltas = []
    for direction in directions:
        base = by_key.get((direction, baseline))
        if base is None:
            continue
        for system in systems:
            if system == baseline:
                continue
            cell = by_key.get((direction, system))
            if cell is None:
                continue
            for metric in METRICS:
                if metric not in cell.scores or metric not in base.scores:
                    continue
                try:
                    d = metrics.delta(cell.scores[metric], base.scores[metric], system, baseline)
                except (metrics.MetricMismatch, metrics.SizeMismatch) as exc:
                    logger.warning("delta hole for (%s, %s, %s): %s", direction, system, metric, exc)
                    continue
                deltas.append(
                    {
                        "direction": direction,
                        "metric": metric,
                        "system": system,
                        "baseline": baseline,
                        "delta": d.delta,
                    }
                )
    return deltas


@dataclass
class SweepRow:
    size: int
    rouge_l: float | None = None
    comet: float | None = None
    manifest: str | None = None  # digest of the subset manifest, when emitted


@dataclass
class SweepTable:
    direction: str
    rows: list[SweepRow]


def run_sweep(
    sizes: list[int],
    direction: str = "Zh-En",
    para_pool: list[ParaphrasePair] | None = None,
    seed: int = 22,
    stored_series: list[dict] | None = None,
    output_dir: str | Path | None = None,
) -> SweepTable:
    """Build the data-size sweep table.

    With a paraphrase pool, nested per-size subset manifests are emitted
    under ``output_dir``. With a stored series (rows ``{size, rouge_l,
    comet}`` from externally fine-tuned runs or published values), scores
    are attached to the matching sizes.
    """
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise SizesNotAscending(f"sizes must be strictly ascending, got {sizes}")

    rows = [SweepRow(size=k) for k in sizes]
    if para_pool is not None:
        subsets = sweep_subsets(para_pool, sizes, seed)
        for row in rows:
            ids = [p.pair_id for p in subsets[row.size]]
            manifest = {"size": row.size, "seed": seed, "pair_ids": ids}
            row.manifest = _manifest_digest(manifest)
            if output_dir is not None:
                out = Path(output_dir) / "sweep"
                out.mkdir(parents=True, exist_ok=True)
                (out / f"subset_{row.size}.manifest.json").write_text(
                    json.dumps(manifest, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
                )
    if stored_series is not None:
        by_size = {int(r["size"]): r for r in stored_series}
        for row in rows:
            if row.size in by_size:
                row.rouge_l = float(by_size[row.size]["rouge_l"])
                row.comet = float(by_size[row.size]["comet"])
    return SweepTable(direction=direction, rows=rows)


def _manifest_digest(manifest: dict) -> str:
    return hashlib.sha256(json.dumps(manifest, sort_keys=True).encode("utf-8")).hexdigest()


def render_sweep_csv(table: SweepTable, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["size,rouge_l,comet"]
    for row in table.rows:
        r = "" if row.rouge_l is None else f"{row.rouge_l:.4f}"
        c = "" if row.comet is None else f"{row.comet:.4f}"
        lines.append(f"{row.size},{r},{c}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def render_report(report: EvalReport, format: str, output_dir: str | Path) -> list[Path]:
    """Write the report as markdown, csv, or json under ``output_dir``."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if format == "markdown":
        return [_render_markdown(report, output_dir / "report.md")]
    if format == "csv":
        return [_render_csv(report, output_dir / "report.csv")]
    if format == "json":
        path = output_dir / "report.json"
        path.write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return [path]
    raise InputError(f"unknown report format {format!r}")


def _directions_and_systems(report: EvalReport) -> tuple[list[str], list[str]]:
    directions: list[str] = []
    systems: list[str] = []
    for c in report.cells:
        if c.direction not in directions:
            directions.append(c.direction)
        if c.system not in systems:
            systems.append(c.system)
    return directions, systems


def _render_markdown(report: EvalReport, path: Path) -> Path:
    directions, systems = _directions_and_systems(report)
    lines = ["# Evaluation report", ""]

    header = ["System"]
    for d in directions:
        header += [f"{d} COMET", f"{d} ROUGE-L"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for system in systems:
        row = [system]
        for d in directions:
            cell = report.cell(d, system)
            for metric in METRICS:
                score = cell.scores.get(metric) if cell else None
                row.append(_fmt(score.value if score else None))
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    holes = [c for c in report.cells if c.error]
    if holes:
        lines.append("## Holes")
        for c in holes:
            lines.append(f"- {c.direction} / {c.system}: {c.error}")
        lines.append("")

    if report.deltas:
        lines.append(f"## Deltas vs {report.metadata.get('baseline', 'baseline')}")
        lines.append("| Direction | Metric | System | Delta |")
        lines.append("|---|---|---|---|")
        for d in report.deltas:
            lines.append(f"| {d['direction']} | {d['metric']} | {d['system']} | {d['delta']:+.2f} |")
        lines.append("")

    lines.append("## Conventions")
    for key, value in sorted(report.metadata.get("conventions", {}).items()):
        lines.append(f"- {key}: {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _render_csv(report: EvalReport, path: Path) -> Path:
    delta_by = {(d["direction"], d["system"], d["metric"]): d["delta"] for d in report.deltas}
    lines = ["direction,system,metric,value,n,delta_vs_baseline"]
    for c in report.cells:
        for metric in METRICS:
            score = c.scores.get(metric)
            if score is None:
                continue
            d = delta_by.get((c.direction, c.system, metric))
            d_str = "" if d is None else f"{d:+.2f}"
            lines.append(f"{c.direction},{c.system},{metric},{score.value:.2f},{score.n},{d_str}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def render_cases(
    test: ParallelCorpus,
    baseline_results: list[TranslationResult],
    system_results: list[TranslationResult],
    baseline_label: str,
    system_label: str,
    path: str | Path,
    limit: int = 20,
) -> Path:
    """Case-study dump: source, reference, both hypotheses, and the staged
    intermediate paraphrase when present."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base_by = {r.pair_id: r for r in baseline_results}
    sys_by = {r.pair_id: r for r in system_results}
    lines = [f"# Case study: {test.label}", ""]
    shown = 0
    for pair in test.pairs:
        if shown >= limit:
            break
        b = base_by.get(pair.id)
        s = sys_by.get(pair.id)
        if b is None or s is None:
            continue
        lines.append(f"## Pair {pair.id}")
        lines.append("| Field | Text |")
        lines.append("|---|---|")
        lines.append(f"| SRC | {pair.src_text} |")
        lines.append(f"| TGT | {pair.tgt_text} |")
        lines.append(f"| {baseline_label} | {b.hypothesis} |")
        lines.append(f"| {system_label} | {s.hypothesis} |")
        if s.intermediate_paraphrase is not None:
            lines.append(f"| paraphrase | {s.intermediate_paraphrase} |")
        lines.append("")
        shown += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
