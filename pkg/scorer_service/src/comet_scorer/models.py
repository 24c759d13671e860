"""Scoring model implementations behind the service."""

from __future__ import annotations

from dataclasses import dataclass

COMET_MODEL_ID = "wmt22-comet-da"


@dataclass
class StubModel:
    """Deterministic stand-in used by CI.

    kind="length": score is the length ratio min/max of mt vs ref, so an
    identical hypothesis scores 1.0 and scores react to content; order
    checks stay meaningful. kind="constant": every item scores ``value``.
    """

    kind: str = "length"
    value: float = 0.8
    name: str = "stub"

    def score_batch(self, items: list[dict]) -> tuple[list[float], float]:
        if self.kind == "constant":
            scores = [self.value for _ in items]
        else:
            scores = [self._length_score(item["mt"], item["ref"]) for item in items]
        return scores, sum(scores) / len(scores)

    @staticmethod
    def _length_score(mt: str, ref: str) -> float:
        longer = max(len(mt), len(ref), 1)
        return min(len(mt), len(ref)) / longer


class CometModel:
    """The real neural metric; requires the optional `unbabel-comet` extra
    and a checkpoint download, so loading is deferred until startup."""

    def __init__(self, model_id: str = COMET_MODEL_ID, gpus: int = 0):
        try:
            from comet import download_model, load_from_checkpoint
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise RuntimeError(
                "the real scorer needs the comet extra: pip install 'comet-scorer-service[comet]'"
            ) from exc
        self.name = model_id
        self.gpus = gpus
        self._model = load_from_checkpoint(download_model(model_id))

    def score_batch(self, items: list[dict]) -> tuple[list[float], float]:
        data = [{"src": i["src"], "mt": i["mt"], "ref": i["ref"]} for i in items]
        output = self._model.predict(data, gpus=self.gpus, progress_bar=False)
        scores = [max(0.0, min(1.0, float(s))) for s in output.scores]
        return scores, max(0.0, min(1.0, float(output.system_score)))
