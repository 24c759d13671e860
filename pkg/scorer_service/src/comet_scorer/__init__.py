"""comet_scorer: HTTP wrapper around the wmt22-comet-da quality metric.

The wire contract: POST /score with {"items": [{"src", "mt", "ref"}, ...]}
returns {"scores": [...], "system_score": ..., "model": ...} with one score
per item, order preserved, all scores in [0, 1]. GET /health reports 503
until the model is loaded. CI runs against a stub model; the real neural
model is an opt-in extra.
"""

__version__ = "0.1.0"
