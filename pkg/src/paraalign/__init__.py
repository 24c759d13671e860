"""paraalign: a paraphrase-then-translate toolchain.

Synthesizes structure-aligned paraphrase pairs via back-translation, emits
instruction-tuning datasets mixing translation and rephrase tasks, drives
translation runs through a cached LLM gateway, and evaluates with ROUGE-L
plus an external quality-scorer service.
"""

__version__ = "0.1.0"
