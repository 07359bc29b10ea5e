"""Evolves tiny quantized shift-add classifier networks together with
their gate-level cost model and HDL emission."""

__version__ = "0.1.0"

from .qarith import ApproxMlp, ApproxNeuron, BitConfig  # noqa: F401
