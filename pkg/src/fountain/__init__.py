"""Fountain: a deviation-risk assistant.

Builds a two-layer knowledge graph from BOM, FMEA and warranty-claim data,
links free-text deviation descriptions to failure causes via embedding
similarity, and serves explainable, threshold-gated recommendations over
HTTP with a feedback loop and a model-suitability evaluation harness.
"""

__version__ = "0.1.0"
