"""Hierarchical node/edge/graph self-supervised learning on synthetic multiplex connectomes."""
__version__ = "0.1.0"
