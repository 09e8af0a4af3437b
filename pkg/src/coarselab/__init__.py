"""Coarse geometry of metric graphs and their universal-cover trees."""

from .cover import Word, ball_measure, covering_number, packing_number, parse_word, translation_length
from .entropy import compare_entropies, empirical_entropy, perron_entropy
from .metric_graph import MetricGraph, NormalizedLengths, load_graph, parse_graph
from .optimize import entropy_at, minimize_entropy

__version__ = "0.1.0"

__all__ = [
    "MetricGraph",
    "NormalizedLengths",
    "Word",
    "ball_measure",
    "compare_entropies",
    "covering_number",
    "empirical_entropy",
    "entropy_at",
    "load_graph",
    "minimize_entropy",
    "packing_number",
    "parse_graph",
    "parse_word",
    "perron_entropy",
    "translation_length",
]
