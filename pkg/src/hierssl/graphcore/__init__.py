"""Multiplex graph type, serialization and classical graph algorithms."""
from .graph import (
    CHANNELS,
    FEATURE_NAMES,
    GraphError,
    MultiplexGraph,
    adjacency_from_edges,
    canonical_edges,
    graphs_equal,
    load_graph,
    save_graph,
    simple_graph,
)
from .metrics import (
    avg_clustering,
    avg_shortest_path,
    conductance,
    density,
    er_clustering,
    er_reference,
    induced_edges,
    jaccard,
    jaccard_pairs,
    largest_component,
    local_clustering,
    pagerank,
    pagerank_linear_solve,
    wl_hash,
)
