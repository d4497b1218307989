"""Synthetic connectome-like multiplex graphs, downstream tasks and corpora."""
from .config import DEFAULT_GEN, GenConfig, substream
from .corpus import generate_corpus, load_corpus_graph, read_manifest
from .generator import (
    apply_missing_sc,
    assign_communities,
    bandpass,
    correlation_matrix,
    fc_edges,
    generate_graph,
    node_features,
    sample_latents,
    sc_edge_prob,
    sc_edges,
    simulate_timeseries,
)
from .tasks import FoldLeakageError, TaskBundle, make_task_bundle
