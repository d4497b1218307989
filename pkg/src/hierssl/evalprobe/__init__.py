"""Frozen probes, baselines, metrics and paired-bootstrap significance."""
from .bootstrap import SignificanceResult, paired_bootstrap
from .linear import LogisticModel, RidgeModel, Standardizer, logistic, ridge
from .metrics import auc, auc_pairwise, macro_f1, r2
from .probes import (
    ProbeResult,
    assert_disjoint,
    compare,
    cosine_link,
    jaccard_link,
    label_propagation,
    labelprop_node,
    logistic_node,
    mlp_classifier,
    pool_edges,
    probe_link,
    probe_node,
    probe_subgraph,
    ridge_pool,
    supervised_sage_link,
    supervised_sage_node,
    wl_hash_ridge,
)
