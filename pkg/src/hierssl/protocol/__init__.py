"""Four-stage protocol (tune, probe, transfer, ablate), reports and CLI."""
from .runconfig import ProtocolConfig, RunConfig
from .stages import (
    Reference,
    StageError,
    composite_scores,
    handcrafted_features,
    observed_graph,
    reference_graph,
    stage1_tune,
    stage2_probe,
    stage3_transfer,
    stage4_ablate,
)
