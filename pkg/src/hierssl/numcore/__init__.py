"""Float64 kernels, reverse-mode differentiation, clipping and Adam."""
from . import tape as ops
from .gradcheck import grad_check
from .optim import AdamState, NonFiniteGradientError, adam_step, clip_global_norm, global_norm
from .tape import ShapeError, Tape, TapeError, Var, backward

__all__ = [
    "AdamState", "NonFiniteGradientError", "ShapeError", "Tape", "TapeError", "Var",
    "adam_step", "backward", "clip_global_norm", "global_norm", "grad_check", "ops",
]
