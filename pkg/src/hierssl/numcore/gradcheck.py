"""Central finite-difference check of taped gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tape import Tape, Var, backward


def _run(loss_fn, params, frozen=None):
    tape = Tape(frozen_targets=frozen)
    leaves = tape.params(params)
    loss = loss_fn(tape, leaves)
    return tape, loss


def _kinks_disturbed(base: list[np.ndarray], other: list[np.ndarray], step: float) -> bool:
    """True when a perturbed kink input changed sign or sits within 10x its displacement of 0.

    For a pre-activation with unit sensitivity the displacement is ``step``, so
    this is the "within 10*step of the kink" rule scaled to each input.
    """
    if len(base) != len(other):
        return True
    for b, o in zip(base, other):
        if b.shape != o.shape:
            return True
        shift = np.abs(o - b)
        if np.any((shift > 0) & ((np.abs(b) < 10.0 * shift) | ((b > 0) != (o > 0)))):
            return True
    return False


def grad_check(loss_fn: Callable[[Tape, dict[str, Var]], Var], params: dict[str, np.ndarray],
               step: float = 1e-5, coords_per_param: int = 12, seed: int = 0,
               return_details: bool = False):
    """Max relative error between reverse-mode and central-difference gradients.

    ``loss_fn(tape, leaves)`` must build the loss deterministically. It may also
    return a dict of named scalar Vars recorded on one tape; every output is then
    checked against the same perturbed passes and the result is a dict of
    per-output errors (details and skip counts likewise).

    Coordinates that move a piecewise-linear input (ReLU / hinge) lying within
    ``10*step`` of its kink, or flip its sign, are skipped. Stop-gradient outputs
    are frozen at their base-point values during the perturbed passes, so the
    reference is the derivative of the surrogate objective the tape actually
    differentiates.

    The relative error uses ``max(|analytic|, |numeric|, floor)`` as denominator with
    ``floor = 1e-6 * max(1, |loss|)``: central differences carry roundoff of about
    ``eps * |loss| / step`` (~1e-11 here), which would otherwise dominate the ratio
    for coordinates whose true derivative is ~1e-8.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tape, out = _run(loss_fn, params)
    single = not isinstance(out, dict)
    outs = {None: out} if single else dict(out)
    analytic = {k: backward(tape, v) for k, v in outs.items()}
    floor = {k: 1e-6 * max(1.0, abs(float(v.value))) for k, v in outs.items()}
    base_kinks = [k.copy() for k in tape.kinks]
    frozen = [x.copy() for x in tape.sg_values]
    tape.release()
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(outs, 0.0)
    details = {k: [] for k in outs}
    skipped = 0
    for name, p in params.items():
        n = p.size
        coords = np.arange(n) if n <= coords_per_param else rng.choice(n, coords_per_param, replace=False)
        for c in coords:
            flat = p.reshape(-1)
            orig = flat[c]
            vals = []
            crossed = False
            for sgn in (1.0, -1.0):
                flat[c] = orig + sgn * step
                t2, o2 = _run(loss_fn, params, frozen)
                o2 = {None: o2} if single else o2
                vals.append({k: float(o2[k].value) for k in outs})
                if _kinks_disturbed(base_kinks, t2.kinks, step):
                    crossed = True
                t2.release()
            flat[c] = orig
            if crossed:
                skipped += 1
                continue
            for k in outs:
                numeric = (vals[0][k] - vals[1][k]) / (2.0 * step)
                if not np.isfinite(numeric):
                    raise FloatingPointError(f"non-finite numeric gradient for {name}[{c}]")
                a = float(analytic[k][name].reshape(-1)[c])
                err = abs(a - numeric) / max(abs(a), abs(numeric), floor[k])
                details[k].append((name, int(c), a, numeric, err))
                worst[k] = max(worst[k], err)
    if single:
        worst, details = worst[None], details[None]
    if return_details:
        return worst, details, skipped
    return worst
