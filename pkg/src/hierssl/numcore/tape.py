"""Define-by-run reverse-mode differentiation over float64 numpy arrays.

A :class:`Tape` records every primitive applied to its variables together
with the rule that maps the output cotangent to input cotangents. It is
rebuilt for each forward pass.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised by a primitive whose inputs have incompatible shapes."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {', '.join(str(s) for s in shapes)}")


class TapeError(RuntimeError):
    pass


class Var:
    """A value on a tape. Leaves carry a parameter name; constants carry none."""

    __slots__ = ("tape", "value", "parents", "rule", "name", "index", "needs_grad")

    def __init__(self, tape, value, parents=(), rule=None, name=None, needs_grad=True):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.rule = rule
        self.name = name
        self.needs_grad = needs_grad
        self.index = -1

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Var{tag}(shape={self.value.shape})"

    # arithmetic sugar
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(_lift(self.tape, o), self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __truediv__(self, o):
        if isinstance(o, (int, float)):
            return scale(self, 1.0 / o)
        return mul(self, reciprocal(o))


class Tape:
    def __init__(self, frozen_targets: list[np.ndarray] | None = None):
        self.nodes: list[Var] = []
        self.leaves: dict[str, Var] = {}
        # inputs of piecewise-linear ops, inspected by grad_check's kink filter
        self.kinks: list[np.ndarray] = []
        # stop-gradient outputs in call order; when replaying, frozen values are used instead
        self.sg_values: list[np.ndarray] = []
        self.frozen_targets = frozen_targets

    def release(self) -> None:
        """Drop every recorded node. Vars point back at their tape, so without this
        the arrays of a finished step live until the cyclic collector runs."""
        self.nodes.clear()
        self.leaves.clear()
        self.kinks.clear()
        self.sg_values.clear()

    def param(self, name: str, value) -> Var:
        if name in self.leaves:
            raise TapeError(f"parameter {name!r} registered twice")
        v = Var(self, np.asarray(value, dtype=np.float64), name=name)
        self._push(v)
        self.leaves[name] = v
        return v

    def params(self, values: dict) -> dict:
        return {k: self.param(k, v) for k, v in values.items()}

    def const(self, value) -> Var:
        v = Var(self, np.asarray(value, dtype=np.float64), needs_grad=False)
        self._push(v)
        return v

    def _push(self, v: Var) -> Var:
        v.index = len(self.nodes)
        self.nodes.append(v)
        return v

    def record(self, value, parents, rule) -> Var:
        needs = any(p.needs_grad for p in parents)
        v = Var(self, value, parents=tuple(parents), rule=rule if needs else None,
                needs_grad=needs)
        return self._push(v)


def _lift(tape: Tape, x) -> Var:
    if isinstance(x, Var):
        if x.tape is not tape:
            raise TapeError("variables from different tapes")
        return x
    return tape.const(x)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TapeError("no taped variable among inputs")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# -- elementwise and linear-algebra primitives ------------------------------

def add(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _check_broadcast("add", a.value, b.value)
    return t.record(a.value + b.value, (a, b),
                    lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _check_broadcast("sub", a.value, b.value)
    return t.record(a.value - b.value, (a, b),
                    lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _check_broadcast("mul", a.value, b.value)
    av, bv = a.value, b.value
    return t.record(av * bv, (a, b),
                    lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def scale(a: Var, c: float) -> Var:
    return a.tape.record(a.value * c, (a,), lambda g: (g * c,))


def reciprocal(a: Var) -> Var:
    out = 1.0 / a.value
    return a.tape.record(out, (a,), lambda g: (-g * out * out,))


def matmul(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError("matmul", av.shape, bv.shape)
    return t.record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Var) -> Var:
    if a.value.ndim != 2:
        raise ShapeError("transpose", a.shape)
    return a.tape.record(a.value.T.copy(), (a,), lambda g: (g.T,))


def relu(a: Var) -> Var:
    x = a.value
    a.tape.kinks.append(x)
    mask = x > 0
    return a.tape.record(np.where(mask, x, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Var) -> Var:
    x = a.value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return a.tape.record(out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a: Var) -> Var:
    out = np.exp(a.value)
    return a.tape.record(out, (a,), lambda g: (g * out,))


def log(a: Var) -> Var:
    x = a.value
    if np.any(x <= 0):
        raise ValueError("log: non-positive input")
    return a.tape.record(np.log(x), (a,), lambda g: (g / x,))


def sqrt(a: Var) -> Var:
    out = np.sqrt(a.value)
    return a.tape.record(out, (a,), lambda g: (g * 0.5 / out,))


def square(a: Var) -> Var:
    x = a.value
    return a.tape.record(x * x, (a,), lambda g: (2.0 * g * x,))


def total(a: Var) -> Var:
    """Sum of all entries, as a 0-d value."""
    shape = a.shape
    return a.tape.record(np.asarray(a.value.sum()), (a,),
                         lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a: Var) -> Var:
    n = a.value.size
    shape = a.shape
    return a.tape.record(np.asarray(a.value.mean()), (a,),
                         lambda g: (np.full(shape, float(g) / n),))


def mean_rows(a: Var) -> Var:
    """Column means over rows: (n, d) -> (1, d)."""
    if a.value.ndim != 2 or a.value.shape[0] == 0:
        raise ShapeError("mean_rows", a.shape)
    n = a.shape[0]
    shape = a.shape
    return a.tape.record(a.value.mean(axis=0, keepdims=True), (a,),
                         lambda g: (np.broadcast_to(g / n, shape).copy(),))


def row_sum(a: Var) -> Var:
    """Per-row sums: (n, d) -> (n, 1)."""
    shape = a.shape
    return a.tape.record(a.value.sum(axis=1, keepdims=True), (a,),
                         lambda g: (np.broadcast_to(g, shape).copy(),))


def concat_cols(parts) -> Var:
    """Concatenate per-row feature blocks: [(n, d1), (n, d2), ...] -> (n, d1+d2+...)."""
    t = _tape_of(*parts)
    parts = [_lift(t, p) for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1 or any(p.value.ndim != 2 for p in parts):
        raise ShapeError("concat_cols", *[p.shape for p in parts])
    widths = np.cumsum([0] + [p.shape[1] for p in parts])
    value = np.concatenate([p.value for p in parts], axis=1)

    def rule(g):
        return tuple(g[:, widths[i]:widths[i + 1]] for i in range(len(parts)))
    return t.record(value, parts, rule)


def gather_rows(a: Var, idx: np.ndarray) -> Var:
    """Rows ``a[idx]``; the backward pass scatter-adds into ``a``'s shape."""
    import scipy.sparse as sp

    idx = np.asarray(idx, dtype=np.int64)
    n = a.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ShapeError("gather_rows", a.shape, idx.shape)

    def rule(g):
        sel = sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))),
                            shape=(n, len(idx)))
        return (sel @ g,)
    return a.tape.record(a.value[idx], (a,), rule)


def spmm(mat, a: Var) -> Var:
    """Constant sparse (or dense) matrix times a taped dense matrix."""
    if mat.shape[1] != a.shape[0]:
        raise ShapeError("spmm", mat.shape, a.shape)
    mt = mat.T.tocsr() if hasattr(mat, "tocsr") else mat.T
    return a.tape.record(np.asarray(mat @ a.value), (a,), lambda g: (np.asarray(mt @ g),))


def stop_gradient(a: Var) -> Var:
    """Same value, cut from differentiation: contributes zero gradient to ``a``.

    On a tape built with ``frozen_targets`` the i-th call returns the i-th frozen
    value, so finite differences see the same surrogate the tape differentiates.
    """
    t = a.tape
    value = a.value
    if t.frozen_targets is not None:
        i = len(t.sg_values)
        if i >= len(t.frozen_targets) or t.frozen_targets[i].shape != value.shape:
            raise TapeError("stop_gradient replay does not match the recorded pass")
        value = t.frozen_targets[i]
    t.sg_values.append(value)
    return t.const(value)


# -- fused primitives with hand-derived backward rules -----------------------

def layer_norm(a: Var, gain: Var, bias: Var, eps: float = 1e-5) -> Var:
    """Per-row normalization to zero mean / unit variance, then affine."""
    t = a.tape
    x = a.value
    if x.ndim != 2 or gain.shape != (1, x.shape[1]) or bias.shape != (1, x.shape[1]):
        raise ShapeError("layer_norm", a.shape, gain.shape, bias.shape)
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gv = gain.value

    def rule(g):
        dxhat = g * gv
        dx = inv * (dxhat - dxhat.mean(axis=1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=1, keepdims=True))
        return dx, (g * xhat).sum(axis=0, keepdims=True), g.sum(axis=0, keepdims=True)
    return t.record(xhat * gv + bias.value, (a, gain, bias), rule)


def l2_normalize_rows(a: Var, eps: float = 1e-12) -> Var:
    """Rows scaled to unit Euclidean norm; zero rows map to zero with zero gradient."""
    x = a.value
    if x.ndim != 2:
        raise ShapeError("l2_normalize_rows", a.shape)
    norm = np.sqrt((x * x).sum(axis=1, keepdims=True))
    ok = norm > eps
    safe = np.where(ok, norm, 1.0)
    y = np.where(ok, x / safe, 0.0)

    def rule(g):
        proj = (g * y).sum(axis=1, keepdims=True)
        return (np.where(ok, (g - y * proj) / safe, 0.0),)
    return a.tape.record(y, (a,), rule)


def softmax(a: Var, temperature: float = 1.0) -> Var:
    """Softmax over all entries of a vector-shaped value, with temperature."""
    x = a.value / temperature
    e = np.exp(x - x.max())
    y = e / e.sum()

    def rule(g):
        return ((y * (g - (g * y).sum())) / temperature,)
    return a.tape.record(y, (a,), rule)


def log_softmax_rows(a: Var) -> Var:
    x = a.value
    m = x.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))
    out = x - lse
    p = np.exp(out)

    def rule(g):
        return (g - p * g.sum(axis=1, keepdims=True),)
    return a.tape.record(out, (a,), rule)


def mmd_rbf(za: Var, zb: Var, sigmas=(0.5, 1.0, 2.0)) -> Var:
    """Biased (V-statistic) MMD^2 averaged over RBF bandwidths.

    mean_s [ E k_s(a, a') + E k_s(b, b') - 2 E k_s(a, b) ],
    k_s(x, y) = exp(-|x - y|^2 / (2 s^2)).
    """
    t = _tape_of(za, zb)
    a, b = za.value, zb.value
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError("mmd_rbf", a.shape, b.shape)
    sigmas = tuple(float(s) for s in sigmas)
    n, m = a.shape[0], b.shape[0]

    from .. import kernels

    s_aa, r_aa, wa_aa = kernels.rbf_stats_sym(a, sigmas)
    s_bb, r_bb, wb_bb = kernels.rbf_stats_sym(b, sigmas)
    s_ab, r_ab, wb_ab, c_ab, wta_ab = kernels.rbf_stats(a, b, sigmas)
    value = s_aa / (n * n) + s_bb / (m * m) - 2.0 * s_ab / (n * m)

    def rule(g):
        g = float(g)
        # d/dx_i k(x_i, y) = -k (x_i - y) / s^2; W = mean_s k_s / s^2 is symmetric within A and B
        ga = (-2.0 / (n * n)) * (r_aa[:, None] * a - wa_aa) \
            + (2.0 / (n * m)) * (r_ab[:, None] * a - wb_ab)
        gb = (-2.0 / (m * m)) * (r_bb[:, None] * b - wb_bb) \
            + (2.0 / (n * m)) * (c_ab[:, None] * b - wta_ab)
        return g * ga, g * gb
    return t.record(np.asarray(value), (_lift(t, za), _lift(t, zb)), rule)


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    """Gradient of a scalar ``loss`` with respect to every named leaf on ``tape``.

    Leaves the loss does not depend on receive exact zeros.
    """
    if not isinstance(loss, Var) or loss.tape is not tape or not (
            0 <= loss.index < len(tape.nodes) and tape.nodes[loss.index] is loss):
        raise TapeError("loss is not recorded on this tape")
    if loss.value.size != 1:
        raise TapeError(f"loss must be scalar, got shape {loss.value.shape}")
    grads: list = [None] * (loss.index + 1)
    grads[loss.index] = np.ones_like(loss.value)
    for i in range(loss.index, -1, -1):
        node = tape.nodes[i]
        g = grads[i]
        if g is None or node.rule is None:
            continue
        for parent, pg in zip(node.parents, node.rule(g)):
            if not parent.needs_grad:
                continue
            j = parent.index
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            grads[j] = pg if grads[j] is None else grads[j] + pg
    out = {}
    for name, leaf in tape.leaves.items():
        g = grads[leaf.index] if leaf.index <= loss.index else None
        out[name] = np.zeros_like(leaf.value) if g is None else g
    return out
