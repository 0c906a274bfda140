"""Minimal reverse-mode automatic differentiation over numpy arrays.

Operations executed inside an active :class:`Tape` are recorded whenever one
of their inputs requires gradients; :meth:`Tape.backward` then walks the
record in reverse. Outside a tape nothing is recorded, which doubles as a
no-grad mode for inference.

    >>> x = Tensor(3.0, requires_grad=True)
    >>> with Tape() as tape:
    ...     y = x * x
    >>> float(tape.backward(y)[x])
    6.0
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "GradCheckReport",
    "PRIMITIVES",
    "Tape",
    "TapeError",
    "Tensor",
    "apply_primitive",
    "backward",
    "finite_difference_check",
]

COSINE_EPS = 1e-8


class TapeError(RuntimeError):
    pass


class Tensor:
    """An n-dimensional value that may take part in gradient recording."""

    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating) and dtype is None and requires_grad:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{tag})"

    # operator sugar; every operator goes through apply_primitive
    def __add__(self, other):
        return apply_primitive("add", self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return apply_primitive("sub", self, other)

    def __rsub__(self, other):
        return apply_primitive("sub", other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return apply_primitive("scale", self, factor=float(other))
        return apply_primitive("elementwise_mul", self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return apply_primitive("scale", self, factor=-1.0)

    def __matmul__(self, other):
        return apply_primitive("matmul", self, other)

    def __getitem__(self, index):
        return apply_primitive("slice", self, index=index)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if dtype is None and isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=np.float64))
    return Tensor(np.asarray(x, dtype=dtype))


# --------------------------------------------------------------------------
# tape


@dataclass
class Node:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    saved: dict


_local = threading.local()


def _active_tape() -> Tape | None:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered record of executed primitives. Single owner, single use."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False

    def __enter__(self) -> Tape:
        if not hasattr(_local, "stack"):
            _local.stack = []
        _local.stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.remove(self)
        return False

    def record(self, node: Node):
        if self.consumed:
            raise TapeError("tape already consumed")
        self.nodes.append(node)

    def backward(self, output: Tensor) -> dict[Tensor, np.ndarray]:
        """Propagate d(output)/d(.) to every leaf that requires gradients.

        Gradients are accumulated into ``Tensor.grad`` and also returned as a
        map keyed by tensor.
        """
        if self.consumed:
            raise TapeError("tape already consumed")
        if output.data.size != 1:
            raise TapeError(f"backward needs a scalar output, got shape {output.shape}")
        self.consumed = True
        grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
        produced = set()
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            produced.add(id(node.output))
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            in_grads = PRIMITIVES[node.kind].backward(node.saved, g)
            for t, gi in zip(node.inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
                    leaves[key] = t
        if output.requires_grad and id(output) not in produced:
            leaves[id(output)] = output
        result = {}
        for key, t in leaves.items():
            if key in produced or key not in grads:
                continue
            g = grads[key].astype(t.data.dtype, copy=False)
            t.grad = g if t.grad is None else t.grad + g
            result[t] = g
        self.nodes = []
        return result


def backward(tape: Tape, output: Tensor) -> dict[Tensor, np.ndarray]:
    return tape.backward(output)


# --------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Primitive:
    forward: Callable
    backward: Callable
    n_inputs: int | None = None  # None: variadic


PRIMITIVES: dict[str, Primitive] = {}


def _register(kind: str, n_inputs: int | None = None):
    def deco(cls):
        PRIMITIVES[kind] = Primitive(cls.forward, cls.backward, n_inputs)
        return cls

    return deco


def apply_primitive(kind: str, *inputs, **attrs) -> Tensor:
    """Run primitive ``kind`` and record it on the active tape if needed."""
    prim = PRIMITIVES.get(kind)
    if prim is None:
        raise ValueError(f"unknown primitive {kind!r}")
    if prim.n_inputs is not None and len(inputs) != prim.n_inputs:
        raise ValueError(f"{kind} takes {prim.n_inputs} inputs, got {len(inputs)}")
    ref = next((x.dtype for x in inputs if isinstance(x, Tensor) and np.issubdtype(x.dtype, np.floating)), None)
    # python scalars follow the tensor operands' precision
    tensors = tuple(as_tensor(x, ref if isinstance(x, (int, float)) else None) for x in inputs)
    saved: dict = {"needs": tuple(t.requires_grad for t in tensors)}
    out_data = prim.forward(saved, *(t.data for t in tensors), **attrs)
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in tensors)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape.record(Node(kind, tensors, out, saved))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _shape_error(kind, *arrays):
    return ValueError(f"{kind}: incompatible shapes {[a.shape for a in arrays]}")


def _broadcast_check(kind, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise _shape_error(kind, a, b) from None


@_register("add", 2)
class _Add:
    @staticmethod
    def forward(s, a, b):
        _broadcast_check("add", a, b)
        s["shapes"] = (a.shape, b.shape)
        return a + b

    @staticmethod
    def backward(s, g):
        sa, sb = s["shapes"]
        return _unbroadcast(g, sa), _unbroadcast(g, sb)


@_register("sub", 2)
class _Sub:
    @staticmethod
    def forward(s, a, b):
        _broadcast_check("sub", a, b)
        s["shapes"] = (a.shape, b.shape)
        return a - b

    @staticmethod
    def backward(s, g):
        sa, sb = s["shapes"]
        return _unbroadcast(g, sa), -_unbroadcast(g, sb)


@_register("scale", 1)
class _Scale:
    @staticmethod
    def forward(s, a, factor):
        s["factor"] = factor
        return a * np.asarray(factor, dtype=a.dtype)

    @staticmethod
    def backward(s, g):
        return (g * np.asarray(s["factor"], dtype=g.dtype),)


@_register("elementwise_mul", 2)
class _Mul:
    @staticmethod
    def forward(s, a, b):
        _broadcast_check("elementwise_mul", a, b)
        s["a"], s["b"] = a, b
        return a * b

    @staticmethod
    def backward(s, g):
        a, b = s["a"], s["b"]
        need_a, need_b = s["needs"]
        return (_unbroadcast(g * b, a.shape) if need_a else None,
                _unbroadcast(g * a, b.shape) if need_b else None)


@_register("sum_squares", 1)
class _SumSquares:
    """Scalar sum of squared entries, accumulated in float64."""

    @staticmethod
    def forward(s, a):
        s["a"] = a
        flat = a.reshape(-1).astype(np.float64)
        return np.asarray(np.dot(flat, flat), dtype=a.dtype)

    @staticmethod
    def backward(s, g):
        return (s["a"] * (2 * g),)


@_register("matmul", 2)
class _MatMul:
    """``a @ b`` with numpy batching rules; 1-D operands are promoted."""

    @staticmethod
    def forward(s, a, b):
        if a.ndim == 0 or b.ndim == 0:
            raise _shape_error("matmul", a, b)
        a2 = a[None, :] if a.ndim == 1 else a
        b2 = b[:, None] if b.ndim == 1 else b
        if a2.shape[-1] != b2.shape[-2]:
            raise _shape_error("matmul", a, b)
        s.update(a=a2, b=b2, a1=a.ndim == 1, b1=b.ndim == 1, sa=a.shape, sb=b.shape)
        out = a2 @ b2
        if b.ndim == 1:
            out = out[..., 0]
        if a.ndim == 1:
            out = out[..., 0, :] if b.ndim > 1 else out[..., 0]
        return out

    @staticmethod
    def backward(s, g):
        a, b = s["a"], s["b"]
        if s["b1"]:
            g = g[..., None]
        if s["a1"]:
            g = g[..., None, :]
        need_a, need_b = s["needs"]
        ga = gb = None
        if need_a:
            ga = _unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape).reshape(s["sa"])
        if need_b:
            gb = _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape).reshape(s["sb"])
        return ga, gb


@_register("relu", 1)
class _Relu:
    # subgradient at 0 is 0
    @staticmethod
    def forward(s, a):
        mask = a > 0
        s["mask"] = mask
        return np.where(mask, a, 0).astype(a.dtype)

    @staticmethod
    def backward(s, g):
        return (g * s["mask"],)


@_register("sigmoid", 1)
class _Sigmoid:
    @staticmethod
    def forward(s, a):
        out = np.empty_like(a)
        pos = a >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
        ea = np.exp(a[~pos])
        out[~pos] = ea / (1.0 + ea)
        s["out"] = out
        return out

    @staticmethod
    def backward(s, g):
        y = s["out"]
        return (g * y * (1 - y),)


@_register("log", 1)
class _Log:
    @staticmethod
    def forward(s, a):
        s["a"] = a
        return np.log(a)

    @staticmethod
    def backward(s, g):
        return (g / s["a"],)


@_register("clip", 1)
class _Clip:
    @staticmethod
    def forward(s, a, low, high):
        s["mask"] = (a >= low) & (a <= high)
        return np.clip(a, low, high)

    @staticmethod
    def backward(s, g):
        return (g * s["mask"],)


@_register("sum", 1)
class _Sum:
    """Sum with float64 accumulation, cast back to the input dtype."""

    @staticmethod
    def forward(s, a, axis=None, keepdims=False):
        s.update(shape=a.shape, axis=axis, keepdims=keepdims)
        return np.asarray(np.sum(a, axis=axis, keepdims=keepdims, dtype=np.float64), dtype=a.dtype)

    @staticmethod
    def backward(s, g):
        shape, axis = s["shape"], s["axis"]
        if axis is not None and not s["keepdims"]:
            axes = (axis,) if isinstance(axis, int) else axis
            g = np.expand_dims(g, tuple(ax % len(shape) for ax in axes))
        return (np.broadcast_to(g, shape).copy(),)


@_register("mean", 1)
class _Mean:
    @staticmethod
    def forward(s, a, axis=None, keepdims=False):
        s.update(shape=a.shape, axis=axis, keepdims=keepdims)
        total = np.sum(a, axis=axis, keepdims=keepdims, dtype=np.float64)
        count = a.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
        s["count"] = count
        return np.asarray(total / count, dtype=a.dtype)

    @staticmethod
    def backward(s, g):
        (gs,) = _Sum.backward(s, g)
        return (gs / np.asarray(s["count"], dtype=gs.dtype),)


@_register("reshape", 1)
class _Reshape:
    @staticmethod
    def forward(s, a, shape):
        s["shape"] = a.shape
        return a.reshape(shape)

    @staticmethod
    def backward(s, g):
        return (g.reshape(s["shape"]),)


@_register("slice", 1)
class _Slice:
    @staticmethod
    def forward(s, a, index):
        s.update(shape=a.shape, dtype=a.dtype, index=index)
        return a[index]

    @staticmethod
    def backward(s, g):
        full = np.zeros(s["shape"], dtype=g.dtype)
        np.add.at(full, s["index"], g)
        return (full,)


@_register("concat", None)
class _Concat:
    @staticmethod
    def forward(s, *arrays, axis=0):
        s.update(axis=axis, sizes=[a.shape[axis] for a in arrays])
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError:
            raise _shape_error("concat", *arrays) from None

    @staticmethod
    def backward(s, g):
        cuts = np.cumsum(s["sizes"])[:-1]
        return tuple(np.split(g, cuts, axis=s["axis"]))


@_register("embedding", 2)
class _Embedding:
    """Row lookup ``table[ids]``; ids carry no gradient."""

    @staticmethod
    def forward(s, table, ids):
        ids = ids.astype(np.int64, copy=False)
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise ValueError("embedding: id out of range")
        s.update(ids=ids, shape=table.shape)
        return table[ids]

    @staticmethod
    def backward(s, g):
        full = np.zeros(s["shape"], dtype=g.dtype)
        np.add.at(full, s["ids"].reshape(-1), g.reshape(-1, s["shape"][1]))
        return full, None


@_register("conv1d", None)
class _Conv1d:
    """Stride-1 'same' convolution over ``(batch, length, channels)``.

    Kernel layout is ``(width, in_channels, out_channels)``; an optional third
    input is a bias of shape ``(out_channels,)``.
    """

    @staticmethod
    def forward(s, x, w, b=None):
        if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1]:
            raise _shape_error("conv1d", x, w)
        width = w.shape[0]
        left = (width - 1) // 2
        xp = np.pad(x, ((0, 0), (left, width - 1 - left), (0, 0)))
        cols = np.lib.stride_tricks.sliding_window_view(xp, width, axis=1)  # B, L, C, K
        cols = np.ascontiguousarray(cols.transpose(0, 1, 3, 2)).reshape(x.shape[0] * x.shape[1], -1)
        out = (cols @ w.reshape(-1, w.shape[2])).reshape(x.shape[0], x.shape[1], w.shape[2])
        if b is not None:
            out = out + b
        s.update(cols=cols, w=w, xshape=x.shape, left=left, has_bias=b is not None)
        return out

    @staticmethod
    def backward(s, g):
        w, (bsz, length, cin) = s["w"], s["xshape"]
        width = w.shape[0]
        g2 = g.reshape(bsz * length, -1)
        gw = (s["cols"].T @ g2).reshape(w.shape)
        gxp = np.zeros((bsz, length + width - 1, cin), dtype=g.dtype)
        if s["needs"][0]:
            for k in range(width):
                gxp[:, k : k + length, :] += g @ w[k].T
        gx = gxp[:, s["left"] : s["left"] + length, :] if s["needs"][0] else None
        if s["has_bias"]:
            return gx, gw, g.sum(axis=(0, 1))
        return gx, gw


@_register("global_maxpool", 1)
class _GlobalMaxPool:
    """Max over the length axis: ``(batch, length, channels) -> (batch, channels)``."""

    @staticmethod
    def forward(s, x):
        if x.ndim != 3:
            raise _shape_error("global_maxpool", x)
        idx = x.argmax(axis=1)
        s.update(idx=idx, shape=x.shape)
        return np.take_along_axis(x, idx[:, None, :], axis=1)[:, 0, :]

    @staticmethod
    def backward(s, g):
        full = np.zeros(s["shape"], dtype=g.dtype)
        np.put_along_axis(full, s["idx"][:, None, :], g[:, None, :], axis=1)
        return (full,)


@_register("batchnorm", 3)
class _BatchNorm:
    """Per-feature normalisation over the batch axis of ``(batch, features)``.

    ``running_mean`` / ``running_var`` are plain arrays updated in place in
    training mode with ``new = momentum * old + (1 - momentum) * batch``.
    """

    @staticmethod
    def forward(s, x, gamma, beta, running_mean, running_var, training,
                momentum=0.9, eps=1e-5):
        if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
            raise _shape_error("batchnorm", x, gamma, beta)
        if training:
            x64 = x.astype(np.float64)
            mean = x64.mean(axis=0)
            var = x64.var(axis=0)
            running_mean *= momentum
            running_mean += (1 - momentum) * mean
            running_var *= momentum
            running_var += (1 - momentum) * var
            inv = 1.0 / np.sqrt(var + eps)
            xhat = ((x64 - mean) * inv).astype(x.dtype)
            s.update(training=True, xhat=xhat, inv=inv.astype(x.dtype), gamma=gamma)
        else:
            inv = (1.0 / np.sqrt(running_var + eps)).astype(x.dtype)
            xhat = (x - running_mean.astype(x.dtype)) * inv
            s.update(training=False, xhat=xhat, inv=inv, gamma=gamma)
        return xhat * gamma + beta

    @staticmethod
    def backward(s, g):
        xhat, inv, gamma = s["xhat"], s["inv"], s["gamma"]
        ggamma = (g * xhat).sum(axis=0)
        gbeta = g.sum(axis=0)
        gxhat = g * gamma
        if not s["training"]:
            return gxhat * inv, ggamma, gbeta
        n = g.shape[0]
        gx = (inv / n) * (n * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))
        return gx, ggamma, gbeta


@_register("dropout", 1)
class _Dropout:
    """Inverted dropout: zero with probability ``p``, scale survivors by 1/(1-p)."""

    @staticmethod
    def forward(s, x, p, rng, training=True):
        if not training:
            raise ValueError("dropout invoked in inference mode")
        if not 0 <= p < 1:
            raise ValueError("dropout rate must be in [0, 1)")
        mask = (rng.random(x.shape) >= p).astype(x.dtype) / np.asarray(1 - p, dtype=x.dtype)
        s["mask"] = mask
        return x * mask

    @staticmethod
    def backward(s, g):
        return (g * s["mask"],)


@_register("cosine_similarity_matrix", 1)
class _CosineMatrix:
    """Pairwise cosine similarity between rows: ``(..., n, d) -> (..., n, n)``.

    ``A_ij = z_i . z_j / (|z_i| |z_j| + 1e-8)``.
    """

    @staticmethod
    def forward(s, z):
        if z.ndim < 2:
            raise _shape_error("cosine_similarity_matrix", z)
        dots = z @ np.swapaxes(z, -1, -2)
        norms = np.sqrt(np.sum(z * z, axis=-1, dtype=np.float64)).astype(z.dtype)
        denom = norms[..., :, None] * norms[..., None, :] + np.asarray(COSINE_EPS, dtype=z.dtype)
        s.update(z=z, dots=dots, norms=norms, denom=denom)
        return dots / denom

    @staticmethod
    def backward(s, g):
        z, dots, norms, denom = s["z"], s["dots"], s["norms"], s["denom"]
        gdots = g / denom
        gdenom = -g * dots / (denom * denom)
        gz = (gdots + np.swapaxes(gdots, -1, -2)) @ z
        gsym = gdenom + np.swapaxes(gdenom, -1, -2)
        gnorm = (gsym @ norms[..., :, None])[..., 0]
        safe = np.where(norms > 0, norms, 1)
        gz = gz + np.where(norms > 0, gnorm / safe, 0)[..., None] * z
        return (gz,)


@_register("sym_normalize", 1)
class _SymNormalize:
    """``D^-1/2 A D^-1/2`` with ``D`` the diagonal of row sums of ``A``."""

    @staticmethod
    def forward(s, a):
        if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
            raise _shape_error("sym_normalize", a)
        deg = np.sum(a, axis=-1, dtype=np.float64)
        d = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0).astype(a.dtype)
        s.update(a=a, d=d)
        return d[..., :, None] * a * d[..., None, :]

    @staticmethod
    def backward(s, g):
        a, d = s["a"], s["d"]
        ga = g * d[..., :, None] * d[..., None, :]
        ga_scaled = g * a
        gd = (ga_scaled * d[..., None, :]).sum(axis=-1) + (ga_scaled * d[..., :, None]).sum(axis=-2)
        gdeg = gd * (-0.5) * d**3
        return (ga + gdeg[..., :, None],)


# --------------------------------------------------------------------------
# functional helpers


def matmul(a, b):
    return apply_primitive("matmul", a, b)


def relu(x):
    return apply_primitive("relu", x)


def sigmoid(x):
    return apply_primitive("sigmoid", x)


def log(x):
    return apply_primitive("log", x)


def clip(x, low, high):
    return apply_primitive("clip", x, low=low, high=high)


def tsum(x, axis=None, keepdims=False):
    return apply_primitive("sum", x, axis=axis, keepdims=keepdims)


def sum_squares(x):
    return apply_primitive("sum_squares", x)


def mean(x, axis=None, keepdims=False):
    return apply_primitive("mean", x, axis=axis, keepdims=keepdims)


def reshape(x, shape):
    return apply_primitive("reshape", x, shape=shape)


def concat(tensors, axis=0):
    return apply_primitive("concat", *tensors, axis=axis)


def embedding(table, ids):
    return apply_primitive("embedding", table, ids)


def conv1d(x, w, b=None):
    return apply_primitive("conv1d", x, w) if b is None else apply_primitive("conv1d", x, w, b)


def global_maxpool(x):
    return apply_primitive("global_maxpool", x)


def batchnorm(x, gamma, beta, running_mean, running_var, training, momentum=0.9, eps=1e-5):
    return apply_primitive("batchnorm", x, gamma, beta, running_mean=running_mean,
                           running_var=running_var, training=training, momentum=momentum, eps=eps)


def dropout(x, p, rng, training=True):
    return apply_primitive("dropout", x, p=p, rng=rng, training=training)


def cosine_similarity_matrix(z):
    return apply_primitive("cosine_similarity_matrix", z)


def sym_normalize(a):
    return apply_primitive("sym_normalize", a)


# --------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    errors: dict[str, float] = field(default_factory=dict)
    checked: dict[str, int] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_error <= tol


def finite_difference_check(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    step: float = 1e-6,
    max_entries: int | None = None,
    exclude: dict[str, np.ndarray] | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare tape gradients of ``fn()`` with central differences.

    ``fn`` must rebuild its value from ``params`` on every call and be
    deterministic. ``max_entries`` samples that many coordinates per
    parameter; ``exclude`` masks coordinates (e.g. near ReLU kinks). The
    relative error uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    first = float(fn().data)
    if float(fn().data) != first:
        raise ValueError("function is not deterministic (two forward passes disagree)")
    with Tape() as tape:
        out = fn()
    grads = tape.backward(out)
    rng = np.random.default_rng(seed)
    report = GradCheckReport()
    for name, p in params.items():
        analytic = grads.get(p, np.zeros_like(p.data))
        candidates = np.arange(p.data.size)
        if exclude and name in exclude:
            candidates = candidates[~np.asarray(exclude[name]).reshape(-1)]
        if max_entries is not None and candidates.size > max_entries:
            candidates = rng.choice(candidates, size=max_entries, replace=False)
        flat = p.data.reshape(-1)
        worst = 0.0
        for i in candidates:
            orig = flat[i]
            flat[i] = orig + step
            up = float(fn().data)
            flat[i] = orig - step
            down = float(fn().data)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
        report.errors[name] = worst
        report.checked[name] = int(candidates.size)
    return report
