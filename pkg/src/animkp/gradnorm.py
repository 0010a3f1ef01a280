"""Gradient normalization of scalar functions, on a tiny hand-differentiated MLP.

A scalar function ``f`` is normalized as ``f / (||grad f|| + |f| + eps)``.
The result is bounded in (-1, 1) and, for the networks here, behaves as a
1-Lipschitz function; :func:`empirical_lipschitz` measures this by sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import InvalidParameter

DEFAULT_EPS = 1e-12

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


@dataclass(frozen=True, eq=False)
class ScalarNet:
    """Stack of affine layers with a pointwise nonlinearity between them.

    ``layers`` is a sequence of ``(weight, bias)`` with weight shaped
    ``(out, in)``; the last layer must have ``out == 1``. No nonlinearity is
    applied after the last layer.
    """

    layers: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise InvalidParameter(f"unknown activation {self.activation!r}")
        if not self.layers:
            raise InvalidParameter("network needs at least one layer")
        layers = []
        prev_out = None
        for i, (w, b) in enumerate(self.layers):
            w = np.array(w, dtype=np.float64, ndmin=2)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidParameter(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if prev_out is not None and w.shape[1] != prev_out:
                raise InvalidParameter(f"layer {i} expects {w.shape[1]} inputs, previous layer gives {prev_out}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidParameter(f"layer {i} has non-finite parameters")
            w.setflags(write=False)
            b.setflags(write=False)
            layers.append((w, b))
            prev_out = w.shape[0]
        if prev_out != 1:
            raise InvalidParameter(f"final layer must have one output, has {prev_out}")
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @classmethod
    def random(cls, rng: np.random.Generator, sizes: Sequence[int], weight_scale: float = 1.0, activation="tanh"):
        """Gaussian-initialized net with layer widths ``sizes`` (input first, ending in 1)."""
        if len(sizes) < 2 or sizes[-1] != 1:
            raise InvalidParameter("sizes must list the input width and end with 1")
        layers = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = rng.normal(0.0, weight_scale / math.sqrt(n_in), size=(n_out, n_in))
            b = rng.normal(0.0, 0.5, size=n_out)
            layers.append((w, b))
        return cls(tuple(layers), activation)


def _forward_backward(net: ScalarNet, X: np.ndarray):
    """Values ``(N,)`` and input gradients ``(N, n)`` for a batch ``X`` of shape ``(N, n)``."""
    act, dact = _ACTIVATIONS[net.activation]
    h = X
    cache = []
    last = len(net.layers) - 1
    for i, (w, b) in enumerate(net.layers):
        z = h @ w.T + b
        if i < last:
            a = act(z)
            cache.append((z, a))
            h = a
        else:
            h = z
    f = h[:, 0]

    g = np.repeat(net.layers[-1][0], X.shape[0], axis=0)
    for i in range(last - 1, -1, -1):
        z, a = cache[i]
        g = (g * dact(z, a)) @ net.layers[i][0]
    return f, g


def net_eval_with_grad(net: ScalarNet, x) -> Tuple[float, np.ndarray]:
    """Value of ``net`` at ``x`` and its gradient with respect to ``x``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != net.input_dim:
        raise InvalidParameter(f"input has {x.size} entries, net expects {net.input_dim}")
    f, g = _forward_backward(net, x[None, :])
    return float(f[0]), g[0].copy()


def grad_normalize(f: float, grad, eps: float = DEFAULT_EPS) -> float:
    """``f / (||grad|| + |f| + eps)``, strictly inside (-1, 1)."""
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    grad = np.asarray(grad, dtype=np.float64)
    if not (math.isfinite(f) and np.all(np.isfinite(grad))):
        raise InvalidParameter("grad_normalize needs finite inputs")
    out = f / (float(np.linalg.norm(grad)) + abs(f) + eps)
    # eps can vanish below the ulp of |f|; keep the open bound
    if abs(out) >= 1.0:
        out = math.copysign(np.nextafter(1.0, 0.0), out)
    return out


def _normalize_batch(f, g, eps):
    out = f / (np.linalg.norm(g, axis=1) + np.abs(f) + eps)
    return np.clip(out, -np.nextafter(1.0, 0.0), np.nextafter(1.0, 0.0))


def evaluate(net: ScalarNet, X, normalize: bool = True, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Raw or gradient-normalized outputs of ``net`` on a batch ``(N, n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != net.input_dim:
        raise InvalidParameter(f"inputs have {X.shape[1]} columns, net expects {net.input_dim}")
    f, g = _forward_backward(net, X)
    return _normalize_batch(f, g, eps) if normalize else f


def empirical_lipschitz(
    net: ScalarNet,
    normalize: bool = True,
    num_pairs: int = 10_000,
    domain: Tuple[float, float] = (-2.0, 2.0),
    seed: int = 0,
    eps: float = DEFAULT_EPS,
) -> float:
    """Largest sampled slope ``|g(x) - g(x')| / ||x - x'||`` over the box ``domain**n``.

    Pairs are drawn uniformly and independently; coincident pairs are redrawn.
    """
    if num_pairs < 1:
        raise InvalidParameter(f"num_pairs must be >= 1, got {num_pairs}")
    lo, hi = (float(v) for v in domain)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidParameter(f"degenerate domain [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    n = net.input_dim
    X = rng.uniform(lo, hi, size=(num_pairs, n))
    Y = rng.uniform(lo, hi, size=(num_pairs, n))
    while True:
        same = np.all(X == Y, axis=1)
        if not same.any():
            break
        Y[same] = rng.uniform(lo, hi, size=(int(same.sum()), n))
    gx = evaluate(net, X, normalize, eps)
    gy = evaluate(net, Y, normalize, eps)
    return float(np.max(np.abs(gx - gy) / np.linalg.norm(X - Y, axis=1)))
