"""Fully connected tanh network u_theta(t, x) expressed as graph records.

Parameters live in one flat vector (layer 1 weights row-major, layer 1
biases, layer 2 weights, ...); the same ordering is used by checkpoints, the
fast evaluator, and the optimizers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfpinn.graph import Graph, Node

DEFAULT_WIDTHS = (2,) + (20,) * 8 + (1,)  # 3021 parameters


class ShapeMismatchError(Exception):
    pass


@dataclass(frozen=True)
class Architecture:
    """Layer widths, input first, output last."""

    widths: tuple[int, ...] = DEFAULT_WIDTHS

    def __post_init__(self):
        w = tuple(int(v) for v in self.widths)
        object.__setattr__(self, "widths", w)
        if len(w) < 2:
            raise ShapeMismatchError("need at least input and output widths")
        if any(v < 1 for v in w):
            raise ShapeMismatchError("all widths must be >= 1")

    @property
    def n_hidden(self):
        return len(self.widths) - 2

    @classmethod
    def from_hidden(cls, layers: int, width: int):
        return cls((2,) + (width,) * layers + (1,))


def param_count(arch) -> int:
    """Total trainable scalars: sum over layers of in*out + out."""
    widths = arch.widths if isinstance(arch, Architecture) else tuple(arch)
    return sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(len(widths) - 1))


def layer_shapes(arch):
    widths = arch.widths if isinstance(arch, Architecture) else tuple(arch)
    return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]


def init_params(arch, seed: int) -> np.ndarray:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    parts = []
    for out_w, in_w in layer_shapes(arch):
        bound = np.sqrt(6.0 / (in_w + out_w))
        parts.append(rng.uniform(-bound, bound, size=(out_w, in_w)).ravel())
        parts.append(np.zeros(out_w))
    return np.concatenate(parts)


def unpack_params(arch, theta):
    """Flat vector -> [(W, b), ...] views in layer order."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (param_count(arch),):
        raise ShapeMismatchError(
            f"expected {param_count(arch)} parameters, got {theta.shape}")
    out, offset = [], 0
    for out_w, in_w in layer_shapes(arch):
        w = theta[offset:offset + out_w * in_w].reshape(out_w, in_w)
        offset += out_w * in_w
        b = theta[offset:offset + out_w]
        offset += out_w
        out.append((w, b))
    return out


def forward(arch: Architecture, graph: Graph, param_nodes, t: Node, x: Node,
            rescale=None) -> Node:
    """Build the network output node: tanh hidden layers, linear output.

    param_nodes follow the flat layout; rescale, if given, is a
    (t_lo, t_hi, x_lo, x_hi) rectangle mapped affinely onto [-1, 1]^2 before
    the first layer.
    """
    if arch.widths[0] != 2 or arch.widths[-1] != 1:
        raise ShapeMismatchError("scalar-field network needs widths (2, ..., 1)")
    if len(param_nodes) != param_count(arch):
        raise ShapeMismatchError(
            f"expected {param_count(arch)} parameter nodes, got {len(param_nodes)}")

    if rescale is not None:
        t_lo, t_hi, x_lo, x_hi = rescale
        t = (t - t_lo) * (2.0 / (t_hi - t_lo)) - 1.0
        x = (x - x_lo) * (2.0 / (x_hi - x_lo)) - 1.0

    h = [t, x]
    offset = 0
    shapes = layer_shapes(arch)
    for li, (out_w, in_w) in enumerate(shapes):
        weights = param_nodes[offset:offset + out_w * in_w]
        offset += out_w * in_w
        biases = param_nodes[offset:offset + out_w]
        offset += out_w
        nxt = []
        for i in range(out_w):
            s = None
            for j in range(in_w):
                term = graph.mul(weights[i * in_w + j], h[j])
                s = term if s is None else graph.add(s, term)
            s = graph.add(s, biases[i])
            nxt.append(s if li == len(shapes) - 1 else graph.tanh(s))
        h = nxt
    return h[0]
