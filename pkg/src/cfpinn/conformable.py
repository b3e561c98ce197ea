"""Conformable fractional derivative, the diffusion residual, and the
closed-form Gaussian solution used as the ground-truth oracle.

The operator is implemented through the chain-rule identity
T_alpha(f)(t) = t^(1-alpha) * f'(t), which is exact for differentiable f; the
limit-quotient definition only appears in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cfpinn.graph import DomainError, Graph, Node


@dataclass(frozen=True)
class DomainSpec:
    """Space-time rectangle plus the equation constants."""

    t_lo: float = 0.01
    t_hi: float = 1.0
    x_lo: float = -1.0
    x_hi: float = 1.0
    alpha: float = 0.5
    lam: float = 0.5073  # diffusivity

    def __post_init__(self):
        if not self.t_lo > 0:
            raise DomainError("t_lo must be positive (operator undefined at t <= 0)")
        if not self.t_lo < self.t_hi:
            raise DomainError("need t_lo < t_hi")
        if not self.x_lo < self.x_hi:
            raise DomainError("need x_lo < x_hi")
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError("alpha must lie in (0, 1]")
        if not self.lam > 0:
            raise DomainError("lambda must be positive for diffusion")


def conformable_derivative(graph: Graph, u: Node, t: Node, alpha: float) -> Node:
    """t^(1-alpha) * du/dt; for alpha = 1 exactly the ordinary derivative."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    du = graph.differentiate(u, t)
    if alpha == 1.0:
        return du
    return graph.mul(graph.powc(t, 1.0 - alpha), du)


def residual(graph: Graph, u: Node, t: Node, x: Node, lambda_node: Node,
             alpha: float) -> Node:
    """f(t, x) = T^alpha u - lambda * u_xx.

    lambda_node may be a constant (forward mode) or a trainable input
    variable (inverse mode).
    """
    u_x = graph.differentiate(u, x)
    u_xx = graph.differentiate(u_x, x)
    return graph.sub(conformable_derivative(graph, u, t, alpha),
                     graph.mul(lambda_node, u_xx))


def analytic_solution(alpha: float, lam: float, t, x):
    """u(t, x) = sqrt(alpha/(4 pi lam t^alpha)) * exp(-alpha x^2/(4 lam t^alpha)).

    Exact solution of the conformable diffusion equation (the substitution
    tau = t^alpha/alpha reduces it to the classical heat kernel).  Accepts
    scalars or numpy arrays for t and x.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise DomainError("analytic solution requires t > 0")
    x = np.asarray(x, dtype=np.float64)
    ta = t ** alpha
    val = np.sqrt(alpha / (4.0 * np.pi * lam * ta)) * np.exp(
        -alpha * x * x / (4.0 * lam * ta))
    return float(val) if val.ndim == 0 else val


def analytic_solution_node(graph: Graph, t: Node, x: Node, alpha: float,
                           lam: float) -> Node:
    """The closed-form solution as a differentiable graph (oracle for the
    residual check and frozen-network tests)."""
    front = graph.constant(math.sqrt(alpha / (4.0 * math.pi * lam)))
    decay = graph.constant(alpha / (4.0 * lam))
    t_pow = graph.powc(t, -alpha)  # 1/t^alpha
    gauss = graph.exp(graph.neg(graph.mul(decay, graph.mul(graph.mul(x, x), t_pow))))
    return graph.mul(graph.mul(front, graph.powc(t, -alpha / 2.0)), gauss)
