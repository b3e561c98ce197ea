"""Mean-square-error losses for forward, weighted-forward, and inverse
training.

Two layers live here.  `forward_loss` / `inverse_loss` materialize the whole
loss as one differentiable graph node (every training point unrolled into
records) and are the ground truth the other evaluation paths are tested
against.  `PinnObjective` is the production interface handed to the
optimizers: same mathematics, evaluated either through the closed-form fast
path or through a compiled batch program over a single symbolic point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cfpinn.conformable import DomainSpec, residual
from cfpinn.engine import BatchProgram
from cfpinn.fastpath import FastMlpPde
from cfpinn.graph import Graph, Node, NotAVariableError
from cfpinn.net import forward as net_forward
from cfpinn.net import param_count
from cfpinn.sampling import ROLE_COLLOCATION, PointSet


class LengthMismatchError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


class MissingTargetsError(ValueError):
    pass


def mse(pred, target) -> float:
    """(1/N) sum of squared differences."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape[0] != target.shape[0]:
        raise LengthMismatchError(
            f"pred has {pred.shape[0]} entries, target has {target.shape[0]}")
    if pred.shape[0] == 0:
        raise EmptyInputError("mse of empty vectors")
    d = pred - target
    return float(d @ d) / pred.shape[0]


@dataclass(frozen=True)
class LossWeights:
    """Static weighting of the data and residual terms."""

    w_u: float = 1.0
    w_f: float = 1.0

    def __post_init__(self):
        if self.w_u < 0 or self.w_f < 0:
            raise ValueError("loss weights must be >= 0")
        if self.w_u == 0 and self.w_f == 0:
            raise ValueError("at least one loss weight must be positive")


# heavier data weighting used when alpha approaches the classical limit 1
NEAR_CLASSICAL_WEIGHTS = LossWeights(w_u=1.0, w_f=0.1)


@dataclass(frozen=True)
class LossBreakdown:
    """Per-component values; components absent from the active mode are 0."""

    mse_ic: float = 0.0
    mse_bc: float = 0.0
    mse_u: float = 0.0
    mse_f: float = 0.0
    mse_data: float = 0.0
    total: float = 0.0


@dataclass
class LossAssembly:
    """A materialized loss node plus everything needed to evaluate it.

    Unpacks as the pair (node, breakdown); coord_bindings carry the
    training-point coordinates that were introduced as graph variables
    (collocation/data points, which must be differentiable coordinates).
    """

    node: Node
    breakdown: LossBreakdown
    graph: Graph
    param_nodes: list
    coord_bindings: dict
    lambda_node: Node | None = None
    component_nodes: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.node, self.breakdown))

    def bindings(self, params, lam=None) -> dict:
        """Full eval/gradient binding map for a parameter vector."""
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (len(self.param_nodes),):
            raise LengthMismatchError(
                f"expected {len(self.param_nodes)} parameters, got {params.shape}")
        out = dict(self.coord_bindings)
        for nd, v in zip(self.param_nodes, params):
            out[nd] = float(v)
        if self.lambda_node is not None:
            if lam is None:
                raise ValueError("this loss has a trainable lambda; pass lam=")
            out[self.lambda_node] = float(lam)
        return out


def _mean_square(g: Graph, terms) -> Node:
    """Node for (1/n) * sum(term^2); constant 0 for an empty list."""
    if not terms:
        return g.constant(0.0)
    acc = None
    for term in terms:
        sq = g.mul(term, term)
        acc = sq if acc is None else g.add(acc, sq)
    return g.div(acc, g.constant(float(len(terms))))


def forward_loss(arch, params, ic: PointSet, bc: PointSet, colloc: PointSet,
                 domain: DomainSpec, weights: LossWeights | None = None) -> LossAssembly:
    """Loss for the forward problem: w_u (MSE_IC + MSE_BC) + w_f MSE_f.

    IC and BC are averaged separately and summed.  lambda is the fixed
    constant from `domain`; the returned node is differentiable with respect
    to the parameter variables, and the breakdown reports the component
    values at `params`.
    """
    if weights is None:
        weights = LossWeights()
    params = np.asarray(params, dtype=np.float64)
    g = Graph()
    param_nodes = [g.variable(f"p{i}") for i in range(param_count(arch))]
    lam_node = g.constant(domain.lam)
    coord_bindings: dict = {}

    def u_diffs(points):
        diffs = []
        for i in range(len(points)):
            t = g.constant(points.coords[i, 0])
            x = g.constant(points.coords[i, 1])
            u = net_forward(arch, g, param_nodes, t, x)
            diffs.append(g.sub(u, g.constant(points.targets[i])))
        return diffs

    mse_ic_node = _mean_square(g, u_diffs(ic))
    mse_bc_node = _mean_square(g, u_diffs(bc))

    res_terms = []
    for i in range(len(colloc)):
        t = g.variable(f"ct{i}")
        x = g.variable(f"cx{i}")
        coord_bindings[t] = float(colloc.coords[i, 0])
        coord_bindings[x] = float(colloc.coords[i, 1])
        u = net_forward(arch, g, param_nodes, t, x)
        res_terms.append(residual(g, u, t, x, lam_node, domain.alpha))
    mse_f_node = _mean_square(g, res_terms)

    total = g.add(
        g.mul(g.constant(weights.w_u), g.add(mse_ic_node, mse_bc_node)),
        g.mul(g.constant(weights.w_f), mse_f_node))

    asm = LossAssembly(
        node=total, breakdown=LossBreakdown(), graph=g, param_nodes=param_nodes,
        coord_bindings=coord_bindings,
        component_nodes={"mse_ic": mse_ic_node, "mse_bc": mse_bc_node,
                         "mse_f": mse_f_node})
    vals = g.eval_many([mse_ic_node, mse_bc_node, mse_f_node, total],
                       asm.bindings(params))
    asm.breakdown = LossBreakdown(
        mse_ic=vals[0], mse_bc=vals[1], mse_u=vals[0] + vals[1], mse_f=vals[2],
        total=vals[3])
    return asm


def inverse_loss(arch, params, lambda_node: Node, data: PointSet, alpha: float,
                 lam_value: float = 0.0, u_builder=None) -> LossAssembly:
    """Loss for parameter identification: MSE_data + MSE_f over the same points.

    lambda_node must be an input variable of an existing graph; parameter
    variables are created in that graph and the residual is differentiable
    with respect to both.  The breakdown is evaluated at (params, lam_value);
    lam_value defaults to the documented initialization 0.

    u_builder, if given, replaces the network: a callable (graph, t, x) -> Node
    used to substitute a known closed-form solution when validating the
    assembly itself.
    """
    g = lambda_node.graph
    if not g.is_variable(lambda_node):
        raise NotAVariableError("lambda_node must be an input variable")
    if data.targets is None:
        raise MissingTargetsError("inverse training data must carry targets")
    params = np.asarray(params, dtype=np.float64)
    param_nodes = [g.variable(f"p{i}") for i in range(param_count(arch))]
    coord_bindings: dict = {}

    data_terms, res_terms = [], []
    for i in range(len(data)):
        t = g.variable(f"dt{i}")
        x = g.variable(f"dx{i}")
        coord_bindings[t] = float(data.coords[i, 0])
        coord_bindings[x] = float(data.coords[i, 1])
        if u_builder is None:
            u = net_forward(arch, g, param_nodes, t, x)
        else:
            u = u_builder(g, t, x)
        data_terms.append(g.sub(u, g.constant(data.targets[i])))
        res_terms.append(residual(g, u, t, x, lambda_node, alpha))
    mse_data_node = _mean_square(g, data_terms)
    mse_f_node = _mean_square(g, res_terms)
    total = g.add(mse_data_node, mse_f_node)

    asm = LossAssembly(
        node=total, breakdown=LossBreakdown(), graph=g, param_nodes=param_nodes,
        coord_bindings=coord_bindings, lambda_node=lambda_node,
        component_nodes={"mse_data": mse_data_node, "mse_f": mse_f_node})
    vals = g.eval_many([mse_data_node, mse_f_node, total],
                       asm.bindings(params, lam=lam_value))
    asm.breakdown = LossBreakdown(mse_data=vals[0], mse_f=vals[1], total=vals[2])
    return asm


class PinnObjective:
    """Production objective: theta -> (loss, gradient) for the optimizers.

    Forward mode trains the network parameters against IC/BC data plus the
    collocation residual; inverse mode appends the trainable lambda as the
    last entry of theta and fits interior data plus the residual at the same
    points.  engine="fast" uses the closed-form evaluator; engine="graph"
    compiles the symbolic residual once and batches it (slower, used for
    cross-checks).  Both produce identical mathematics; the loss value is
    assembled from per-set sums in a fixed order, so repeated calls agree
    bitwise.
    """

    def __init__(self, arch, domain: DomainSpec, *, ic=None, bc=None,
                 colloc=None, data=None, weights: LossWeights | None = None,
                 engine: str = "fast", rescale: bool = False):
        if engine not in ("fast", "graph"):
            raise ValueError(f"unknown engine {engine!r}")
        if data is not None:
            if ic is not None or bc is not None or colloc is not None:
                raise ValueError("pass either data= (inverse) or ic/bc/colloc (forward)")
            if data.targets is None:
                raise MissingTargetsError("inverse training data must carry targets")
            self.mode = "inverse"
        else:
            if ic is None or bc is None or colloc is None:
                raise ValueError("forward mode needs ic, bc, and colloc point sets")
            self.mode = "forward"
        self.arch = arch
        self.domain = domain
        self.ic, self.bc, self.colloc, self.data = ic, bc, colloc, data
        self.weights = weights if weights is not None else LossWeights()
        self.engine = engine
        self.rescale = ((domain.t_lo, domain.t_hi, domain.x_lo, domain.x_hi)
                        if rescale else None)
        self.n_net_params = param_count(arch)
        self.n_params = self.n_net_params + (1 if self.mode == "inverse" else 0)

        if engine == "fast":
            self._fast = FastMlpPde(arch, domain.alpha, self.rescale)
        else:
            self._build_graph_programs()

    def _build_graph_programs(self):
        g = Graph()
        pn = [g.variable(f"p{i}") for i in range(self.n_net_params)]
        t = g.variable("t")
        x = g.variable("x")
        u = net_forward(self.arch, g, pn, t, x, self.rescale)
        if self.mode == "inverse":
            lam_node = g.variable("lam")
            r = residual(g, u, t, x, lam_node, self.domain.alpha)
            self._prog = BatchProgram(g, [u, r], [t, x], pn + [lam_node])
            self._grad_vars = pn + [lam_node]
        else:
            lam_node = g.constant(self.domain.lam)
            r = residual(g, u, t, x, lam_node, self.domain.alpha)
            self._prog_u = BatchProgram(g, [u], [t, x], pn)
            self._prog_r = BatchProgram(g, [r], [t, x], pn)
            self._grad_vars = pn
        g.freeze()

    # ------------------------------------------------------------------ parts

    def split(self, theta):
        """(network parameters, lambda) view of a flat theta."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise LengthMismatchError(
                f"expected {self.n_params} entries, got {theta.shape}")
        if self.mode == "inverse":
            return theta[:self.n_net_params], float(theta[-1])
        return theta, self.domain.lam

    def _sums(self, theta, want_grad):
        """Per-set squared-error sums and (optionally) the total gradient."""
        net_theta, lam = self.split(theta)
        w = self.weights
        if self.mode == "forward":
            n_ic, n_bc, n_f = len(self.ic), len(self.bc), len(self.colloc)
            if self.engine == "fast":
                sse_ic, _, g_ic, _ = self._fast.sq_loss_grad(
                    net_theta, self.ic.coords, lam,
                    u_targets=self.ic.targets, u_coeff=w.w_u / n_ic)
                sse_bc, _, g_bc, _ = self._fast.sq_loss_grad(
                    net_theta, self.bc.coords, lam,
                    u_targets=self.bc.targets, u_coeff=w.w_u / n_bc)
                _, sse_f, g_f, _ = self._fast.sq_loss_grad(
                    net_theta, self.colloc.coords, lam, r_coeff=w.w_f / n_f)
                grad = g_ic + g_bc + g_f if want_grad else None
            else:
                zeros = np.zeros(n_f)
                s_ic, g_ic = self._prog_u.value_and_grad(
                    self.ic.coords, net_theta,
                    [(0, self.ic.targets, w.w_u / n_ic)], self._grad_vars)
                s_bc, g_bc = self._prog_u.value_and_grad(
                    self.bc.coords, net_theta,
                    [(0, self.bc.targets, w.w_u / n_bc)], self._grad_vars)
                s_f, g_f = self._prog_r.value_and_grad(
                    self.colloc.coords, net_theta,
                    [(0, zeros, w.w_f / n_f)], self._grad_vars)
                sse_ic, sse_bc, sse_f = s_ic[0], s_bc[0], s_f[0]
                grad = g_ic + g_bc + g_f if want_grad else None
            return {"ic": (sse_ic, n_ic), "bc": (sse_bc, n_bc),
                    "f": (sse_f, n_f)}, grad

        n = len(self.data)
        if self.engine == "fast":
            sse_u, sse_r, g_net, g_lam = self._fast.sq_loss_grad(
                net_theta, self.data.coords, lam,
                u_targets=self.data.targets, u_coeff=1.0 / n, r_coeff=1.0 / n,
                want_lam_grad=True)
            grad = np.concatenate([g_net, [g_lam]]) if want_grad else None
        else:
            fixed = np.concatenate([net_theta, [lam]])
            sse, grad = self._prog.value_and_grad(
                self.data.coords, fixed,
                [(0, self.data.targets, 1.0 / n), (1, np.zeros(n), 1.0 / n)],
                self._grad_vars)
            sse_u, sse_r = sse[0], sse[1]
        return {"data": (sse_u, n), "f": (sse_r, n)}, grad

    def _assemble(self, sums) -> LossBreakdown:
        if self.mode == "forward":
            m_ic = sums["ic"][0] / sums["ic"][1]
            m_bc = sums["bc"][0] / sums["bc"][1]
            m_f = sums["f"][0] / sums["f"][1]
            total = self.weights.w_u * (m_ic + m_bc) + self.weights.w_f * m_f
            return LossBreakdown(mse_ic=m_ic, mse_bc=m_bc, mse_u=m_ic + m_bc,
                                 mse_f=m_f, total=total)
        m_data = sums["data"][0] / sums["data"][1]
        m_f = sums["f"][0] / sums["f"][1]
        return LossBreakdown(mse_data=m_data, mse_f=m_f, total=m_data + m_f)

    # -------------------------------------------------------------- interface

    def value_and_grad(self, theta):
        sums, grad = self._sums(theta, want_grad=True)
        return self._assemble(sums).total, grad

    __call__ = value_and_grad

    def breakdown(self, theta) -> LossBreakdown:
        sums, _ = self._sums(theta, want_grad=False)
        return self._assemble(sums)

    def predict(self, theta, pts) -> np.ndarray:
        """Network values at (t, x) rows, ignoring the lambda entry if any."""
        net_theta, lam = self.split(theta)
        pts = np.asarray(pts, dtype=np.float64)
        if self.engine == "fast":
            return self._fast.predict(net_theta, pts)
        if self.mode == "inverse":
            fixed = np.concatenate([net_theta, [lam]])
            return self._prog.eval(pts, fixed)[:, 0]
        return self._prog_u.eval(pts, net_theta)[:, 0]
