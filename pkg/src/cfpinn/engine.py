"""Vectorized batch evaluation of one symbolic graph under per-point bindings.

The graph is built once per architecture; evaluating a batch of points then
amounts to sweeping the same record list with numpy arrays (one lane per
point) instead of scalars.  `value_and_grad` additionally runs the numeric
adjoint sweep per lane and reduces parameter adjoints over the batch in a
fixed chunked order, so results are bitwise reproducible.

Intended for moderate workloads (oracles, metrics, equivalence tests); the
losses module has a closed-form fast evaluator for production training.
"""

from __future__ import annotations

import numpy as np

from cfpinn.graph import (
    ADD, CONST, DIV, EXP, LOG, MUL, NEG, POW, SQRT, SUB, TANH, VAR,
    Graph, Node, UnboundVariableError,
)

# roughly how many doubles a forward-values buffer may hold (keeps peak
# memory near 120 MB even for third-order graphs of the default network)
_BUFFER_DOUBLES = 1.5e7


class BatchProgram:
    """Compiled view of a graph restricted to the ancestry of some outputs.

    point_vars vary per batch row; fixed_vars are shared by all rows (network
    parameters, lambda).  Any other variable in the pruned ancestry is an
    error, mirroring eval()'s unbound-variable contract.
    """

    def __init__(self, graph: Graph, outputs: list[Node], point_vars: list[Node],
                 fixed_vars: list[Node]):
        self.graph = graph
        need = graph._needed([n.index for n in outputs])
        order = np.flatnonzero(need)
        remap = -np.ones(len(graph), dtype=np.int64)
        remap[order] = np.arange(len(order))

        self.n_nodes = len(order)
        self.op = np.array([graph._op[i] for i in order], dtype=np.int8)
        self.a = np.array([remap[graph._a[i]] if graph._a[i] >= 0 else -1 for i in order],
                          dtype=np.int64)
        self.b = np.array([remap[graph._b[i]] if graph._b[i] >= 0 else -1 for i in order],
                          dtype=np.int64)
        self.c = np.array([graph._c[i] for i in order], dtype=np.float64)

        point_pos = {v.index: k for k, v in enumerate(point_vars)}
        fixed_pos = {v.index: k for k, v in enumerate(fixed_vars)}
        # var source: (kind, column); kind 0 = point column, 1 = fixed column
        self.var_rows = []
        for i in order:
            if graph._op[i] == VAR:
                if i in point_pos:
                    self.var_rows.append((remap[i], 0, point_pos[i]))
                elif i in fixed_pos:
                    self.var_rows.append((remap[i], 1, fixed_pos[i]))
                else:
                    name = graph._var_names[graph._slot[i]]
                    raise UnboundVariableError(
                        f"variable '{name}' is reachable but not supplied")
        self.out_rows = np.array([remap[n.index] for n in outputs], dtype=np.int64)
        self.fixed_rows = {v.index: remap[v.index] for v in fixed_vars if remap[v.index] >= 0}
        self.n_point_vars = len(point_vars)
        self.n_fixed_vars = len(fixed_vars)

    def _chunk_size(self, requested):
        if requested is not None:
            return int(requested)
        return max(64, int(_BUFFER_DOUBLES // max(self.n_nodes, 1)))

    def _forward_chunk(self, vals, pts, fixed):
        n = pts.shape[0]
        op, a, b, c = self.op, self.a, self.b, self.c
        for row, kind, col in self.var_rows:
            vals[row, :n] = pts[:, col] if kind == 0 else fixed[col]
        with np.errstate(all="ignore"):
            for i in range(self.n_nodes):
                o = op[i]
                if o == CONST:
                    vals[i, :n] = c[i]
                elif o == VAR:
                    continue
                elif o == ADD:
                    np.add(vals[a[i], :n], vals[b[i], :n], out=vals[i, :n])
                elif o == SUB:
                    np.subtract(vals[a[i], :n], vals[b[i], :n], out=vals[i, :n])
                elif o == MUL:
                    np.multiply(vals[a[i], :n], vals[b[i], :n], out=vals[i, :n])
                elif o == DIV:
                    np.divide(vals[a[i], :n], vals[b[i], :n], out=vals[i, :n])
                elif o == NEG:
                    np.negative(vals[a[i], :n], out=vals[i, :n])
                elif o == POW:
                    np.power(vals[a[i], :n], c[i], out=vals[i, :n])
                elif o == EXP:
                    np.exp(vals[a[i], :n], out=vals[i, :n])
                elif o == TANH:
                    np.tanh(vals[a[i], :n], out=vals[i, :n])
                elif o == SQRT:
                    np.sqrt(vals[a[i], :n], out=vals[i, :n])
                elif o == LOG:
                    np.log(vals[a[i], :n], out=vals[i, :n])

    def eval(self, point_vals, fixed_vals=(), chunk=None):
        """Evaluate all outputs at each point row; returns (N, n_outputs)."""
        pts = np.asarray(point_vals, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        fixed = np.asarray(fixed_vals, dtype=np.float64)
        n_total = pts.shape[0]
        csize = min(self._chunk_size(chunk), max(n_total, 1))
        vals = np.empty((self.n_nodes, csize), dtype=np.float64)
        out = np.empty((n_total, len(self.out_rows)), dtype=np.float64)
        for lo in range(0, n_total, csize):
            hi = min(lo + csize, n_total)
            self._forward_chunk(vals, pts[lo:hi], fixed)
            for k, row in enumerate(self.out_rows):
                out[lo:hi, k] = vals[row, : hi - lo]
        return out

    def value_and_grad(self, point_vals, fixed_vals, terms, grad_vars, chunk=None):
        """Sums of squared misfits and their gradient w.r.t. fixed variables.

        terms: list of (output_position, targets, coeff).  The implied scalar
        is  sum_k coeff_k * SSE_k  with  SSE_k = sum_i (out_k,i - y_k,i)^2;
        returns (per-term SSE vector, gradient of the implied scalar w.r.t.
        grad_vars).  Reduction order is fixed (chunk-major), so repeated calls
        agree bitwise.
        """
        pts = np.asarray(point_vals, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        fixed = np.asarray(fixed_vals, dtype=np.float64)
        n_total = pts.shape[0]
        csize = min(self._chunk_size(chunk) // 2 + 1, max(n_total, 1))
        vals = np.empty((self.n_nodes, csize), dtype=np.float64)
        adj = np.empty((self.n_nodes, csize), dtype=np.float64)

        grad_rows = []
        for v in grad_vars:
            grad_rows.append(self.fixed_rows.get(v.index, -1))

        sse = np.zeros(len(terms), dtype=np.float64)
        grad = np.zeros(len(grad_vars), dtype=np.float64)
        op, a, b, c = self.op, self.a, self.b, self.c

        for lo in range(0, n_total, csize):
            hi = min(lo + csize, n_total)
            n = hi - lo
            self._forward_chunk(vals, pts[lo:hi], fixed)
            adj[:, :n] = 0.0
            for k, (pos, targets, coeff) in enumerate(terms):
                row = self.out_rows[pos]
                resid = vals[row, :n] - np.asarray(targets, dtype=np.float64)[lo:hi]
                sse[k] += float(resid @ resid)
                adj[row, :n] += (2.0 * coeff) * resid
            with np.errstate(all="ignore"):
                for i in range(self.n_nodes - 1, -1, -1):
                    o = op[i]
                    if o == CONST or o == VAR:
                        continue
                    g = adj[i, :n]
                    ai, bi = a[i], b[i]
                    if o == ADD:
                        adj[ai, :n] += g
                        adj[bi, :n] += g
                    elif o == SUB:
                        adj[ai, :n] += g
                        adj[bi, :n] -= g
                    elif o == MUL:
                        adj[ai, :n] += g * vals[bi, :n]
                        adj[bi, :n] += g * vals[ai, :n]
                    elif o == DIV:
                        adj[ai, :n] += g / vals[bi, :n]
                        adj[bi, :n] -= g * vals[i, :n] / vals[bi, :n]
                    elif o == NEG:
                        adj[ai, :n] -= g
                    elif o == POW:
                        adj[ai, :n] += g * (c[i] * vals[ai, :n] ** (c[i] - 1.0))
                    elif o == EXP:
                        adj[ai, :n] += g * vals[i, :n]
                    elif o == TANH:
                        adj[ai, :n] += g * (1.0 - vals[i, :n] * vals[i, :n])
                    elif o == SQRT:
                        adj[ai, :n] += g / (2.0 * vals[i, :n])
                    elif o == LOG:
                        adj[ai, :n] += g / vals[ai, :n]
            for j, row in enumerate(grad_rows):
                if row >= 0:
                    grad[j] += float(np.sum(adj[row, :n]))
        return sse, grad
