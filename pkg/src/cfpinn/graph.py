"""Scalar computation graphs with graph-growing reverse-mode differentiation.

A Graph is a flat, append-only list of primitive records (constants, input
variables, and arithmetic ops).  Operand references always point backwards, so
the record order is a topological order and evaluation is a single forward
sweep.  `differentiate` walks a node's ancestry in reverse and *appends* the
adjoint computation as new records in the same graph; the result is an ordinary
node, so derivatives can be nested to any order (u_t, u_xx, then gradients of
losses built from them).  `gradient` performs the same reverse sweep
numerically, which gives every parameter's partial in one pass.

The primitive set (add, sub, mul, div, neg, pow-by-constant, exp, tanh, sqrt,
log) is closed under differentiation: each rule below only emits these ops.
"""

from __future__ import annotations

import math

import numpy as np

# op codes; order matters only for readability of dumps
CONST = 0
VAR = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
NEG = 6
POW = 7  # exponent is a constant real stored in the payload, not a node
EXP = 8
TANH = 9
SQRT = 10
LOG = 11

OP_NAMES = {
    CONST: "const", VAR: "var", ADD: "add", SUB: "sub", MUL: "mul",
    DIV: "div", NEG: "neg", POW: "pow", EXP: "exp", TANH: "tanh",
    SQRT: "sqrt", LOG: "log",
}

_UNARY = (NEG, EXP, TANH, SQRT, LOG)
_BINARY = (ADD, SUB, MUL, DIV)


class GraphError(Exception):
    pass


class UnboundVariableError(GraphError):
    """A variable reachable from the evaluated node has no binding."""


class DomainError(GraphError):
    """An operand value fell outside a primitive's domain (log(<=0), x/0, ...)."""


class NotAVariableError(GraphError):
    """differentiate/gradient was pointed at a node that is not an input variable."""


class FrozenGraphError(GraphError):
    """Attempted to append records after freeze()."""


class Node:
    """Handle to one record of a Graph; only valid for the graph that made it."""

    __slots__ = ("graph", "index")

    def __init__(self, graph: "Graph", index: int):
        self.graph = graph
        self.index = index

    # arithmetic sugar so expressions read like math; plain numbers are
    # promoted to constant records
    def _coerce(self, other):
        if isinstance(other, Node):
            if other.graph is not self.graph:
                raise GraphError("nodes belong to different graphs")
            return other
        return self.graph.constant(float(other))

    def __add__(self, other):
        return self.graph.add(self, self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.graph.sub(self, self._coerce(other))

    def __rsub__(self, other):
        return self.graph.sub(self._coerce(other), self)

    def __mul__(self, other):
        return self.graph.mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.graph.div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return self.graph.div(self._coerce(other), self)

    def __neg__(self):
        return self.graph.neg(self)

    def __pow__(self, p):
        return self.graph.powc(self, float(p))

    def __eq__(self, other):
        return isinstance(other, Node) and other.graph is self.graph and other.index == self.index

    def __hash__(self):
        return hash((id(self.graph), self.index))

    def __repr__(self):
        g = self.graph
        return f"Node({OP_NAMES[g._op[self.index]]}@{self.index})"


class Graph:
    """Append-only scalar computation graph."""

    def __init__(self):
        self._op: list[int] = []
        self._a: list[int] = []  # first operand index, -1 if none
        self._b: list[int] = []  # second operand index, -1 if none
        self._c: list[float] = []  # payload: CONST value or POW exponent
        self._slot: list[int] = []  # VAR records: binding slot id, else -1
        self._var_names: list[str] = []  # by slot
        self._var_index: list[int] = []  # slot -> node index
        self._memo: dict = {}  # (op, a, b, c) -> index, hash-consing
        self._frozen = False

    def __len__(self):
        return len(self._op)

    @property
    def n_variables(self):
        return len(self._var_names)

    def freeze(self):
        """Lock the graph; evaluation-time sharing across workers is then safe."""
        self._frozen = True

    # ------------------------------------------------------------------ build

    def _append(self, op, a, b, c, slot=-1):
        if self._frozen:
            raise FrozenGraphError("graph is frozen")
        self._op.append(op)
        self._a.append(a)
        self._b.append(b)
        self._c.append(c)
        self._slot.append(slot)
        return len(self._op) - 1

    def constant(self, value) -> Node:
        value = float(value)
        key = (CONST, -1, -1, value)
        idx = self._memo.get(key)
        if idx is None:
            idx = self._append(CONST, -1, -1, value)
            self._memo[key] = idx
        return Node(self, idx)

    def variable(self, name: str | None = None) -> Node:
        slot = len(self._var_names)
        idx = self._append(VAR, -1, -1, 0.0, slot=slot)
        self._var_names.append(name if name is not None else f"v{slot}")
        self._var_index.append(idx)
        return Node(self, idx)

    def is_variable(self, node: Node) -> bool:
        return self._op[node.index] == VAR

    def _const_val(self, idx):
        """Payload if idx is a constant record, else None."""
        if idx >= 0 and self._op[idx] == CONST:
            return self._c[idx]
        return None

    def _emit(self, op, a=-1, b=-1, c=0.0) -> int:
        """Append one op with peephole simplification and hash-consing.

        The zero/one eliminations here are what keeps nested differentiation
        tractable: adjoint seeds are 1, and most partials multiply or add
        structural constants.  Folding never changes finite-arithmetic values
        (it can only suppress a DomainError that the unfolded node would raise
        on pathological bindings, e.g. 0 * (1/t) at t = 0).
        """
        ca, cb = self._const_val(a), self._const_val(b)

        # constant folding
        if op in _BINARY and ca is not None and cb is not None:
            try:
                v = _apply_binary(op, ca, cb)
            except (ValueError, ZeroDivisionError, OverflowError):
                v = None
            if v is not None and math.isfinite(v):
                return self.constant(v).index
        if op in _UNARY and ca is not None:
            try:
                v = _apply_unary(op, ca, 0.0)
            except (ValueError, ZeroDivisionError, OverflowError):
                v = None
            if v is not None and math.isfinite(v):
                return self.constant(v).index
        if op == POW and ca is not None:
            try:
                v = ca ** c
            except (ValueError, ZeroDivisionError, OverflowError):
                v = None
            if isinstance(v, float) and math.isfinite(v):
                return self.constant(v).index

        # identities
        if op == ADD:
            if ca == 0.0:
                return b
            if cb == 0.0:
                return a
        elif op == SUB:
            if cb == 0.0:
                return a
            if ca == 0.0:
                return self._emit(NEG, b)
        elif op == MUL:
            if ca == 1.0:
                return b
            if cb == 1.0:
                return a
            if ca == 0.0 or cb == 0.0:
                return self.constant(0.0).index
            if ca == -1.0:
                return self._emit(NEG, b)
            if cb == -1.0:
                return self._emit(NEG, a)
        elif op == DIV:
            if cb == 1.0:
                return a
        elif op == NEG:
            if self._op[a] == NEG:
                return self._a[a]
        elif op == POW:
            if c == 1.0:
                return a
            if c == 0.0:
                return self.constant(1.0).index

        key = (op, a, b, c)
        idx = self._memo.get(key)
        if idx is None:
            idx = self._append(op, a, b, c)
            self._memo[key] = idx
        return idx

    def add(self, a: Node, b: Node) -> Node:
        return Node(self, self._emit(ADD, a.index, b.index))

    def sub(self, a: Node, b: Node) -> Node:
        return Node(self, self._emit(SUB, a.index, b.index))

    def mul(self, a: Node, b: Node) -> Node:
        return Node(self, self._emit(MUL, a.index, b.index))

    def div(self, a: Node, b: Node) -> Node:
        return Node(self, self._emit(DIV, a.index, b.index))

    def neg(self, a: Node) -> Node:
        return Node(self, self._emit(NEG, a.index))

    def powc(self, a: Node, p: float) -> Node:
        """a raised to a constant real exponent."""
        return Node(self, self._emit(POW, a.index, c=float(p)))

    def exp(self, a: Node) -> Node:
        return Node(self, self._emit(EXP, a.index))

    def tanh(self, a: Node) -> Node:
        return Node(self, self._emit(TANH, a.index))

    def sqrt(self, a: Node) -> Node:
        return Node(self, self._emit(SQRT, a.index))

    def log(self, a: Node) -> Node:
        return Node(self, self._emit(LOG, a.index))

    # ------------------------------------------------------------- evaluation

    def _needed(self, roots):
        """Boolean mask of records reachable from the given root indices."""
        need = np.zeros(len(self._op), dtype=bool)
        stack = list(roots)
        while stack:
            i = stack.pop()
            if need[i]:
                continue
            need[i] = True
            a, b = self._a[i], self._b[i]
            if a >= 0 and not need[a]:
                stack.append(a)
            if b >= 0 and not need[b]:
                stack.append(b)
        return need

    def _slot_values(self, bindings):
        vals = {}
        for node, v in bindings.items():
            if not isinstance(node, Node) or node.graph is not self:
                raise GraphError("binding key is not a node of this graph")
            if self._op[node.index] != VAR:
                raise NotAVariableError(f"binding target {node!r} is not a variable")
            vals[self._slot[node.index]] = v
        return vals

    def eval(self, node: Node, bindings) -> float:
        """Value of `node` under `bindings` (a map from variable Node to real).

        One topological sweep over the reachable subgraph.  Raises
        UnboundVariableError / DomainError naming the offending record.
        """
        out = self.eval_many([node], bindings)
        return out[0]

    def eval_many(self, nodes, bindings) -> list[float]:
        """Evaluate several nodes in one shared sweep."""
        slot_vals = self._slot_values(bindings)
        need = self._needed([n.index for n in nodes])
        vals = np.empty(len(self._op), dtype=np.float64)
        for i in np.flatnonzero(need):
            op = self._op[i]
            if op == CONST:
                vals[i] = self._c[i]
            elif op == VAR:
                s = self._slot[i]
                if s not in slot_vals:
                    raise UnboundVariableError(
                        f"variable '{self._var_names[s]}' (node {i}) is unbound")
                vals[i] = float(slot_vals[s])
            elif op == POW:
                vals[i] = _checked_pow(vals[self._a[i]], self._c[i], i)
            elif op in _BINARY:
                vals[i] = _checked_binary(op, vals[self._a[i]], vals[self._b[i]], i)
            else:
                vals[i] = _checked_unary(op, vals[self._a[i]], i)
        return [float(vals[n.index]) for n in nodes]

    # -------------------------------------------------------- differentiation

    def _depends_on(self, wrt_index, upto):
        """dep[i] = record i depends on the variable record wrt_index (i <= upto)."""
        dep = np.zeros(upto + 1, dtype=bool)
        if wrt_index <= upto:
            dep[wrt_index] = True
        for i in range(wrt_index + 1, upto + 1):
            a, b = self._a[i], self._b[i]
            dep[i] = (a >= 0 and dep[a]) or (b >= 0 and dep[b])
        return dep

    def differentiate(self, node: Node, wrt: Node) -> Node:
        """Append records computing d(node)/d(wrt); returns the new node.

        Reverse accumulation: walk the ancestry of `node` from the top,
        emitting adjoint records.  Hash-consing in _emit shares repeated
        partials (e.g. the 1 - tanh^2 factors) across calls, which keeps
        third-order graphs compact.
        """
        if not isinstance(wrt, Node) or wrt.graph is not self:
            raise GraphError("wrt is not a node of this graph")
        if self._op[wrt.index] != VAR:
            raise NotAVariableError("wrt must be an input variable")

        top = node.index
        dep = self._depends_on(wrt.index, top)
        if not dep[top]:
            return self.constant(0.0)
        need = self._needed([top])

        one = self.constant(1.0)
        adj: dict[int, int] = {top: one.index}

        def accumulate(o, contrib):
            prev = adj.get(o)
            adj[o] = contrib if prev is None else self._emit(ADD, prev, contrib)

        for i in range(top, -1, -1):
            g = adj.get(i)
            if g is None or not need[i] or not dep[i]:
                continue
            op = self._op[i]
            if op in (CONST, VAR):
                continue
            a, b = self._a[i], self._b[i]
            if op == ADD:
                if dep[a]:
                    accumulate(a, g)
                if dep[b]:
                    accumulate(b, g)
            elif op == SUB:
                if dep[a]:
                    accumulate(a, g)
                if dep[b]:
                    accumulate(b, self._emit(NEG, g))
            elif op == MUL:
                if dep[a]:
                    accumulate(a, self._emit(MUL, g, b))
                if dep[b]:
                    accumulate(b, self._emit(MUL, g, a))
            elif op == DIV:
                if dep[a]:
                    accumulate(a, self._emit(DIV, g, b))
                if dep[b]:
                    # d(a/b)/db = -(a/b)/b, reusing the quotient record itself
                    accumulate(b, self._emit(NEG, self._emit(DIV, self._emit(MUL, g, i), b)))
            elif op == NEG:
                accumulate(a, self._emit(NEG, g))
            elif op == POW:
                p = self._c[i]
                factor = self._emit(MUL, self.constant(p).index, self._emit(POW, a, c=p - 1.0))
                accumulate(a, self._emit(MUL, g, factor))
            elif op == EXP:
                accumulate(a, self._emit(MUL, g, i))
            elif op == TANH:
                sech2 = self._emit(SUB, one.index, self._emit(MUL, i, i))
                accumulate(a, self._emit(MUL, g, sech2))
            elif op == SQRT:
                accumulate(a, self._emit(DIV, g, self._emit(MUL, self.constant(2.0).index, i)))
            elif op == LOG:
                accumulate(a, self._emit(DIV, g, a))

        d = adj.get(wrt.index)
        return self.constant(0.0) if d is None else Node(self, d)

    def gradient(self, loss: Node, params, bindings) -> np.ndarray:
        """d(loss)/d(p) for every p in params, by one numeric reverse sweep.

        Mirrors the partial-derivative rules of differentiate() operation for
        operation, so the two agree to rounding.  Cost is a small constant
        multiple of one eval, independent of len(params).
        """
        for p in params:
            if self._op[p.index] != VAR:
                raise NotAVariableError("params must be input variables")
        slot_vals = self._slot_values(bindings)
        top = loss.index
        need = self._needed([top])
        vals = np.empty(top + 1, dtype=np.float64)
        for i in np.flatnonzero(need[: top + 1]):
            op = self._op[i]
            if op == CONST:
                vals[i] = self._c[i]
            elif op == VAR:
                s = self._slot[i]
                if s not in slot_vals:
                    raise UnboundVariableError(
                        f"variable '{self._var_names[s]}' (node {i}) is unbound")
                vals[i] = float(slot_vals[s])
            elif op == POW:
                vals[i] = _checked_pow(vals[self._a[i]], self._c[i], i)
            elif op in _BINARY:
                vals[i] = _checked_binary(op, vals[self._a[i]], vals[self._b[i]], i)
            else:
                vals[i] = _checked_unary(op, vals[self._a[i]], i)

        adj = np.zeros(top + 1, dtype=np.float64)
        has = np.zeros(top + 1, dtype=bool)
        adj[top] = 1.0
        has[top] = True
        for i in range(top, -1, -1):
            if not has[i] or not need[i]:
                continue
            op = self._op[i]
            if op in (CONST, VAR):
                continue
            g = adj[i]
            a, b = self._a[i], self._b[i]
            if op == ADD:
                adj[a] += g
                has[a] = True
                adj[b] += g
                has[b] = True
            elif op == SUB:
                adj[a] += g
                has[a] = True
                adj[b] += -g
                has[b] = True
            elif op == MUL:
                adj[a] += g * vals[b]
                has[a] = True
                adj[b] += g * vals[a]
                has[b] = True
            elif op == DIV:
                adj[a] += g / vals[b]
                has[a] = True
                adj[b] += -(g * vals[i] / vals[b])
                has[b] = True
            elif op == NEG:
                adj[a] += -g
                has[a] = True
            elif op == POW:
                p = self._c[i]
                adj[a] += g * (p * vals[a] ** (p - 1.0))
                has[a] = True
            elif op == EXP:
                adj[a] += g * vals[i]
                has[a] = True
            elif op == TANH:
                adj[a] += g * (1.0 - vals[i] * vals[i])
                has[a] = True
            elif op == SQRT:
                adj[a] += g / (2.0 * vals[i])
                has[a] = True
            elif op == LOG:
                adj[a] += g / vals[a]
                has[a] = True

        out = np.zeros(len(params), dtype=np.float64)
        for k, p in enumerate(params):
            if p.index <= top and has[p.index]:
                out[k] = adj[p.index]
        return out


def _apply_unary(op, x, payload):
    if op == NEG:
        return -x
    if op == EXP:
        return math.exp(x)
    if op == TANH:
        return math.tanh(x)
    if op == SQRT:
        return math.sqrt(x)
    if op == LOG:
        return math.log(x)
    raise AssertionError(op)


def _apply_binary(op, x, y):
    if op == ADD:
        return x + y
    if op == SUB:
        return x - y
    if op == MUL:
        return x * y
    if op == DIV:
        return x / y
    raise AssertionError(op)


def _checked_unary(op, x, i):
    if op == SQRT and x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r} at node {i}")
    if op == LOG and x <= 0.0:
        raise DomainError(f"log of non-positive value {x!r} at node {i}")
    if op == EXP:
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    return _apply_unary(op, x, 0.0)


def _checked_binary(op, x, y, i):
    if op == DIV and y == 0.0:
        raise DomainError(f"division by zero at node {i}")
    return _apply_binary(op, x, y)


def _checked_pow(x, p, i):
    if x < 0.0 and p != round(p):
        raise DomainError(f"fractional power of negative base {x!r} at node {i}")
    if x == 0.0 and p < 0.0:
        raise DomainError(f"zero base with negative exponent at node {i}")
    try:
        return float(x ** p)
    except OverflowError:
        return math.inf
