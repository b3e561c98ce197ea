"""Batch engine vs scalar graph evaluation: same graph, same numbers."""

import numpy as np
import pytest

from cfpinn.engine import BatchProgram
from cfpinn.graph import Graph, UnboundVariableError


def build_expr(g, t, x, ps):
    u = g.tanh(ps[0] * t + ps[1] * x + ps[2])
    return g.exp(u) * g.sqrt(t + 1.5) + (x ** 2.0) / (ps[3] * ps[3] + 0.7) - g.log(t + 2.0)


def test_batch_matches_scalar_eval():
    g = Graph()
    t, x = g.variable("t"), g.variable("x")
    ps = [g.variable(f"p{i}") for i in range(4)]
    y = build_expr(g, t, x, ps)
    dy = g.differentiate(y, t)

    prog = BatchProgram(g, [y, dy], [t, x], ps)
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.1, 1.0, size=(40, 2))
    theta = rng.normal(size=4)
    out = prog.eval(pts, theta)
    for i in range(len(pts)):
        b = {t: pts[i, 0], x: pts[i, 1], **{p: theta[k] for k, p in enumerate(ps)}}
        want = g.eval_many([y, dy], b)
        # math.* and numpy ufuncs may differ by an ulp or two
        assert out[i, 0] == pytest.approx(want[0], rel=1e-13)
        assert out[i, 1] == pytest.approx(want[1], rel=1e-13)


def test_batch_chunking_is_invisible():
    g = Graph()
    t = g.variable("t")
    y = g.exp(g.tanh(t * 3.0)) + t ** 2.0
    prog = BatchProgram(g, [y], [t], [])
    pts = np.linspace(0.1, 2.0, 101)[:, None]
    a = prog.eval(pts, [], chunk=7)
    b = prog.eval(pts, [], chunk=1000)
    assert np.array_equal(a, b)


def test_value_and_grad_matches_graph_gradient():
    # sum of squared misfits assembled by the engine == a literal loss graph
    g = Graph()
    t, x = g.variable("t"), g.variable("x")
    ps = [g.variable(f"p{i}") for i in range(4)]
    y = build_expr(g, t, x, ps)
    prog = BatchProgram(g, [y], [t, x], ps)

    rng = np.random.default_rng(11)
    pts = rng.uniform(0.2, 1.0, size=(9, 2))
    targets = rng.normal(size=9)
    theta = rng.normal(size=4) * 0.4
    coeff = 0.37

    sse, grad = prog.value_and_grad(pts, theta, [(0, targets, coeff)], ps)

    g2 = Graph()
    t2, x2 = g2.variable("t"), g2.variable("x")  # placeholders, bound per point below
    ps2 = [g2.variable(f"p{i}") for i in range(4)]
    total = None
    for i in range(len(pts)):
        yi = build_expr(g2, g2.constant(pts[i, 0]), g2.constant(pts[i, 1]), ps2)
        term = (yi - float(targets[i])) * (yi - float(targets[i]))
        total = term if total is None else total + term
    bindings = {p: theta[k] for k, p in enumerate(ps2)}
    want_sse = g2.eval(total, bindings)
    want_grad = coeff * g2.gradient(total, ps2, bindings)

    assert sse[0] == pytest.approx(want_sse, rel=1e-12)
    np.testing.assert_allclose(grad, want_grad, rtol=1e-11)


def test_value_and_grad_deterministic_across_chunks():
    g = Graph()
    t = g.variable("t")
    p = g.variable("p")
    y = g.tanh(p * t) * g.exp(t * 0.3)
    prog = BatchProgram(g, [y], [t], [p])
    pts = np.linspace(0.1, 1.0, 57)[:, None]
    targets = np.sin(pts[:, 0])
    r1 = prog.value_and_grad(pts, [0.8], [(0, targets, 1.0)], [p])
    r2 = prog.value_and_grad(pts, [0.8], [(0, targets, 1.0)], [p])
    assert r1[0][0] == r2[0][0] and r1[1][0] == r2[1][0]


def test_unsupplied_variable_rejected_at_compile():
    g = Graph()
    t = g.variable("t")
    q = g.variable("q")
    y = t * q
    with pytest.raises(UnboundVariableError):
        BatchProgram(g, [y], [t], [])


def test_permuting_points_permutes_outputs_bitwise():
    g = Graph()
    t, x = g.variable("t"), g.variable("x")
    y = g.tanh(t * 1.3 + x * 0.7) ** 3.0
    prog = BatchProgram(g, [y], [t, x], [])
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.1, 1.0, size=(64, 2))
    perm = rng.permutation(64)
    out = prog.eval(pts, [])
    out_perm = prog.eval(pts[perm], [])
    assert np.array_equal(out[perm], out_perm)
