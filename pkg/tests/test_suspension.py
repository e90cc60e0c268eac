import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from oracles import chain_min, segment_cost

from nexpflow import InvalidChain, InvalidPair, InvalidParameter
from nexpflow.suspension import (Chain, ChainGraph, SuspensionPoint, as_time, bw_distance,
                                 chain_length, fiber_metric, orbit_time, suspend)
from nexpflow.systems import (convergent_fixed_points, finite_permutation, full_shift,
                              odometer)

OD2 = suspend(odometer(2))
CFP3 = suspend(convergent_fixed_points(3))


def test_flow_examples():
    fs = full_shift(2, 3)
    flow = suspend(fs)
    x = fs.net()[9]
    p = flow.point(x, 0)
    assert flow.flow(p, F(1, 2)) == SuspensionPoint(x, F(1, 2))
    assert flow.flow(p, 1) == SuspensionPoint(fs.forward(x), 0)
    assert flow.flow(p, F(-1, 4)) == SuspensionPoint(fs.backward(x), F(3, 4))


def test_roof_two_wraps_later():
    flow = suspend(odometer(3), 2)
    x = odometer(3).net()[0]
    assert flow.flow(flow.point(x, 0), F(3, 2)).base == x
    assert flow.flow(flow.point(x, 0), 2).base != x


@given(st.fractions(-3, 3, max_denominator=8), st.fractions(-3, 3, max_denominator=8),
       st.integers(0, 7), st.fractions(0, F(7, 8), max_denominator=8))
def test_flow_group_law(s, t, k, fiber):
    flow = OD2
    p = flow.point(flow.system.net()[k % 4], fiber)
    assert flow.flow(flow.flow(p, s), t) == flow.flow(p, s + t)
    assert flow.flow(p, 0) == p


def test_point_validation():
    with pytest.raises(InvalidParameter):
        OD2.point(OD2.system.net()[0], 1)
    with pytest.raises(InvalidParameter):
        suspend(odometer(2), 0)
    with pytest.raises(InvalidParameter):
        as_time(float("nan"))
    assert as_time(0.25) == F(1, 4)


def test_fiber_metric_interpolates():
    od = odometer(3)
    flow = suspend(od)
    x, y = od.net()[0], od.net()[1]
    d0, d1 = od.metric(x, y), od.metric(od.forward(x), od.forward(y))
    for t in (F(0), F(1, 4), F(1, 2)):
        got = fiber_metric(flow, flow.point(x, t), flow.point(y, t))
        assert got == pytest.approx((1 - t) * d0 + t * d1)
    with pytest.raises(InvalidPair):
        fiber_metric(flow, flow.point(x, 0), flow.point(y, F(1, 2)))


def test_distance_examples():
    flow = CFP3
    p = flow.point(0.0, 0)
    assert flow.distance(p, p) == 0.0
    # same fixed point: pure vertical move
    assert flow.distance(p, flow.point(0.0, F(1, 4))) == 0.25
    assert flow.distance(p, flow.point(0.0, F(7, 8))) == 0.125  # wraps past the roof
    # different fixed points at one height: horizontal only
    assert flow.distance(p, flow.point(0.5, 0)) == 0.5


def test_distance_is_symmetric_and_bounded():
    pts = OD2.grid_points(4)
    for p in pts:
        for q in pts:
            d = OD2.distance(p, q)
            assert d == OD2.distance(q, p)
            assert 0 <= d <= 1.0


def test_short_chain_realizes_distance():
    rnd = random.Random(3)
    for flow in (OD2, CFP3, suspend(full_shift(2, 3))):
        pts = flow.grid_points(4)
        for _ in range(60):
            p, q = rnd.sample(pts, 2)
            chain = flow.short_chain(p, q)
            assert chain.nodes[0] == p and chain.nodes[-1] == q
            assert chain_length(flow, chain) <= flow.distance(p, q) + 1e-12


def test_orbit_time():
    x = odometer(2).net()[0]
    p = OD2.point(x, F(1, 4))
    q = OD2.flow(p, F(5, 4))
    assert orbit_time(OD2, p, q) == F(5, 4)
    assert orbit_time(OD2, p, OD2.flow(p, F(-3, 8))) == F(3, 8)
    other = OD2.point(odometer(2).net()[1], 0)
    assert orbit_time(OD2, p, other) is not None  # the odometer is one cycle
    cfp = CFP3
    assert orbit_time(cfp, cfp.point(0.0), cfp.point(0.5)) is None


def test_chain_validation():
    with pytest.raises(InvalidChain):
        Chain((1, 2), ())
    with pytest.raises(InvalidChain):
        Chain((1, 2), ("diagonal",))
    p, q = CFP3.point(0.0, 0), CFP3.point(0.5, F(1, 2))
    with pytest.raises(InvalidChain):
        chain_length(CFP3, Chain((p, q), ("horizontal",)))
    with pytest.raises(InvalidChain):
        chain_length(CFP3, Chain((p, q), ("vertical",)))


def test_chain_length_adds_segments():
    p = CFP3.point(0.0, 0)
    mid = CFP3.point(0.0, F(1, 4))
    q = CFP3.point(0.25, F(1, 4))
    chain = Chain((p, mid, q), ("vertical", "horizontal"))
    assert chain_length(CFP3, chain) == pytest.approx(0.25 + 0.25)


# -- Bowen-Walters bracket -------------------------------------------------------------

@pytest.mark.parametrize("flow", [OD2, CFP3], ids=["odometer2", "cfp3"])
def test_bw_matches_three_segment_oracle(flow):
    rnd = random.Random(11)
    pts = flow.grid_points(8)
    for _ in range(15):
        p, q = rnd.sample(pts, 2)
        iv = bw_distance(flow, p, q, max_segments=3, g=8)
        assert iv.upper == pytest.approx(chain_min(flow, p, q, 8), abs=1e-12)
        assert iv.lower <= iv.upper + 1e-12


def test_graph_weights_match_segment_costs():
    flow = CFP3
    graph = ChainGraph(flow, 4)
    for i, a in enumerate(graph.nodes):
        for j, b in enumerate(graph.nodes):
            if i != j:
                assert graph.weights[i, j] == pytest.approx(segment_cost(flow, a, b))


def test_bw_upper_below_short_chain_estimate():
    for flow in (OD2, CFP3):
        pts = flow.grid_points(8)
        for p in pts[::3]:
            for q in pts[::5]:
                iv = bw_distance(flow, p, q, max_segments=None, g=8)
                assert iv.lower <= iv.upper <= flow.distance(p, q) + 1e-12


def test_bw_rejects_off_grid_points():
    p = CFP3.point(0.0, 0)
    with pytest.raises(InvalidPair):
        bw_distance(CFP3, p, CFP3.point(0.0, F(1, 3)), g=8)
    assert tuple(bw_distance(CFP3, p, p)) == (0.0, 0.0)


def test_symbolic_graph_is_relaxed():
    flow = suspend(full_shift(2, 1))
    iv = bw_distance(flow, *flow.grid_points(2)[:2], g=2)
    assert not iv.exact
    assert iv.lower <= iv.upper


def test_lower_bound_respects_large_diameter():
    # a two-point system with diameter 1: the Lipschitz bound must rescale
    perm = finite_permutation([1, 0], [[0, 1.0], [1.0, 0]])
    flow = suspend(perm)
    for p in flow.grid_points(4):
        for q in flow.grid_points(4):
            iv = bw_distance(flow, p, q, max_segments=None, g=4)
            assert iv.lower <= iv.upper + 1e-12


@given(st.integers(0, 31), st.integers(0, 31), st.integers(0, 31))
def test_bw_graph_metric_triangle(i, j, k):
    graph = CFP3._graphs.get(8) or ChainGraph(CFP3, 8)
    D = graph.unbounded()
    assert D[i, k] <= D[i, j] + D[j, k] + 1e-12
    assert D[i, j] == D[j, i]
