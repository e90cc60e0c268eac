import itertools

import pytest
from hypothesis import given, strategies as st

from oracles import dynamical_ball, min_cover_size

from nexpflow import InvalidParameter, ResolutionError
from nexpflow.orbits import (default_delta_grid, dynamical_distance, fixed_point_isolation_check,
                             map_companion_set, map_index_curve, map_orbit_trace,
                             min_segment_cover)
from nexpflow.systems import (convergent_fixed_points, finite_permutation, full_shift,
                              golden_mean_sft, odometer)

CFP5 = convergent_fixed_points(5)


# -- traces ---------------------------------------------------------------------

def test_trace_horizon_zero():
    fs = full_shift(2, 3)
    x = fs.net()[5]
    tr = map_orbit_trace(fs, x, 0)
    assert tr.samples == ((0, x),)


def test_trace_of_identity_is_constant():
    tr = map_orbit_trace(CFP5, 0.25, 4)
    assert tr.points() == [0.25] * 9
    assert tr.horizon == 4


def test_trace_moves_the_one():
    fs = full_shift(2, 3)
    x = fs.point([0, 0, 0, 1, 0, 0, 0])
    (_, b), (_, m), (_, f) = map_orbit_trace(fs, x, 1).samples
    assert m.at(0) == 1
    assert b.at(1) == 1  # sigma^-1 moves the 1 to index +1
    assert f.at(-1) == 1


def test_trace_needs_resolution():
    fs = full_shift(2, 2)
    with pytest.raises(ResolutionError):
        map_orbit_trace(fs, fs.net()[0], 3)
    with pytest.raises(InvalidParameter):
        map_orbit_trace(fs, fs.net()[0], -1)


# -- companion sets ----------------------------------------------------------------

def test_cfp_companion_sets():
    ball = map_companion_set(CFP5, 0.0, 0.3, 2)
    assert sorted(ball.members) == [0.0, 1 / 32, 1 / 16, 1 / 8, 1 / 4]
    assert ball.class_count == 5
    small = map_companion_set(CFP5, 0.0, 0.04, 2)
    assert sorted(small.members) == [0.0, 1 / 32]
    assert small.class_count == 2


def test_singleton_ball_below_separation():
    fs = full_shift(2, 3)
    x = fs.net()[17]
    ball = map_companion_set(fs, x, 0.01, 1)
    assert ball.members == [x] and ball.class_count == 1


def test_companion_set_rejects_bad_delta():
    with pytest.raises(InvalidParameter):
        map_companion_set(CFP5, 0.0, 0.0, 1)


@pytest.mark.parametrize("sys,H", [(full_shift(2, 3), 2), (golden_mean_sft(3), 3),
                                   (odometer(4), 3), (CFP5, 1)], ids=lambda v: str(v))
def test_members_match_brute_force_ball(sys, H):
    net = sys.net()
    for x in net[:: max(1, len(net) // 12)]:
        for delta in (0.05, 0.2, 0.3):
            got = map_companion_set(sys, x, delta, H)
            assert sorted(map(str, got.members)) == sorted(map(str, dynamical_ball(sys, x, delta, H)))
            assert x in got.members


def test_orbit_classes_partition_members():
    od = odometer(3)
    for x in od.net():
        ball = map_companion_set(od, x, 0.3, 1)
        flat = [m for c in ball.orbit_classes for m in c]
        assert sorted(map(str, flat)) == sorted(map(str, ball.members))
        for c in ball.orbit_classes:
            # every class lies within one observed orbit segment of its members
            assert any(all(any(od.iterate(c0, n) == m for n in range(-2, 3)) for m in c)
                       for c0 in od.net())


# -- index curves -------------------------------------------------------------------

def test_full_shift_index_one_at_0_2():
    curve = map_index_curve(full_shift(2, 3), [0.2], 3)
    assert curve.indices == [1]


def test_cfp_index_curve():
    # the maximum over centers is attained at 1/4, whose 0.3-ball also holds 1/2
    curve = map_index_curve(CFP5, [0.04, 0.3], 2)
    assert curve.indices == [3, 6]
    at_zero = [map_companion_set(CFP5, 0.0, d, 2).class_count for d in (0.04, 0.3)]
    assert at_zero == [2, 5]


def test_index_of_whole_space_at_horizon_zero():
    for sys in (odometer(3), CFP5, full_shift(2, 1)):
        curve = map_index_curve(sys, [1.0], 0)
        assert curve.indices == [len(sys.net())]


def test_odometer_index_grows_with_resolution():
    deltas = default_delta_grid(3)
    tops = [map_index_curve(odometer(K), deltas, K).indices[-1] for K in (3, 4, 5)]
    assert tops == sorted(tops) and tops[0] < tops[-1]


def test_default_grid():
    assert default_delta_grid(2) == [1 / 32, 1 / 16, 1 / 8, 1 / 4]


@pytest.mark.parametrize("bad", [[], [0.2, 0.1], [0.0, 0.1]])
def test_index_curve_rejects_bad_grids(bad):
    with pytest.raises(InvalidParameter):
        map_index_curve(CFP5, bad, 1)


def test_curve_exports():
    curve = map_index_curve(CFP5, [0.04, 0.3], 1)
    rows = curve.to_csv().splitlines()
    assert rows[0] == "delta,index,K,H,witness_center"
    assert rows[1].startswith("0.04,3,")
    js = curve.to_json()
    assert [e["index"] for e in js["entries"]] == [3, 6]


@given(st.sampled_from([odometer(3), CFP5, golden_mean_sft(2)]),
       st.lists(st.floats(0.01, 0.6), min_size=2, max_size=4, unique=True),
       st.integers(0, 2))
def test_index_curve_monotone_in_delta(sys, deltas, H):
    deltas = sorted(deltas)
    idx = map_index_curve(sys, deltas, H).indices
    assert idx == sorted(idx)


@given(st.sampled_from([odometer(4), CFP5, full_shift(2, 3)]), st.floats(0.02, 0.5),
       st.integers(0, 127))
def test_balls_shrink_with_horizon(sys, delta, k):
    net = sys.net()
    x = net[k % len(net)]
    balls = [set(map(str, map_companion_set(sys, x, delta, H).members)) for H in (1, 2, 3)]
    assert balls[0] >= balls[1] >= balls[2]


# -- minimum segment cover ---------------------------------------------------------------

@given(st.integers(2, 9), st.integers(1, 3), st.data())
def test_min_cover_matches_subset_enumeration(n, reach, data):
    # a random permutation of n points; segments are windows of the cycle
    perm = data.draw(st.permutations(range(n)))
    inv = {v: i for i, v in enumerate(perm)}

    def segment_of(m):
        out, f, b = [m], m, m
        for _ in range(reach):
            f, b = perm[f], inv[b]
            out += [f, b]
        return out

    members = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1)))
    classes = min_segment_cover(members, segment_of)
    assert len(classes) == min_cover_size(members, segment_of)
    assert sorted(m for c in classes for m in c) == members


def test_min_cover_empty():
    assert min_segment_cover([], lambda m: [m]) == []


# -- fixed points ---------------------------------------------------------------------

def test_fixed_point_check_flags_cfp():
    for L in (5, 8):
        rep = fixed_point_isolation_check(convergent_fixed_points(L))
        assert rep.violation
        assert len(rep.fixed_points) == L + 1
        zero = next(f for f in rep.fixed_points if f["point"] == 0.0)
        assert zero["nearest_fixed_point"] == 2.0 ** -L


def test_fixed_point_check_clean_systems():
    assert not fixed_point_isolation_check(odometer(4)).violation
    fs = full_shift(2, 3)
    rep = fixed_point_isolation_check(fs)
    assert len(rep.fixed_points) == 2 and not rep.violation
    perm = finite_permutation([1, 0], [[0, .5], [.5, 0]])
    assert fixed_point_isolation_check(perm).fixed_points == []


@pytest.mark.parametrize("L", [5, 8])
def test_fixed_point_count_lower_bound(L):
    sys = convergent_fixed_points(L)
    deltas = [0.04, 0.1, 0.3]
    curve = map_index_curve(sys, deltas, 1)
    for d, n in zip(deltas, curve.indices):
        assert n >= sum(1 for k in range(1, L + 1) if 2.0 ** -k <= d) + 1


def test_dynamical_distance_is_max_over_window():
    fs = full_shift(2, 3)
    for x, y in itertools.islice(itertools.combinations(fs.net(), 2), 0, 400, 7):
        want = max(fs.metric(fs.iterate(x, n), fs.iterate(y, n)) for n in range(-2, 3))
        assert dynamical_distance(fs, x, y, 2) == want
