"""Dynamical balls of a base homeomorphism and its expansivity index curve."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import InvalidParameter, ResolutionError
from .systems import BaseSystem, ShiftSystem

__all__ = [
    "OrbitTrace",
    "CompanionSet",
    "IndexCurve",
    "CurveEntry",
    "default_delta_grid",
    "min_segment_cover",
    "map_orbit_trace",
    "map_companion_set",
    "map_index_curve",
    "dynamical_distance",
    "fixed_point_isolation_check",
]


@dataclass(frozen=True)
class OrbitTrace:
    anchor: Hashable
    samples: tuple  # ((time, point), ...)

    @property
    def horizon(self):
        return max(abs(t) for t, _ in self.samples)

    def points(self):
        return [p for _, p in self.samples]


@dataclass
class CompanionSet:
    center: Hashable
    radius: float
    horizon: float
    members: list
    orbit_classes: list  # list of lists; first element of each class is its representative

    @property
    def class_count(self) -> int:
        return len(self.orbit_classes)


@dataclass
class CurveEntry:
    delta: float
    index: int
    witness_center: Hashable = None
    witness_classes: list = field(default_factory=list)


@dataclass
class IndexCurve:
    """Maximum observed orbit-class count of a delta-ball, per delta."""

    entries: list
    metadata: dict = field(default_factory=dict)

    def index_at(self, delta: float) -> int:
        for e in self.entries:
            if e.delta == delta:
                return e.index
        raise KeyError(delta)

    @property
    def deltas(self):
        return [e.delta for e in self.entries]

    @property
    def indices(self):
        return [e.index for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        horizon_key = "H" if "H" in self.metadata else "T"
        w.writerow(["delta", "index", "K", horizon_key, "witness_center"])
        for e in self.entries:
            w.writerow([repr(e.delta), e.index, self.metadata.get("K", ""),
                        self.metadata.get(horizon_key, ""), str(e.witness_center)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "entries": [
                {"delta": e.delta, "index": e.index, "witness_center": str(e.witness_center),
                 "witness_classes": [[str(p) for p in c] for c in e.witness_classes]}
                for e in self.entries
            ],
        }


def default_delta_grid(K: int) -> list[float]:
    """{2^-j / 2 : j = 1..K+2}, increasing."""
    return sorted(0.5 * 2.0 ** -j for j in range(1, K + 3))


def _check_grid(deltas: Sequence[float]):
    if len(deltas) == 0:
        raise InvalidParameter("delta grid is empty")
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise InvalidParameter("delta grid must be strictly increasing")
    if deltas[0] <= 0:
        raise InvalidParameter("delta values must be positive")


def _cover_component(covers: list[int], by_member: dict, full: int) -> list[int]:
    """Fewest centers covering ``full``; branch and bound with a greedy start."""
    # greedy incumbent
    best, covered = [], 0
    while covered != full:
        cid = max(range(len(covers)), key=lambda c: bin(covers[c] & ~covered).count("1"))
        best.append(cid)
        covered |= covers[cid]
    nbr = {k: 0 for k in by_member}
    for k, cids in by_member.items():
        for cid in cids:
            nbr[k] |= covers[cid]

    def lower(missing):
        # members with pairwise disjoint options each need their own center
        n = 0
        while missing:
            u = (missing & -missing).bit_length() - 1
            n += 1
            missing &= ~nbr[u]
        return n

    def search(covered, chosen):
        nonlocal best
        if covered == full:
            if len(chosen) < len(best):
                best = list(chosen)
            return
        missing = full & ~covered
        if len(chosen) + lower(missing) >= len(best):
            return
        # branch on the uncovered member with the fewest options
        u, fewest = -1, None
        m = missing
        while m:
            k = (m & -m).bit_length() - 1
            m &= m - 1
            if fewest is None or len(by_member[k]) < fewest:
                u, fewest = k, len(by_member[k])
        for cid in sorted(by_member[u], key=lambda c: -bin(covers[c] & missing).count("1")):
            chosen.append(cid)
            search(covered | covers[cid], chosen)
            chosen.pop()

    search(0, [])
    return best


def min_segment_cover(members: Sequence, segment_of: Callable[[object], Iterable]) -> list[list]:
    """Partition ``members`` into the fewest orbit segments.

    ``segment_of(m)`` lists the possible segment centers whose segment holds
    ``m`` (the points of m's orbit within the segment radius).  Centers range
    over the whole space, so the minimum count can only drop when members are
    removed; this keeps index curves monotone in delta and horizon.  Members
    sharing no center are solved separately, each part exactly by branch and
    bound.
    """
    if not members:
        return []
    center_ids: dict = {}
    covers: list[int] = []
    by_member: dict = {}
    for k, m in enumerate(members):
        by_member[k] = []
        for c in segment_of(m):
            cid = center_ids.setdefault(c, len(center_ids))
            if cid == len(covers):
                covers.append(0)
            covers[cid] |= 1 << k
            if cid not in by_member[k]:
                by_member[k].append(cid)
    # connected components of the member/center incidence
    parent = list(range(len(members)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for mask in covers:
        first = (mask & -mask).bit_length() - 1
        m = mask & (mask - 1)
        while m:
            k = (m & -m).bit_length() - 1
            m &= m - 1
            parent[find(k)] = find(first)
    comps: dict = {}
    for k in range(len(members)):
        comps.setdefault(find(k), []).append(k)
    chosen = []
    for ks in comps.values():
        full = 0
        for k in ks:
            full |= 1 << k
        cids = sorted({c for k in ks for c in by_member[k]})
        local = {c: i for i, c in enumerate(cids)}
        sub_covers = [covers[c] for c in cids]
        sub_by = {k: [local[c] for c in by_member[k]] for k in ks}
        chosen += [cids[i] for i in _cover_component(sub_covers, sub_by, full)]
    classes = []
    taken = 0
    for cid in chosen:
        mask = covers[cid] & ~taken
        taken |= mask
        if mask:
            classes.append([k for k in range(len(members)) if mask >> k & 1])
    classes.sort()
    return [[members[k] for k in c] for c in classes]


def _check_horizon(sys: BaseSystem, x, H: int):
    if isinstance(sys, ShiftSystem) and H > x.radius:
        raise ResolutionError(f"{H} iterates need a window of radius >= {H}, have {x.radius}")


def map_orbit_trace(sys: BaseSystem, x, H: int) -> OrbitTrace:
    if H < 0:
        raise InvalidParameter("horizon must be non-negative")
    _check_horizon(sys, x, H)
    return OrbitTrace(x, tuple((n, sys.iterate(x, n)) for n in range(-H, H + 1)))


def dynamical_distance(sys: BaseSystem, x, y, H: int, metric: Callable | None = None) -> float:
    """max over |n| <= H of d(phi^n x, phi^n y)."""
    metric = metric or sys.metric
    best = metric(x, y)
    fx = bx = x
    fy = by = y
    for _ in range(H):
        fx, fy = sys.forward(fx), sys.forward(fy)
        bx, by = sys.backward(bx), sys.backward(by)
        best = max(best, metric(fx, fy), metric(bx, by))
    return best


def _orbit_segments(sys: BaseSystem, H: int):
    reach = 2 * H

    def segment_of(y):
        pts = [y]
        f = b = y
        for _ in range(reach):
            f, b = sys.forward(f), sys.backward(b)
            pts += [f, b]
        return pts

    return segment_of


def map_companion_set(sys: BaseSystem, x, delta: float, H: int,
                      metric: Callable | None = None) -> CompanionSet:
    """All net points whose orbit stays within ``delta`` of x's for |n| <= H.

    The ball is closed.  Members are grouped into orbit classes: segments of
    observed iterates {phi^j c : |j| <= 2H}.
    """
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    if H < 0:
        raise InvalidParameter("horizon must be non-negative")
    _check_horizon(sys, x, H)
    members = [y for y in sys.net() if dynamical_distance(sys, x, y, H, metric) <= delta]
    classes = min_segment_cover(members, _orbit_segments(sys, H))
    return CompanionSet(x, delta, H, members, classes)


def map_index_curve(sys: BaseSystem, deltas: Sequence[float], H: int,
                    metric: Callable | None = None) -> IndexCurve:
    """Per delta, the maximum orbit-class count over all net centers."""
    _check_grid(deltas)
    net = sys.net()
    for x in net[:1]:
        _check_horizon(sys, x, H)
    n = len(net)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = dynamical_distance(sys, net[i], net[j], H, metric)
    segment_of = _orbit_segments(sys, H)
    covers: dict = {}
    entries = []
    for delta in deltas:
        best = None
        for i, x in enumerate(net):
            idx = tuple(np.flatnonzero(D[i] <= delta))
            if idx not in covers:
                covers[idx] = min_segment_cover([net[j] for j in idx], segment_of)
            classes = covers[idx]
            if best is None or len(classes) > best.index:
                best = CurveEntry(delta, len(classes), x, classes)
        entries.append(best)
    meta = {"system": sys.describe(), "K": getattr(sys, "K", None), "H": H}
    return IndexCurve(entries, meta)



@dataclass
class FixedPointReport:
    threshold: float
    fixed_points: list  # dicts: point, nearest_point, nearest_fixed_point, violation

    @property
    def violation(self) -> bool:
        return any(f["violation"] for f in self.fixed_points)

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "violation": self.violation,
            "fixed_points": [{**f, "point": str(f["point"])} for f in self.fixed_points],
        }


def fixed_point_isolation_check(sys: BaseSystem, threshold: float = 0.1) -> FixedPointReport:
    """Locate fixed points of the net and measure how isolated they are.

    A fixed point whose nearest distinct fixed point lies closer than
    ``threshold`` is flagged: at this resolution it is accumulated by fixed
    points, which an N-expansive system cannot have.
    """
    net = sys.net()
    fixed = [x for x in net if sys.is_fixed(x)]
    out = []
    for x in fixed:
        near = min((sys.metric(x, y) for y in net if y != x), default=float("inf"))
        near_fixed = min((sys.metric(x, y) for y in fixed if y != x), default=float("inf"))
        out.append({"point": x, "nearest_point": near, "nearest_fixed_point": near_fixed,
                    "violation": near_fixed < threshold})
    return FixedPointReport(threshold, out)
