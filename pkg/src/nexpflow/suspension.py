"""Suspension flows under a constant roof and the Bowen-Walters chain metric.

Times and fiber heights are :class:`fractions.Fraction` so that flow laws hold
exactly on rational grids.  Distances are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .errors import InvalidChain, InvalidPair, InvalidParameter, ResolutionError
from .systems import BaseSystem

__all__ = [
    "as_time",
    "SuspensionPoint",
    "SuspensionFlow",
    "suspend",
    "fiber_metric",
    "Chain",
    "chain_length",
    "ChainGraph",
    "BWInterval",
    "bw_distance",
]


def as_time(value) -> Fraction:
    """Exact rational time; floats are read through their shortest repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidParameter(f"time must be finite, got {value}")
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class SuspensionPoint:
    base: object
    fiber: Fraction

    def __str__(self):
        return f"({self.base}, {self.fiber})"


class SuspensionFlow:
    """Flow X^t(y, s) = (phi^q y, r) with s + t = q*roof + r, 0 <= r < roof."""

    def __init__(self, system: BaseSystem, roof=1):
        roof = as_time(roof)
        if roof <= 0:
            raise InvalidParameter(f"roof must be positive, got {roof}")
        self.system = system
        self.roof = roof
        self._dist_cache: dict = {}
        self._graphs: dict = {}

    def __repr__(self):
        return f"SuspensionFlow({self.system.name}, roof={self.roof})"

    def describe(self) -> dict:
        return {"system": self.system.describe(), "roof": str(self.roof)}

    def point(self, base, fiber=0) -> SuspensionPoint:
        fiber = as_time(fiber)
        if not 0 <= fiber < self.roof:
            raise InvalidParameter(f"fiber {fiber} outside [0, {self.roof})")
        return SuspensionPoint(base, fiber)

    def flow(self, p: SuspensionPoint, t) -> SuspensionPoint:
        total = p.fiber + as_time(t)
        q = math.floor(total / self.roof)
        r = total - q * self.roof
        base = self.system.iterate(p.base, q) if q else p.base
        return SuspensionPoint(base, r)

    def grid(self, g: int) -> list[Fraction]:
        """Fiber heights k*roof/g, k = 0..g-1."""
        if g < 1:
            raise InvalidParameter("fiber grid needs g >= 1")
        return [self.roof * k / g for k in range(g)]

    def grid_points(self, g: int) -> list[SuspensionPoint]:
        return [SuspensionPoint(y, s) for y in self.system.net() for s in self.grid(g)]

    def fiber_metric(self, p: SuspensionPoint, q: SuspensionPoint) -> float:
        if p.fiber != q.fiber:
            raise InvalidPair(f"fiber heights differ: {p.fiber} != {q.fiber}")
        return self._level_distance(p.base, q.base, p.fiber)

    def _level_distance(self, y, z, s: Fraction) -> float:
        sys = self.system
        w = s / self.roof
        if w == 0:
            return sys.metric(y, z)
        wf = float(w)
        return (1.0 - wf) * sys.metric(y, z) + wf * sys.metric(sys.forward(y), sys.forward(z))

    def _vertical_moves(self, p: SuspensionPoint, level: Fraction):
        """Points of p's orbit at fiber ``level`` reachable with at most one wrap."""
        sys, c = self.system, self.roof
        yield abs(level - p.fiber), p.base
        yield (c - p.fiber) + level, sys.forward(p.base)
        yield p.fiber + (c - level), sys.backward(p.base)

    def distance(self, p: SuspensionPoint, q: SuspensionPoint) -> float:
        """Length of the shortest chain made of one vertical and one horizontal segment.

        Either endpoint may take the vertical move, which may wrap past the
        roof once in either direction.  The value bounds the Bowen-Walters
        distance from above; it is what orbit traces are compared with.
        Candidates whose horizontal segment needs symbols outside the known
        windows are skipped.
        """
        if p == q:
            return 0.0
        pf, qf = p.fiber, q.fiber
        key = (p.base, pf.numerator, pf.denominator, q.base, qf.numerator, qf.denominator)
        hit = self._dist_cache.get(key)
        if hit is None:
            hit = self._short_length(p.base, float(pf), q.base, float(qf))
            self._dist_cache[key] = hit
            self._dist_cache[key[3:] + key[:3]] = hit
        return hit

    def _short_length(self, y, s: float, z, r: float) -> float:
        # float version of _best_short_chain, which stays the reference
        sys, c = self.system, float(self.roof)
        best = math.inf
        for a, af, b, bf in ((y, s, z, r), (z, r, y, s)):
            w = bf / c
            moves = ((abs(bf - af), a, False), (c - af + bf, a, True),
                     (af + c - bf, sys.backward(a), False))
            for cost, base, up in moves:
                if cost >= best:
                    continue
                try:
                    if up:
                        base = sys.forward(base)
                    d = sys.metric(base, b)
                    if w:
                        d = (1.0 - w) * d + w * sys.metric(sys.forward(base), sys.forward(b))
                except ResolutionError:
                    continue
                best = min(best, cost + d)
        if best == math.inf:
            raise ResolutionError("no resolvable chain between the two points")
        return best

    def short_chain(self, p: SuspensionPoint, q: SuspensionPoint) -> "Chain":
        """The chain whose length :meth:`distance` reports."""
        if p == q:
            return Chain((p,), ())
        return self._best_short_chain(p, q)[1]

    def _best_short_chain(self, p, q):
        best, chain = math.inf, None
        for a, b in ((p, q), (q, p)):
            for cost, base in self._vertical_moves(a, b.fiber):
                cost = float(cost)
                if cost >= best:
                    continue
                try:
                    length = cost + self._level_distance(base, b.base, b.fiber)
                except ResolutionError:
                    continue
                if length < best:
                    mid = SuspensionPoint(base, b.fiber)
                    nodes = (a, mid, b)
                    if a is q:
                        nodes = nodes[::-1]
                        tags = ("horizontal", "vertical")
                    else:
                        tags = ("vertical", "horizontal")
                    best, chain = length, Chain(nodes, tags)
        if chain is None:
            raise ResolutionError(f"no chain between {p} and {q} is resolvable")
        return best, chain


def suspend(system: BaseSystem, roof=1) -> SuspensionFlow:
    return SuspensionFlow(system, roof)


def fiber_metric(flow: SuspensionFlow, p: SuspensionPoint, q: SuspensionPoint) -> float:
    """(1 - t) d(y, z) + t d(phi y, phi z) at the shared height t (normalised by the roof)."""
    return flow.fiber_metric(p, q)


@dataclass(frozen=True)
class Chain:
    nodes: tuple
    segments: tuple  # "horizontal" | "vertical", one per consecutive node pair

    def __post_init__(self):
        if len(self.nodes) < 1 or len(self.segments) != len(self.nodes) - 1:
            raise InvalidChain("a chain needs len(nodes) - 1 segment tags")
        for tag in self.segments:
            if tag not in ("horizontal", "vertical"):
                raise InvalidChain(f"unknown segment tag {tag!r}")


def _same_base(sys: BaseSystem, y, z) -> bool:
    if y == z:
        return True
    try:
        return sys.metric(y, z) == 0.0
    except ResolutionError:
        return False


def orbit_time(flow: SuspensionFlow, p: SuspensionPoint, q: SuspensionPoint,
               max_wraps: int | None = None) -> Fraction | None:
    """Shortest |s| with X^s(p) = q, ignoring direction; None if not found."""
    sys = flow.system
    if max_wraps is None:
        max_wraps = max(len(sys.net()), 1)
    gap = q.fiber - p.fiber
    best = None
    fwd = bwd = p.base
    for n in range(max_wraps + 1):
        for base, k in ((fwd, n), (bwd, -n)):
            if _same_base(sys, base, q.base):
                s = abs(gap + k * flow.roof)
                if best is None or s < best:
                    best = s
        if best is not None and n * flow.roof - abs(gap) > best:
            break
        fwd, bwd = sys.forward(fwd), sys.backward(bwd)
    return best


def chain_length(flow: SuspensionFlow, chain: Chain) -> float:
    total = 0.0
    for (a, b), tag in zip(zip(chain.nodes, chain.nodes[1:]), chain.segments):
        if tag == "horizontal":
            if a.fiber != b.fiber:
                raise InvalidChain(f"horizontal segment between heights {a.fiber} and {b.fiber}")
            total += flow.fiber_metric(a, b)
        else:
            s = orbit_time(flow, a, b)
            if s is None:
                raise InvalidChain(f"{a} and {b} are not on one orbit")
            total += float(s)
    return total


@dataclass(frozen=True)
class BWInterval:
    lower: float
    upper: float
    exact: bool

    def __iter__(self):
        return iter((self.lower, self.upper))


class ChainGraph:
    """Net points times a fiber grid, joined by horizontal and vertical segments.

    ``weights[i, j]`` is the length of the single segment from node i to node
    j (inf if none).  For systems whose forward map leaves the net (window
    shifts), a wrap past the roof links to every net window that agrees with
    the shifted window, and the graph is marked ``relaxed``.
    """

    def __init__(self, flow: SuspensionFlow, g: int):
        self.flow = flow
        self.g = g
        sys = flow.system
        net = sys.net()
        levels = flow.grid(g)
        self.nodes = [SuspensionPoint(y, s) for y in net for s in levels]
        self.index = {p: i for i, p in enumerate(self.nodes)}
        n = len(self.nodes)
        W = np.full((n, n), np.inf)
        np.fill_diagonal(W, 0.0)
        base_idx = {y: i for i, y in enumerate(net)}
        self.relaxed = any(sys.forward(y) not in base_idx for y in net)

        for k, s in enumerate(levels):
            for a, y in enumerate(net):
                for b in range(a + 1, len(net)):
                    d = flow._level_distance(y, net[b], s)
                    W[a * g + k, b * g + k] = W[b * g + k, a * g + k] = d

        # vertical segments: every pair of nodes on one orbit, length = shortest orbit time
        for a, y in enumerate(net):
            targets = self._orbit_bases(y, base_idx)
            for b, wraps in targets:
                for k, s in enumerate(levels):
                    for k2, s2 in enumerate(levels):
                        i, j = a * g + k, b * g + k2
                        if i == j or (k == k2 and a != b):
                            continue  # same height: the horizontal length applies
                        length = min(abs(s2 - s + w * flow.roof) for w in wraps)
                        if length < W[i, j]:
                            W[i, j] = W[j, i] = float(length)
        self.weights = W

    def _orbit_bases(self, y, base_idx):
        """(net index, wrap counts) for net points on y's orbit."""
        sys = self.flow.system
        found: dict = {}
        limit = len(base_idx)
        fwd = bwd = y
        for n in range(limit + 1):
            for base, w in ((fwd, n), (bwd, -n)):
                if base in base_idx:
                    found.setdefault(base_idx[base], set()).add(w)
            if self.relaxed and n == 1:
                for z in base_idx:
                    for base, w in ((fwd, 1), (bwd, -1)):
                        if _same_base(sys, base, z):
                            found.setdefault(base_idx[z], set()).add(w)
            if self.relaxed and n >= 1:
                break
            fwd, bwd = sys.forward(fwd), sys.backward(bwd)
        return sorted(found.items())

    def node(self, p: SuspensionPoint) -> int:
        try:
            return self.index[p]
        except KeyError:
            raise InvalidPair(f"{p} is not a node of the chain graph (fiber grid g={self.g})") from None

    def hop_bounded(self, source: int, max_segments: int) -> np.ndarray:
        """Shortest lengths from ``source`` using at most ``max_segments`` segments."""
        W = self.weights
        dist = np.full(len(self.nodes), np.inf)
        dist[source] = 0.0
        for _ in range(max_segments):
            dist = np.minimum(dist, (dist[:, None] + W).min(axis=0))
        return dist

    def unbounded(self) -> np.ndarray:
        if not hasattr(self, "_apsp"):
            self._apsp = shortest_path(self.weights, method="D", directed=False)
        return self._apsp


def _lipschitz_lower(flow: SuspensionFlow, p: SuspensionPoint, q: SuspensionPoint) -> float:
    """Largest gap |F(p) - F(q)| over functions that no chain segment can stretch."""
    c = flow.roof
    gap = abs(p.fiber - q.fiber)
    lower = float(min(gap, c - gap))
    if flow.system.symbolic:
        return lower
    sys = flow.system
    net = sys.net()
    diam = max((sys.metric(a, b) for a in net for b in net), default=0.0)
    # F moves by at most scale * diam / roof per unit of flow time
    scale = min(1.0, float(c) / diam) if diam > 0 else 1.0

    def F(pt, w):
        t = float(pt.fiber / c)
        return scale * ((1 - t) * sys.metric(pt.base, w) + t * sys.metric(sys.forward(pt.base), w))

    for w in net:
        lower = max(lower, abs(F(p, w) - F(q, w)))
    return lower


def bw_distance(flow: SuspensionFlow, p: SuspensionPoint, q: SuspensionPoint,
                max_segments: int | None = 3, g: int = 8) -> BWInterval:
    """Bracket the chain-infimum distance between two grid points.

    ``upper`` is the shortest chain in the discretised chain graph with at
    most ``max_segments`` segments (unbounded when None).  ``lower`` is the
    largest of the circular fiber gap and, for explicit systems,
    |F(p) - F(q)| with F(y, s) = (1 - s) d(y, w) + s d(phi y, w), a function
    that changes by at most the length of any segment.  ``exact`` is False
    when the segment budget was binding or the graph is relaxed.
    """
    if p == q:
        return BWInterval(0.0, 0.0, True)
    graph = flow._graphs.get(g)
    if graph is None:
        graph = flow._graphs[g] = ChainGraph(flow, g)
    i, j = graph.node(p), graph.node(q)
    if max_segments is None:
        upper = float(graph.unbounded()[i, j])
        binding = False
    else:
        dist = graph.hop_bounded(i, max_segments)
        upper = float(dist[j])
        binding = graph.hop_bounded(i, max_segments + 1)[j] < upper
    lower = _lipschitz_lower(flow, p, q)
    return BWInterval(lower, upper, not (binding or graph.relaxed))
