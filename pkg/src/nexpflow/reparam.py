"""Anchored monotone alignment of flow orbit traces.

Two orbits are close up to reparametrization when their traces can be
walked in step, each clock monotone and both starting together at time 0.
On a uniform grid this is an anchored discrete Frechet problem, solved
separately for the forward and the backward half.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidPair, InvalidParameter
from .suspension import Chain, SuspensionFlow, SuspensionPoint, as_time

__all__ = [
    "FlowTrace",
    "Alignment",
    "AlignmentTable",
    "SetTestResult",
    "flow_trace",
    "refine_grid",
    "aligned_distance",
    "identity_distance",
    "alignment_table",
    "companion_pair_test",
    "companion_set_test",
    "joined_chain",
]


@dataclass(frozen=True)
class FlowTrace:
    """Samples X^{kh}(anchor) for k = -n..n, where n = T/h."""

    anchor: SuspensionPoint
    h: Fraction
    samples: tuple  # ((time, point), ...), times increasing
    flow: SuspensionFlow = field(compare=False, repr=False, default=None)

    @property
    def T(self) -> Fraction:
        return self.samples[-1][0]

    @property
    def n(self) -> int:
        """Number of steps on each side of the anchor."""
        return len(self.samples) // 2

    def points(self) -> list:
        return [p for _, p in self.samples]

    def forward_half(self) -> list:
        return self.points()[self.n:]

    def backward_half(self) -> list:
        return self.points()[self.n::-1]

    def truncated(self, T) -> "FlowTrace":
        T = as_time(T)
        k = _steps(T, self.h)
        if k > self.n:
            raise InvalidParameter(f"cannot truncate a trace of horizon {self.T} to {T}")
        return FlowTrace(self.anchor, self.h, self.samples[self.n - k:self.n + k + 1], self.flow)


def _steps(T: Fraction, h: Fraction) -> int:
    k = T / h
    if k.denominator != 1 or k < 0:
        raise InvalidParameter(f"horizon {T} is not a non-negative multiple of the step {h}")
    return int(k)


def flow_trace(flow: SuspensionFlow, p: SuspensionPoint, T, h) -> FlowTrace:
    """Sample the orbit of p on the grid {kh : |kh| <= T}."""
    T, h = as_time(T), as_time(h)
    if h <= 0:
        raise InvalidParameter("grid step must be positive")
    n = _steps(T, h)
    samples = tuple((k * h, flow.flow(p, k * h)) for k in range(-n, n + 1))
    return FlowTrace(p, h, samples, flow)


def refine_grid(trace: FlowTrace, factor: int) -> FlowTrace:
    """Resample the same orbit window with step h/factor."""
    if int(factor) != factor or factor < 1:
        raise InvalidParameter("refinement factor must be a positive integer")
    if factor == 1:
        return trace
    if trace.flow is None:
        raise InvalidParameter("trace carries no flow to resample")
    return flow_trace(trace.flow, trace.anchor, trace.T, trace.h / int(factor))


@dataclass(frozen=True)
class Alignment:
    """Monotone staircase of index pairs, listed outward from the anchor pair.

    Indices are positions within a half (0 is the anchor); ``forward`` and
    ``backward`` hold the two halves.
    """

    forward: tuple
    backward: tuple

    def signed_pairs(self) -> list:
        """Pairs in trace coordinates: backward indices negated, time order."""
        back = [(-i, -j) for i, j in reversed(self.backward[1:])]
        return back + list(self.forward)


@dataclass
class AlignmentTable:
    value: float
    forward_table: np.ndarray
    backward_table: np.ndarray
    alignment: Alignment


def _pair_metric(trace_a: FlowTrace, trace_b: FlowTrace, metric):
    if trace_a.h != trace_b.h:
        raise InvalidPair(f"grid steps differ: {trace_a.h} != {trace_b.h}")
    if metric is None:
        flow = trace_a.flow or trace_b.flow
        if flow is None:
            raise InvalidParameter("no metric given and the traces carry no flow")
        metric = flow.distance
    return metric


def _frechet_table(a: Sequence, b: Sequence, metric) -> np.ndarray:
    n, m = len(a), len(b)
    F = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = metric(a[i], b[j])
            if i == 0 and j == 0:
                F[i, j] = d
            elif i == 0:
                F[i, j] = max(F[i, j - 1], d)
            elif j == 0:
                F[i, j] = max(F[i - 1, j], d)
            else:
                F[i, j] = max(min(F[i - 1, j], F[i, j - 1], F[i - 1, j - 1]), d)
    return F


def _staircase(F: np.ndarray) -> tuple:
    i, j = F.shape[0] - 1, F.shape[1] - 1
    path = [(i, j)]
    while (i, j) != (0, 0):
        steps = [(i - 1, j - 1), (i - 1, j), (i, j - 1)]
        steps = [(a, b) for a, b in steps if a >= 0 and b >= 0]
        i, j = min(steps, key=lambda s: F[s])
        path.append((i, j))
    return tuple(reversed(path))


def _bottleneck(a: Sequence, b: Sequence, metric, cutoff: float) -> float:
    """Anchored Frechet value by best-first search; inf once it exceeds cutoff.

    Cells are expanded in order of the largest distance met on the way, so
    the first time the end cell is popped its key is the optimum.  Only the
    cells cheaper than the answer are ever evaluated.
    """
    n, m = len(a), len(b)
    end = (n - 1, m - 1)
    lower = max(metric(a[0], b[0]), metric(a[-1], b[-1]))
    if lower > cutoff:
        return math.inf
    heap = [(metric(a[0], b[0]), 0, 0)]
    seen = {(0, 0)}
    while heap:
        key, i, j = heapq.heappop(heap)
        if key > cutoff:
            return math.inf
        if (i, j) == end:
            return key
        for s in ((i + 1, j + 1), (i + 1, j), (i, j + 1)):
            if s[0] < n and s[1] < m and s not in seen:
                seen.add(s)
                heapq.heappush(heap, (max(key, metric(a[s[0]], b[s[1]])), *s))
    return math.inf  # unreachable: the end cell is always reachable


def aligned_distance(trace_a: FlowTrace, trace_b: FlowTrace,
                     metric: Callable | None = None, cutoff: float | None = None) -> float:
    """Minimum over anchored monotone alignments of the largest point distance.

    Parameters
    ----------
    trace_a, trace_b : FlowTrace
        Traces on the same grid step.  Horizons may differ.
    metric : callable, optional
        Point metric; defaults to the flow's chain distance.
    cutoff : float, optional
        When given, any value above ``cutoff`` is reported as ``inf``; this
        lets threshold tests stop early.  Values at or below it are exact.
    """
    metric = _pair_metric(trace_a, trace_b, metric)
    limit = math.inf if cutoff is None else cutoff
    fwd = _bottleneck(trace_a.forward_half(), trace_b.forward_half(), metric, limit)
    if fwd > limit:
        return math.inf
    bwd = _bottleneck(trace_a.backward_half(), trace_b.backward_half(), metric, limit)
    return max(fwd, bwd)


def identity_distance(trace_a: FlowTrace, trace_b: FlowTrace, metric: Callable | None = None) -> float:
    """Largest distance between samples at equal times (no reparametrization)."""
    metric = _pair_metric(trace_a, trace_b, metric)
    if len(trace_a.samples) != len(trace_b.samples):
        raise InvalidPair("identity alignment needs equal horizons")
    return max(metric(p, q) for p, q in zip(trace_a.points(), trace_b.points()))


def alignment_table(trace_a: FlowTrace, trace_b: FlowTrace,
                    metric: Callable | None = None) -> AlignmentTable:
    """Full dynamic-programming tables and one optimal staircase per half."""
    metric = _pair_metric(trace_a, trace_b, metric)
    Ff = _frechet_table(trace_a.forward_half(), trace_b.forward_half(), metric)
    Fb = _frechet_table(trace_a.backward_half(), trace_b.backward_half(), metric)
    value = max(Ff[-1, -1], Fb[-1, -1])
    return AlignmentTable(float(value), Ff, Fb, Alignment(_staircase(Ff), _staircase(Fb)))


def companion_pair_test(flow: SuspensionFlow, p, q, delta: float, T, h) -> bool:
    """True iff the traces of p and q align within ``delta`` (closed)."""
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    if p == q:
        return True
    ta, tb = flow_trace(flow, p, T, h), flow_trace(flow, q, T, h)
    return aligned_distance(ta, tb, flow.distance, cutoff=delta) <= delta


@dataclass
class SetTestResult:
    passed: bool
    anchor: SuspensionPoint
    delta: float
    distances: dict  # member -> aligned distance to the anchor (inf past the cutoff)

    def __bool__(self):
        return self.passed


def companion_set_test(flow: SuspensionFlow, members: Sequence, anchor, delta: float,
                       T, h) -> SetTestResult:
    """Every member aligns to the anchor within delta/2.

    Passing implies any two members are within ``delta`` along the clock of
    the anchor: compose each member's staircase with the anchor's samples
    and join the two short chains through the anchor sample.
    """
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    if anchor not in members:
        raise InvalidParameter("anchor must belong to the set")
    ta = flow_trace(flow, anchor, T, h)
    half = delta / 2
    distances = {}
    for m in members:
        if m == anchor:
            distances[m] = 0.0
            continue
        tm = flow_trace(flow, m, T, h)
        distances[m] = aligned_distance(ta, tm, flow.distance, cutoff=half)
    passed = all(d <= half for d in distances.values())
    return SetTestResult(passed, anchor, delta, distances)


def joined_chain(flow: SuspensionFlow, p, via, q) -> Chain:
    """Concatenate the short chains p -> via -> q."""
    first, second = flow.short_chain(p, via), flow.short_chain(via, q)
    return Chain(first.nodes + second.nodes[1:], first.segments + second.segments)

