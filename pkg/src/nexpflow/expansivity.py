"""Companion sets and index curves of suspension flows, and the harnesses that
compare them with the base map and across conjugacies."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import CoverageError, InvalidParameter
from .orbits import (CompanionSet, CurveEntry, IndexCurve, _check_grid, dynamical_distance,
                     map_index_curve, min_segment_cover)
from .reparam import aligned_distance, companion_pair_test, flow_trace
from .suspension import SuspensionFlow, SuspensionPoint, as_time, suspend
from .systems import BaseSystem, pullback_metric

__all__ = [
    "PairTable",
    "pair_table",
    "flow_segments",
    "flow_companion_set",
    "flow_index_curve",
    "curve_from_table",
    "suspension_theorem_check",
    "ConjugacyWitness",
    "roof_scaling_witness",
    "recoding_witness",
    "conjugacy_transport_check",
    "matched_delta",
    "ball_cardinality_curve",
    "MATCHED_CONSTANTS",
]


def _grid_size(flow: SuspensionFlow, h: Fraction, g: int | None) -> int:
    if g is not None:
        return int(g)
    k = flow.roof / h
    if k.denominator != 1:
        raise InvalidParameter(f"step {h} does not divide the roof {flow.roof}; pass g")
    return int(k)


@dataclass
class PairTable:
    """Aligned distances between all pairs of a point list.

    Entries above ``cutoff`` are stored as ``inf``; :meth:`value` fills them
    in on demand.
    """

    flow: SuspensionFlow
    points: list
    T: Fraction
    h: Fraction
    values: np.ndarray
    cutoff: float
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {p: i for i, p in enumerate(self.points)}

    def extend(self, cutoff: float):
        """Resolve every stored inf that lies at or below a larger cutoff."""
        if cutoff <= self.cutoff:
            return
        rows = np.unique(np.nonzero(np.isinf(self.values))[0])
        traces = {}
        for i in rows:
            for j in np.flatnonzero(np.isinf(self.values[i])):
                if j <= i:
                    continue
                for k in (i, j):
                    if k not in traces:
                        traces[k] = flow_trace(self.flow, self.points[k], self.T, self.h)
                v = aligned_distance(traces[i], traces[j], self.flow.distance, cutoff=cutoff)
                self.values[i, j] = self.values[j, i] = v
        self.cutoff = cutoff

    def value(self, i: int, j: int) -> float:
        v = self.values[i, j]
        if math.isinf(v):
            ta = flow_trace(self.flow, self.points[i], self.T, self.h)
            tb = flow_trace(self.flow, self.points[j], self.T, self.h)
            v = aligned_distance(ta, tb, self.flow.distance)
            self.values[i, j] = self.values[j, i] = v
        return v


def _rows(args):
    flow, points, T, h, cutoff, rows = args
    traces = [flow_trace(flow, p, T, h) for p in points]
    out = []
    for i in rows:
        row = [aligned_distance(traces[i], traces[j], flow.distance, cutoff=cutoff)
               for j in range(i + 1, len(points))]
        out.append(row)
    return out


def pair_table(flow: SuspensionFlow, points: Sequence, T, h, cutoff: float,
               workers: int = 1) -> PairTable:
    """Aligned distances of every pair, computed once and thresholded later.

    Rows are dealt to ``workers`` processes in a fixed interleaved order and
    reassembled by index, so the table does not depend on the worker count.
    """
    T, h = as_time(T), as_time(h)
    points = list(points)
    n = len(points)
    V = np.zeros((n, n))
    if workers <= 1 or n < 2:
        blocks = [list(range(n))]
        results = [_rows((flow, points, T, h, cutoff, blocks[0]))]
    else:
        blocks = [list(range(w, n, workers)) for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_rows, [(flow, points, T, h, cutoff, b) for b in blocks]))
    for rows, vals in zip(blocks, results):
        for i, row in zip(rows, vals):
            V[i, i + 1:] = row
            V[i + 1:, i] = row
    return PairTable(flow, points, T, h, V, cutoff)


def flow_segments(flow: SuspensionFlow, eps_seg, h) -> Callable:
    """segment_of(q): grid centers X^s(q), |s| <= eps_seg, whose segment holds q."""
    eps_seg, h = as_time(eps_seg), as_time(h)
    m = math.floor(eps_seg / h)

    def segment_of(q):
        return [flow.flow(q, k * h) for k in range(-m, m + 1)]

    return segment_of


def flow_companion_set(flow: SuspensionFlow, p: SuspensionPoint, delta: float, T, h,
                       eps_seg=None, g: int | None = None) -> CompanionSet:
    """Fiber-grid net points whose traces align with p's within ``delta``.

    Members are grouped into the fewest orbit segments of time radius
    ``eps_seg`` (default 2h).
    """
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    h = as_time(h)
    eps_seg = 2 * h if eps_seg is None else as_time(eps_seg)
    g = _grid_size(flow, h, g)
    ta = flow_trace(flow, p, T, h)
    members = []
    for q in flow.grid_points(g):
        if q == p or aligned_distance(ta, flow_trace(flow, q, T, h), flow.distance,
                                      cutoff=delta) <= delta:
            members.append(q)
    classes = min_segment_cover(members, flow_segments(flow, eps_seg, h))
    return CompanionSet(p, delta, float(as_time(T)), members, classes)


def _stratified(points: list, g: int, max_centers: int) -> list[int]:
    """Evenly strided base points, the same stride on every fiber level."""
    per_level = max(1, max_centers // g)
    n_base = len(points) // g
    stride = max(1, math.ceil(n_base / per_level))
    return [b * g + k for b in range(0, n_base, stride) for k in range(g)]


def curve_from_table(table: PairTable, deltas: Sequence[float], eps_seg,
                     centers: Sequence[int] | None = None, metadata: dict | None = None,
                     memo: dict | None = None) -> IndexCurve:
    """Index curve read off a pair table; ``centers`` are point indices."""
    pts = table.points
    segment_of = flow_segments(table.flow, eps_seg, table.h)
    centers = range(len(pts)) if centers is None else centers
    memo = {} if memo is None else memo
    entries = []
    for delta in deltas:
        best = None
        for i in centers:
            idx = tuple(np.flatnonzero(table.values[i] <= delta))
            if idx not in memo:
                memo[idx] = min_segment_cover([pts[j] for j in idx], segment_of)
            classes = memo[idx]
            if best is None or len(classes) > best.index:
                best = CurveEntry(delta, len(classes), pts[i], classes)
        entries.append(best)
    return IndexCurve(entries, dict(metadata or {}))


def _flow_meta(flow: SuspensionFlow, T, h, g, eps_seg, subsampled: bool) -> dict:
    return {"system": flow.system.describe(), "roof": str(flow.roof),
            "K": getattr(flow.system, "K", None), "T": str(as_time(T)), "h": str(as_time(h)),
            "g": g, "eps_seg": str(as_time(eps_seg)), "subsampled": subsampled}


def flow_index_curve(flow: SuspensionFlow, deltas: Sequence[float], T, h, eps_seg=None,
                     g: int | None = None, workers: int = 1,
                     max_centers: int | None = None) -> IndexCurve:
    """Per delta, the largest orbit-segment count of a companion set.

    Centers range over the net times the fiber grid.  With ``max_centers``
    a stratified subsample of centers is used and the metadata says so;
    members are always the full grid.
    """
    _check_grid(deltas)
    h = as_time(h)
    eps_seg = 2 * h if eps_seg is None else as_time(eps_seg)
    g = _grid_size(flow, h, g)
    points = flow.grid_points(g)
    table = pair_table(flow, points, T, h, cutoff=max(deltas), workers=workers)
    centers = None
    if max_centers is not None and max_centers < len(points):
        centers = _stratified(points, g, max_centers)
    meta = _flow_meta(flow, T, h, g, eps_seg, centers is not None)
    return curve_from_table(table, deltas, eps_seg, centers, meta)


MATCHED_CONSTANTS = ("double", "half")


def matched_delta(delta: float, eps: float, constant: str = "double") -> float:
    """delta' = min{2 delta, eps, 1/4}; ``constant="half"`` uses delta/2 instead of 2 delta."""
    if constant == "double":
        return min(2 * delta, eps, 0.25)
    if constant == "half":
        return min(delta / 2, eps, 0.25)
    raise InvalidParameter(f"unknown matched constant {constant!r}")


def ball_cardinality_curve(sys: BaseSystem, deltas: Sequence[float], H: int,
                           metric: Callable | None = None) -> list[tuple]:
    """Per delta, the largest dynamical ball (as a point count) and its center."""
    net = sys.net()
    n = len(net)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = dynamical_distance(sys, net[i], net[j], H, metric)
    out = []
    for delta in deltas:
        sizes = (D <= delta).sum(axis=1)
        k = int(np.argmax(sizes))
        out.append((int(sizes[k]), net[k]))
    return out


def suspension_theorem_check(sys: BaseSystem, deltas: Sequence[float], eps: float = 0.4,
                             T: int = 2, g: int = 4, workers: int = 1,
                             constant: str = "double") -> dict:
    """Compare base and flow counts along both directions of the suspension
    argument, under roof 1.

    The base side counts points of dynamical balls, the homeomorphism form
    of N-expansivity; the orbit-class base curve is reported alongside.

    flow-to-base: fiber-0 centers of the flow contain every base ball at
    the same delta as distinct segments, so N_flow(delta) >= #ball(delta).

    base-to-flow: with the base measured in rho'(x, y) = min(d(x, y),
    d(phi x, phi y)), N_flow(delta') <= #ball'(delta) at the matched
    delta', segments of radius eps.

    The base horizon equals the flow horizon T.
    """
    _check_grid(deltas)
    if not 0 < eps < 0.5:
        raise InvalidParameter("eps must lie in (0, 1/2)")
    flow = suspend(sys, 1)
    h = Fraction(1, g)
    eps_t = as_time(eps)
    primes = [matched_delta(d, eps, constant) for d in deltas]
    base = map_index_curve(sys, deltas, T)
    card = ball_cardinality_curve(sys, deltas, T)
    card_prime = ball_cardinality_curve(sys, deltas, T, pullback_metric(sys))
    points = flow.grid_points(g)
    table = pair_table(flow, points, T, h, cutoff=max(max(deltas), max(primes)), workers=workers)
    meta = _flow_meta(flow, T, h, g, eps_t, False)
    fiber0 = [i for i, p in enumerate(points) if p.fiber == 0]
    memo: dict = {}
    flow0 = curve_from_table(table, deltas, eps_t, fiber0, meta, memo)
    prime_grid = sorted(set(primes))
    flow_prime = curve_from_table(table, prime_grid, eps_t, None, meta, memo)

    violations, witnesses = [], []
    for k, delta in enumerate(deltas):
        (nb, cb), nf = card[k], flow0.entries[k]
        if nf.index < nb:
            violations.append({"direction": "flow-to-base", "delta": delta,
                               "base_count": nb, "flow_index": nf.index,
                               "base_center": str(cb)})
        dp = primes[k]
        fp = flow_prime.entries[prime_grid.index(dp)]
        nbp, cbp = card_prime[k]
        if fp.index > nbp:
            violations.append({"direction": "base-to-flow", "delta": delta, "delta_prime": dp,
                               "base_count": nbp, "flow_index": fp.index,
                               "flow_center": str(fp.witness_center),
                               "flow_classes": [[str(q) for q in c] for c in fp.witness_classes]})
        witnesses.append({"delta": delta, "delta_prime": dp, "base_center": str(cb),
                          "base_pullback_center": str(cbp),
                          "flow_center": str(fp.witness_center)})
    curves = [
        {"name": "base_classes", **base.to_json()},
        {"name": "base_ball_size", "entries": [{"delta": d, "index": n, "witness_center": str(c)}
                                               for d, (n, c) in zip(deltas, card)]},
        {"name": "base_pullback_ball_size",
         "entries": [{"delta": d, "index": n, "witness_center": str(c)}
                     for d, (n, c) in zip(deltas, card_prime)]},
        {"name": "flow_fiber0", **flow0.to_json()},
        {"name": "flow_matched", **flow_prime.to_json()},
    ]
    config = {"system": sys.describe(), "deltas": list(deltas), "eps": eps, "T": T, "g": g,
              "constant": constant,
              "resolution": {"K": getattr(sys, "K", None), "T": T, "h": str(h),
                             "delta_min": min(deltas)}}
    return {"config": config, "curves": curves, "violations": violations,
            "witnesses": witnesses}


@dataclass
class ConjugacyWitness:
    """A conjugacy between two suspension flows, given on net representatives.

    ``time_scale`` is the factor c with Y^{t/c}(h p) = h(X^t p); steps and
    segment radii transported to Y are divided by it.  ``modulus`` holds
    (delta_in, delta_out) pairs, filled by :func:`conjugacy_transport_check`.
    """

    flow_x: SuspensionFlow
    flow_y: SuspensionFlow
    forward: Callable
    inverse: Callable
    time_scale: Fraction = Fraction(1)
    modulus: list = field(default_factory=list)
    modulus_inverse: list = field(default_factory=list)
    name: str = "conjugacy"

    def check_inverse(self, points: Sequence) -> bool:
        return all(self.inverse(self.forward(p)) == p for p in points)


def roof_scaling_witness(sys: BaseSystem, c) -> ConjugacyWitness:
    """(y, s) -> (y, s/c) from the roof-c suspension onto the roof-1 suspension."""
    c = as_time(c)
    fx, fy = suspend(sys, c), suspend(sys, 1)
    return ConjugacyWitness(fx, fy, lambda p: SuspensionPoint(p.base, p.fiber / c),
                            lambda q: SuspensionPoint(q.base, q.fiber * c), c,
                            name=f"roof {c} to roof 1")


def recoding_witness(sys: BaseSystem, b: int = 2) -> ConjugacyWitness:
    """The b-block code lifted fiberwise to roof-1 suspensions."""
    from .systems import block_recoding

    image, encode, decode = block_recoding(sys, b)
    return ConjugacyWitness(suspend(sys, 1), suspend(image, 1),
                            lambda p: SuspensionPoint(encode(p.base), p.fiber),
                            lambda q: SuspensionPoint(decode(q.base), q.fiber),
                            Fraction(1), name=f"{b}-block recoding")


def _modulus(src: PairTable, dst: PairTable, mapping: list[int], deltas) -> list:
    """Per delta, the largest image distance of a pair at distance <= delta."""
    out, running = [], 0.0
    for delta in deltas:
        rows, cols = np.nonzero(src.values <= delta)
        worst = 0.0
        for i, j in zip(rows, cols):
            if i < j:
                worst = max(worst, dst.value(mapping[i], mapping[j]))
        running = max(running, worst)
        out.append((float(delta), float(running)))
    return out


def _lookup(modulus: list, delta: float) -> float:
    for d_in, d_out in modulus:
        if d_in == delta:
            return d_out
    raise CoverageError(f"modulus table has no entry for delta={delta}")


def conjugacy_transport_check(witness: ConjugacyWitness, deltas: Sequence[float], T, h,
                              eps_seg=None, g: int | None = None, workers: int = 1) -> dict:
    """Index-curve sandwich across a conjugacy.

    For each delta: N_X(delta) <= N_Y(out(delta)) and N_Y(delta) <= N_X(out'(delta)),
    where out and out' come from the modulus tables certified on the nets.
    X is sampled with step h up to T, Y with step h/c up to T/c.
    """
    _check_grid(deltas)
    c = witness.time_scale
    T, h = as_time(T), as_time(h)
    eps_seg = 2 * h if eps_seg is None else as_time(eps_seg)
    fx, fy = witness.flow_x, witness.flow_y
    g = _grid_size(fx, h, g)
    px, py = fx.grid_points(g), fy.grid_points(g)
    if not witness.check_inverse(px):
        raise InvalidParameter("witness inverse does not undo the forward map on the net")
    idx_y = {q: i for i, q in enumerate(py)}
    try:
        to_y = [idx_y[witness.forward(p)] for p in px]
    except KeyError as exc:
        raise InvalidParameter(f"witness maps {exc.args[0]} off the target net") from None
    to_x = [0] * len(py)
    for i, j in enumerate(to_y):
        to_x[j] = i
    cut = max(deltas)
    tx = pair_table(fx, px, T, h, cut, workers)
    ty = pair_table(fy, py, T / c, h / c, cut, workers)
    witness.modulus = _modulus(tx, ty, to_y, deltas)
    witness.modulus_inverse = _modulus(ty, tx, to_x, deltas)
    # thresholds beyond the cutoff need exact table entries
    outs = [_lookup(witness.modulus, d) for d in deltas]
    outs_inv = [_lookup(witness.modulus_inverse, d) for d in deltas]
    meta_x = _flow_meta(fx, T, h, g, eps_seg, False)
    meta_y = _flow_meta(fy, T / c, h / c, g, eps_seg / c, False)
    cx = curve_from_table(tx, deltas, eps_seg, metadata=meta_x)
    cy = curve_from_table(ty, deltas, eps_seg / c, metadata=meta_y)

    def index_at(table, curve_eps, meta, targets, needed):
        """Counts at ``targets``; past the cutoff a capped (smaller) threshold
        gives a lower bound, which is enough whenever it already meets ``needed``."""
        capped = [min(t, table.cutoff) for t in targets]
        cur = curve_from_table(table, sorted(set(capped)), curve_eps, metadata=meta)
        got = [cur.index_at(t) for t in capped]
        if any(n < need and t > table.cutoff for n, need, t in zip(got, needed, targets)):
            table.extend(max(targets))
            cur = curve_from_table(table, sorted(set(targets)), curve_eps, metadata=meta)
            got = [cur.index_at(t) for t in targets]
        return got

    ny_out = index_at(ty, eps_seg / c, meta_y, outs, cx.indices)
    nx_out = index_at(tx, eps_seg, meta_x, outs_inv, cy.indices)

    violations = []
    for k, delta in enumerate(deltas):
        nx, ny = cx.entries[k].index, cy.entries[k].index
        if nx > ny_out[k]:
            violations.append({"direction": "X-to-Y", "delta": delta, "delta_out": outs[k],
                               "N_X": nx, "N_Y": ny_out[k]})
        if ny > nx_out[k]:
            violations.append({"direction": "Y-to-X", "delta": delta, "delta_out": outs_inv[k],
                               "N_Y": ny, "N_X": nx_out[k]})
    config = {"witness": witness.name, "deltas": list(deltas), "T": str(T), "h": str(h),
              "g": g, "eps_seg": str(eps_seg), "time_scale": str(c)}
    curves = [{"name": "X", **cx.to_json()}, {"name": "Y", **cy.to_json()}]
    witnesses = [{"modulus": [list(m) for m in witness.modulus],
                  "modulus_inverse": [list(m) for m in witness.modulus_inverse]}]
    return {"config": config, "curves": curves, "violations": violations,
            "witnesses": witnesses}
