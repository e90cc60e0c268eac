"""Cross-sections of constant-roof suspensions and the stable/unstable set count.

Sections sit at fiber 0 and are cut out of the base net by cylinders (or,
for explicit systems, by greedy clusters).  The flow crosses fiber 0 once
per roof, so the first-return map is the base map and projections onto a
section slide a point down (or up) its fiber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidParameter, ResolutionError
from .expansivity import flow_index_curve, flow_segments
from .orbits import _check_grid, min_segment_cover
from .suspension import SuspensionFlow, SuspensionPoint, as_time
from .systems import ExplicitSystem, Odometer, ShiftSystem

__all__ = [
    "SectionFamily",
    "SectionParams",
    "build_adequate_pair",
    "theta_of",
    "default_params",
    "project_P_rho",
    "first_return",
    "stable_set",
    "unstable_set",
    "ws_wu_count",
    "theoremC_equivalence_check",
]


@dataclass
class SectionFamily:
    """Pieces S_i of the fiber-0 copy of the base net, with T_i inside S_i.

    ``piece_of(y)`` names the piece a base point belongs to, also for
    points (such as shifted windows) that are not themselves net points.
    """

    flow: SuspensionFlow
    S: list  # lists of base points
    T: list
    eps: Fraction
    delta: float
    piece_of: Callable
    diameters: list

    def __len__(self):
        return len(self.S)

    def section_points(self) -> list[SuspensionPoint]:
        return [SuspensionPoint(y, Fraction(0)) for piece in self.T for y in piece]


@dataclass(frozen=True)
class SectionParams:
    theta: Fraction
    rho: float
    eps0: float
    eta: float

    def check(self, eps: Fraction):
        e, th = float(eps), float(self.theta)
        if not 5 * self.rho < e:
            raise InvalidParameter(f"rho={self.rho} violates 5 rho < eps={e}")
        if not 2 * self.rho < th:
            raise InvalidParameter(f"rho={self.rho} violates 2 rho < theta={th}")
        if not 0 < self.eps0 < th / 2:
            raise InvalidParameter(f"eps0={self.eps0} must lie in (0, theta/2)")
        if not 0 < self.eta < self.eps0:
            raise InvalidParameter(f"eta={self.eta} must lie in (0, eps0)")


def _cylinder_key(sys, r: int) -> Callable:
    if isinstance(sys, ShiftSystem):
        return lambda y: tuple(y.at(i) for i in range(-r + 1, r))
    return lambda y: tuple(y.at(i) for i in range(r))


def _cylinder_level(sys, delta: float) -> int:
    """Smallest r whose cylinders have diameter 1/2 * 2^-r <= delta."""
    r = 0
    while 0.5 * 2.0 ** -r > delta:
        r += 1
    limit = sys.K + 1 if isinstance(sys, ShiftSystem) else sys.K
    if r > limit:
        raise ResolutionError(f"delta={delta} is below the net granularity {0.5 * 2.0 ** -limit}")
    return r


def _greedy_pieces(sys: ExplicitSystem, delta: float) -> list[list]:
    pieces: list[list] = []
    for y in sys.net():
        for piece in pieces:
            if all(sys.metric(y, z) <= delta for z in piece):
                piece.append(y)
                break
        else:
            pieces.append([y])
    return pieces


def build_adequate_pair(flow: SuspensionFlow, delta: float, h=None) -> SectionFamily:
    """Partition the fiber-0 net into pieces of diameter <= delta.

    Cylinders are clopen, so each T_i equals its S_i: a cylinder is its own
    interior.  The section time is roof/4.  The family invariants are
    checked on the net before returning; ``h`` is the time step of that
    check (default roof/8).
    """
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    sys = flow.system
    if isinstance(sys, (ShiftSystem, Odometer)):
        r = _cylinder_level(sys, delta)
        key = _cylinder_key(sys, r)
        groups: dict = {}
        for y in sys.net():
            groups.setdefault(key(y), []).append(y)
        labels = sorted(groups)
        S = [groups[k] for k in labels]
        lookup = {k: i for i, k in enumerate(labels)}

        def piece_of(y):
            try:
                return lookup.get(key(y))
            except ResolutionError:
                return None

        diam = [0.5 * 2.0 ** -r] * len(S)
    elif isinstance(sys, ExplicitSystem):
        S = _greedy_pieces(sys, delta)
        lookup = {y: i for i, piece in enumerate(S) for y in piece}

        def piece_of(y):
            return lookup.get(y)

        diam = [max((sys.metric(a, b) for a in p for b in p), default=0.0) for p in S]
    else:
        raise InvalidParameter(f"no section builder for {sys.name}")
    fam = SectionFamily(flow, S, [list(p) for p in S], flow.roof / 4, delta, piece_of, diam)
    _verify_family(fam, as_time(h) if h is not None else flow.roof / 8)
    return fam


def _verify_family(fam: SectionFamily, h: Fraction):
    flow, c = fam.flow, fam.flow.roof
    if any(d > fam.delta for d in fam.diameters):
        raise InvalidParameter("a section piece exceeds the diameter bound")
    for S_i, T_i in zip(fam.S, fam.T):
        if not set(T_i) <= set(S_i):
            raise InvalidParameter("T_i must lie inside S_i")
    # cross-section of time eps: no other grid time in (-eps, eps) lands on fiber 0
    steps = math.ceil(fam.eps / h)
    for k in range(1, steps):
        if (k * h) % c == 0:
            raise InvalidParameter("section is not a cross-section of time eps")
    # the pieces cover the base net, so the return-time saturations cover the grid
    covered = {y for piece in fam.T for y in piece}
    g = int(c / h)
    for p in flow.grid_points(g):
        if p.base not in covered:
            raise InvalidParameter(f"{p} escapes the forward saturation of the sections")
        back = flow.flow(p, c - p.fiber) if p.fiber else p
        if fam.piece_of(back.base) is None:
            raise InvalidParameter(f"{p} escapes the backward saturation of the sections")


def theta_of(flow: SuspensionFlow, family: SectionFamily) -> Fraction:
    """Smallest gap between consecutive section crossings: the roof."""
    return flow.roof


def default_params(flow: SuspensionFlow, family: SectionFamily, eta: float | None = None) -> SectionParams:
    theta = theta_of(flow, family)
    rho = min(float(family.eps) / 5, float(theta) / 2) / 1.01
    eps0 = min(float(theta) / 2, 0.5) / 1.01
    if eta is None:
        eta = min(family.delta, eps0 / 1.01)
    return SectionParams(theta, rho, eps0, eta)


def project_P_rho(flow: SuspensionFlow, family: SectionFamily, x: SuspensionPoint,
                  i: int | None, rho: float) -> SuspensionPoint:
    """The point of S_i on x's orbit within time rho of x.

    With ``i=None`` the target is the union of the pieces, which is the
    whole fiber-0 copy of the base since the pieces partition it.
    """
    c = flow.roof
    hits = []
    for t in (-x.fiber, c - x.fiber):
        if abs(float(t)) < rho:
            y = flow.flow(x, t)
            if i is None or family.piece_of(y.base) == i:
                hits.append(y)
    if not hits:
        raise DomainError(f"{x} is not within time {rho} of section {i}")
    if len(hits) > 1:
        raise DomainError(f"{x} meets section {i} twice within time {rho}")
    return hits[0]


def _on_sections(family: SectionFamily, x: SuspensionPoint):
    if x.fiber != 0 or family.piece_of(x.base) is None:
        raise DomainError(f"{x} is not on a section")


def first_return(flow: SuspensionFlow, family: SectionFamily, x: SuspensionPoint):
    """(first section point after x, return time)."""
    _on_sections(family, x)
    return flow.flow(x, flow.roof), flow.roof


def _companions(flow, family, params, y: SuspensionPoint, J: int, sign: int):
    """y_0 = y, y_j = P_rho(X^{+-t}(y_{j-1})) with t the return time."""
    out = [y]
    for _ in range(J):
        nxt = flow.flow(out[-1], sign * flow.roof)
        out.append(project_P_rho(flow, family, nxt, None, params.rho))
    return out


def _check_budget(flow: SuspensionFlow, J: int):
    sys = flow.system
    if isinstance(sys, ShiftSystem):
        lo, hi = sys.window
        if J > min(-lo, hi):
            raise ResolutionError(f"J={J} iterates need a window of radius >= {J}")


def _eta_set(flow, family, params, x, J, sign) -> list:
    _on_sections(family, x)
    if J < 0:
        raise InvalidParameter("J must be non-negative")
    _check_budget(flow, J)
    ref = _companions(flow, family, params, x, J, sign)
    out = []
    for y in family.section_points():
        seq = _companions(flow, family, params, y, J, sign)
        if all(flow.distance(a, b) < params.eta for a, b in zip(ref, seq)):
            out.append(y)
    return out


def stable_set(flow: SuspensionFlow, family: SectionFamily, params: SectionParams,
               x: SuspensionPoint, J: int) -> list:
    """Section net points whose forward companions stay within eta (strict) for j <= J."""
    return _eta_set(flow, family, params, x, J, +1)


def unstable_set(flow: SuspensionFlow, family: SectionFamily, params: SectionParams,
                 x: SuspensionPoint, J: int) -> list:
    return _eta_set(flow, family, params, x, J, -1)


def _companion_distances(flow, family, params, J: int, sign: int):
    """D[a, b] = max over j <= J of the distance between the j-th companions."""
    pts = family.section_points()
    seqs = [_companions(flow, family, params, y, J, sign) for y in pts]
    n = len(pts)
    D = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            D[a, b] = D[b, a] = max(flow.distance(u, v) for u, v in zip(seqs[a], seqs[b]))
    return pts, D


def ws_wu_count(flow: SuspensionFlow, family: SectionFamily, params: SectionParams, J: int,
                eps_seg=None, _tables=None) -> dict:
    """Per section point x, the orbit-segment count of W^s(x) and W^u(x) intersected."""
    params.check(family.eps)
    if J < 0:
        raise InvalidParameter("J must be non-negative")
    _check_budget(flow, J)
    eps_seg = family.eps / 2 if eps_seg is None else as_time(eps_seg)
    segment_of = flow_segments(flow, eps_seg, flow.roof / 8)
    if _tables is None:
        _tables = (_companion_distances(flow, family, params, J, +1),
                   _companion_distances(flow, family, params, J, -1))
    (pts, Ds), (_, Du) = _tables
    inside = (Ds < params.eta) & (Du < params.eta)
    counts = {}
    for a, x in enumerate(pts):
        both = [pts[b] for b in np.flatnonzero(inside[a])]
        counts[x] = len(min_segment_cover(both, segment_of))
    return counts


def theoremC_equivalence_check(flow: SuspensionFlow, deltas: Sequence[float], T, h,
                               eps_seg=None, etas: Callable | None = None,
                               workers: int = 1) -> dict:
    """Compare flow companion counts with stable/unstable intersection counts.

    For each delta, the flow index N(delta) bounds the section counts: a
    flow that is N-expansive at delta yields an eta <= delta with
    #W^s(x) and W^u(x) at most N for every x.  A disagreement is a delta
    where every eta on the grid {delta/4, delta/2, delta} gives a larger
    count.  The section horizon J equals T.
    """
    _check_grid(deltas)
    T, h = as_time(T), as_time(h)
    if T.denominator != 1:
        raise InvalidParameter("section horizon needs an integer T")
    J = int(T)
    etas = etas or (lambda d: [d / 4, d / 2, d])
    curve = flow_index_curve(flow, deltas, T, h, eps_seg=eps_seg, workers=workers)
    rows, disagreements = [], []
    for entry in curve.entries:
        delta = entry.delta
        fam = build_adequate_pair(flow, delta)
        base = default_params(flow, fam)
        per_eta, tables = [], None
        for eta in etas(delta):
            eta = min(eta, base.eps0 / 1.01)
            params = SectionParams(base.theta, base.rho, base.eps0, eta)
            if tables is None:
                tables = (_companion_distances(flow, fam, params, J, +1),
                          _companion_distances(flow, fam, params, J, -1))
            counts = ws_wu_count(flow, fam, params, J, _tables=tables)
            x, n = max(counts.items(), key=lambda kv: kv[1])
            per_eta.append({"eta": eta, "max_count": n, "center": str(x)})
        agree = min(r["max_count"] for r in per_eta) <= entry.index
        row = {"delta": delta, "flow_index": entry.index,
               "flow_center": str(entry.witness_center), "sections": len(fam),
               "ladder": {"theta": str(base.theta), "rho": base.rho, "eps0": base.eps0,
                          "eps": str(fam.eps)},
               "etas": per_eta, "agree": agree}
        rows.append(row)
        if not agree:
            disagreements.append(row)
    config = {"flow": flow.describe(), "deltas": list(deltas), "T": str(T), "h": str(h),
              "J": J}
    return {"config": config, "curves": [{"name": "flow", **curve.to_json()}],
            "rows": rows, "violations": disagreements, "witnesses": []}
