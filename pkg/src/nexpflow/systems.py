"""Compact metric spaces with a homeomorphism, presented at finite resolution.

Symbolic systems store a point as a finite window of symbols.  A window
denotes its cylinder, so two points whose known symbols agree are at
distance zero.  Shifting a window moves its index range instead of inventing
symbols; once index 0 falls outside the window, the metric raises
:class:`ResolutionError`.

All shipped metrics are bounded by 1/2, so every space has diameter < 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

from .errors import (
    ConstraintViolation,
    InvalidParameter,
    ResolutionError,
    UnsupportedSystem,
)

__all__ = [
    "SymbolicPoint",
    "BaseSystem",
    "ShiftSystem",
    "Odometer",
    "ExplicitSystem",
    "full_shift",
    "golden_mean_sft",
    "odometer",
    "convergent_fixed_points",
    "finite_permutation",
    "pullback_metric",
    "block_recoding",
    "build_system",
    "EXAMPLE_CATALOG",
]


@dataclass(frozen=True)
class SymbolicPoint:
    """Window of symbols occupying indices ``lo .. lo + len(symbols) - 1``."""

    symbols: tuple
    lo: int

    @property
    def hi(self) -> int:
        return self.lo + len(self.symbols) - 1

    @property
    def radius(self) -> int:
        """Largest r such that every index in [-r, r] is known (may be < 0)."""
        return min(-self.lo, self.hi)

    def at(self, i: int):
        j = i - self.lo
        if j < 0 or j >= len(self.symbols):
            raise ResolutionError(f"index {i} outside window [{self.lo}, {self.hi}]")
        return self.symbols[j]

    def shifted(self, n: int) -> "SymbolicPoint":
        # (sigma^n x)_i = x_{i+n}
        return SymbolicPoint(self.symbols, self.lo - n)

    def __str__(self):
        return "".join(_sym_str(s) for s in self.symbols) + f"@{self.lo}"


def _sym_str(s) -> str:
    if isinstance(s, tuple):
        return "(" + "".join(str(c) for c in s) + ")"
    return str(s)


def _window_distance(x: SymbolicPoint, y: SymbolicPoint) -> float:
    """1/2 * 2^-m where m is the least |i| at which the known symbols differ."""
    r = min(-max(x.lo, y.lo), min(x.hi, y.hi))
    if r < 0:
        raise ResolutionError("windows share no symbols around index 0")
    xs, ys = x.symbols, y.symbols
    xo, yo = -x.lo, -y.lo
    if xs[xo] != ys[yo]:
        return 0.5
    for m in range(1, r + 1):
        if xs[xo - m] != ys[yo - m] or xs[xo + m] != ys[yo + m]:
            return 0.5 / (1 << m)
    return 0.0


class BaseSystem:
    """A homeomorphism of a compact metric space, evaluable on representatives.

    Subclasses provide ``forward``, ``backward``, ``metric`` and ``net``.
    ``kind`` and ``params`` record how the instance was built so that it can
    be re-created from a config block.
    """

    kind: str = "abstract"
    symbolic: bool = False

    def __init__(self, name: str, params: dict):
        self.name = name
        self.params = dict(params)
        self._net = None

    def forward(self, x):
        raise NotImplementedError

    def backward(self, x):
        raise NotImplementedError

    def metric(self, x, y) -> float:
        raise NotImplementedError

    def _enumerate_net(self) -> list:
        raise NotImplementedError

    def net(self) -> list:
        """All resolution representatives, in canonical order."""
        if self._net is None:
            self._net = self._enumerate_net()
        return list(self._net)

    def iterate(self, x, n: int):
        step = self.forward if n >= 0 else self.backward
        for _ in range(abs(n)):
            x = step(x)
        return x

    def orbit_step_between(self, y, z, max_steps: int) -> int | None:
        """Smallest |j| <= max_steps with phi^j(y) identified with z, else None."""
        fwd, bwd = y, y
        for j in range(max_steps + 1):
            try:
                if self.metric(fwd, z) == 0.0:
                    return j
            except ResolutionError:
                pass
            if j:
                try:
                    if self.metric(bwd, z) == 0.0:
                        return -j
                except ResolutionError:
                    pass
            fwd = self.forward(fwd)
            bwd = self.backward(bwd)
        return None

    def is_fixed(self, x) -> bool:
        return self.metric(self.forward(x), x) == 0.0

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class ShiftSystem(BaseSystem):
    """Left shift on a (possibly constrained) space of symbol windows.

    ``allowed`` is the set of admissible adjacent pairs; ``None`` means the
    full shift.  Net windows occupy indices ``lo .. hi``.
    """

    symbolic = True

    def __init__(self, name, params, alphabet: Sequence, K: int,
                 allowed: frozenset | None = None, window: tuple[int, int] | None = None):
        super().__init__(name, params)
        self.alphabet = tuple(alphabet)
        self._alphaset = frozenset(self.alphabet)
        self.allowed = allowed
        self.K = K
        self.window = window if window is not None else (-K, K)

    def point(self, symbols: Sequence, lo: int | None = None) -> SymbolicPoint:
        """Validated point; default placement is the net window."""
        symbols = tuple(symbols)
        if lo is None:
            lo = -(len(symbols) // 2) if self.window == (-self.K, self.K) else self.window[0]
        for s in symbols:
            if s not in self._alphaset:
                raise ConstraintViolation(f"symbol {s!r} not in alphabet")
        if self.allowed is not None:
            for a, b in zip(symbols, symbols[1:]):
                if (a, b) not in self.allowed:
                    raise ConstraintViolation(f"forbidden word {_sym_str(a)}{_sym_str(b)}")
        return SymbolicPoint(symbols, lo)

    def forward(self, x: SymbolicPoint) -> SymbolicPoint:
        return x.shifted(1)

    def backward(self, x: SymbolicPoint) -> SymbolicPoint:
        return x.shifted(-1)

    def iterate(self, x: SymbolicPoint, n: int) -> SymbolicPoint:
        return x.shifted(n)

    def metric(self, x: SymbolicPoint, y: SymbolicPoint) -> float:
        return _window_distance(x, y)

    def _enumerate_net(self):
        lo, hi = self.window
        length = hi - lo + 1
        if self.allowed is None:
            words = itertools.product(self.alphabet, repeat=length)
        else:
            words = self._sft_words(length)
        return [SymbolicPoint(tuple(w), lo) for w in words]

    def _sft_words(self, length):
        succ = {a: [b for b in self.alphabet if (a, b) in self.allowed] for a in self.alphabet}

        def extend(prefix):
            if len(prefix) == length:
                yield prefix
                return
            for b in succ[prefix[-1]]:
                yield from extend(prefix + (b,))

        for a in self.alphabet:
            yield from extend((a,))

    def orbit_step_between(self, y, z, max_steps):
        # exact window equality: distinct net windows are never merged, since a
        # shifted window always occupies a different index range
        for j in sorted(range(-max_steps, max_steps + 1), key=lambda j: (abs(j), -j)):
            if y.shifted(j) == z:
                return j
        return None

    def is_fixed(self, x) -> bool:
        return _same_on_overlap(x.shifted(1), x)


def _same_on_overlap(a: SymbolicPoint, b: SymbolicPoint) -> bool:
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if hi < lo:
        return False
    return a.symbols[lo - a.lo:hi - a.lo + 1] == b.symbols[lo - b.lo:hi - b.lo + 1]


class Odometer(BaseSystem):
    """Binary adding machine on one-sided windows x_0 .. x_{K-1}.

    x_0 is the least significant digit; forward adds one with carry.
    """

    kind = "odometer"
    symbolic = True

    def __init__(self, K: int):
        if K < 1:
            raise InvalidParameter("odometer needs K >= 1")
        super().__init__(f"odometer(K={K})", {"K": K})
        self.K = K
        self.alphabet = (0, 1)

    def point(self, symbols: Sequence) -> SymbolicPoint:
        symbols = tuple(symbols)
        if len(symbols) != self.K or any(s not in (0, 1) for s in symbols):
            raise ConstraintViolation(f"odometer window must be {self.K} binary digits")
        return SymbolicPoint(symbols, 0)

    def _add(self, x: SymbolicPoint, carry_digit: int) -> SymbolicPoint:
        # carry_digit 1: add one (carry over 1s); 0: subtract one (borrow over 0s)
        s = list(x.symbols)
        for i, d in enumerate(s):
            if d == carry_digit:
                s[i] = 1 - carry_digit
            else:
                s[i] = carry_digit
                break
        return SymbolicPoint(tuple(s), x.lo)

    def forward(self, x):
        return self._add(x, 1)

    def backward(self, x):
        return self._add(x, 0)

    def metric(self, x, y):
        for i, (a, b) in enumerate(zip(x.symbols, y.symbols)):
            if a != b:
                return 0.5 / (1 << i)
        return 0.0

    def _enumerate_net(self):
        return [SymbolicPoint(w, 0) for w in itertools.product((0, 1), repeat=self.K)]


class ExplicitSystem(BaseSystem):
    """Finite space given by a point list, a permutation and a distance table."""

    symbolic = False

    def __init__(self, name, params, points: Sequence[Hashable], image: Sequence[int],
                 table: Sequence[Sequence[float]]):
        super().__init__(name, params)
        self.points = tuple(points)
        self._index = {p: i for i, p in enumerate(self.points)}
        if sorted(image) != list(range(len(self.points))):
            raise InvalidParameter("image must be a permutation of the point indices")
        self._image = tuple(image)
        inv = [0] * len(image)
        for i, j in enumerate(image):
            inv[j] = i
        self._preimage = tuple(inv)
        self._table = tuple(tuple(float(v) for v in row) for row in table)
        self.K = len(self.points)

    def index(self, x) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise ConstraintViolation(f"{x!r} is not a point of {self.name}") from None

    def forward(self, x):
        return self.points[self._image[self.index(x)]]

    def backward(self, x):
        return self.points[self._preimage[self.index(x)]]

    def metric(self, x, y):
        return self._table[self.index(x)][self.index(y)]

    def _enumerate_net(self):
        return list(self.points)


def full_shift(m: int, K: int) -> ShiftSystem:
    if m < 2 or K < 1:
        raise InvalidParameter(f"full_shift needs m >= 2 and K >= 1 (got m={m}, K={K})")
    sys = ShiftSystem(f"full_shift(m={m}, K={K})", {"m": m, "K": K}, range(m), K)
    sys.kind = "full_shift"
    return sys


def golden_mean_sft(K: int) -> ShiftSystem:
    if K < 1:
        raise InvalidParameter("golden_mean needs K >= 1")
    allowed = frozenset({(0, 0), (0, 1), (1, 0)})
    sys = ShiftSystem(f"golden_mean(K={K})", {"K": K}, (0, 1), K, allowed=allowed)
    sys.kind = "golden_mean"
    return sys


def odometer(K: int) -> Odometer:
    return Odometer(K)


def convergent_fixed_points(L: int) -> ExplicitSystem:
    """Identity on {0} U {2^-k : 1 <= k <= L}; every point is fixed."""
    if L < 2:
        raise InvalidParameter("convergent_fixed_points needs L >= 2")
    pts = [0.0] + [2.0 ** -k for k in range(L, 0, -1)]
    table = [[abs(a - b) for b in pts] for a in pts]
    sys = ExplicitSystem(f"convergent_fixed_points(L={L})", {"L": L}, pts, range(len(pts)), table)
    sys.kind = "convergent_fixed_points"
    return sys


def finite_permutation(image: Sequence[int], table: Sequence[Sequence[float]]) -> ExplicitSystem:
    """Arbitrary finite system; ``table`` must be a metric bounded by 1/2."""
    n = len(image)
    sys = ExplicitSystem(f"finite_permutation(n={n})",
                         {"image": list(image), "table": [list(r) for r in table]},
                         range(n), image, table)
    sys.kind = "finite_permutation"
    return sys


def pullback_metric(sys: BaseSystem) -> Callable:
    """rho'(x, y) = min(rho(x, y), rho(phi x, phi y)).

    On windows the second term needs one spare symbol, so a radius-0 window
    raises :class:`ResolutionError`.
    """

    def rho_prime(x, y):
        return min(sys.metric(x, y), sys.metric(sys.forward(x), sys.forward(y)))

    return rho_prime


def block_recoding(sys: BaseSystem, b: int):
    """Sliding b-block code of a shift system.

    Returns ``(image_system, encode, decode)``.  ``encode`` maps a window on
    indices lo..hi to the window of b-tuples on lo..hi-b+1; ``decode`` keeps
    first coordinates and appends the tail of the last tuple.
    """
    if not isinstance(sys, ShiftSystem):
        raise UnsupportedSystem(f"block recoding needs a shift system, got {sys.name}")
    if b < 2:
        raise InvalidParameter("block length must be >= 2")
    src_words = []
    for w in itertools.product(sys.alphabet, repeat=b):
        if sys.allowed is None or all(p in sys.allowed for p in zip(w, w[1:])):
            src_words.append(tuple(w))
    alphabet = tuple(src_words)
    allowed = frozenset((u, v) for u in alphabet for v in alphabet if u[1:] == v[:-1])
    lo, hi = sys.window
    image = ShiftSystem(f"recoded({sys.name}, b={b})", {"base": sys.describe(), "b": b},
                        alphabet, sys.K, allowed=allowed, window=(lo, hi - b + 1))
    image.kind = "recoded"

    def encode(x: SymbolicPoint) -> SymbolicPoint:
        s = x.symbols
        if len(s) < b:
            raise ResolutionError("window shorter than block length")
        return SymbolicPoint(tuple(s[i:i + b] for i in range(len(s) - b + 1)), x.lo)

    def decode(y: SymbolicPoint) -> SymbolicPoint:
        s = y.symbols
        return SymbolicPoint(tuple(t[0] for t in s) + tuple(s[-1][1:]), y.lo)

    return image, encode, decode


def build_system(kind: str, **params) -> BaseSystem:
    """Instantiate a catalog system from a config ``system`` block."""
    try:
        if kind == "full_shift":
            return full_shift(int(params.get("m", 2)), int(params["K"]))
        if kind == "golden_mean":
            return golden_mean_sft(int(params["K"]))
        if kind == "odometer":
            return odometer(int(params["K"]))
        if kind == "convergent_fixed_points":
            return convergent_fixed_points(int(params["L"]))
        if kind == "recoded":
            base_kind = params.get("base", "full_shift")
            base_params = {k: v for k, v in params.items() if k not in ("base", "b")}
            base = build_system(base_kind, **base_params)
            return block_recoding(base, int(params.get("b", 2)))[0]
    except KeyError as exc:
        raise InvalidParameter(f"system kind {kind!r} needs parameter {exc.args[0]}") from None
    raise InvalidParameter(f"unknown system kind {kind!r}")


# (kind, parameters) pairs exercised by the test-suite at every listed size
EXAMPLE_CATALOG = [
    ("full_shift", {"m": 2, "K": 3}),
    ("golden_mean", {"K": 3}),
    ("odometer", {"K": 3}),
    ("odometer", {"K": 4}),
    ("convergent_fixed_points", {"L": 5}),
    ("recoded", {"base": "full_shift", "m": 2, "K": 3, "b": 2}),
]
