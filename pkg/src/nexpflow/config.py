"""Plain-text experiment configs (INI sections read with :mod:`configparser`).

Example::

    command = suspend-check

    [system]
    kind = full_shift
    m = 2
    K = 3

    [flow]
    roof = 1        ; flow time units
    T = 2           ; flow time units
    h = 1/4         ; flow time units
    g = 4

    [check]
    delta_grid = 1/64, 1/32, 1/16, 1/8, 1/4   ; metric units
    eps = 2/5

Top-level keys before the first section belong to ``[run]``.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError, NExpError
from .expansivity import MATCHED_CONSTANTS
from .systems import build_system

__all__ = ["ExperimentConfig", "load_config", "parse_config", "COMMANDS", "WITNESSES"]

COMMANDS = ("index-map", "index-flow", "suspend-check", "conjugacy-check", "sections-check",
            "frechet")
WITNESSES = ("identity", "roof", "recoding")


def _frac(field_name: str, text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(field_name, f"not a number: {text!r}") from None


def _grid(field_name: str, text: str) -> list[float]:
    parts = [t for t in text.replace(",", " ").split() if t]
    return [float(_frac(field_name, t)) for t in parts]


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        f = Fraction(x)
        return str(f) if f.denominator <= 1 << 20 else repr(x)
    return str(x)


@dataclass
class ExperimentConfig:
    command: str
    system: dict  # kind plus its parameters
    T: Fraction = Fraction(2)
    h: Fraction = Fraction(1, 4)
    g: int | None = None
    roof: Fraction = Fraction(1)
    delta_grid: list = field(default_factory=list)
    eta_grid: list = field(default_factory=list)
    eps_seg: Fraction | None = None
    eps: float = 0.4
    constant: str = "double"
    witness: str = "identity"
    witness_roof: Fraction = Fraction(2)
    block: int = 2
    pair: tuple = (0, Fraction(0), 1, Fraction(0))  # net index, fiber, net index, fiber
    seed: int = 0
    out_dir: str = "out"

    @property
    def K(self):
        return self.system.get("K", self.system.get("L"))

    @property
    def grid_size(self) -> int:
        if self.g is not None:
            return self.g
        k = self.roof / self.h
        return int(k)

    def validate(self) -> "ExperimentConfig":
        """Check every parameter constraint before any computation runs."""
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}; one of {COMMANDS}")
        if "kind" not in self.system:
            raise ConfigError("system.kind", "missing")
        try:
            build_system(self.system["kind"], **{k: v for k, v in self.system.items() if k != "kind"})
        except NExpError as exc:
            raise ConfigError("system", str(exc)) from None
        if self.command != "frechet":
            if not self.delta_grid:
                raise ConfigError("delta_grid", "the delta grid is empty")
            if any(d <= 0 for d in self.delta_grid):
                raise ConfigError("delta_grid", "delta values must be positive")
            if any(b <= a for a, b in zip(self.delta_grid, self.delta_grid[1:])):
                raise ConfigError("delta_grid", "delta values must be strictly increasing")
        if any(e <= 0 for e in self.eta_grid):
            raise ConfigError("eta_grid", "eta values must be positive")
        if self.roof <= 0:
            raise ConfigError("roof", "must be positive")
        if self.h <= 0:
            raise ConfigError("h", "must be positive")
        if self.T < 0 or (self.T / self.h).denominator != 1:
            raise ConfigError("T", "must be a non-negative multiple of h")
        if self.g is None and (self.roof / self.h).denominator != 1:
            raise ConfigError("g", "h does not divide the roof; give g explicitly")
        if self.g is not None and self.g < 1:
            raise ConfigError("g", "must be >= 1")
        if self.eps_seg is not None and self.eps_seg < 0:
            raise ConfigError("eps_seg", "must be non-negative")
        if self.command == "suspend-check":
            if not 0 < self.eps < 0.5:
                raise ConfigError("eps", "must lie in (0, 1/2)")
            if self.T.denominator != 1:
                raise ConfigError("T", "the base horizon needs an integer T")
        if self.command == "sections-check" and self.T.denominator != 1:
            raise ConfigError("T", "the section horizon needs an integer T")
        if self.constant not in MATCHED_CONSTANTS:
            raise ConfigError("constant", f"one of {MATCHED_CONSTANTS}")
        if self.witness not in WITNESSES:
            raise ConfigError("witness", f"one of {WITNESSES}")
        if self.witness_roof <= 0:
            raise ConfigError("witness_roof", "must be positive")
        if self.block < 2:
            raise ConfigError("block", "must be >= 2")
        return self

    # serialization -------------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"command": self.command, "seed": str(self.seed), "out_dir": self.out_dir}
        cp["system"] = {k: _fmt(v) for k, v in self.system.items()}
        flow = {"roof": _fmt(self.roof), "T": _fmt(self.T), "h": _fmt(self.h)}
        if self.g is not None:
            flow["g"] = str(self.g)
        if self.eps_seg is not None:
            flow["eps_seg"] = _fmt(self.eps_seg)
        cp["flow"] = flow
        cp["check"] = {
            "delta_grid": ", ".join(_fmt(d) for d in self.delta_grid),
            "eta_grid": ", ".join(_fmt(e) for e in self.eta_grid),
            "eps": _fmt(self.eps),
            "constant": self.constant,
        }
        cp["conjugacy"] = {"witness": self.witness, "witness_roof": _fmt(self.witness_roof),
                           "block": str(self.block)}
        i, s, j, r = self.pair
        cp["frechet"] = {"p": f"{i}@{s}", "q": f"{j}@{r}"}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_dict(self) -> dict:
        """JSON-ready view, embedded in every report."""
        i, s, j, r = self.pair
        return {
            "command": self.command, "system": {k: _fmt(v) for k, v in self.system.items()},
            "roof": _fmt(self.roof), "T": _fmt(self.T), "h": _fmt(self.h), "g": self.grid_size,
            "delta_grid": list(self.delta_grid), "eta_grid": list(self.eta_grid),
            "eps_seg": None if self.eps_seg is None else _fmt(self.eps_seg), "eps": self.eps,
            "constant": self.constant, "witness": self.witness,
            "witness_roof": _fmt(self.witness_roof), "block": self.block,
            "pair": [i, _fmt(s), j, _fmt(r)], "seed": self.seed,
        }


def _pair_point(field_name: str, text: str):
    try:
        idx, fib = text.split("@")
        return int(idx), Fraction(fib)
    except ValueError:
        raise ConfigError(field_name, f"expected <net index>@<fiber>, got {text!r}") from None


def _system_value(v: str):
    try:
        return int(v)
    except ValueError:
        return v.strip()


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text if not text.lstrip().startswith("[") else text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    run = cp["run"] if cp.has_section("run") else {}
    if "command" not in run:
        raise ConfigError("command", "missing")
    if not cp.has_section("system"):
        raise ConfigError("system", "missing [system] section")
    system = {k: _system_value(v) for k, v in cp["system"].items()}
    flow = cp["flow"] if cp.has_section("flow") else {}
    check = cp["check"] if cp.has_section("check") else {}
    conj = cp["conjugacy"] if cp.has_section("conjugacy") else {}
    fr = cp["frechet"] if cp.has_section("frechet") else {}
    kw: dict = {"command": run["command"].strip(), "system": system}
    if "seed" in run:
        kw["seed"] = int(run["seed"])
    if "out_dir" in run:
        kw["out_dir"] = run["out_dir"].strip()
    for name in ("roof", "T", "h", "eps_seg"):
        if name in flow:
            kw[name] = _frac(name, flow[name])
    if "g" in flow:
        kw["g"] = int(_frac("g", flow["g"]))
    if "delta_grid" in check:
        kw["delta_grid"] = _grid("delta_grid", check["delta_grid"])
    if "eta_grid" in check:
        kw["eta_grid"] = _grid("eta_grid", check["eta_grid"])
    if "eps" in check:
        kw["eps"] = float(_frac("eps", check["eps"]))
    if "constant" in check:
        kw["constant"] = check["constant"].strip()
    if "witness" in conj:
        kw["witness"] = conj["witness"].strip()
    if "witness_roof" in conj:
        kw["witness_roof"] = _frac("witness_roof", conj["witness_roof"])
    if "block" in conj:
        kw["block"] = int(_frac("block", conj["block"]))
    if "p" in fr or "q" in fr:
        p = _pair_point("p", fr.get("p", "0@0"))
        q = _pair_point("q", fr.get("q", "1@0"))
        kw["pair"] = (*p, *q)
    return ExperimentConfig(**kw).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
