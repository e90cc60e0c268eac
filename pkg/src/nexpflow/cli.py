"""Command-line runner: ``nexpflow <subcommand> --config PATH [--out DIR]``.

Exit status is 0 on success, 2 when a check reports violations and
1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from fractions import Fraction

import numpy as np

from .config import COMMANDS, ExperimentConfig, load_config
from .errors import NExpError
from .expansivity import (ConjugacyWitness, conjugacy_transport_check, flow_index_curve,
                          recoding_witness, roof_scaling_witness, suspension_theorem_check)
from .orbits import fixed_point_isolation_check, map_index_curve
from .reparam import alignment_table, flow_trace
from .report import write_report
from .sections import theoremC_equivalence_check
from .suspension import SuspensionPoint, suspend
from .systems import build_system

log = logging.getLogger("nexpflow")

WORKERS_ENV = "NEXPFLOW_WORKERS"

HELP = {
    "index-map": "Index curve N(delta) of the base homeomorphism: the largest orbit-class "
                 "count of a dynamical delta-ball, the discrete form of N-expansivity. Also "
                 "reports whether fixed points are accumulated by fixed points.",
    "index-flow": "Index curve of the roof suspension flow: companion sets under anchored "
                  "reparametrized closeness on a fiber grid, counted in orbit segments.",
    "suspend-check": "Suspension equivalence harness: flow counts against base ball sizes in "
                     "both directions of the suspension argument, with delta' = "
                     "min{2 delta, eps, 1/4} (constant = double) or min{delta/2, eps, 1/4} "
                     "(constant = half). Exit 2 on violations.",
    "conjugacy-check": "Conjugacy invariance harness: index-curve sandwich across an identity, "
                       "roof-scaling or block-recoding conjugacy. Exit 2 on violations.",
    "sections-check": "Cross-section harness: flow index against stable/unstable set "
                      "intersection counts on delta-adequate sections. Exit 2 on "
                      "disagreements.",
    "frechet": "Debug: print the anchored alignment tables and an optimal staircase for "
               "the pair given in the [frechet] block.",
}


def _system(cfg: ExperimentConfig):
    params = {k: v for k, v in cfg.system.items() if k != "kind"}
    return build_system(cfg.system["kind"], **params)


def _body(cfg: ExperimentConfig, result: dict) -> dict:
    body = {"config": cfg.to_dict(), "curves": [], "violations": [], "witnesses": []}
    body.update(result)
    body["config"] = cfg.to_dict()
    if "config" in result:
        body["run"] = result["config"]
    return body


def _classification(curve, resolution: dict) -> dict:
    """Resolution-qualified verdict: a finite grid only brackets the true index."""
    n = curve.entries[0].index
    where = ", ".join(f"{k}={v}" for k, v in resolution.items())
    return {"N": n, "resolution": resolution,
            "statement": f"{n}-expansive at resolution ({where})"}


def run_index_map(cfg, workers):
    sys_ = _system(cfg)
    H = int(cfg.T)
    curve = map_index_curve(sys_, cfg.delta_grid, H)
    fp = fixed_point_isolation_check(sys_)
    res = {"K": curve.metadata.get("K"), "H": H, "delta_min": min(cfg.delta_grid)}
    return {"curves": [{"name": "base", **curve.to_json()}], "fixed_points": fp.to_json(),
            "classification": _classification(curve, res)}, 0


def run_index_flow(cfg, workers):
    flow = suspend(_system(cfg), cfg.roof)
    curve = flow_index_curve(flow, cfg.delta_grid, cfg.T, cfg.h, eps_seg=cfg.eps_seg,
                             g=cfg.g, workers=workers)
    res = {"K": curve.metadata.get("K"), "T": str(cfg.T), "h": str(cfg.h),
           "delta_min": min(cfg.delta_grid)}
    return {"curves": [{"name": "flow", **curve.to_json()}],
            "classification": _classification(curve, res)}, 0


def run_suspend_check(cfg, workers):
    res = suspension_theorem_check(_system(cfg), cfg.delta_grid, eps=cfg.eps, T=int(cfg.T),
                                   g=cfg.grid_size, workers=workers, constant=cfg.constant)
    return res, 2 if res["violations"] else 0


def _witness(cfg) -> ConjugacyWitness:
    sys_ = _system(cfg)
    if cfg.witness == "roof":
        return roof_scaling_witness(sys_, cfg.witness_roof)
    if cfg.witness == "recoding":
        return recoding_witness(sys_, cfg.block)
    flow = suspend(sys_, cfg.roof)
    return ConjugacyWitness(flow, flow, lambda p: p, lambda p: p, Fraction(1), name="identity")


def run_conjugacy_check(cfg, workers):
    w = _witness(cfg)
    c = w.time_scale
    # X runs on its own roof: scale the unit-roof time parameters by c
    res = conjugacy_transport_check(w, cfg.delta_grid, cfg.T * c, cfg.h * c,
                                    eps_seg=None if cfg.eps_seg is None else cfg.eps_seg * c,
                                    g=cfg.grid_size, workers=workers)
    return res, 2 if res["violations"] else 0


def run_sections_check(cfg, workers):
    flow = suspend(_system(cfg), cfg.roof)
    etas = None
    if cfg.eta_grid:
        etas = lambda d: [e for e in cfg.eta_grid if e <= d] or [cfg.eta_grid[0]]  # noqa: E731
    res = theoremC_equivalence_check(flow, cfg.delta_grid, cfg.T, cfg.h, eps_seg=cfg.eps_seg,
                                     etas=etas, workers=workers)
    return res, 2 if res["violations"] else 0


def _format_table(F: np.ndarray) -> str:
    return "\n".join(" ".join(f"{v:8.5f}" for v in row) for row in F)


def run_frechet(cfg, workers):
    flow = suspend(_system(cfg), cfg.roof)
    net = flow.system.net()
    i, s, j, r = cfg.pair
    p = flow.point(net[i], s)
    q = flow.point(net[j], r)
    ta, tb = flow_trace(flow, p, cfg.T, cfg.h), flow_trace(flow, q, cfg.T, cfg.h)
    tab = alignment_table(ta, tb, flow.distance)
    print(f"p = {p}\nq = {q}\naligned distance = {tab.value:g}")
    print("forward table:\n" + _format_table(tab.forward_table))
    print("backward table:\n" + _format_table(tab.backward_table))
    print("staircase: " + " ".join(f"({a},{b})" for a, b in tab.alignment.signed_pairs()))
    return {"p": str(p), "q": str(q), "value": tab.value,
            "forward_table": tab.forward_table.tolist(),
            "backward_table": tab.backward_table.tolist(),
            "staircase": [list(x) for x in tab.alignment.signed_pairs()]}, 0


RUNNERS = {
    "index-map": run_index_map,
    "index-flow": run_index_flow,
    "suspend-check": run_suspend_check,
    "conjugacy-check": run_conjugacy_check,
    "sections-check": run_sections_check,
    "frechet": run_frechet,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nexpflow",
        description="Finite-resolution experiments on N-expansive flows.",
        epilog=f"The worker count may also be set with ${WORKERS_ENV}; --workers wins.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", required=True, metavar="PATH", help="experiment config file")
        p.add_argument("--out", metavar="DIR", help="output directory (default: config out_dir)")
        p.add_argument("--workers", type=int, metavar="N", help="worker processes")
        p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return parser


def _workers(arg) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise NExpError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = load_config(args.config)
        if cfg.command != args.command:
            log.warning("config command %s overridden by %s", cfg.command, args.command)
            cfg.command = args.command
            cfg.validate()
        workers = _workers(args.workers)
        log.info("running %s with %d worker(s)", cfg.command, workers)
        result, status = RUNNERS[cfg.command](cfg, workers)
        out = args.out or cfg.out_dir
        name = cfg.command.replace("-", "_")
        paths = write_report(out, name, _body(cfg, result), started, workers,
                             figures=not args.no_figures)
        n_viol = len(result.get("violations", []))
        print(f"{cfg.command}: {'ok' if status == 0 else f'{n_viol} violation(s)'}; "
              f"report {paths['report']}")
        return status
    except NExpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected failures still map to status 1
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
