"""Command line entry point.

    privcon run CONFIG
    privcon opd [--delta D] [--steps K] [--graph FILE]
    privcon compare [--runs M] [--sigma S] [--phi P] [--reference alpha|beta]
    privcon verify
    privcon spectrum GRAPH

Outputs go to ``--out`` (or the config's ``output_dir``); the
``PRIVCON_OUTPUT_DIR`` environment variable overrides both.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..errors import GraphError, PreconditionError
from ..graph import demo_graph, is_strongly_connected, is_weight_balanced, load_graph, spectrum, stepsize_bound
from . import io
from .experiments import ConfigError, ExperimentConfig, compare_privacy, run_experiment, run_opd, verify_suite
from .presets import OPD_ALPHA, OPD_BETA, OPDPreset


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_experiment(cfg, args.out)
    for name, entry in result.summary["runs"].items():
        print(f"{name}: {entry['algorithm']} K={entry['horizon']} consensus={entry['consensus_value']:.10g} "
              f"max_err={entry['max_abs_error']:.3e}")
    for v in result.violations:
        print(f"VIOLATION {v}", file=sys.stderr)
    return result.exit_code


def _cmd_opd(args) -> int:
    preset = OPDPreset() if args.graph is None else OPDPreset(graph=load_graph(args.graph))
    res = run_opd(preset, args.delta, args.steps, io.output_dir(args.out))
    print(f"delta={res['delta']:.6g} K={res['horizon']}")
    print(f"alpha_bar={res['alpha_bar_true']:.6g} beta_bar={res['beta_bar_true']:.6g}")
    print("dispatch p* =", np.array2string(np.array(res["dispatch"]), precision=4))
    print(f"total generation {res['total_generation']:.6f} (demand {res['demand']})")
    for v in res["violations"]:
        print(f"VIOLATION {v}", file=sys.stderr)
    return 1 if res["violations"] else 0


def _cmd_compare(args) -> int:
    preset = OPDPreset()
    ref = OPD_ALPHA if args.reference == "alpha" else OPD_BETA
    rep = compare_privacy(preset.graph, ref, preset.adversary, sigma=args.sigma, phi=args.phi,
                          runs=args.runs, base_seed=args.seed)
    out = io.output_dir(args.out)
    io.write_json(rep, out / f"compare_{args.reference}.json")
    tv = rep["total_variation"]
    print(f"total variation: alg2={tv['alg2']:.4g} m1(mean)={tv['m1_mean']:.4g} ratio={tv['ratio_mean']:.3g}")
    fm = rep["m1_first_message"]
    for j, s in zip(fm["observed"], fm["std_estimate"]):
        print(f"agent {j}: std of first-message estimate {s:.4g} (sigma={args.sigma})")
    for c in rep["alg2_certificate"]:
        print(f"target {c['target']}: witness {c['witness']}, max deviation {c['max_deviation']:.3e}, "
              f"r_alt in [{c['r_alt_min']:.6g}, {c['r_alt_max']:.6g}]")
    return 0


def _cmd_verify(args) -> int:
    failed = 0
    for name, ok, detail in verify_suite():
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f"  ({detail})" if detail else ""))
        failed += not ok
    return 1 if failed else 0


def _cmd_spectrum(args) -> int:
    g = demo_graph() if args.graph == "demo" else load_graph(args.graph)
    vals = spectrum(g.laplacian)
    doc = {
        "n": g.n,
        "weight_balanced": is_weight_balanced(g),
        "strongly_connected": is_strongly_connected(g),
        "eigenvalues": [[float(v.real), float(v.imag)] for v in vals],
    }
    if doc["weight_balanced"] and doc["strongly_connected"] and g.n > 1:
        sb = stepsize_bound(g)
        doc["delta_bar"] = sb.delta_bar
        doc["alg2_upper"] = sb.alg2_range[1]
    print(json.dumps(doc, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privcon", description="Privacy-preserving average consensus simulator")
    p.add_argument("--out", default=None, help="output directory (PRIVCON_OUTPUT_DIR overrides)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.set_defaults(func=_cmd_run)

    o = sub.add_parser("opd", help="optimal power dispatch demonstration")
    o.add_argument("--delta", type=float)
    o.add_argument("--steps", type=int)
    o.add_argument("--graph")
    o.set_defaults(func=_cmd_opd)

    c = sub.add_parser("compare", help="ALG2 versus additive-noise M1")
    c.add_argument("--runs", type=int, default=400)
    c.add_argument("--sigma", type=float, default=100.0)
    c.add_argument("--phi", type=float, default=0.9)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--reference", choices=("alpha", "beta"), default="alpha")
    c.set_defaults(func=_cmd_compare)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("spectrum", help="Laplacian spectrum of a graph file ('demo' for the preset)")
    s.add_argument("graph")
    s.set_defaults(func=_cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GraphError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
