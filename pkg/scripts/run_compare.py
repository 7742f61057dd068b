"""ALG2 versus the additive-noise method M1 on both preset reference vectors."""

import argparse

from privcon.graph import demo_graph
from privcon.harness.experiments import compare_privacy
from privcon.harness.io import output_dir, write_json
from privcon.harness.presets import OPD_ADVERSARY, OPD_ALPHA, OPD_BETA


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/compare")
    p.add_argument("--runs", type=int, default=400)
    p.add_argument("--sigma", type=float, default=100.0)
    p.add_argument("--phi", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    out = output_dir(args.out)
    g = demo_graph()
    for name, ref in (("alpha", OPD_ALPHA), ("beta", OPD_BETA)):
        rep = compare_privacy(g, ref, OPD_ADVERSARY, sigma=args.sigma, phi=args.phi,
                              runs=args.runs, base_seed=args.seed)
        write_json(rep, out / f"compare_{name}.json")
        tv = rep["total_variation"]
        stds = ", ".join(f"{s:.1f}" for s in rep["m1_first_message"]["std_estimate"])
        print(f"{name}: TV alg2={tv['alg2']:.0f} m1={tv['m1_mean']:.0f} ratio={tv['ratio_mean']:.2f}; "
              f"first-message std [{stds}]")


if __name__ == "__main__":
    main()
