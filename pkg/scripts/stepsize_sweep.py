"""Total variation of ALG2 and M1 trajectories across the admissible stepsize range."""

import argparse

import numpy as np

from privcon.graph import demo_graph, stepsize_bound
from privcon.harness.experiments import total_variation
from privcon.harness.io import output_dir, write_table
from privcon.harness.presets import OPD_ALPHA, OPD_BETA
from privcon.protocols import M1Noise, ProtocolSpec, convergence_rate, default_horizon, run


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/sweep")
    p.add_argument("--runs", type=int, default=50)
    args = p.parse_args()
    g = demo_graph()
    db = stepsize_bound(g).delta_bar
    rows = []
    for frac in (0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.7, 0.8, 0.9, 0.95):
        d = frac * min(2.0, db)
        K = default_horizon(convergence_rate(g, "m1", d, 0.9), 1e-10)
        for name, ref in (("alpha", OPD_ALPHA), ("beta", OPD_BETA)):
            tv2 = total_variation(run(g, ProtocolSpec("alg2", d, K, ref)).x)
            tvm = np.mean([total_variation(run(g, ProtocolSpec("m1", d, K, ref, noise=M1Noise(0.9, 100.0, s))).x)
                           for s in range(args.runs)])
            rows.append([frac, name, K, tv2, tvm, tvm / tv2])
            print(f"delta={frac:.2f}*delta_bar {name:5s} K={K:4d} alg2={tv2:8.0f} m1={tvm:8.0f} ratio={tvm / tv2:.2f}")
    write_table(output_dir(args.out) / "tv_sweep.csv", ["fraction", "reference", "K", "tv_alg2", "tv_m1", "ratio"], rows)


if __name__ == "__main__":
    main()
