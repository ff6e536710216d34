"""Half-circle walkthrough: train a projector schedule and use it to solve
min 0.5*||Az - d||^2 subject to z on the arc, comparing against the
analytic projection.

Run from the repository root:

    python3 demos/toy_half_circle.py [--stages 20] [--out out_toy]
"""

import argparse
import json
import os

import numpy as np

from wproj.autodiff import Rng
from wproj.problems import TOY_MANIFOLD, toy_dataset
from wproj.projection import wp_project, wp_trajectory
from wproj.solvers import (LinearOperator, SolverConfig,
                           export_trajectory_csv, relaxed_projected_gradient)
from wproj.training import toy_train_config, train


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--stages", type=int, default=20)
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument("--out", default="out_toy")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    # 50 points on the arc, 500 uniform points over the rectangle
    initial, true_set = toy_dataset(Rng(7))
    cfg = toy_train_config(seed=args.seed, stages=args.stages)

    print("training %d stages..." % cfg.stages)
    schedule = train(cfg, initial, true_set,
                     log=lambda s: print(
                         "  stage %2d  beta=%.4f  gamma=%.4f  dual=%.4f"
                         % (s["k"], s["beta"], s["gamma"], s["dual_loss"])))
    schedule.save(os.path.join(args.out, "schedule.json"))

    # how well does the learned operator project individual points?
    probes = Rng(1).uniform(size=(5, 2), lo=0.0, hi=3.0)
    print("\npointwise projections (learned vs analytic):")
    for u in probes:
        learned = wp_project(schedule, u)
        exact = TOY_MANIFOLD.project(u)
        print("  u=(%.2f,%.2f)  wp=(%.3f,%.3f)  exact=(%.3f,%.3f)  gap=%.4f"
              % (*u, *learned, *exact, np.linalg.norm(learned - exact)))

    # plug both projectors into the relaxed projected gradient solver
    op = LinearOperator([[1.0, 2.0]])
    d = np.array([2.0])
    z1 = np.array([0.5, 1.0])
    sconf = SolverConfig(kappa=0.1, xi=0.08, iterations=300)
    tr_exact = relaxed_projected_gradient(op, d, z1, sconf,
                                          TOY_MANIFOLD.project)
    tr_wp = relaxed_projected_gradient(op, d, z1, sconf,
                                       lambda u: wp_project(schedule, u))
    gap = float(np.linalg.norm(tr_exact[-1] - tr_wp[-1]))
    print("\nsolver endpoints:")
    print("  analytic projector: (%.5f, %.5f)" % tuple(tr_exact[-1]))
    print("  learned projector:  (%.5f, %.5f)" % tuple(tr_wp[-1]))
    print("  endpoint gap: %.5f" % gap)

    export_trajectory_csv(os.path.join(args.out, "trajectory_analytic.csv"),
                          op, d, tr_exact, TOY_MANIFOLD.project, sconf.xi)
    export_trajectory_csv(os.path.join(args.out, "trajectory_wp.csv"),
                          op, d, tr_wp)
    inner = wp_trajectory(schedule, z1)
    export_trajectory_csv(os.path.join(args.out, "wp_inner_iterates.csv"),
                          op, d, inner)
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump({"endpoint_analytic": list(tr_exact[-1]),
                   "endpoint_wp": list(tr_wp[-1]),
                   "endpoint_gap": gap}, fh, indent=2)
    print("\nwrote trajectories and summary to %s/" % args.out)


if __name__ == "__main__":
    main()
