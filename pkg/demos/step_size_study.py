"""Step-size behaviour of the anchored projection iteration.

Two experiments with the exact distance function standing in for the
trained network:

1. convergence rate of the anchored iteration on a convex set for
   several (mu1, mu2) choices;
2. the straggler effect: with mean-only steps (mu2 = 0) every
   unit-gradient point travels the same distance, so samples that start
   far away lag behind.
"""

import argparse

import numpy as np

from wproj.autodiff import Rng
from wproj.manifolds import AnalyticManifold, ExactDistanceStage
from wproj.projection import wp_project_batch
from wproj.training import g_step_batch, make_exact_schedule


def convergence_table(manifold, starts, mus, stages):
    targets = np.stack([manifold.project(u) for u in starts])
    print("mean square error to the true projection, %d starts" % len(starts))
    header = "  k      " + "".join("mu=%-14s" % (mu,) for mu in mus)
    print(header)
    schedules = [make_exact_schedule(manifold, starts, stages, mu)
                 for mu in mus]
    for k in (1, 5, 20, 100, stages):
        row = "  %-6d " % k
        for sched in schedules:
            out = wp_project_batch(sched, starts, num_steps=k)
            mse = float(np.mean(np.sum((out - targets) ** 2, axis=1)))
            row += "%-17.2e" % mse
        print(row)


def straggler_demo():
    hs = AnalyticManifold("half_space", normal=(1.0, 0.0), offset=0.0)
    exact = ExactDistanceStage(hs, input_dim=2)
    pts = np.array([[0.5, 0.0], [1.0, 1.0], [4.0, -1.0]])
    beta = float(np.mean([hs.distance(u) for u in pts]))
    print("\nstraggler effect, half space x <= 0, beta = %.3f" % beta)
    for mu in [(0.5, 0.0), (0.25, 0.25), (0.0, 0.5)]:
        stepped = g_step_batch(pts, exact, beta, mu)
        moved = np.linalg.norm(stepped - pts, axis=1)
        print("  mu=%-12s moved: " % (mu,) +
              "  ".join("%.3f" % m for m in moved))
    print("  with mu2 = 0 every point moves mu1*beta; the far point at"
          " distance 4 needs many more stages to arrive")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--stages", type=int, default=500)
    args = parser.parse_args()

    ball = AnalyticManifold("ball", center=(0.0, 0.0), radius=1.0)
    starts = Rng(0).normal(size=(200, 2), std=2.0) + np.array([2.0, 1.0])
    convergence_table(ball, starts,
                      [(0.5, 0.0), (0.5, 0.5), (0.0, 1.0)], args.stages)
    straggler_demo()


if __name__ == "__main__":
    main()
