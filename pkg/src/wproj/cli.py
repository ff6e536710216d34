"""Command-line entry points for reproducible experiments.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .autodiff import Rng
from .manifolds import brute_force_project
from .problems import (NoiseModel, RadonGeometry, add_noise, gen_ellipses,
                       psnr, radon_build, ssim, toy_dataset, tv_reconstruct,
                       write_csv_matrix, write_pgm, TOY_MANIFOLD)
from .projection import wp_project, wp_trajectory
from .solvers import (LinearOperator, SolverConfig, adjoint_test,
                      export_trajectory_csv, relaxed_projected_gradient)
from .training import (ConfigError, ProjectorSchedule, TrainConfig,
                       dual_loss_value, train)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_SCHEMA = {
    "seed": None,
    "output_dir": None,
    "dataset": {"kind", "size", "num_angles", "num_detectors", "noise_kind",
                "noise_level", "num_train", "num_test", "tv_weight",
                "tv_iterations", "num_true", "num_initial"},
    "network": {"preset", "width", "hidden_layers", "group_size", "fc_width",
                "huber_delta"},
    "train": {"mu", "tau", "p", "gamma_coeff", "stages", "inner_steps",
              "batch_size", "noise_sigma", "lipschitz_mode", "lr",
              "lambda_gp", "smooth_initial"},
    "solver": {"kappa", "xi", "iterations", "wp_steps"},
}


def load_config(path, seed_override=None):
    with open(path) as fh:
        cfg = json.load(fh)
    for key, sub in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError("unknown config key %r" % (key,))
        allowed = _SCHEMA[key]
        if allowed is not None:
            if not isinstance(sub, dict):
                raise ConfigError("config section %r must be an object" % (key,))
            for k in sub:
                if k not in allowed:
                    raise ConfigError("unknown key %r in section %r" % (k, key))
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    cfg.setdefault("seed", 0)
    cfg.setdefault("dataset", {"kind": "toy"})
    cfg.setdefault("network", {})
    cfg.setdefault("train", {})
    cfg.setdefault("solver", {})
    return cfg


def _train_config(cfg):
    net = dict(cfg["network"])
    preset = net.pop("preset", "toy" if cfg["dataset"].get("kind", "toy") == "toy"
                     else "ct")
    tr = dict(cfg["train"])
    if "mu" in tr:
        tr["mu"] = tuple(tr["mu"])
    return TrainConfig(seed=cfg["seed"], preset=preset, net_kwargs=net, **tr)


def _build_ct_problem(cfg):
    ds = cfg["dataset"]
    size = int(ds.get("size", 32))
    geometry = RadonGeometry(int(ds.get("num_angles", 15)),
                             int(ds.get("num_detectors", 47)))
    op = radon_build(geometry, size)
    noise = NoiseModel(ds.get("noise_kind", "mean_relative"),
                       float(ds.get("noise_level", 0.025)))
    return size, geometry, op, noise


def _ct_tv_set(cfg, op, size, noise, phantoms, rng):
    ds = cfg["dataset"]
    tv_weight = float(ds.get("tv_weight", 0.003))
    tv_iters = int(ds.get("tv_iterations", 300))
    recons = []
    for i, ph in enumerate(phantoms):
        sino = add_noise(op.apply(ph.reshape(-1)), noise, rng.spawn(5000 + i))
        recons.append(tv_reconstruct(op, sino, size, tv_weight, tv_iters))
    return recons


def _resolve_datasets(cfg):
    """(initial_set, true_set) matrices for training."""
    ds = cfg["dataset"]
    kind = ds.get("kind", "toy")
    rng = Rng(cfg["seed"])
    if kind == "toy":
        initial, true_set = toy_dataset(rng, int(ds.get("num_true", 50)),
                                        int(ds.get("num_initial", 500)))
        return initial, true_set
    if kind == "ellipse-ct":
        size, _, op, noise = _build_ct_problem(cfg)
        n_train = int(ds.get("num_train", 100))
        phantoms = gen_ellipses(rng.spawn(1), size=size, count=n_train)
        true_set = np.stack([p.reshape(-1) for p in phantoms])
        tv = _ct_tv_set(cfg, op, size, noise, phantoms, rng)
        initial = np.stack([r.reshape(-1) for r in tv])
        return initial, true_set
    raise ConfigError("unknown dataset kind %r" % (kind,))


# ----------------------------------------------------------------------
def cmd_train(args):
    cfg = load_config(args.config, args.seed)
    out_dir = args.out or cfg.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    tconf = _train_config(cfg)
    initial, true_set = _resolve_datasets(cfg)
    if tconf.stages == 0:
        print("warning: stage count is 0; the schedule will be empty",
              file=sys.stderr)
    rows = []

    def log(entry):
        rows.append(entry)
        print("stage %2d  beta=%.6f  gamma=%.6f  dual=%.6f  grad=%.4f"
              % (entry["k"], entry["beta"], entry["gamma"],
                 entry["dual_loss"], entry["grad_monitor"]))

    schedule = train(tconf, initial, true_set, log=log)
    for s in schedule.stages:
        if not np.all(np.isfinite([s.beta, s.gamma])):
            print("numerical failure: non-finite stage parameters",
                  file=sys.stderr)
            return EXIT_NUMERICAL
    schedule.save(os.path.join(out_dir, "schedule.json"))
    with open(os.path.join(out_dir, "training_log.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["k", "beta", "gamma",
                                                "dual_loss", "grad_monitor"])
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2)
    print("wrote %s" % os.path.join(out_dir, "schedule.json"))
    return 0


def cmd_project(args):
    schedule = ProjectorSchedule.load(args.schedule)
    with open(args.input, newline="") as fh:
        signals = np.array([[float(v) for v in row]
                            for row in csv.reader(fh) if row])
    if signals.shape[1] != schedule.input_dim:
        print("input dimension %d does not match schedule dimension %d"
              % (signals.shape[1], schedule.input_dim), file=sys.stderr)
        return EXIT_USAGE
    rows = []
    for u in signals:
        if args.trajectory:
            rows.extend(wp_trajectory(schedule, u))
        else:
            rows.append(wp_project(schedule, u))
    out = np.array(rows)
    if not np.all(np.isfinite(out)):
        print("numerical failure: non-finite projection output", file=sys.stderr)
        return EXIT_NUMERICAL
    write_csv_matrix(args.output, out)
    return 0


def _solve_toy(cfg, schedule, out_dir):
    solver = cfg["solver"]
    sconf = SolverConfig(kappa=float(solver.get("kappa", 0.1)),
                         xi=float(solver.get("xi", 0.08)),
                         iterations=int(solver.get("iterations", 300)))
    op = LinearOperator([[1.0, 2.0]])
    d = np.array([2.0])
    z1 = np.array([0.5, 1.0])
    tr_analytic = relaxed_projected_gradient(op, d, z1, sconf,
                                             TOY_MANIFOLD.project)
    export_trajectory_csv(os.path.join(out_dir, "trajectory_analytic.csv"),
                          op, d, tr_analytic, TOY_MANIFOLD.project, sconf.xi)
    result = {"endpoint_analytic": list(tr_analytic[-1])}
    if schedule is not None:
        wp_steps = solver.get("wp_steps")
        tr_wp = relaxed_projected_gradient(
            op, d, z1, sconf,
            lambda u: wp_project(schedule, u, num_steps=wp_steps))
        export_trajectory_csv(os.path.join(out_dir, "trajectory_wp.csv"),
                              op, d, tr_wp)
        result["endpoint_wp"] = list(tr_wp[-1])
        result["endpoint_gap"] = float(
            np.linalg.norm(np.array(tr_analytic[-1]) - np.array(tr_wp[-1])))
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump(result, fh, indent=2)
    return result


def _solve_ct(cfg, schedule, out_dir):
    size, _, op, noise = _build_ct_problem(cfg)
    ds = cfg["dataset"]
    solver = cfg["solver"]
    sconf = SolverConfig(kappa=float(solver.get("kappa", 0.1)),
                         xi=float(solver.get("xi", 0.08)),
                         iterations=int(solver.get("iterations", 10)))
    wp_steps = solver.get("wp_steps")
    rng = Rng(cfg["seed"])
    n_test = int(ds.get("num_test", 20))
    phantoms = gen_ellipses(rng.spawn(2), size=size, count=n_test)
    tv = _ct_tv_set(cfg, op, size, noise, phantoms, rng.spawn(3))
    metrics = {"per_image": []}
    for i, (truth, init) in enumerate(zip(phantoms, tv)):
        sino = add_noise(op.apply(truth.reshape(-1)), noise,
                         rng.spawn(5000 + i))
        if schedule is not None:
            proj = lambda u: np.clip(
                wp_project(schedule, u, num_steps=wp_steps), 0.0, 1.0)
            traj = relaxed_projected_gradient(op, sino, init.reshape(-1),
                                              sconf, proj)
            recon = traj[-1].reshape(size, size)
        else:
            recon = init
        if not np.all(np.isfinite(recon)):
            raise FloatingPointError("non-finite reconstruction")
        metrics["per_image"].append({
            "psnr_init": psnr(init, truth), "ssim_init": ssim(init, truth),
            "psnr_wp": psnr(recon, truth), "ssim_wp": ssim(recon, truth)})
        write_pgm(os.path.join(out_dir, "recon_%03d.pgm" % i), recon)
        write_csv_matrix(os.path.join(out_dir, "recon_%03d.csv" % i), recon)
    for key in ("psnr_init", "ssim_init", "psnr_wp", "ssim_wp"):
        metrics["mean_" + key] = float(
            np.mean([m[key] for m in metrics["per_image"]]))
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2)
    return metrics


def cmd_solve(args):
    cfg = load_config(args.config, args.seed)
    kind = cfg["dataset"].get("kind", "toy")
    schedule = None
    if args.schedule:
        schedule = ProjectorSchedule.load(args.schedule)
    elif kind == "ellipse-ct":
        print("the CT solver requires a trained schedule (--schedule)",
              file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out or cfg.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    try:
        if kind == "toy":
            result = _solve_toy(cfg, schedule, out_dir)
        else:
            result = _solve_ct(cfg, schedule, out_dir)
    except FloatingPointError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({k: v for k, v in result.items() if k != "per_image"},
                     indent=2))
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2)
    return 0


# ----------------------------------------------------------------------
def _verify_checks(wrong_adjoint=False):
    """Yield (name, passed, detail) for the oracle/invariant suite."""
    from .lipnet import lipschitz_audit, toy_net
    from .manifolds import AnalyticManifold, ExactDistanceStage
    from .training import (grad_norm_monitor, make_exact_schedule,
                           mean_distance_gap)

    rng = Rng(123)

    geometry = RadonGeometry(8, 24)
    op = radon_build(geometry, 16)
    if wrong_adjoint:
        bad = LinearOperator(op.matrix)
        bad.adjoint = lambda y, _b=bad: _b.matrix.T @ y + 1e-2
        op = bad
    gap = adjoint_test(op, rng, probes=20)
    yield ("radon adjoint consistency", gap < 1e-8, "max gap %.2e" % gap)

    net = toy_net(rng.spawn(1))
    ratio = lipschitz_audit(net, rng.spawn(2), 10000, [0.0, -0.5], [3.0, 1.5])
    yield ("orthonormal net 1-Lipschitz audit", ratio <= 1 + 1e-6,
           "max ratio %.8f" % ratio)

    ball = AnalyticManifold("ball", center=(0.0, 0.0), radius=1.0)
    exact = ExactDistanceStage(ball, input_dim=2)
    pts = rng.spawn(3).normal(size=(200, 2)) + 3.0
    monitor = grad_norm_monitor(exact, pts)
    yield ("exact-distance gradient monitor equals 1",
           abs(monitor - 1.0) < 1e-9, "monitor %.12f" % monitor)

    beta = mean_distance_gap(exact, pts, ball.sample(100, rng.spawn(4)))
    mean_d = float(np.mean([ball.distance(p) for p in pts]))
    yield ("mean distance gap identity", abs(beta - mean_d) < 1e-12,
           "|beta - mean d| = %.2e" % abs(beta - mean_d))

    # distance function minimizes the dual loss among random candidates
    fake = pts[:50]
    true_pts = np.stack([ball.project(p) for p in fake])
    base = dual_loss_value(lambda u: ball.distance(u), true_pts, fake)
    worst = 0.0
    for i in range(50):
        cloud = rng.spawn(100 + i).normal(size=(5, 2)) * 2.0
        cand = lambda u, c=cloud: float(
            np.min(np.linalg.norm(c - np.asarray(u), axis=1)))
        worst = max(worst, base - dual_loss_value(cand, true_pts, fake))
    yield ("distance minimizes dual loss", worst <= 1e-9,
           "max violation %.2e" % worst)

    sched = make_exact_schedule(ball, pts, 500, mu=(0.5, 0.5))
    errs = [np.sum((wp_project(sched, p) - ball.project(p)) ** 2)
            for p in pts[:50]]
    mse = float(np.mean(errs))
    yield ("anchored projection converges (exact stages)", mse < 1e-4,
           "mean square error %.2e" % mse)


def cmd_verify(args):
    failures = 0
    for name, ok, detail in _verify_checks(wrong_adjoint=args.inject_wrong_adjoint):
        print("%-45s %s  (%s)" % (name, "PASS" if ok else "FAIL", detail))
        if not ok:
            failures += 1
    return 1 if failures else 0


# ----------------------------------------------------------------------
def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wproj",
        description="Learned manifold projections for inverse problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a projector schedule")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("project", help="apply a trained schedule to signals")
    p.add_argument("--schedule", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--trajectory", action="store_true")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("solve", help="run a reconstruction experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--schedule")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the oracle/invariant suite")
    p.add_argument("--inject-wrong-adjoint", action="store_true",
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
