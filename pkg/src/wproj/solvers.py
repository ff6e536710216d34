"""First-order solvers for min over M of 0.5*||Az - d||^2.

The manifold constraint enters only through a projector callable, which
may be an analytic projection, a brute-force nearest sample, or the
learned operator.  All solvers return the full iterate trajectory.
"""

import csv

import numpy as np
import scipy.sparse as sp


class LinearOperator:
    """Forward map with an explicit adjoint.

    Backed by a dense ndarray or a scipy sparse matrix; `apply` and
    `adjoint` close over whichever representation was given.
    """

    def __init__(self, matrix):
        if sp.issparse(matrix):
            self.matrix = matrix.tocsr()
        else:
            self.matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        self.output_dim, self.input_dim = self.matrix.shape

    def apply(self, x):
        y = self.matrix @ np.asarray(x, dtype=np.float64)
        return np.asarray(y).reshape(-1)

    def adjoint(self, y):
        x = self.matrix.T @ np.asarray(y, dtype=np.float64)
        return np.asarray(x).reshape(-1)

    def __matmul__(self, x):
        return self.apply(x)


def adjoint_test(op, rng, probes=10):
    """Max relative gap |<Ax,y> - <x,A^T y>| / (||Ax|| ||y||) over probes."""
    if probes < 1:
        raise ValueError("need at least one probe")
    worst = 0.0
    for _ in range(probes):
        x = rng.normal(size=op.input_dim)
        y = rng.normal(size=op.output_dim)
        ax = op.apply(x)
        aty = op.adjoint(y)
        denom = max(np.linalg.norm(ax) * np.linalg.norm(y), 1e-300)
        worst = max(worst, abs(float(ax @ y) - float(x @ aty)) / denom)
    return worst


def power_method_norm(op, iters=200, seed=0):
    """Dominant eigenvalue of A^T A (i.e. ||A||_2^2) by power iteration."""
    if iters < 1:
        raise ValueError("need at least one iteration")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(op.input_dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = op.adjoint(op.apply(v))
        lam = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return lam


def prox_quadratic(y, gamma, d):
    """Proximal of gamma * 0.5*||. - d||^2: (y + gamma*d) / (1 + gamma)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    y = np.asarray(y, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    return (y + gamma * d) / (1.0 + gamma)


def _prox_quadratic_conjugate(v, beta, d):
    # Moreau decomposition of the least-squares prox: (v - beta*d)/(1 + beta)
    return (np.asarray(v, dtype=np.float64) - beta * d) / (1.0 + beta)


class SolverConfig:
    def __init__(self, kappa=0.1, xi=0.08, iterations=10,
                 pdhg_beta=None, pdhg_gamma=None,
                 ladmm_beta=None, ladmm_gamma=None):
        if not (0.0 < kappa <= 1.0):
            raise ValueError("kappa must lie in (0, 1]")
        if xi <= 0:
            raise ValueError("xi must be positive")
        self.kappa = float(kappa)
        self.xi = float(xi)
        self.iterations = int(iterations)
        self.pdhg_beta = pdhg_beta
        self.pdhg_gamma = pdhg_gamma
        self.ladmm_beta = ladmm_beta
        self.ladmm_gamma = ladmm_gamma


def _default_step(op, given):
    if given is not None:
        return float(given)
    return 1.0 / np.sqrt(max(power_method_norm(op), 1e-300))


def relaxed_projected_gradient(op, d, z1, config, projector):
    """z_{t+1} = (1-kappa) z_t + kappa * P(z_t - xi A^T (A z_t - d))."""
    z = np.asarray(z1, dtype=np.float64).copy()
    d = np.asarray(d, dtype=np.float64)
    if z.shape != (op.input_dim,):
        raise ValueError("initial point dimension does not match the operator")
    traj = [z.copy()]
    for _ in range(config.iterations):
        grad_step = z - config.xi * op.adjoint(op.apply(z) - d)
        z = (1.0 - config.kappa) * z + config.kappa * np.asarray(
            projector(grad_step), dtype=np.float64)
        traj.append(z.copy())
    return traj


def pdhg(op, d, z1, config, projector):
    """Primal-dual hybrid gradient with the projector as the primal prox."""
    u = np.asarray(z1, dtype=np.float64).copy()
    d = np.asarray(d, dtype=np.float64)
    if u.shape != (op.input_dim,):
        raise ValueError("initial point dimension does not match the operator")
    beta = _default_step(op, config.pdhg_beta)
    gamma = _default_step(op, config.pdhg_gamma)
    nu = np.zeros(op.output_dim)
    traj = [u.copy()]
    for _ in range(config.iterations):
        u_next = np.asarray(projector(u - gamma * op.adjoint(nu)),
                            dtype=np.float64)
        nu = _prox_quadratic_conjugate(nu + beta * op.apply(2.0 * u_next - u),
                                       beta, d)
        u = u_next
        traj.append(u.copy())
    return traj


def linearized_admm(op, d, z1, config, projector):
    """Linearized ADMM with the projector replacing the exact projection."""
    u = np.asarray(z1, dtype=np.float64).copy()
    d = np.asarray(d, dtype=np.float64)
    if u.shape != (op.input_dim,):
        raise ValueError("initial point dimension does not match the operator")
    beta = _default_step(op, config.ladmm_beta)
    gamma = _default_step(op, config.ladmm_gamma)
    y = op.apply(u)
    nu = np.zeros(op.output_dim)
    traj = [u.copy()]
    for _ in range(config.iterations):
        u = np.asarray(projector(u - beta * op.adjoint(nu + op.apply(u) - y)),
                       dtype=np.float64)
        y = prox_quadratic(y + gamma * (nu + op.apply(u) - y), gamma, d)
        nu = nu + op.apply(u) - y
        traj.append(u.copy())
    return traj


def objective(op, d, z):
    r = op.apply(z) - np.asarray(d, dtype=np.float64)
    return 0.5 * float(r @ r)


def fixed_point_residual(op, d, z, xi, projector):
    step = z - xi * op.adjoint(op.apply(z) - d)
    return float(np.linalg.norm(z - np.asarray(projector(step))))


def export_trajectory_csv(path, op, d, trajectory, projector=None, xi=None,
                          full_coords=True):
    """One row per iterate: index, objective, residual, then coordinates
    (or mean/std summary for image-sized signals)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if full_coords:
            header = ["iter", "objective", "residual"] + \
                ["z%d" % i for i in range(len(trajectory[0]))]
        else:
            header = ["iter", "objective", "residual", "mean", "std"]
        writer.writerow(header)
        for t, z in enumerate(trajectory):
            res = ""
            if projector is not None and xi is not None:
                res = fixed_point_residual(op, d, z, xi, projector)
            row = [t, objective(op, d, z), res]
            if full_coords:
                row += list(z)
            else:
                row += [float(np.mean(z)), float(np.std(z))]
            writer.writerow(row)
