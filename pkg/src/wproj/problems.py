"""Data generation and measurement modelling for the experiments.

Covers the 2D toy dataset, random ellipse phantoms, a sparse parallel-beam
Radon operator (Siddon-style ray tracing), Gaussian noise models, a TV
initializer, and PSNR/SSIM image metrics.
"""

import csv

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import uniform_filter

from .manifolds import AnalyticManifold
from .solvers import LinearOperator, power_method_norm


# ----------------------------------------------------------------------
# toy 2D data
TOY_MANIFOLD = AnalyticManifold("half_circle", center=(2.0, 0.0), radius=0.75)
TOY_RECT_LO = np.array([0.0, -0.5])
TOY_RECT_HI = np.array([3.0, 1.5])


def toy_dataset(rng, num_true=50, num_initial=500):
    """50 half-circle samples (P_true) and uniform rectangle samples (P^1)."""
    true_set = TOY_MANIFOLD.sample(num_true, rng)
    initial = TOY_RECT_LO + (TOY_RECT_HI - TOY_RECT_LO) * \
        rng.uniform(size=(num_initial, 2))
    return initial, true_set


# ----------------------------------------------------------------------
# ellipse phantoms
def gen_ellipses(rng, size=32, count=1, num_ellipses_range=(1, 6)):
    """Random phantoms, each a clipped sum of rotated ellipses in [0, 1]."""
    if size < 8:
        raise ValueError("phantom size must be at least 8")
    lo, hi = num_ellipses_range
    ys, xs = np.mgrid[0:size, 0:size]
    # pixel centers on [-1, 1]^2
    xs = (xs + 0.5) / size * 2.0 - 1.0
    ys = (ys + 0.5) / size * 2.0 - 1.0
    phantoms = []
    for _ in range(count):
        img = np.zeros((size, size))
        for _ in range(int(rng.integers(lo, hi + 1))):
            cx, cy = rng.uniform(size=2, lo=-0.6, hi=0.6)
            ax, ay = rng.uniform(size=2, lo=0.1, hi=0.6)
            phi = rng.uniform(lo=0.0, hi=np.pi)
            val = rng.uniform(lo=0.1, hi=1.0)
            xr = (xs - cx) * np.cos(phi) + (ys - cy) * np.sin(phi)
            yr = -(xs - cx) * np.sin(phi) + (ys - cy) * np.cos(phi)
            img += val * ((xr / ax) ** 2 + (yr / ay) ** 2 <= 1.0)
        phantoms.append(np.clip(img, 0.0, 1.0))
    return np.array(phantoms)


# ----------------------------------------------------------------------
# Radon transform
class RadonGeometry:
    def __init__(self, num_angles, num_detectors):
        if num_angles < 1 or num_detectors < 1:
            raise ValueError("geometry needs at least one angle and detector")
        self.num_angles = int(num_angles)
        self.num_detectors = int(num_detectors)
        self.angles = np.arange(num_angles) * np.pi / num_angles


def _siddon_row(theta, offset, size):
    """Pixel indices and intersection lengths of one ray with the grid.

    Image occupies [-1, 1]^2; the ray passes through offset * (cos, sin)
    with direction (-sin, cos).
    """
    w = 2.0 / size
    px = offset * np.cos(theta)
    py = offset * np.sin(theta)
    fx, fy = -np.sin(theta), np.cos(theta)
    ts = []
    for p0, f in ((px, fx), (py, fy)):
        if abs(f) > 1e-12:
            planes = -1.0 + w * np.arange(size + 1)
            ts.append((planes - p0) / f)
        else:
            if not (-1.0 <= p0 <= 1.0):
                return np.empty(0, dtype=np.int64), np.empty(0)
    if not ts:
        return np.empty(0, dtype=np.int64), np.empty(0)
    alphas = np.unique(np.concatenate(ts))
    # clip to the segment inside the bounding box
    tmin, tmax = -np.inf, np.inf
    for p0, f in ((px, fx), (py, fy)):
        if abs(f) > 1e-12:
            t0, t1 = (-1.0 - p0) / f, (1.0 - p0) / f
            tmin = max(tmin, min(t0, t1))
            tmax = min(tmax, max(t0, t1))
    alphas = alphas[(alphas >= tmin - 1e-12) & (alphas <= tmax + 1e-12)]
    if alphas.size < 2:
        return np.empty(0, dtype=np.int64), np.empty(0)
    lengths = np.diff(alphas)
    mids = (alphas[:-1] + alphas[1:]) / 2.0
    mx = px + mids * fx
    my = py + mids * fy
    ix = np.floor((mx + 1.0) / w).astype(np.int64)
    iy = np.floor((my + 1.0) / w).astype(np.int64)
    ok = (lengths > 1e-14) & (ix >= 0) & (ix < size) & (iy >= 0) & (iy < size)
    # row-major image layout: index = row * size + col with row = iy
    return (iy[ok] * size + ix[ok]), lengths[ok]


def radon_build(geometry, size):
    """Sparse ray/pixel intersection matrix; adjoint is the transpose."""
    if size < 2:
        raise ValueError("grid size must be at least 2")
    nd = geometry.num_detectors
    span = np.sqrt(2.0)
    offsets = -span + (np.arange(nd) + 0.5) * (2.0 * span / nd)
    rows, cols, vals = [], [], []
    for a, theta in enumerate(geometry.angles):
        for j, s in enumerate(offsets):
            idx, lengths = _siddon_row(theta, s, size)
            row = a * nd + j
            rows.extend([row] * len(idx))
            cols.extend(idx.tolist())
            vals.extend(lengths.tolist())
    mat = sp.csr_matrix((vals, (rows, cols)),
                        shape=(geometry.num_angles * nd, size * size))
    return LinearOperator(mat)


# ----------------------------------------------------------------------
# noise models
class NoiseModel:
    def __init__(self, kind, level):
        if kind not in ("mean_relative", "per_beam"):
            raise ValueError("unknown noise kind %r" % (kind,))
        if level < 0 or not np.isfinite(level):
            raise ValueError("noise level must be finite and nonnegative")
        self.kind = kind
        self.level = float(level)


def add_noise(sinogram, model, rng):
    """Gaussian noise scaled by the sinogram mean or per-beam magnitude."""
    sinogram = np.asarray(sinogram, dtype=np.float64)
    if model.level == 0.0:
        return sinogram.copy()
    if model.kind == "mean_relative":
        std = model.level * np.mean(np.abs(sinogram))
        return sinogram + rng.normal(size=sinogram.shape, std=std)
    stds = model.level * np.abs(sinogram)
    return sinogram + stds * rng.normal(size=sinogram.shape)


# ----------------------------------------------------------------------
# TV initialization
def _gradient_matrix(size):
    """Forward differences with Neumann boundary, stacked dx then dy."""
    n = size * size
    eye = sp.identity(size, format="csr")
    diff = sp.diags([-np.ones(size), np.ones(size - 1)], [0, 1],
                    shape=(size, size), format="lil")
    diff[-1, -1] = 0.0
    diff = diff.tocsr()
    dx = sp.kron(eye, diff, format="csr")   # along columns
    dy = sp.kron(diff, eye, format="csr")   # along rows
    return sp.vstack([dx, dy], format="csr")


def tv_reconstruct(op, d, size, tv_weight, iterations=400):
    """Approximate minimizer of 0.5*||Az-d||^2 + w*||grad z||_1 over [0,1]^n.

    Chambolle-Pock with the measurement and gradient operators stacked
    into the dual; the primal prox is the box clip.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (op.output_dim,) or op.input_dim != size * size:
        raise ValueError("dimensions are inconsistent with the operator")
    grad = _gradient_matrix(size)
    k_stack = LinearOperator(sp.vstack([sp.csr_matrix(op.matrix), grad]))
    norm_k = np.sqrt(power_method_norm(k_stack, iters=100))
    sigma = tau = 1.0 / max(norm_k, 1e-12)
    m = op.output_dim
    z = np.zeros(size * size)
    zbar = z.copy()
    y1 = np.zeros(m)
    y2 = np.zeros(grad.shape[0])
    for _ in range(iterations):
        y1 = (y1 + sigma * (op.apply(zbar) - d)) / (1.0 + sigma)
        y2 = np.clip(y2 + sigma * (grad @ zbar), -tv_weight, tv_weight)
        z_new = np.clip(z - tau * (op.adjoint(y1) + grad.T @ y2), 0.0, 1.0)
        zbar = 2.0 * z_new - z
        z = z_new
    return z.reshape(size, size)


# ----------------------------------------------------------------------
# metrics
PSNR_CAP_DB = 200.0


def psnr(a, b, peak=1.0):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share a shape")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak ** 2 / mse), PSNR_CAP_DB)


def ssim(a, b, window=7, k1=0.01, k2=0.03, dynamic_range=1.0):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share a shape")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    pad = window // 2

    def local_mean(x):
        full = uniform_filter(x, size=window, mode="constant")
        return full[pad:-pad, pad:-pad]  # valid windows only

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a ** 2
    var_b = local_mean(b * b) - mu_b ** 2
    cov = local_mean(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# ----------------------------------------------------------------------
# file output
def write_pgm(path, image):
    """P2 ASCII PGM, 16-bit scale, values assumed in [0, 1]."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    scaled = np.round(image * 65535).astype(np.int64)
    h, w = scaled.shape
    with open(path, "w") as fh:
        fh.write("P2\n%d %d\n65535\n" % (w, h))
        for row in scaled:
            fh.write(" ".join(str(v) for v in row) + "\n")


def write_csv_matrix(path, matrix):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(np.asarray(matrix, dtype=np.float64)):
            writer.writerow([repr(float(v)) for v in row])


def read_csv_matrix(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)
                         if row])
