"""Adam and the Lipschitz-enforcement steps used inside stage training."""

import numpy as np

from .autodiff import Tensor


class Adam:
    """Standard bias-corrected Adam over a list of parameter Tensors."""

    def __init__(self, params, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        """Apply one update using the .grad currently stored on each param."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ValueError("gradient shape %s does not match parameter %s"
                                 % (g.shape, p.data.shape))
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            mhat = self.m[i] / (1 - b1 ** self.t)
            vhat = self.v[i] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def gradient_penalty(net, true_batch, fake_batch, rng, num_samples=None,
                     h=1e-3, paired=False):
    """Soft unit-gradient penalty on random convex interpolates.

    Returns a Tensor: mean over interpolates of (||grad_x J(x_hat)|| - 1)^2.
    The gradient norm is differentiated through theta via a
    directional-derivative surrogate: the direction v = normalized
    grad_input(x_hat) is held constant (stop-gradient) and
    ||grad J|| ~= (J(x_hat + h v) - J(x_hat - h v)) / (2h), which only needs
    first-order autodiff.

    With paired=True the interpolates lie on the segment joining each true
    sample to the fake sample with the same index, instead of random
    cross-pairs.  When the fake set consists of corrupted versions of the
    true set, these segments are exactly where a distance function must
    have unit slope, which steers grad_x J toward the corruption direction.
    """
    true_batch = np.atleast_2d(np.asarray(true_batch, dtype=np.float64))
    fake_batch = np.atleast_2d(np.asarray(fake_batch, dtype=np.float64))
    if true_batch.size == 0 or fake_batch.size == 0:
        raise ValueError("gradient penalty needs nonempty batches")
    n = num_samples or min(len(true_batch), len(fake_batch))
    if paired:
        if len(true_batch) != len(fake_batch):
            raise ValueError("paired penalty needs equal-length batches")
        ti = fi = rng.integers(0, len(true_batch), size=n)
    else:
        ti = rng.integers(0, len(true_batch), size=n)
        fi = rng.integers(0, len(fake_batch), size=n)
    eps = rng.uniform(size=(n, 1))
    xhat = eps * true_batch[ti] + (1.0 - eps) * fake_batch[fi]
    v = net.grad_input_batch(xhat)
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    v = v / np.maximum(norms, 1e-12)
    jp = net.forward_batch(xhat + h * v)
    jm = net.forward_batch(xhat - h * v)
    slope = (jp - jm) * (0.5 / h)
    return ((slope - Tensor(np.ones(n))) ** 2).mean()


def enforce_constraints(net):
    """Re-project every layer onto its constraint set (in place)."""
    net.project_constraints()
    return net
