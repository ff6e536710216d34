"""Minimal reverse-mode autodiff on float64 numpy arrays.

A Tensor wraps an ndarray and records the operation that produced it.
Calling backward() on a scalar Tensor walks the tape once in reverse
topological order and accumulates gradients into every leaf created with
requires_grad=True.  Graphs are rebuilt from scratch for every loss
evaluation; nothing is retained between calls.
"""

import numpy as np


class ShapeError(ValueError):
    pass


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (undo numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def __repr__(self):
        return "Tensor(%r)" % (self.data,)

    # ------------------------------------------------------------------
    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar root, got shape %s"
                             % (self.shape,))
        order = []
        seen = set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        for t in order:
            t.grad = None
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    # ------------------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g, self.shape))
            other._accumulate(_unbroadcast(g, other.shape))
        return Tensor(self.data + other.data, parents=(self, other), backward=bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g):
            self._accumulate(-g)
        return Tensor(-self.data, parents=(self,), backward=bwd)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g * other.data, self.shape))
            other._accumulate(_unbroadcast(g * self.data, other.shape))
        return Tensor(self.data * other.data, parents=(self, other), backward=bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)

        def bwd(g):
            self._accumulate(_unbroadcast(g / other.data, self.shape))
            other._accumulate(
                _unbroadcast(-g * self.data / other.data ** 2, other.shape))
        return Tensor(self.data / other.data, parents=(self, other), backward=bwd)

    def __pow__(self, exponent):
        exponent = float(exponent)

        def bwd(g):
            self._accumulate(g * exponent * self.data ** (exponent - 1.0))
        return Tensor(self.data ** exponent, parents=(self,), backward=bwd)

    def matmul(self, other):
        other = as_tensor(other)
        if self.data.shape[-1] != other.data.shape[0]:
            raise ShapeError("matmul: inner dimensions %s vs %s do not agree"
                             % (self.shape, other.shape))

        def bwd(g):
            a, b = self.data, other.data
            if a.ndim == 1 and b.ndim == 1:
                self._accumulate(g * b)
                other._accumulate(g * a)
            elif b.ndim == 1:
                self._accumulate(np.outer(g, b) if a.ndim == 2 else g * b)
                other._accumulate(a.T @ g)
            elif a.ndim == 1:
                self._accumulate(b @ g)
                other._accumulate(np.outer(a, g))
            else:
                self._accumulate(g @ b.T)
                other._accumulate(a.T @ g)
        return Tensor(self.data @ other.data, parents=(self, other), backward=bwd)

    __matmul__ = matmul

    def sum(self):
        def bwd(g):
            self._accumulate(np.broadcast_to(g, self.shape).copy())
        return Tensor(self.data.sum(), parents=(self,), backward=bwd)

    def mean(self):
        n = self.data.size

        def bwd(g):
            self._accumulate(np.broadcast_to(g / n, self.shape).copy())
        return Tensor(self.data.mean(), parents=(self,), backward=bwd)

    def reshape(self, *shape):
        old = self.shape

        def bwd(g):
            self._accumulate(g.reshape(old))
        return Tensor(self.data.reshape(*shape), parents=(self,), backward=bwd)

    def abs(self):
        # subgradient 0 at the kink
        def bwd(g):
            self._accumulate(g * np.sign(self.data))
        return Tensor(np.abs(self.data), parents=(self,), backward=bwd)

    def relu(self):
        def bwd(g):
            self._accumulate(g * (self.data > 0.0))
        return Tensor(np.maximum(self.data, 0.0), parents=(self,), backward=bwd)

    def sqrt(self):
        out = np.sqrt(self.data)

        def bwd(g):
            self._accumulate(g * 0.5 / np.maximum(out, 1e-300))
        return Tensor(out, parents=(self,), backward=bwd)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a, b):
    return as_tensor(a).matmul(b)


def huber(x, delta):
    """Huber head: quadratic inside |x| <= delta, linear outside.

    huber(x, d) = x^2/(2d) for |x| <= d, |x| - d/2 otherwise.
    Nonnegative, continuous, and 1-Lipschitz for delta >= 1... the slope is
    clip(x/d, -1, 1) so the Lipschitz constant is exactly 1 for any d > 0,
    while for d < 1 the head stays 1-Lipschitz but under-reports small
    distances.
    """
    if delta <= 0:
        raise ValueError("huber delta must be positive, got %g" % delta)
    x = as_tensor(x)
    small = np.abs(x.data) <= delta

    def bwd(g):
        x._accumulate(g * np.clip(x.data / delta, -1.0, 1.0))
    out = np.where(small, x.data ** 2 / (2.0 * delta), np.abs(x.data) - delta / 2.0)
    return Tensor(out, parents=(x,), backward=bwd)


def groupsort(v, group_size):
    """Sort consecutive groups of size `group_size` along the last axis.

    The backward pass routes gradients through the sorting permutation, so
    the op is norm-preserving and 1-Lipschitz.
    """
    v = as_tensor(v)
    n = v.shape[-1]
    if n % group_size != 0:
        raise ShapeError("groupsort: length %d not divisible by group size %d"
                         % (n, group_size))
    grouped = v.data.reshape(v.shape[:-1] + (n // group_size, group_size))
    perm = np.argsort(grouped, axis=-1, kind="stable")
    out = np.take_along_axis(grouped, perm, axis=-1)

    def bwd(g):
        gg = g.reshape(grouped.shape)
        back = np.empty_like(gg)
        # scatter each sorted-position gradient back to its source position
        np.put_along_axis(back, perm, gg, axis=-1)
        v._accumulate(back.reshape(v.shape))
    return Tensor(out.reshape(v.shape), parents=(v,), backward=bwd)


def conv2d(x, kernels, bias, stride=2):
    """2-D valid convolution, NCHW layout, square kernel.

    x: Tensor (batch, in_ch, H, W); kernels: Tensor (out_ch, in_ch, k, k);
    bias: Tensor (out_ch,).  Implemented as im2col + matmul so both input
    and kernel gradients come from plain matrix products.
    """
    x = as_tensor(x)
    kernels = as_tensor(kernels)
    bias = as_tensor(bias)
    batch, in_ch, h, w = x.shape
    out_ch, kin, k, _ = kernels.shape
    if kin != in_ch:
        raise ShapeError("conv2d: %d input channels but kernel expects %d"
                         % (in_ch, kin))
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError("conv2d: spatial input %dx%d too small for kernel %d"
                         % (h, w, k))
    # im2col: (batch, oh*ow, in_ch*k*k)
    s = x.data.strides
    windows = np.lib.stride_tricks.as_strided(
        x.data,
        shape=(batch, in_ch, oh, ow, k, k),
        strides=(s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3]),
        writeable=False)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch, oh * ow, in_ch * k * k)
    kmat = kernels.data.reshape(out_ch, in_ch * k * k)
    out = cols @ kmat.T + bias.data  # (batch, oh*ow, out_ch)
    out = out.transpose(0, 2, 1).reshape(batch, out_ch, oh, ow)

    def bwd(g):
        gcols = g.reshape(batch, out_ch, oh * ow).transpose(0, 2, 1)  # b,P,oc
        kernels._accumulate(
            np.einsum("bpo,bpc->oc", gcols, cols).reshape(kernels.shape))
        bias._accumulate(gcols.sum(axis=(0, 1)))
        gx_cols = gcols @ kmat  # (batch, P, in_ch*k*k)
        gx_cols = gx_cols.reshape(batch, oh, ow, in_ch, k, k)
        gx = np.zeros_like(x.data)
        for i in range(oh):
            for j in range(ow):
                gx[:, :, i * stride:i * stride + k, j * stride:j * stride + k] \
                    += gx_cols[:, i, j]
        x._accumulate(gx)
    return Tensor(out, parents=(x, kernels, bias), backward=bwd)


def finite_diff_grad(f, u, h=1e-5):
    """Central-difference gradient of a scalar function, the test oracle."""
    if h <= 0:
        raise ValueError("step size must be positive")
    u = np.asarray(u, dtype=np.float64)
    grad = np.zeros_like(u)
    flat = grad.reshape(-1)
    uflat = u.reshape(-1)
    for i in range(uflat.size):
        e = np.zeros_like(uflat)
        e[i] = h
        up = (uflat + e).reshape(u.shape)
        um = (uflat - e).reshape(u.shape)
        flat[i] = (f(up) - f(um)) / (2.0 * h)
    return grad


class Rng:
    """Deterministic seeded generator (PCG64); no OS entropy is ever used."""

    def __init__(self, seed):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, size=None, mean=0.0, std=1.0):
        if std < 0:
            raise ValueError("std must be nonnegative")
        return mean + std * self._gen.standard_normal(size)

    def uniform(self, size=None, lo=0.0, hi=1.0):
        if lo > hi:
            raise ValueError("uniform: lo > hi")
        return self._gen.uniform(lo, hi, size)

    def integers(self, lo, hi, size=None):
        return self._gen.integers(lo, hi, size=size)

    def choice(self, n, size, replace=True):
        return self._gen.choice(n, size=size, replace=replace)

    def spawn(self, key):
        """Derive an independent stream from this seed and an integer key."""
        return Rng(np.random.SeedSequence([self.seed, int(key)]).generate_state(1)[0])
