"""Nonnegative scalar networks that approximate a pointwise set distance.

Two presets are provided:

* ``toy``: fully connected layers with orthonormal weight matrices and
  GroupSort activations, absolute-value head.  1-Lipschitz by
  construction; the certificate is maintained by re-projecting the
  weights after every optimizer step.
* ``ct``: strided convolutions + fully connected layers with PReLU
  activations and a Huber head.  The Lipschitz constraint is only
  penalized (gradient penalty during training), not enforced exactly.
"""

import numpy as np

from .autodiff import Tensor, ShapeError, conv2d, groupsort, huber


class SingularMatrixError(ValueError):
    pass


def _spectral_upper_bound(w):
    return np.sqrt(np.linalg.norm(w, 1) * np.linalg.norm(w, np.inf))


def orthonormalize(w, max_iters=100, tol=1e-8):
    """Polar factor of w by Newton-Schulz iteration.

    Returns the nearest matrix (Frobenius sense) with orthonormal rows
    (out <= in) or columns (in <= out).  The input is pre-scaled by an
    upper bound on its spectral norm so the iteration contracts.
    """
    w = np.asarray(w, dtype=np.float64)
    out_dim, in_dim = w.shape
    transpose = out_dim < in_dim
    y = w.T if transpose else w  # tall: columns get orthonormalized
    bound = _spectral_upper_bound(y)
    if bound == 0.0:
        raise SingularMatrixError("cannot orthonormalize the zero matrix")
    y = y / bound
    eye = np.eye(y.shape[1])
    for _ in range(max_iters):
        gram = y.T @ y
        residual = np.linalg.norm(gram - eye)
        if residual < tol:
            break
        y = 1.5 * y - 0.5 * y @ gram
    if np.linalg.norm(y.T @ y - eye) > 1e-6:
        raise SingularMatrixError(
            "Newton-Schulz did not converge; matrix is numerically rank-deficient")
    return y.T if transpose else y


class LinearLayer:
    """Dense layer; `constraint_mode` decides how 1-Lipschitzness is kept."""

    def __init__(self, in_dim, out_dim, rng, constraint_mode="orthonormal"):
        self.constraint_mode = constraint_mode
        w = rng.normal(size=(out_dim, in_dim), std=1.0 / np.sqrt(in_dim))
        if constraint_mode == "orthonormal":
            w = orthonormalize(w)
        self.weights = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x):
        # x: (batch, in_dim)
        return x.matmul(self._wt()) + self.bias

    def _wt(self):
        w = self.weights

        def bwd(g):
            w._accumulate(g.T)
        return Tensor(w.data.T, parents=(w,), backward=bwd)

    def params(self):
        return [self.weights, self.bias]

    def project(self):
        if self.constraint_mode == "orthonormal":
            self.weights.data = orthonormalize(self.weights.data)


class ConvLayer:
    """Strided valid convolution, kernel 4, stride 2; penalized mode only."""

    kernel_size = 4
    stride = 2

    def __init__(self, in_ch, out_ch, rng):
        k = self.kernel_size
        fan_in = in_ch * k * k
        self.kernels = Tensor(rng.normal(size=(out_ch, in_ch, k, k),
                                         std=1.0 / np.sqrt(fan_in)),
                              requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True)

    def __call__(self, x):
        return conv2d(x, self.kernels, self.bias, stride=self.stride)

    def params(self):
        return [self.kernels, self.bias]

    def project(self):
        pass


class GroupSortActivation:
    def __init__(self, group_size=2):
        self.group_size = group_size

    def __call__(self, x):
        return groupsort(x, self.group_size)

    def params(self):
        return []

    def project(self):
        pass


class PReLUActivation:
    """sigma_c(x) = x for x >= 0, c*x otherwise, with learnable slope c.

    |c| <= 1 keeps the activation 1-Lipschitz; the slope is clamped to
    [-1, 1] after every optimizer step.
    """

    def __init__(self, init_slope=0.25):
        self.slope = Tensor(np.array(init_slope), requires_grad=True)

    def __call__(self, x):
        return x.relu() - self.slope * (-x).relu()

    def params(self):
        return [self.slope]

    def project(self):
        self.slope.data = np.clip(self.slope.data, -1.0, 1.0)


class LipNet:
    """Ordered layers + a nonnegative 1-Lipschitz head producing a scalar."""

    def __init__(self, layers, head="abs", huber_delta=1.0, input_dim=None,
                 image_shape=None):
        self.layers = layers
        self.head = head
        self.huber_delta = float(huber_delta)
        self.input_dim = input_dim
        self.image_shape = image_shape  # (channels, H, W) for conv nets

    # ------------------------------------------------------------------
    def forward_batch(self, x):
        """x: Tensor or array (batch, input_dim) -> Tensor (batch,) of J >= 0."""
        if not isinstance(x, Tensor):
            x = Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        if x.shape[-1] != self.input_dim:
            raise ShapeError("expected input dimension %d, got %d"
                             % (self.input_dim, x.shape[-1]))
        batch = x.shape[0]
        if self.image_shape is not None:
            h = x.reshape(batch, *self.image_shape)
        else:
            h = x
        for layer in self.layers:
            if isinstance(layer, LinearLayer) and h.ndim > 2:
                h = h.reshape(batch, -1)
            h = layer(h)
        h = h.reshape(batch)
        if self.head == "abs":
            return h.abs()
        if self.head == "huber":
            return huber(h, self.huber_delta)
        raise ValueError("unknown head %r" % (self.head,))

    def forward(self, u):
        """Scalar J(u) for a single signal."""
        return float(self.forward_batch(np.asarray(u).reshape(1, -1)).data[0])

    def forward_batch_values(self, x):
        """Plain ndarray of J over the rows of x (no graph kept)."""
        return self.forward_batch(x).data

    def grad_input(self, u):
        """Gradient of J with respect to the input signal."""
        return self.grad_input_batch(np.asarray(u).reshape(1, -1))[0]

    def grad_input_batch(self, x):
        """Per-row input gradients for a batch, one backward pass total."""
        leaf = Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)),
                      requires_grad=True)
        self.forward_batch(leaf).sum().backward()
        return leaf.grad

    # ------------------------------------------------------------------
    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def project_constraints(self):
        for layer in self.layers:
            layer.project()

    def param_state(self):
        return [p.data.copy() for p in self.params()]

    def load_param_state(self, state):
        for p, s in zip(self.params(), state):
            p.data = np.array(s, dtype=np.float64).reshape(p.data.shape)

    # ------------------------------------------------------------------
    def to_dict(self):
        spec = []
        for layer in self.layers:
            if isinstance(layer, LinearLayer):
                spec.append({"kind": "linear",
                             "mode": layer.constraint_mode,
                             "weights": layer.weights.data.tolist(),
                             "bias": layer.bias.data.tolist()})
            elif isinstance(layer, ConvLayer):
                spec.append({"kind": "conv",
                             "kernels": layer.kernels.data.tolist(),
                             "bias": layer.bias.data.tolist()})
            elif isinstance(layer, GroupSortActivation):
                spec.append({"kind": "groupsort", "group_size": layer.group_size})
            elif isinstance(layer, PReLUActivation):
                spec.append({"kind": "prelu", "slope": float(layer.slope.data)})
            else:
                raise TypeError("unserializable layer %r" % (layer,))
        return {"layers": spec, "head": self.head, "huber_delta": self.huber_delta,
                "input_dim": self.input_dim,
                "image_shape": list(self.image_shape) if self.image_shape else None}

    @classmethod
    def from_dict(cls, d):
        layers = []
        for spec in d["layers"]:
            kind = spec["kind"]
            if kind == "linear":
                w = np.asarray(spec["weights"], dtype=np.float64)
                layer = LinearLayer.__new__(LinearLayer)
                layer.constraint_mode = spec["mode"]
                layer.weights = Tensor(w, requires_grad=True)
                layer.bias = Tensor(np.asarray(spec["bias"]), requires_grad=True)
            elif kind == "conv":
                layer = ConvLayer.__new__(ConvLayer)
                layer.kernels = Tensor(np.asarray(spec["kernels"]),
                                       requires_grad=True)
                layer.bias = Tensor(np.asarray(spec["bias"]), requires_grad=True)
            elif kind == "groupsort":
                layer = GroupSortActivation(spec["group_size"])
            elif kind == "prelu":
                layer = PReLUActivation(spec["slope"])
            else:
                raise ValueError("unknown layer kind %r" % (kind,))
            layers.append(layer)
        shape = d.get("image_shape")
        return cls(layers, head=d["head"], huber_delta=d["huber_delta"],
                   input_dim=d["input_dim"],
                   image_shape=tuple(shape) if shape else None)


# ----------------------------------------------------------------------
def toy_net(rng, input_dim=2, width=10, hidden_layers=6, group_size=2):
    """Orthonormal GroupSort network with an absolute-value head."""
    layers = [LinearLayer(input_dim, width, rng), GroupSortActivation(group_size)]
    for _ in range(hidden_layers - 1):
        layers.append(LinearLayer(width, width, rng))
        layers.append(GroupSortActivation(group_size))
    layers.append(LinearLayer(width, 1, rng))
    return LipNet(layers, head="abs", input_dim=input_dim)


def ct_net(rng, size=32, fc_width=64, huber_delta=1.0):
    """Conv(1->32)-Conv(32->64)-Conv(64->1) + two dense layers, PReLU, Huber."""
    def conv_out(n):
        return (n - ConvLayer.kernel_size) // ConvLayer.stride + 1
    n = size
    for _ in range(3):
        n = conv_out(n)
    flat = n * n  # final conv has a single output channel
    layers = [ConvLayer(1, 32, rng), PReLUActivation(),
              ConvLayer(32, 64, rng), PReLUActivation(),
              ConvLayer(64, 1, rng), PReLUActivation(),
              LinearLayer(flat, fc_width, rng, constraint_mode="penalized"),
              PReLUActivation(),
              LinearLayer(fc_width, 1, rng, constraint_mode="penalized")]
    return LipNet(layers, head="huber", huber_delta=huber_delta,
                  input_dim=size * size, image_shape=(1, size, size))


def lipschitz_audit(net, rng, num_pairs, lo, hi):
    """Largest observed |J(u)-J(v)| / ||u-v|| over random box-sampled pairs."""
    if num_pairs < 1:
        raise ValueError("need at least one pair")
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    u = lo + (hi - lo) * rng.uniform(size=(num_pairs, net.input_dim))
    v = lo + (hi - lo) * rng.uniform(size=(num_pairs, net.input_dim))
    ju = net.forward_batch(u).data
    jv = net.forward_batch(v).data
    gaps = np.linalg.norm(u - v, axis=1)
    mask = gaps > 0
    return float(np.max(np.abs(ju - jv)[mask] / gaps[mask]))
