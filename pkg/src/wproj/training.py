"""Staged training of distance estimators and the projector schedule.

Each stage fits a nonnegative 1-Lipschitz network to the dual loss
E_true[J + tau*J^p] - E_fake[J], records the mean distance gap beta_k,
and pushes the fake sample set forward with an anchored relaxed
projection step.  The collected {mu, (theta_k, beta_k, gamma_k)} form the
deployable projector schedule.
"""

import json

import numpy as np

from .autodiff import Rng, Tensor
from .lipnet import LipNet, toy_net, ct_net
from .optim import Adam, enforce_constraints, gradient_penalty


class ConfigError(ValueError):
    pass


def validate_mu(mu):
    mu = (float(mu[0]), float(mu[1]))
    if mu[0] < 0 or mu[1] < 0:
        raise ConfigError("relaxation weights must be nonnegative, got %s" % (mu,))
    if mu[0] + mu[1] >= 2:
        raise ConfigError(
            "relaxation weights must satisfy mu1 + mu2 < 2 (simplex-bounded "
            "region), got sum %g" % (mu[0] + mu[1]))
    if mu == (0.0, 0.0):
        raise ConfigError("relaxation weights must not both be zero")
    return mu


class TrainConfig:
    """Parameters of the staged training loop.

    gamma_coeff c defines the anchoring sequence gamma_k = c/k, which for
    c in (0, 1] satisfies gamma_k in (0,1], gamma_k -> 0, sum = inf.
    """

    def __init__(self, mu=(0.5, 0.0), tau=1e-2, p=2.0, gamma_coeff=0.1,
                 stages=20, inner_steps=200, batch_size=16, noise_sigma=0.0,
                 lipschitz_mode="orthonormal", seed=0, lr=1e-5, lambda_gp=10.0,
                 smooth_initial=True, preset="toy", pair_batches=False,
                 net_kwargs=None):
        self.mu = validate_mu(mu)
        if tau < 0:
            raise ConfigError("tau must be nonnegative")
        if p < 1:
            raise ConfigError("exponent p must be >= 1")
        if not (0.0 < gamma_coeff <= 1.0):
            raise ConfigError("gamma coefficient must lie in (0, 1]")
        if stages < 0:
            raise ConfigError("stage count must be nonnegative")
        self.tau = float(tau)
        self.p = float(p)
        self.gamma_coeff = float(gamma_coeff)
        self.stages = int(stages)
        self.inner_steps = int(inner_steps)
        self.batch_size = int(batch_size)
        self.noise_sigma = float(noise_sigma)
        self.lipschitz_mode = lipschitz_mode
        self.seed = int(seed)
        self.lr = float(lr)
        self.lambda_gp = float(lambda_gp)
        self.smooth_initial = bool(smooth_initial)
        self.preset = preset
        self.pair_batches = bool(pair_batches)
        self.net_kwargs = dict(net_kwargs or {})

    def gamma(self, k):
        return self.gamma_coeff / k

    def make_net(self, rng, input_dim):
        if self.preset == "toy":
            return toy_net(rng, input_dim=input_dim, **self.net_kwargs)
        if self.preset == "ct":
            size = int(round(np.sqrt(input_dim)))
            return ct_net(rng, size=size, **self.net_kwargs)
        raise ConfigError("unknown preset %r" % (self.preset,))


class Stage:
    def __init__(self, net, beta, gamma):
        if not np.isfinite(beta):
            raise ValueError("stage beta must be finite")
        if not (0.0 < gamma <= 1.0):
            raise ValueError("stage gamma must lie in (0, 1]")
        self.net = net
        self.beta = float(beta)
        self.gamma = float(gamma)


class ProjectorSchedule:
    """The trained artifact {mu, (theta_k, beta_k, gamma_k) for k=1..K}."""

    def __init__(self, mu, stages, input_dim, preset=None, seed=None):
        self.mu = validate_mu(mu)
        self.stages = list(stages)
        self.input_dim = int(input_dim)
        self.preset = preset
        self.seed = seed

    def __len__(self):
        return len(self.stages)

    def to_json(self):
        return json.dumps({
            "mu": list(self.mu),
            "input_dim": self.input_dim,
            "preset": self.preset,
            "seed": self.seed,
            "stages": [{"beta": s.beta, "gamma": s.gamma,
                        "theta": s.net.to_dict()} for s in self.stages],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        stages = [Stage(LipNet.from_dict(s["theta"]), s["beta"], s["gamma"])
                  for s in d["stages"]]
        return cls(tuple(d["mu"]), stages, d["input_dim"],
                   preset=d.get("preset"), seed=d.get("seed"))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


# ----------------------------------------------------------------------
def _values(net, batch):
    """J over the rows of `batch` as a plain ndarray, for net or callable."""
    if hasattr(net, "forward_batch_values"):
        return np.asarray(net.forward_batch_values(batch), dtype=np.float64)
    return np.array([float(net(u)) for u in np.atleast_2d(batch)])


def dual_loss(net, true_batch, fake_batch, tau=0.0, p=2.0):
    """E_true[J + tau*J^p] - E_fake[J].

    Returns a differentiable Tensor when `net` is a LipNet; for exact
    stages or plain callables use dual_loss_value.
    """
    true_batch = np.atleast_2d(np.asarray(true_batch, dtype=np.float64))
    fake_batch = np.atleast_2d(np.asarray(fake_batch, dtype=np.float64))
    if true_batch.size == 0 or fake_batch.size == 0:
        raise ValueError("dual loss needs nonempty batches")
    jt = net.forward_batch(true_batch)
    jf = net.forward_batch(fake_batch)
    loss = jt.mean() - jf.mean()
    if tau > 0:
        loss = loss + tau * (jt ** p).mean()
    return loss


def dual_loss_value(fn, true_batch, fake_batch, tau=0.0, p=2.0):
    """Same loss as a float, for any distance-like function."""
    jt = _values(fn, true_batch)
    jf = _values(fn, fake_batch)
    if jt.size == 0 or jf.size == 0:
        raise ValueError("dual loss needs nonempty batches")
    return float(jt.mean() - jf.mean() + (tau * jt ** p).mean())


def mean_distance_gap(net, fake_set, true_set):
    """beta = mean J over the fake set minus mean J over the true set."""
    jf = _values(net, fake_set)
    jt = _values(net, true_set)
    if jf.size == 0 or jt.size == 0:
        raise ValueError("mean distance gap needs nonempty sets")
    return float(jf.mean() - jt.mean())


def g_step(u, net, beta, mu):
    """Relaxed projection step u - (mu1*beta + mu2*J(u)) * grad J(u)."""
    u = np.asarray(u, dtype=np.float64)
    lam = mu[0] * beta + mu[1] * net.forward(u)
    return u - lam * net.grad_input(u)


def g_step_batch(x, net, beta, mu):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    lam = mu[0] * beta + mu[1] * _values(net, x)
    grads = net.grad_input_batch(x)
    return x - lam[:, None] * grads


def push_forward(current, initial, gamma, net, beta, mu):
    """Anchored update per index: gamma*u1_i + (1-gamma)*g(uk_i)."""
    current = np.atleast_2d(np.asarray(current, dtype=np.float64))
    initial = np.atleast_2d(np.asarray(initial, dtype=np.float64))
    if current.shape != initial.shape:
        raise ValueError("current and initial sets must correspond index-wise")
    return gamma * initial + (1.0 - gamma) * g_step_batch(current, net, beta, mu)


def smooth_samples(samples, sigma, rng):
    """Add i.i.d. Gaussian perturbations; sigma = 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    samples = np.asarray(samples, dtype=np.float64)
    if sigma == 0.0:
        return samples.copy()
    return samples + rng.normal(size=samples.shape, std=sigma)


def grad_norm_monitor(net, samples):
    """Mean squared input-gradient norm; equals 1 at the exact distance."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.size == 0:
        raise ValueError("monitor needs a nonempty set")
    grads = net.grad_input_batch(samples)
    return float(np.mean(np.sum(grads ** 2, axis=1)))


def fit_stage(net, true_set, fake_set, config, rng, loss_history=None):
    """Minibatch Adam on the dual loss (+ gradient penalty when penalized)."""
    true_set = np.atleast_2d(np.asarray(true_set, dtype=np.float64))
    fake_set = np.atleast_2d(np.asarray(fake_set, dtype=np.float64))
    if true_set.size == 0 or fake_set.size == 0:
        raise ValueError("training sets must be nonempty")
    opt = Adam(net.params(), lr=config.lr)
    bs = min(config.batch_size, len(true_set), len(fake_set))
    penalized = config.lipschitz_mode == "penalized"
    paired = config.pair_batches and len(true_set) == len(fake_set)
    for _ in range(config.inner_steps):
        if paired:
            # common random indices: same-pair sampling keeps the dual
            # loss unbiased but cancels the shared image content in the
            # gradient, leaving the true-vs-fake difference signal
            idx = rng.choice(len(true_set), size=bs)
            tb, fb = true_set[idx], fake_set[idx]
        else:
            tb = true_set[rng.choice(len(true_set), size=bs)]
            fb = fake_set[rng.choice(len(fake_set), size=bs)]
        loss = dual_loss(net, tb, fb, tau=config.tau, p=config.p)
        if penalized and config.lambda_gp > 0:
            loss = loss + Tensor(config.lambda_gp) * gradient_penalty(
                net, tb, fb, rng, paired=paired)
        if loss_history is not None:
            loss_history.append(loss.item())
        opt.zero_grad()
        loss.backward()
        opt.step()
        if not penalized:
            enforce_constraints(net)
        else:
            net.project_constraints()  # PReLU slope clamp only
    return net


def toy_train_config(seed=13, **overrides):
    """Hyperparameters tuned for the 2D half-circle study.

    A large tau is what pins J to zero on the manifold samples; without
    it the learned estimator carries a constant offset and the deployed
    projections land short of the set.
    """
    base = dict(mu=(0.5, 0.5), tau=8.0, gamma_coeff=0.1, stages=20,
                inner_steps=2000, batch_size=100, noise_sigma=0.1,
                lr=2e-3, seed=seed, preset="toy")
    base.update(overrides)
    return TrainConfig(**base)


def ct_train_config(seed=0, **overrides):
    """Hyperparameters for the 32x32 ellipse-CT study (penalized mode)."""
    base = dict(mu=(0.1, 0.1), tau=2.0, gamma_coeff=0.1, stages=3,
                inner_steps=400, batch_size=32, noise_sigma=0.0,
                lipschitz_mode="penalized", lr=3e-3, lambda_gp=10.0,
                pair_batches=True, seed=seed, preset="ct")
    base.update(overrides)
    return TrainConfig(**base)


def train(config, initial_set, true_set, log=None):
    """Full staged training; returns the projector schedule.

    `log`, when given, is called once per stage with a dict of
    per-stage diagnostics (k, beta, gamma, dual loss, gradient monitor).
    """
    initial_set = np.atleast_2d(np.asarray(initial_set, dtype=np.float64))
    true_set = np.atleast_2d(np.asarray(true_set, dtype=np.float64))
    if initial_set.size == 0 or true_set.size == 0:
        raise ConfigError("training sets must be nonempty")
    if initial_set.shape[1] != true_set.shape[1]:
        raise ConfigError("sample dimensions differ between sets")
    input_dim = initial_set.shape[1]
    rng = Rng(config.seed)
    net = config.make_net(rng.spawn(0), input_dim)
    stages = []
    fake = initial_set.copy()
    if config.noise_sigma > 0 and config.smooth_initial:
        fake = smooth_samples(fake, config.noise_sigma, rng.spawn(1))
    for k in range(1, config.stages + 1):
        stage_rng = rng.spawn(10 + k)
        fit_stage(net, true_set, fake, config, stage_rng)
        beta = mean_distance_gap(net, fake, true_set)
        gamma = config.gamma(k)
        snapshot = LipNet.from_dict(net.to_dict())
        stages.append(Stage(snapshot, beta, gamma))
        fake = push_forward(fake, initial_set, gamma, snapshot, beta, config.mu)
        if config.noise_sigma > 0:
            fake = smooth_samples(fake, config.noise_sigma, rng.spawn(1000 + k))
        if log is not None:
            log({"k": k, "beta": beta, "gamma": gamma,
                 "dual_loss": dual_loss_value(snapshot, true_set, fake,
                                              tau=config.tau, p=config.p),
                 "grad_monitor": grad_norm_monitor(snapshot, fake)})
    return ProjectorSchedule(config.mu, stages, input_dim,
                             preset=config.preset, seed=config.seed)


def make_exact_schedule(manifold, initial_set, num_stages, mu,
                        gamma_coeff=1.0):
    """Schedule built from the analytic distance instead of training.

    beta_k is the empirical mean distance of the evolving sample cloud,
    matching what stage training would produce with a perfect estimator.
    """
    from .manifolds import ExactDistanceStage

    mu = validate_mu(mu)
    initial_set = np.atleast_2d(np.asarray(initial_set, dtype=np.float64))
    input_dim = initial_set.shape[1]
    exact = ExactDistanceStage(manifold, input_dim=input_dim)
    stages = []
    cloud = initial_set.copy()
    for k in range(1, num_stages + 1):
        beta = float(np.mean(_values(exact, cloud)))
        gamma = gamma_coeff / k
        stages.append(Stage(exact, beta, gamma))
        cloud = push_forward(cloud, initial_set, gamma, exact, beta, mu)
    return ProjectorSchedule(mu, stages, input_dim, preset="exact")
