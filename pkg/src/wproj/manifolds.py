"""Analytic sets with closed-form projections and distances.

These serve as ground truth: learned projections are compared against
them, and the convergence/step-size invariants are checked with the exact
distance in place of a trained network.
"""

import numpy as np


class DegenerateInputError(ValueError):
    pass


class AnalyticManifold:
    """One of: half_circle, ball, half_space, segment, point_cloud.

    half_circle(center, radius): the arc with nonnegative second
    coordinate relative to the center.  Not convex; only used where the
    theory's locality argument applies.
    half_space(normal, offset): {u : <normal, u> <= offset}, ||normal|| = 1.
    """

    def __init__(self, kind, **params):
        self.kind = kind
        self.params = params
        if kind in ("half_circle", "ball"):
            if params["radius"] <= 0:
                raise ValueError("radius must be positive")
            self.params["center"] = np.asarray(params["center"], dtype=np.float64)
        elif kind == "half_space":
            normal = np.asarray(params["normal"], dtype=np.float64)
            if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
                raise ValueError("half_space normal must be unit length")
            self.params["normal"] = normal
        elif kind == "segment":
            self.params["a"] = np.asarray(params["a"], dtype=np.float64)
            self.params["b"] = np.asarray(params["b"], dtype=np.float64)
        elif kind == "point_cloud":
            samples = np.atleast_2d(np.asarray(params["samples"], dtype=np.float64))
            if samples.size == 0:
                raise ValueError("point_cloud needs at least one sample")
            self.params["samples"] = samples
        else:
            raise ValueError("unknown manifold kind %r" % (kind,))

    @property
    def convex(self):
        return self.kind in ("ball", "half_space", "segment")

    # ------------------------------------------------------------------
    def project(self, u):
        u = np.asarray(u, dtype=np.float64)
        k = self.kind
        if k == "half_circle":
            c, r = self.params["center"], self.params["radius"]
            rel = u - c
            if np.linalg.norm(rel) == 0.0:
                raise DegenerateInputError(
                    "projection onto the half circle is undefined at its center")
            if rel[1] >= 0.0:
                return c + r * rel / np.linalg.norm(rel)
            # below the diameter: nearest arc endpoint, ties toward smaller x
            left = c + np.array([-r, 0.0])
            right = c + np.array([r, 0.0])
            dl = np.linalg.norm(u - left)
            dr = np.linalg.norm(u - right)
            return left if dl <= dr else right
        if k == "ball":
            c, r = self.params["center"], self.params["radius"]
            rel = u - c
            n = np.linalg.norm(rel)
            return u if n <= r else c + r * rel / n
        if k == "half_space":
            normal, offset = self.params["normal"], self.params["offset"]
            excess = float(normal @ u) - offset
            return u if excess <= 0.0 else u - excess * normal
        if k == "segment":
            a, b = self.params["a"], self.params["b"]
            ab = b - a
            denom = float(ab @ ab)
            t = 0.0 if denom == 0.0 else np.clip(float((u - a) @ ab) / denom, 0.0, 1.0)
            return a + t * ab
        if k == "point_cloud":
            _, point = brute_force_project(self.params["samples"], u)
            return point
        raise AssertionError(k)

    def distance(self, u):
        return float(np.linalg.norm(np.asarray(u, dtype=np.float64) - self.project(u)))

    def distance_grad(self, u):
        """grad d_M(u) for u off the set; the zero vector on the set."""
        u = np.asarray(u, dtype=np.float64)
        p = self.project(u)
        d = np.linalg.norm(u - p)
        if d == 0.0:
            return np.zeros_like(u)
        return (u - p) / d

    def contains(self, u, tol=1e-12):
        return self.distance(u) <= tol

    # ------------------------------------------------------------------
    def sample(self, n, rng):
        """n points exactly on the set, uniform in its natural parameter."""
        if n < 1:
            raise ValueError("need n >= 1")
        k = self.kind
        if k == "half_circle":
            c, r = self.params["center"], self.params["radius"]
            phi = rng.uniform(size=n, lo=0.0, hi=np.pi)
            return np.stack([c[0] + r * np.cos(phi), c[1] + r * np.sin(phi)], axis=1)
        if k == "segment":
            a, b = self.params["a"], self.params["b"]
            t = rng.uniform(size=(n, 1))
            return a + t * (b - a)
        if k == "ball":
            c, r = self.params["center"], self.params["radius"]
            dim = c.size
            dirs = rng.normal(size=(n, dim))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            radii = r * rng.uniform(size=(n, 1)) ** (1.0 / dim)
            return c + radii * dirs
        if k == "point_cloud":
            samples = self.params["samples"]
            idx = rng.integers(0, len(samples), size=n)
            return samples[idx].copy()
        raise ValueError("uniform sampling not defined for %r" % (k,))


def brute_force_project(samples, u):
    """Nearest sample to u; ties broken by lowest index.  The test oracle."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.size == 0:
        raise ValueError("empty sample set")
    u = np.asarray(u, dtype=np.float64)
    dists = np.linalg.norm(samples - u, axis=1)
    idx = int(np.argmin(dists))  # argmin returns the first minimizer
    return idx, samples[idx].copy()


class ExactDistanceStage:
    """A perfect distance estimator: J = d_M with its analytic gradient.

    Drop-in replacement for a trained network inside the projection
    schedule, used to test the convergence theory without learning error.
    """

    def __init__(self, manifold, input_dim=None):
        self.manifold = manifold
        self.input_dim = input_dim

    def forward(self, u):
        return self.manifold.distance(u)

    def forward_batch_values(self, x):
        return np.array([self.manifold.distance(u) for u in np.atleast_2d(x)])

    def grad_input(self, u):
        return self.manifold.distance_grad(u)

    def grad_input_batch(self, x):
        return np.stack([self.manifold.distance_grad(u) for u in np.atleast_2d(x)])
