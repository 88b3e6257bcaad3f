"""Target potentials f(x), their gradients and smoothness metadata.

Every target evaluates on a single point of shape ``(d,)`` or on a batch of
shape ``(M, d)``; batch input returns one value (or gradient row) per point.
Targets are immutable after construction, so they can be shared between
threads freely.
"""

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import DegeneratePriorError, DimensionError, SingularityError

_LOGISTIC_CHUNK = 1 << 16


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _as_points(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.ndim > 2 or x.shape[-1] != d:
        raise DimensionError(f"expected points of dimension {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class QuadraticTarget:
    """Centred Gaussian f(x) = 1/2 x^T P diag(s) P^T x.

    ``spectrum`` holds the precision eigenvalues s_1 >= ... >= s_d > 0 and
    ``rotation`` the orthogonal P (identity when omitted).
    """

    spectrum: np.ndarray
    rotation: np.ndarray = None

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.spectrum, dtype=np.float64))
        if s.ndim != 1 or s.size == 0:
            raise ValueError("spectrum must be a non-empty vector")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("spectrum entries must be finite and positive")
        if np.any(np.diff(s) > 0):
            raise ValueError("spectrum must be sorted non-increasing")
        object.__setattr__(self, "spectrum", _frozen(s))
        if self.rotation is not None:
            p = np.asarray(self.rotation, dtype=np.float64)
            if p.shape != (s.size, s.size):
                raise DimensionError(f"rotation must be {s.size}x{s.size}")
            if np.max(np.abs(p.T @ p - np.eye(s.size))) > 1e-10:
                raise ValueError("rotation is not orthogonal")
            object.__setattr__(self, "rotation", _frozen(p))

    @property
    def dim(self):
        return self.spectrum.size

    @property
    def bounds(self):
        """Strong convexity and smoothness constants (m, L)."""
        return float(self.spectrum[-1]), float(self.spectrum[0])

    def covariance(self):
        """Target covariance P diag(1/s) P^T."""
        inv = np.diag(1.0 / self.spectrum)
        if self.rotation is None:
            return inv
        return self.rotation @ inv @ self.rotation.T

    def _modes(self, x):
        return x if self.rotation is None else x @ self.rotation

    def potential(self, x):
        x = _as_points(x, self.dim)
        y = self._modes(x)
        return 0.5 * np.sum(self.spectrum * y * y, axis=-1)

    def gradient(self, x):
        x = _as_points(x, self.dim)
        g = self.spectrum * self._modes(x)
        return g if self.rotation is None else g @ self.rotation.T


@dataclass(frozen=True, eq=False)
class MixtureTarget:
    """Equal mixture of N(alpha, I) and N(-alpha, I).

    Written as 1/2|x|^2 + 1/2|alpha|^2 - |v| - log1p(exp(-2|v|)) with
    v = x.alpha, which is exactly even in x and never overflows.
    """

    center: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        if c.ndim != 1:
            raise ValueError("center must be a vector")
        object.__setattr__(self, "center", _frozen(c))

    @property
    def dim(self):
        return self.center.size

    @property
    def bounds(self):
        """(m, L) from the Hessian I - alpha alpha^T sech^2(v); m may be negative."""
        return 1.0 - float(self.center @ self.center), 1.0

    def potential(self, x):
        x = _as_points(x, self.dim)
        v = np.abs(x @ self.center)
        return (0.5 * np.sum(x * x, axis=-1) + 0.5 * float(self.center @ self.center)
                - v - np.log1p(np.exp(-2.0 * v)))

    def gradient(self, x):
        x = _as_points(x, self.dim)
        t = np.tanh(x @ self.center)
        return x - np.multiply.outer(t, self.center)


@dataclass(frozen=True, eq=False)
class QuadCosTarget:
    """f(x) = 1/2 x^T B^{-1} x - cos(c.x) with ``precision`` = B^{-1}."""

    precision: np.ndarray
    wave: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.precision, dtype=np.float64))
        c = np.atleast_1d(np.asarray(self.wave, dtype=np.float64))
        if b.shape != (c.size, c.size):
            raise DimensionError("precision and wave dimensions disagree")
        if np.max(np.abs(b - b.T)) > 1e-12:
            raise ValueError("precision must be symmetric")
        if np.linalg.eigvalsh(b)[0] <= 0:
            raise ValueError("precision must be positive definite")
        object.__setattr__(self, "precision", _frozen(b))
        object.__setattr__(self, "wave", _frozen(c))

    @property
    def dim(self):
        return self.wave.size

    def potential(self, x):
        x = _as_points(x, self.dim)
        return 0.5 * np.sum((x @ self.precision) * x, axis=-1) - np.cos(x @ self.wave)

    def gradient(self, x):
        x = _as_points(x, self.dim)
        return x @ self.precision + np.multiply.outer(np.sin(x @ self.wave), self.wave)


@dataclass(frozen=True, eq=False)
class BimodalTarget:
    """Two-dimensional ring with two lobes on the first axis.

    f(x) = 2(|x| - 3)^2 - log[exp(-2(x1-3)^2) + exp(-2(x1+3)^2)]
    """

    @property
    def dim(self):
        return 2

    def potential(self, x):
        x = _as_points(x, 2)
        r = np.sqrt(np.sum(x * x, axis=-1))
        x1 = x[..., 0]
        return 2.0 * (r - 3.0) ** 2 - np.logaddexp(-2.0 * (x1 - 3.0) ** 2,
                                                   -2.0 * (x1 + 3.0) ** 2)

    def gradient(self, x):
        x = _as_points(x, 2)
        r = np.sqrt(np.sum(x * x, axis=-1))
        if np.any(r < 1e-12):
            raise SingularityError("bimodal gradient is singular at the origin")
        x1 = x[..., 0]
        # Weight of the +3 lobe, computed as a logistic of the exponent gap.
        w = 0.5 * (1.0 + np.tanh(12.0 * x1))
        g = (4.0 * (r - 3.0) / r)[..., None] * x
        g[..., 0] += 4.0 * (w * (x1 - 3.0) + (1.0 - w) * (x1 + 3.0))
        return g


@dataclass(frozen=True, eq=False)
class LogisticTarget:
    """Bayesian logistic-regression posterior with prior N(0, (alpha Sigma_X)^{-1}).

    f(theta) = -Y^T X theta + sum_i log(1 + exp(theta.x_i)) + alpha/2 theta^T Sigma_X theta
    """

    features: np.ndarray
    labels: np.ndarray
    regularizer: float
    sample_cov: np.ndarray = field(init=False)
    bound_l: float = field(init=False)
    bound_m: float = field(init=False)
    allow_singular: bool = False

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.labels, dtype=np.float64))
        n = x.shape[0]
        if n < 1:
            raise ValueError("need at least one observation")
        if y.shape != (n,):
            raise DimensionError("labels must have one entry per feature row")
        if not np.all(np.abs(x) == 1.0):
            raise ValueError("features must be +1 or -1")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("labels must be 0 or 1")
        if not self.regularizer > 0:
            raise ValueError("regularizer must be positive")
        cov = x.T @ x / n
        ev = np.linalg.eigvalsh(cov)
        if ev[0] <= 1e-12 * max(ev[-1], 1.0) and not self.allow_singular:
            raise DegeneratePriorError("sample covariance of the features is singular")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "sample_cov", _frozen(cov))
        object.__setattr__(self, "bound_l", float((0.25 * n + self.regularizer) * ev[-1]))
        object.__setattr__(self, "bound_m", float(self.regularizer * max(ev[0], 0.0)))
        object.__setattr__(self, "_xty", _frozen(x.T @ y))

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def bounds(self):
        return self.bound_m, self.bound_l

    def _chunks(self, x):
        pts = np.atleast_2d(x)
        for lo in range(0, pts.shape[0], _LOGISTIC_CHUNK):
            yield lo, pts[lo:lo + _LOGISTIC_CHUNK]

    def potential(self, x):
        x = _as_points(x, self.dim)
        pts = np.atleast_2d(x)
        out = np.empty(pts.shape[0])
        for lo, blk in self._chunks(pts):
            u = blk @ self.features.T
            out[lo:lo + blk.shape[0]] = (
                -blk @ self._xty + np.sum(np.logaddexp(0.0, u), axis=1)
                + 0.5 * self.regularizer * np.sum((blk @ self.sample_cov) * blk, axis=1))
        return out if x.ndim == 2 else out[0]

    def gradient(self, x):
        x = _as_points(x, self.dim)
        pts = np.atleast_2d(x)
        out = np.empty_like(pts)
        for lo, blk in self._chunks(pts):
            sig = 0.5 * (1.0 + np.tanh(0.5 * (blk @ self.features.T)))
            out[lo:lo + blk.shape[0]] = (
                -self._xty + sig @ self.features
                + self.regularizer * (blk @ self.sample_cov))
        return out if x.ndim == 2 else out[0]


def eval_potential(target, x):
    """Energy f(x) of ``target`` at a point or a batch of points."""
    return target.potential(x)


def eval_gradient(target, x):
    """Gradient of f at a point or a batch of points."""
    return target.gradient(x)


def density(target, x):
    """Unnormalised density exp(-f(x))."""
    return np.exp(-target.potential(x))


def make_logistic_target(features, labels, alpha, allow_singular=False):
    """Build the logistic posterior and its smoothness bounds.

    ``bound_l = (n/4 + alpha) lambda_max(Sigma_X)`` and
    ``bound_m = alpha lambda_min(Sigma_X)``. A singular Sigma_X raises
    :class:`DegeneratePriorError` unless ``allow_singular`` is set, in which
    case ``bound_m`` is 0.
    """
    return LogisticTarget(features, labels, float(alpha), allow_singular=allow_singular)


def synthesize_logistic_data(n, d, theta_star, seed):
    """Rademacher features and Bernoulli-logit labels from the seeded stream.

    Row i uses counter-stream 2 at particle index i: uniforms 0..d-1 give the
    features (-1 below one half, +1 otherwise) and uniform d decides y_i.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    theta = np.asarray(theta_star, dtype=np.float64).reshape(-1)
    if theta.size != d:
        raise DimensionError(f"theta_star must have {d} entries")
    u = kernels.uniforms(seed, 2, 0, n, d + 1)
    x = np.where(u[:, :d] < 0.5, -1.0, 1.0)
    prob = 0.5 * (1.0 + np.tanh(0.5 * (x @ theta)))
    y = (u[:, d] < prob).astype(np.float64)
    return x, y
