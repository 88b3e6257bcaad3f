"""Drift and diffusion structure of the dynamics, plus parameter choices.

The phase-space SDE is dX = -Q grad H dt + sqrt(2 sym Q) dB with
H(x, p) = f(x) + |p|^2/2 and Q = [[aC, -C], [I, gamma I]] for a diagonal
preconditioner C. Everything is stored per coordinate because every block of
Q is diagonal.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, DiffusionIndefiniteError

METHODS = ("overdamped", "underdamped", "gaul")
STEP_RULES = ("half-inverse", "fifth-inverse", "ul-limit-fraction")


@dataclass(frozen=True)
class DynamicsParams:
    """Parameters of one sampler.

    ``precond`` is the diagonal of C; ``None`` means the identity. The
    overdamped method is plain ULA and ignores ``a``, ``gamma`` and
    ``precond``.
    """

    a: float = 0.0
    gamma: float = 0.0
    h: float = 1e-3
    method: str = "gaul"
    precond: tuple = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("step size h must be positive and finite")
        if self.a < 0 or self.gamma < 0:
            raise ValueError("a and gamma must be non-negative")
        if self.method == "underdamped" and self.a != 0:
            raise ValueError("the underdamped method requires a = 0")
        if self.precond is not None:
            c = tuple(float(v) for v in np.atleast_1d(self.precond))
            if any(not v > 0 for v in c):
                raise ValueError("preconditioner entries must be positive")
            object.__setattr__(self, "precond", c)
            if self.method != "overdamped":
                _check_psd(self.a, self.gamma, np.asarray(c))

    def precond_vector(self, d):
        """Diagonal of C as a length-d array."""
        if self.precond is None:
            return np.ones(d)
        c = np.asarray(self.precond, dtype=np.float64)
        if c.size == 1:
            return np.full(d, c[0])
        if c.size != d:
            raise ValueError(f"preconditioner has {c.size} entries, expected {d}")
        return c.copy()


@dataclass(frozen=True)
class StructuredQ:
    """Q stored as the diagonals of its four d x d blocks."""

    q11: np.ndarray
    q12: np.ndarray
    q21: np.ndarray
    q22: np.ndarray

    def dense(self):
        return np.block([[np.diag(self.q11), np.diag(self.q12)],
                         [np.diag(self.q21), np.diag(self.q22)]])


@dataclass(frozen=True)
class DiffusionFactor:
    """Per-coordinate 2x2 factors F_i with F_i F_i^T = 2 sym(Q) restricted to (x_i, p_i)."""

    f11: np.ndarray
    f12: np.ndarray
    f21: np.ndarray
    f22: np.ndarray

    def block(self, i):
        return np.array([[self.f11[i], self.f12[i]], [self.f21[i], self.f22[i]]])


def _check_psd(a, gamma, c):
    det = 4.0 * a * c * gamma - (1.0 - c) ** 2
    scale = (2.0 * a * c + 2.0 * gamma) ** 2
    bad = np.flatnonzero(det < -1e-14 * np.maximum(scale, 1.0))
    if bad.size:
        i = int(bad[0])
        raise DiffusionIndefiniteError(
            i, f"diffusion block of coordinate {i} is indefinite: "
               f"4 a c gamma = {4.0 * a * c[i] * gamma:.6g} < (1 - c)^2 = {(1.0 - c[i]) ** 2:.6g}")
    return np.maximum(det, 0.0)


def build_q(params, d):
    """Structured Q = [[aC, -C], [I, gamma I]]."""
    c = params.precond_vector(d)
    return StructuredQ(params.a * c, -c, np.ones(d), np.full(d, float(params.gamma)))


def diffusion_factor(params, d):
    """Symmetric square root of 2 sym(Q), one 2x2 block per coordinate.

    Uses sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)), and the
    exact diagonal form diag(sqrt(2a), sqrt(2 gamma)) when c_i = 1.
    """
    c = params.precond_vector(d)
    if params.method == "overdamped":
        z = np.zeros(d)
        return DiffusionFactor(np.full(d, math.sqrt(2.0)), z, z.copy(), z.copy())
    a, g = float(params.a), float(params.gamma)
    m11 = 2.0 * a * c
    m22 = np.full(d, 2.0 * g)
    m12 = 1.0 - c
    det = _check_psd(a, g, c)
    root = np.sqrt(det)
    denom = np.sqrt(m11 + m22 + 2.0 * root)
    safe = np.where(denom > 0, denom, 1.0)
    f11 = np.where(denom > 0, (m11 + root) / safe, 0.0)
    f22 = np.where(denom > 0, (m22 + root) / safe, 0.0)
    f12 = np.where(denom > 0, m12 / safe, 0.0)
    unit = c == 1.0
    f11[unit] = math.sqrt(2.0 * a)
    f22[unit] = math.sqrt(2.0 * g)
    f12[unit] = 0.0
    return DiffusionFactor(f11, f12, f12.copy(), f22)


def gamma_star(a, s_d):
    """Damping that makes the slowest mode critically damped: a s_d + 2 sqrt(s_d)."""
    if not s_d > 0:
        raise ValueError("s_d must be positive")
    if a < 0:
        raise ValueError("a must be non-negative")
    return a * s_d + 2.0 * math.sqrt(s_d)


def a_star(s1, sd):
    """Gradient-adjustment weight 2 / (sqrt(s1) - sqrt(sd))."""
    if not sd > 0:
        raise ValueError("sd must be positive")
    if not s1 > sd:
        raise DegenerateSpectrumError("a_star needs s1 > sd")
    return 2.0 / (math.sqrt(s1) - math.sqrt(sd))


def step_size(rule, a=None, gamma=None, s1=None, sd=None):
    """Named step-size rules.

    ``half-inverse``: 1 / (2 (a s1 + gamma)); ``fifth-inverse``: 1 / (5 s1);
    ``ul-limit-fraction``: sqrt(sd) / s1.
    """
    if rule == "half-inverse":
        return 1.0 / (2.0 * (a * s1 + gamma))
    if rule == "fifth-inverse":
        return 1.0 / (5.0 * s1)
    if rule == "ul-limit-fraction":
        return math.sqrt(sd) / s1
    raise ValueError(f"unknown step-size rule {rule!r}; expected one of {STEP_RULES}")


def gamma_field(params, target, state):
    """Non-gradient part 1/2 (Q - Q^T) grad H at phase point(s) ``state`` = (x, p)."""
    state = np.asarray(state, dtype=np.float64)
    d = state.shape[-1] // 2
    x, p = state[..., :d], state[..., d:]
    c = params.precond_vector(d)
    grad = target.gradient(x)
    return np.concatenate([-0.5 * (c + 1.0) * p, 0.5 * (c + 1.0) * grad], axis=-1)
