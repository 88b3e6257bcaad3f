"""Euler-Maruyama ensemble simulation of the three Langevin samplers.

Randomness comes from a counter-based generator: the normals used by
particle i at step k depend only on (seed, i, k), so results are identical
for any number of worker threads.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels, num_threads
from .dynamics import DynamicsParams, diffusion_factor
from .errors import DivergenceError
from .metrics import block_covariance, empirical_covariance

STREAM_DYNAMICS = 0
STREAM_INIT = 1


@dataclass(eq=False)
class Ensemble:
    """M particles in phase space, stored particle-major as (x_1..x_d, p_1..p_d)."""

    particles: np.ndarray
    d: int
    seed: int
    step: int = 0

    def __post_init__(self):
        self.particles = np.ascontiguousarray(self.particles, dtype=np.float64)
        if self.particles.ndim != 2 or self.particles.shape[1] != 2 * self.d:
            raise ValueError(f"particles must have shape (M, {2 * self.d})")
        if self.particles.shape[0] < 1:
            raise ValueError("need at least one particle")
        if not np.all(np.isfinite(self.particles)):
            raise ValueError("particles must be finite")

    @property
    def m(self):
        return self.particles.shape[0]

    @property
    def x(self):
        return self.particles[:, :self.d]

    @property
    def p(self):
        return self.particles[:, self.d:]

    def copy(self):
        return Ensemble(self.particles.copy(), self.d, self.seed, self.step)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything needed to reproduce one simulation."""

    target: object
    params: DynamicsParams
    m: int
    steps: int
    seed: int = 0
    record_every: int = 1
    init_cov: object = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("M must be at least 1")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass(frozen=True, eq=False)
class Snapshot:
    step: int
    time: float
    block: object
    cov_x: np.ndarray
    metrics: dict = field(default_factory=dict)


@dataclass(eq=False)
class TrajectoryRecord:
    snapshots: list
    final: Ensemble = None

    @property
    def steps(self):
        return np.array([s.step for s in self.snapshots])

    @property
    def times(self):
        return np.array([s.time for s in self.snapshots])

    def series(self, key):
        return np.array([s.metrics[key] for s in self.snapshots])


def init_ensemble(m, d, init_cov=1.0, seed=0, threads=None):
    """Draw M particles from N(0, diag(init_cov)) over the 2d phase coordinates.

    ``init_cov`` is a scalar or a length-2d vector of variances.
    """
    if m < 1:
        raise ValueError("M must be at least 1")
    var = np.broadcast_to(np.asarray(init_cov, dtype=np.float64), (2 * d,))
    if np.any(var <= 0):
        raise ValueError("initial variances must be positive")
    z = kernels.normals(seed, STREAM_INIT, 0, m, 2 * d, threads or num_threads())
    return Ensemble(z * np.sqrt(var), d, seed, 0)


class _Stepper:
    """Pre-computed coefficients for repeated steps of one parameter set."""

    def __init__(self, params, d, m, threads):
        self.params = params
        self.threads = threads or num_threads()
        h = params.h
        rh = math.sqrt(h)
        fac = diffusion_factor(params, d)
        c = params.precond_vector(d)
        self.method = 0 if params.method == "overdamped" else 1
        self.ax = np.ascontiguousarray(params.a * c)
        self.cx = np.ascontiguousarray(c)
        self.f = [np.ascontiguousarray(v * rh) for v in (fac.f11, fac.f12, fac.f21, fac.f22)]
        self.z = np.empty((m, 2 * d))

    def __call__(self, ens, target, noise=True):
        grad = np.ascontiguousarray(target.gradient(ens.x), dtype=np.float64)
        p = self.params
        return kernels.em_update(ens.particles, grad, self.z, self.ax, self.cx,
                                 float(p.gamma), float(p.h), *self.f, ens.seed, ens.step,
                                 self.method, bool(noise), self.threads)


def em_step(ensemble, params, target, noise=True, threads=None):
    """Advance the ensemble by one Euler-Maruyama step in place and return it.

    The gradient is evaluated once at the pre-update positions. Raises
    :class:`DivergenceError` (with a copy of the pre-step ensemble) if any
    entry becomes non-finite or exceeds 1e12 in magnitude.
    """
    before = ensemble.copy()
    bad = _Stepper(params, ensemble.d, ensemble.m, threads)(ensemble, target, noise)
    if bad:
        ensemble.particles[...] = before.particles
        raise DivergenceError(ensemble.step, before)
    ensemble.step += 1
    return ensemble


def _snapshot(ens, h, metrics):
    block = block_covariance(ens.particles, ens.d) if ens.m > 1 else None
    cov_x = empirical_covariance(ens.x) if ens.m > 1 else np.zeros((ens.d, ens.d))
    values = {}
    for fn in metrics or ():
        values.update(fn(ens))
    return Snapshot(ens.step, ens.step * h, block, cov_x, values)


def simulate(config, metrics=None, threads=None, ensemble=None, noise=True):
    """Run ``config.steps`` steps, recording every ``config.record_every``.

    ``metrics`` is a sequence of callables ``ensemble -> dict`` evaluated at
    each record. The final step is always recorded. On divergence the
    raised :class:`DivergenceError` carries the partial record, whose
    ``final`` is the last recorded (finite) ensemble.
    """
    d = config.target.dim
    if ensemble is None:
        ensemble = init_ensemble(config.m, d, config.init_cov, config.seed, threads)
    step = _Stepper(config.params, d, ensemble.m, threads)
    record = TrajectoryRecord([_snapshot(ensemble, config.params.h, metrics)])
    last_good = ensemble.copy()
    for k in range(1, config.steps + 1):
        bad = step(ensemble, config.target, noise)
        if bad:
            record.final = last_good
            raise DivergenceError(ensemble.step, record)
        ensemble.step += 1
        if k % config.record_every == 0 or k == config.steps:
            record.snapshots.append(_snapshot(ensemble, config.params.h, metrics))
            last_good = ensemble.copy()
    record.final = ensemble
    return record
