"""Divergences between sample ensembles, Gaussian covariances and target densities."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyHistogramError
from .gaussian_theory import BlockCovariance

SPD_TOL = 1e-14


def _spd(m, name):
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if m.shape[0] != m.shape[1]:
        raise DomainError(f"{name} must be square")
    ev = np.linalg.eigvalsh(0.5 * (m + m.T))
    if not np.all(np.isfinite(ev)) or ev[0] <= SPD_TOL:
        raise DomainError(f"{name} is not symmetric positive definite")
    return m


def gaussian_kl(sigma, target):
    """KL(N(0, sigma) || N(0, target)) = 1/2 (tr(S T^-1) - log det(S T^-1) - d)."""
    s = _spd(sigma, "sigma")
    t = _spd(target, "target")
    if s.shape != t.shape:
        raise DomainError("covariances have different dimensions")
    ratio = np.linalg.solve(t, s)
    _, logdet_s = np.linalg.slogdet(s)
    _, logdet_t = np.linalg.slogdet(t)
    return 0.5 * (float(np.trace(ratio)) - (logdet_s - logdet_t) - s.shape[0])


def tv_upper_bound(sigma1, sigma2):
    """Total-variation bound 3/2 min(1, |sigma1^-1 sigma2 - I|_F) for centred Gaussians."""
    s1 = np.atleast_2d(np.asarray(sigma1, dtype=np.float64))
    s2 = np.atleast_2d(np.asarray(sigma2, dtype=np.float64))
    try:
        if np.linalg.cond(s1) > 1e14:
            raise np.linalg.LinAlgError
        m = np.linalg.solve(s1, s2)
    except np.linalg.LinAlgError:
        raise DomainError("sigma1 is singular") from None
    return 1.5 * min(1.0, float(np.linalg.norm(m - np.eye(m.shape[0]), "fro")))


def empirical_covariance(samples):
    """Unbiased (divisor M - 1) covariance of the rows of ``samples``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    m = x.shape[0]
    if m < 2:
        raise ValueError("need at least two samples")
    xc = x - x.mean(axis=0)
    return (xc.T @ xc) / (m - 1)


def block_covariance(particles, d):
    """Per-coordinate (x_i, p_i) covariance blocks of an (M, 2d) phase-space array."""
    z = np.asarray(particles, dtype=np.float64)
    if z.shape[0] < 2:
        raise ValueError("need at least two particles")
    zc = z - z.mean(axis=0)
    x, p = zc[:, :d], zc[:, d:2 * d]
    n = z.shape[0] - 1
    return BlockCovariance(np.einsum("ij,ij->j", x, x) / n,
                           np.einsum("ij,ij->j", p, p) / n,
                           np.einsum("ij,ij->j", x, p) / n)


@dataclass(frozen=True, eq=False)
class HistogramGrid:
    """Regular grid over a box with ``n`` bins per dimension."""

    bounds: tuple
    n: int
    counts: np.ndarray

    @property
    def dim(self):
        return len(self.bounds)

    def centers(self):
        """Bin centres as a (n^d, d) array in the same order as ``counts.ravel()``."""
        axes = [lo + (np.arange(self.n) + 0.5) * (hi - lo) / self.n for lo, hi in self.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True)
class HistogramKL:
    kl: float
    dropped: int
    grid: HistogramGrid


def default_bounds(samples, width=5.0):
    """Per-dimension sample mean +/- ``width`` sample standard deviations."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.ones(x.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return tuple((float(m - width * s), float(m + width * s)) for m, s in zip(mu, sd))


def histogram(samples, bounds, n):
    """Bin ``samples`` on the box; returns (grid, number of dropped samples)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if len(bounds) != x.shape[1]:
        raise ValueError("bounds do not match sample dimension")
    if n < 2:
        raise ValueError("need at least two bins per dimension")
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("histogram bounds must be finite with low < high")
    flat = np.zeros(x.shape[0], dtype=np.int64)
    inside = np.ones(x.shape[0], dtype=bool)
    for j, (lo, hi) in enumerate(bounds):
        col = x[:, j]
        inside &= (col >= lo) & (col <= hi)
        idx = np.floor((col - lo) * (n / (hi - lo)))
        idx = np.clip(np.nan_to_num(idx, nan=0.0, posinf=n - 1, neginf=0), 0, n - 1).astype(np.int64)
        flat = flat * n + idx
    counts = np.bincount(flat[inside], minlength=n ** len(bounds)).reshape((n,) * len(bounds))
    return HistogramGrid(bounds, int(n), counts), int(x.shape[0] - np.count_nonzero(inside))


def histogram_kl(samples, target_density, bounds=None, n=50, log=False):
    """Plug-in KL(sample histogram || discretised target) on a box.

    ``target_density`` maps a (K, d) array of points to unnormalised density
    values (log-density if ``log``). The target is evaluated at bin centres
    and normalised over the box. Samples outside the box are dropped and
    counted. Returns ``inf`` if some occupied bin has zero target mass.
    """
    if bounds is None:
        bounds = default_bounds(samples)
    grid, dropped = histogram(samples, bounds, n)
    total = int(grid.counts.sum())
    if total == 0:
        raise EmptyHistogramError("no sample fell inside the histogram box")
    p = grid.counts.ravel() / total
    vals = np.asarray(target_density(grid.centers()), dtype=np.float64).ravel()
    if log:
        vals = np.exp(vals - np.max(vals))
    q = vals / vals.sum()
    occupied = p > 0
    if np.any(q[occupied] <= 0):
        return HistogramKL(float("inf"), dropped, grid)
    kl = float(np.sum(p[occupied] * np.log(p[occupied] / q[occupied])))
    return HistogramKL(kl, dropped, grid)
