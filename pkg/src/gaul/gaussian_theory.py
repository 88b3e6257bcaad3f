"""Closed-form results for a centred Gaussian target f(x) = 1/2 x^T diag(s) x.

With a diagonal precision the 2d x 2d covariance splits into independent
per-coordinate 2x2 blocks (Sigma11_i, Sigma12_i, Sigma22_i). This module
holds the continuous block ODE and its integrators, the per-mode spectral
system, the Euler-Maruyama covariance map with its fixed point, and the
mixing-rate constants.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .backend import kernels
from .errors import (DegenerateEigenvectorError, DivergenceError, InstabilityError,
                     NoFixedPointError)

DEFECT_TOL = 1e-12


def _vec(v):
    return np.atleast_1d(np.asarray(v, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    """Diagonals of the three distinct d x d blocks of the phase-space covariance."""

    sig11: np.ndarray
    sig22: np.ndarray
    sig12: np.ndarray

    def __post_init__(self):
        s11, s22, s12 = np.broadcast_arrays(_vec(self.sig11), _vec(self.sig22), _vec(self.sig12))
        object.__setattr__(self, "sig11", s11.copy())
        object.__setattr__(self, "sig22", s22.copy())
        object.__setattr__(self, "sig12", s12.copy())

    @property
    def dim(self):
        return self.sig11.size

    def min_eigenvalues(self):
        """Smallest eigenvalue of every 2x2 block."""
        tr = 0.5 * (self.sig11 + self.sig22)
        return tr - np.sqrt(0.25 * (self.sig11 - self.sig22) ** 2 + self.sig12 ** 2)

    def is_psd(self, tol=1e-10):
        return bool(np.all(self.min_eigenvalues() >= -tol))

    def dense(self):
        return np.block([[np.diag(self.sig11), np.diag(self.sig12)],
                         [np.diag(self.sig12), np.diag(self.sig22)]])

    @classmethod
    def identity(cls, d):
        return cls(np.ones(d), np.ones(d), np.zeros(d))

    @classmethod
    def stationary(cls, spectrum):
        s = _vec(spectrum)
        return cls(1.0 / s, np.ones_like(s), np.zeros_like(s))


@dataclass(frozen=True, eq=False)
class CovarianceTrajectory:
    """Recorded solution of the block ODE; arrays are (records, d)."""

    times: np.ndarray
    sig11: np.ndarray
    sig22: np.ndarray
    sig12: np.ndarray

    def at(self, k):
        return BlockCovariance(self.sig11[k], self.sig22[k], self.sig12[k])

    @property
    def final(self):
        return self.at(-1)


@dataclass(frozen=True)
class ModeSpectrum:
    """Eigenvalues of one 3x3 mode matrix, ordered Re(plus) >= Re(zero) >= Re(minus)."""

    lam0: complex
    lam_minus: complex
    lam_plus: complex
    discriminant: float
    defective: bool


@dataclass(frozen=True, eq=False)
class ModeEigenvectors:
    """Eigenvectors of one mode matrix, in its (x, p, cross) coordinates.

    On a defective mode ``eta`` and ``xi`` complete a Jordan chain:
    (D - lam) eta = v0 and (D - lam) xi = eta. Otherwise they are None.
    """

    v0: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray
    eta: np.ndarray = None
    xi: np.ndarray = None

    def embed(self, vec, i, d):
        """Place a mode vector on coordinates (i, i + d, i + 2d) of R^{3d}."""
        out = np.zeros(3 * d, dtype=np.result_type(vec, np.float64))
        out[[i, i + d, i + 2 * d]] = vec
        return out


@dataclass(frozen=True, eq=False)
class DiscreteMap:
    """Per-mode A_i = I - h [[a s_i, -1], [s_i, gamma]] and noise L = diag(sqrt(2ah), sqrt(2 gamma h))."""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    l1: float
    l2: float

    @property
    def dim(self):
        return self.a11.size

    def matrix(self, i):
        return np.array([[self.a11[i], self.a12[i]], [self.a21[i], self.a22[i]]])

    def noise_cov(self):
        return np.diag([self.l1 ** 2, self.l2 ** 2])

    def spectral_radius(self):
        """Largest |eigenvalue| of A_i for every mode."""
        tr = 0.5 * (self.a11 + self.a22)
        disc = (0.5 * (self.a11 - self.a22)) ** 2 + self.a12 * self.a21
        root = np.sqrt(disc.astype(complex))
        return np.maximum(np.abs(tr + root), np.abs(tr - root))


@dataclass(frozen=True, eq=False)
class FixedPointCovariance:
    """Stationary covariance of the discrete map, one entry per mode."""

    y11: np.ndarray
    y12: np.ndarray
    y22: np.ndarray

    def as_block(self):
        return BlockCovariance(self.y11, self.y22, self.y12)


@dataclass(frozen=True)
class SpectralBound:
    admissible: bool
    bound: float
    max_modulus: float
    reason: str = ""


@dataclass(frozen=True)
class MixingRates:
    cont_rate: float
    disc_rate: float
    cont_bound_form: str
    disc_bound_form: str


def _mode_params(params, d):
    c = params.precond_vector(d)
    return params.a * c, c, float(params.gamma)


def covariance_rhs(sigma, params, spectrum):
    """Time derivative of the block covariance under the dynamics."""
    s = _vec(spectrum)
    ac, c, g = _mode_params(params, s.size)
    s11, s22, s12 = sigma.sig11, sigma.sig22, sigma.sig12
    d11 = -2.0 * (ac * s * s11 - ac) + 2.0 * c * s12
    d22 = -2.0 * s * s12 - 2.0 * g * (s22 - 1.0)
    d12 = -ac * s * s12 - (c - c * s22) + (1.0 - s11 * s) - g * s12
    return BlockCovariance(d11, d22, d12)


def _check_diagonal(sigma0):
    if isinstance(sigma0, BlockCovariance):
        return sigma0
    m = np.asarray(sigma0, dtype=np.float64)
    d = m.shape[0] // 2
    off = m.copy()
    idx = np.arange(d)
    for r, cidx in ((idx, idx), (idx, idx + d), (idx + d, idx), (idx + d, idx + d)):
        off[r, cidx] = 0.0
    if np.any(off != 0.0):
        raise ValueError("initial covariance must have diagonal blocks")
    return BlockCovariance(np.diag(m)[:d], np.diag(m)[d:], m[idx, idx + d])


def integrate_covariance(sigma0, params, spectrum, t_end, dt, record_every=1):
    """Classical RK4 on the block covariance ODE.

    The step is shrunk so that an integer number of steps lands on ``t_end``.
    Raises :class:`InstabilityError` if a block leaves the PSD cone by more
    than 1e-8.
    """
    sigma0 = _check_diagonal(sigma0)
    s = _vec(spectrum)
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    nsteps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    step = t_end / nsteps if nsteps else 0.0
    record_every = max(1, int(record_every))
    if nsteps and nsteps % record_every:
        record_every = 1
    ac, c, g = _mode_params(params, s.size)
    r11, r22, r12, bad = kernels.rk4_covariance(
        sigma0.sig11, sigma0.sig22, sigma0.sig12, ac, c, np.full(s.size, g), s,
        step, nsteps, record_every)
    if bad >= 0:
        raise InstabilityError(f"covariance left the PSD cone at step {bad} (t = {bad * step:.6g})")
    times = np.arange(r11.shape[0]) * (record_every * step)
    if nsteps:
        times[-1] = t_end
    return CovarianceTrajectory(times, r11, r22, r12)


def _generator(ac, c, g, s):
    k = np.array([[-2.0 * ac * s, 0.0, 2.0 * c],
                  [0.0, -2.0 * g, -2.0 * s],
                  [-s, c, -(ac * s + g)]])
    gen = np.zeros((4, 4))
    gen[:3, :3] = k
    gen[:3, 3] = (2.0 * ac, 2.0 * g, 1.0 - c)
    return gen


def covariance_closed_form(sigma0, params, spectrum, t):
    """Exact block covariance at time(s) ``t`` via the matrix exponential.

    Each mode is an affine linear ODE in (Sigma11, Sigma22, Sigma12); it is
    solved exactly by exponentiating the 4x4 augmented generator.
    Returns a BlockCovariance for scalar ``t`` or a CovarianceTrajectory.
    """
    sigma0 = _check_diagonal(sigma0)
    s = _vec(spectrum)
    ac, c, g = _mode_params(params, s.size)
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty((ts.size, 3, s.size))
    for i in range(s.size):
        gen = _generator(ac[i], c[i], g, s[i])
        y0 = np.array([sigma0.sig11[i], sigma0.sig22[i], sigma0.sig12[i], 1.0])
        for j, tj in enumerate(ts):
            out[j, :, i] = (expm(gen * tj) @ y0)[:3]
    if np.ndim(t) == 0:
        return BlockCovariance(out[0, 0], out[0, 1], out[0, 2])
    return CovarianceTrajectory(ts, out[:, 0], out[:, 1], out[:, 2])


def mode_matrix(a, gamma, s):
    """3x3 matrix governing the covariance deviation of one mode."""
    return np.array([
        [-2.0 * a * s, -2.0 * gamma / s, -1.0 / s],
        [0.0, 0.0, 1.0],
        [2.0 * s * s, 2.0 * (-1.0 - a * gamma) * s - 2.0 * gamma ** 2, -3.0 * gamma - a * s],
    ])


def continuous_eigenvalues(a, gamma, s):
    """Eigenvalues -as - gamma and -as - gamma +/- sqrt(Delta) of the mode matrix.

    Delta = gamma^2 - 2 a gamma s + s (a^2 s - 4). The mode is flagged
    defective (and the three values are set equal) when
    |Delta| <= 1e-12 (as + gamma)^2.
    """
    lam0 = -a * s - gamma
    disc = gamma * gamma - 2.0 * a * gamma * s + s * (a * a * s - 4.0)
    defective = abs(disc) <= DEFECT_TOL * (a * s + gamma) ** 2
    if defective:
        root = 0.0
    elif disc > 0:
        root = math.sqrt(disc)
    else:
        root = 1j * math.sqrt(-disc)
    return ModeSpectrum(complex(lam0), complex(lam0 - root), complex(lam0 + root),
                        float(disc), bool(defective))


def _vector(gamma, a, s, root):
    den = gamma + a * s + root
    if den == 0:
        raise DegenerateEigenvectorError(f"eigenvector denominator vanishes at s = {s}")
    first = (2.0 * gamma - root - 2.0 * (gamma * gamma + s + a * gamma * s) / den) / (2.0 * s * s)
    return np.array([first, -1.0 / den, 1.0])


def _mode_vectors(a, gamma, s):
    spec = continuous_eigenvalues(a, gamma, s)
    den0 = gamma + a * s
    if den0 == 0:
        raise DegenerateEigenvectorError(f"v0 denominator vanishes at s = {s}")
    v0 = np.array([-1.0 / (s * den0), -1.0 / den0, 1.0])
    root = spec.lam_plus - spec.lam0
    if spec.defective:
        r = 0.5 * (gamma - a * s)
        q = a * r + 1.0
        if r == 0 or q == 0:
            raise DegenerateEigenvectorError(f"generalised eigenvector undefined at s = {s}")
        eta = np.array([-(2.0 * a * r + 3.0) / (4.0 * r ** 4 * q ** 2),
                        -1.0 / (4.0 * r * r * q * q), 0.0])
        xi = np.array([-(2.0 * a * a * r * r + 6.0 * a * r + 5.0) / (8.0 * r ** 5 * q ** 3),
                       -1.0 / (8.0 * r ** 3 * q ** 3), 0.0])
        return ModeEigenvectors(v0, v0.copy(), v0.copy(), eta, xi)
    if root.imag == 0:
        root = root.real
    return ModeEigenvectors(v0, _vector(gamma, a, s, root), _vector(gamma, a, s, -root))


def eigen_system(a, gamma, spectrum):
    """Per-mode eigenvectors, with a Jordan chain on defective modes."""
    return [_mode_vectors(a, gamma, float(s)) for s in _vec(spectrum)]


def discrete_map(a, gamma, h, spectrum):
    """Per-mode Euler-Maruyama covariance map for the Gaussian target."""
    s = _vec(spectrum)
    return DiscreteMap(1.0 - h * a * s, np.full(s.size, h), -h * s,
                       np.full(s.size, 1.0 - h * gamma),
                       math.sqrt(2.0 * a * h), math.sqrt(2.0 * gamma * h))


def discrete_eigenvalues(a, gamma, h, s):
    """Eigenvalues h((as + gamma) +/- sqrt((as - gamma)^2 - 4s)) / 2 of hG, as (plus, minus)."""
    disc = (a * s - gamma) ** 2 - 4.0 * s
    root = math.sqrt(disc) if disc >= 0 else 1j * math.sqrt(-disc)
    return complex(0.5 * h * (a * s + gamma + root)), complex(0.5 * h * (a * s + gamma - root))


def _max_modulus(a, gamma, h, spectrum):
    return max(max(abs(1.0 - lam) for lam in discrete_eigenvalues(a, gamma, h, float(s)))
               for s in _vec(spectrum))


def spectral_bound_check(a, gamma, h, s1, sd, spectrum=None):
    """Check the contraction bound 1 - (h/2)(a sd + sqrt(sd)) of the discrete map.

    The bound is claimed when a >= 2/(sqrt(s1) - sqrt(sd)) and
    0 < h <= 1/(a s1 + gamma); it is then verified on every mode of
    ``spectrum`` (default {s1, sd}).
    """
    modes = [s1, sd] if spectrum is None else list(_vec(spectrum))
    bound = 1.0 - 0.5 * h * (a * sd + math.sqrt(sd))
    modulus = _max_modulus(a, gamma, h, modes)
    gap = math.sqrt(s1) - math.sqrt(sd)
    rel = 1e-12
    if gap <= 0 or a < 2.0 / gap * (1.0 - rel):
        return SpectralBound(False, bound, modulus, "a below 2/(sqrt(s1) - sqrt(sd))")
    if not 0 < h <= (1.0 + rel) / (a * s1 + gamma):
        return SpectralBound(False, bound, modulus, "h above 1/(a s1 + gamma)")
    if modulus > bound * (1.0 + rel):
        return SpectralBound(False, bound, modulus, "mode modulus exceeds bound")
    return SpectralBound(True, bound, modulus)


def ul_step_limit(s1, sd):
    """Largest h for which every underdamped (a = 0, gamma = 2 sqrt(sd)) mode is non-expansive."""
    if not s1 >= sd > 0:
        raise ValueError("need s1 >= sd > 0")
    return 2.0 * math.sqrt(sd) / s1


def fixed_point_covariance(a, gamma, h, spectrum):
    """Closed-form stationary covariance of the discrete map, per mode."""
    s = _vec(spectrum)
    dmap = discrete_map(a, gamma, h, s)
    rho = dmap.spectral_radius()
    if np.any(rho >= 1.0):
        i = int(np.argmax(rho))
        raise NoFixedPointError(f"map is not a contraction on mode {i} (radius {rho[i]:.6g})")
    b = h * s - gamma + a * s * (h * gamma - 1.0)
    c = 4.0 + h * (h * s - 2.0 * gamma + a * s * (h * gamma - 2.0))
    den = b * c
    if np.any(den == 0):
        raise NoFixedPointError("fixed-point denominator vanishes")
    y11 = (1.0 - h * s * (4.0 + (h + a * (h * gamma - 2.0)) * b) / den) / s
    y12 = 2.0 * h * (gamma - a * s) / den
    y22 = (-4.0 * gamma - 2.0 * a * s * (2.0 + h * (h * s - 3.0 * gamma + a * s * (h * gamma - 1.0)))) / den
    return FixedPointCovariance(y11, y12, y22)


def _apply(dmap, y11, y12, y22):
    a11, a12, a21, a22 = dmap.a11, dmap.a12, dmap.a21, dmap.a22
    n11 = a11 * a11 * y11 + 2.0 * a11 * a12 * y12 + a12 * a12 * y22
    n12 = a11 * a21 * y11 + (a11 * a22 + a12 * a21) * y12 + a12 * a22 * y22
    n22 = a21 * a21 * y11 + 2.0 * a21 * a22 * y12 + a22 * a22 * y22
    return n11, n12, n22


def iterate_covariance(y0, dmap, k, homogeneous=False, history=False):
    """Apply Y <- A Y A^T + L L^T (or Y <- A Y A^T if ``homogeneous``) k times.

    ``y0`` is a FixedPointCovariance-like triple (y11, y12, y22) or a
    BlockCovariance. With ``history`` the (k+1, 3, d) array of all iterates is
    returned as well.
    """
    if isinstance(y0, BlockCovariance):
        y11, y12, y22 = y0.sig11, y0.sig12, y0.sig22
    else:
        y11, y12, y22 = (np.broadcast_to(_vec(v), (dmap.dim,)).copy()
                         for v in (y0.y11, y0.y12, y0.y22))
    q11 = 0.0 if homogeneous else dmap.l1 ** 2
    q22 = 0.0 if homogeneous else dmap.l2 ** 2
    hist = np.empty((k + 1, 3, dmap.dim)) if history else None
    if history:
        hist[0] = (y11, y12, y22)
    for n in range(1, k + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            y11, y12, y22 = _apply(dmap, y11, y12, y22)
        y11 = y11 + q11
        y22 = y22 + q22
        if not (np.all(np.isfinite(y11)) and np.all(np.isfinite(y22))
                and np.all(np.isfinite(y12))):
            raise DivergenceError(n, message=f"covariance recursion overflowed at step {n}")
        if history:
            hist[n] = (y11, y12, y22)
    out = FixedPointCovariance(y11, y12, y22)
    return (out, hist) if history else out


def mixing_rates(a, gamma, h, s1, sd):
    """Rate constants of the continuous and discrete covariance decay.

    ``cont_rate = a sd + 2 sqrt(sd)`` and ``disc_rate = (h/2)(a sd + sqrt(sd))``;
    the bound forms are symbolic strings without prefactors.
    """
    cont = a * sd + 2.0 * math.sqrt(sd)
    disc = 0.5 * h * (a * sd + math.sqrt(sd))
    return MixingRates(cont, disc,
                       "O(t^2 exp(-(a*s_d + 2*sqrt(s_d)) * t))",
                       "O(h^2 k^2 (1 - (h/2)(a*s_d + sqrt(s_d)))^(2k-2))")
