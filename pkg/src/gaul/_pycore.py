"""Vectorised NumPy implementation of the hot kernels.

This is the fallback used when the compiled ``gaul._core`` extension is not
available (or ``GAUL_BACKEND=python`` is set). Every function here has a twin
in ``_core.pyx`` with the same signature and the same arithmetic order, so the
two backends agree to rounding in the transcendental functions.

Random numbers come from Philox4x32-10 keyed by the 64-bit seed, with the
counter ``(block, particle, step, stream)``. One block yields four 32-bit
words, i.e. two 52-bit uniforms, i.e. two normals via the inverse CDF.
"""

import numpy as np

BACKEND = "python"

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# AS241 (PPND16) coefficients.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def split_seed(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 on broadcastable uint32 counter words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(int(k0) & 0xFFFFFFFF)
    k1 = np.uint64(int(k1) & 0xFFFFFFFF)
    for _ in range(10):
        p0 = c0 * _M0
        p1 = c2 * _M1
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + np.uint64(_W0)) & _MASK32
        k1 = (k1 + np.uint64(_W1)) & _MASK32
    return tuple(c.astype(np.uint32) for c in (c0, c1, c2, c3))


def words_to_uniform(lo, hi):
    """Map two 32-bit words to a uniform on the open interval (0, 1).

    Uses the top 52 bits so that ``1 - u`` is exact.
    """
    x = (np.asarray(hi, dtype=np.uint64) << _SHIFT32) | np.asarray(lo, dtype=np.uint64)
    k = (x >> np.uint64(12)).astype(np.float64)
    return (k + 0.5) * 2.0**-52


def _poly(coef, r):
    acc = np.full_like(r, coef[7])
    for c in coef[6::-1]:
        acc = acc * r + c
    return acc


def norm_ppf(u):
    """Inverse standard normal CDF (Wichura AS241), vectorised."""
    u = np.asarray(u, dtype=np.float64)
    q = u - 0.5
    out = np.empty_like(u)
    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0.0, u[tail], 1.0 - u[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def uniforms(seed, stream, step, m, n, threads=1):
    """(m, n) uniforms; entry (i, j) depends only on (seed, stream, step, i, j)."""
    k0, k1 = split_seed(seed)
    nblocks = (n + 1) // 2
    blk = np.arange(nblocks, dtype=np.uint64)[None, :]
    part = np.arange(m, dtype=np.uint64)[:, None]
    w0, w1, w2, w3 = philox4x32(blk, part, np.uint64(step), np.uint64(stream), k0, k1)
    out = np.empty((m, 2 * nblocks), dtype=np.float64)
    out[:, 0::2] = words_to_uniform(w0, w1)
    out[:, 1::2] = words_to_uniform(w2, w3)
    return out[:, :n]


def normals(seed, stream, step, m, n, threads=1):
    """(m, n) standard normals, same indexing contract as :func:`uniforms`."""
    return norm_ppf(uniforms(seed, stream, step, m, n))


def em_update(state, grad, z, ax, cx, gamma, h, f11, f12, f21, f22,
              seed, step, method, noise, threads=1):
    """One Euler-Maruyama step applied in place to ``state`` (M x 2d).

    ``method`` is 0 for the x-only overdamped update (noise scale ``f11``),
    1 for the phase-space update. ``z`` is scratch of shape (M, 2d) and
    receives the normals that were used. Returns the number of entries that
    are non-finite or larger than 1e12 in magnitude after the update.
    """
    m, two_d = state.shape
    d = two_d // 2
    x = state[:, :d]
    if method == 0:
        if noise:
            z[:, :d] = normals(seed, 0, step, m, d)
            x[...] = x - grad * h + f11 * z[:, :d]
        else:
            z[:, :d] = 0.0
            x[...] = x - grad * h
        bad = x
    else:
        p = state[:, d:]
        if noise:
            z[...] = normals(seed, 0, step, m, two_d)
        else:
            z[...] = 0.0
        z1 = z[:, :d]
        z2 = z[:, d:]
        xn = x - ax * grad * h + cx * p * h + (f11 * z1 + f12 * z2)
        pn = p - grad * h - gamma * p * h + (f21 * z1 + f22 * z2)
        x[...] = xn
        p[...] = pn
        bad = state
    return int(np.count_nonzero(~(np.abs(bad) <= 1e12)))


def rk4_covariance(s11, s22, s12, ac, c, gamma, s, dt, nsteps, record_every):
    """Classical RK4 on the diagonal block covariance ODE.

    All per-mode inputs are length-d arrays. Returns ``(r11, r22, r12, bad)``
    where the records hold the state at steps 0, record_every, ... and
    ``bad`` is the first step index at which a mode left the PSD cone by
    more than 1e-8 (or -1).
    """
    y11 = np.array(s11, dtype=np.float64)
    y22 = np.array(s22, dtype=np.float64)
    y12 = np.array(s12, dtype=np.float64)
    ac = np.asarray(ac, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)

    def rhs(a11, a22, a12):
        d11 = -2.0 * (ac * s * a11 - ac) + 2.0 * c * a12
        d22 = -2.0 * s * a12 - 2.0 * gamma * (a22 - 1.0)
        d12 = -ac * s * a12 - (c - c * a22) + (1.0 - a11 * s) - gamma * a12
        return d11, d22, d12

    nrec = nsteps // record_every + 1
    r11 = np.empty((nrec, y11.size))
    r22 = np.empty_like(r11)
    r12 = np.empty_like(r11)
    r11[0], r22[0], r12[0] = y11, y22, y12
    bad = -1
    half = 0.5 * dt
    for k in range(1, nsteps + 1):
        k1 = rhs(y11, y22, y12)
        k2 = rhs(y11 + half * k1[0], y22 + half * k1[1], y12 + half * k1[2])
        k3 = rhs(y11 + half * k2[0], y22 + half * k2[1], y12 + half * k2[2])
        k4 = rhs(y11 + dt * k3[0], y22 + dt * k3[1], y12 + dt * k3[2])
        y11 = y11 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y22 = y22 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        y12 = y12 + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        tr = 0.5 * (y11 + y22)
        rad = np.sqrt(0.25 * (y11 - y22) ** 2 + y12 * y12)
        if bad < 0 and np.any(tr - rad < -1e-8):
            bad = k
            break
        if k % record_every == 0:
            j = k // record_every
            r11[j], r22[j], r12[j] = y11, y22, y12
    if bad >= 0:
        n = (bad - 1) // record_every + 1
        return r11[:n], r22[:n], r12[:n], bad
    return r11, r22, r12, bad
