# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Philox normals, fused Euler-Maruyama update, RK4.

Mirrors ``gaul._pycore`` function by function. Each particle owns its own
counter stream, so results do not depend on how ``prange`` splits the work.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, log, fabs
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

BACKEND = "compiled"

cdef uint32_t PHILOX_M0 = 0xD2511F53u
cdef uint32_t PHILOX_M1 = 0xCD9E8D57u
cdef uint32_t PHILOX_W0 = 0x9E3779B9u
cdef uint32_t PHILOX_W1 = 0xBB67AE85u


cdef inline void _philox(uint32_t* ctr, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3]
    cdef int r
    for r in range(10):
        p0 = <uint64_t>c0 * PHILOX_M0
        p1 = <uint64_t>c2 * PHILOX_M1
        c0, c1, c2, c3 = (<uint32_t>(p1 >> 32)) ^ c1 ^ k0, <uint32_t>p1, \
                         (<uint32_t>(p0 >> 32)) ^ c3 ^ k1, <uint32_t>p0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    ctr[0] = c0
    ctr[1] = c1
    ctr[2] = c2
    ctr[3] = c3


cdef inline double _uniform(uint32_t lo, uint32_t hi) noexcept nogil:
    cdef uint64_t x = ((<uint64_t>hi) << 32) | (<uint64_t>lo)
    return (<double>(x >> 12) + 0.5) * 2.220446049250313e-16


cdef inline double _ppf(double u) noexcept nogil:
    cdef double q = u - 0.5
    cdef double r, num, den, val
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        num = ((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                   + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                 + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
               + 1.3314166789178437745e2) * r + 3.3871328727963666080e0
        den = ((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                   + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                 + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
               + 4.2313330701600911252e1) * r + 1.0
        return q * num / den
    if q < 0.0:
        r = u
    else:
        r = 1.0 - u
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        num = ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                   + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                 + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
               + 4.63033784615654529590e0) * r + 1.42343711074968357734e0
        den = ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                   + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                 + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
               + 2.05319162663775882187e0) * r + 1.0
    else:
        r = r - 5.0
        num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                   + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                 + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
               + 5.46378491116411436990e0) * r + 6.65790464350110377720e0
        den = ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                   + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                 + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
               + 5.99832206555887937690e-1) * r + 1.0
    val = num / den
    if q < 0.0:
        return -val
    return val


cdef inline void _fill(double* out, Py_ssize_t n, uint32_t particle, uint32_t step,
                       uint32_t stream, uint32_t k0, uint32_t k1, int gauss) noexcept nogil:
    cdef uint32_t ctr[4]
    cdef Py_ssize_t b, j
    cdef double u0, u1
    for b in range((n + 1) // 2):
        ctr[0] = <uint32_t>b
        ctr[1] = particle
        ctr[2] = step
        ctr[3] = stream
        _philox(ctr, k0, k1)
        u0 = _uniform(ctr[0], ctr[1])
        u1 = _uniform(ctr[2], ctr[3])
        if gauss:
            u0 = _ppf(u0)
            u1 = _ppf(u1)
        j = 2 * b
        out[j] = u0
        if j + 1 < n:
            out[j + 1] = u1


def split_seed(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Single Philox4x32-10 block (scalar), for known-answer checks."""
    cdef uint32_t ctr[4]
    ctr[0] = <uint32_t>(int(c0) & 0xFFFFFFFF)
    ctr[1] = <uint32_t>(int(c1) & 0xFFFFFFFF)
    ctr[2] = <uint32_t>(int(c2) & 0xFFFFFFFF)
    ctr[3] = <uint32_t>(int(c3) & 0xFFFFFFFF)
    _philox(ctr, <uint32_t>(int(k0) & 0xFFFFFFFF), <uint32_t>(int(k1) & 0xFFFFFFFF))
    return ctr[0], ctr[1], ctr[2], ctr[3]


def norm_ppf(u):
    cdef cnp.ndarray[double, ndim=1] flat = np.ascontiguousarray(u, dtype=np.float64).ravel().copy()
    cdef double[::1] v = flat
    cdef Py_ssize_t i
    with nogil:
        for i in range(v.shape[0]):
            v[i] = _ppf(v[i])
    return flat.reshape(np.shape(u))


def _draw(seed, stream, step, Py_ssize_t m, Py_ssize_t n, int threads, int gauss):
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    k0, k1 = split_seed(seed)
    cdef uint32_t ck0 = k0, ck1 = k1
    cdef uint32_t cstep = <uint32_t>(int(step) & 0xFFFFFFFF)
    cdef uint32_t cstream = <uint32_t>(int(stream) & 0xFFFFFFFF)
    cdef Py_ssize_t i
    if m == 0 or n == 0:
        return out
    for i in prange(m, nogil=True, num_threads=threads, schedule="static"):
        _fill(&o[i, 0], n, <uint32_t>i, cstep, cstream, ck0, ck1, gauss)
    return out


def uniforms(seed, stream, step, Py_ssize_t m, Py_ssize_t n, int threads=1):
    return _draw(seed, stream, step, m, n, threads, 0)


def normals(seed, stream, step, Py_ssize_t m, Py_ssize_t n, int threads=1):
    return _draw(seed, stream, step, m, n, threads, 1)


def em_update(double[:, ::1] state, const double[:, ::1] grad, double[:, ::1] z,
              const double[::1] ax, const double[::1] cx, double gamma, double h,
              const double[::1] f11, const double[::1] f12,
              const double[::1] f21, const double[::1] f22,
              seed, step, int method, bint noise, int threads=1):
    cdef Py_ssize_t m = state.shape[0]
    cdef Py_ssize_t d = state.shape[1] // 2
    cdef Py_ssize_t i, j, nz
    cdef double xo, po, xn, pn, z1, z2, g
    cdef long bad = 0
    k0, k1 = split_seed(seed)
    cdef uint32_t ck0 = k0, ck1 = k1
    cdef uint32_t cstep = <uint32_t>(int(step) & 0xFFFFFFFF)
    nz = d if method == 0 else 2 * d
    for i in prange(m, nogil=True, num_threads=threads, schedule="static"):
        if noise:
            _fill(&z[i, 0], nz, <uint32_t>i, cstep, 0, ck0, ck1, 1)
        else:
            for j in range(nz):
                z[i, j] = 0.0
        if method == 0:
            for j in range(d):
                xn = state[i, j] - grad[i, j] * h + f11[j] * z[i, j]
                state[i, j] = xn
                if not (fabs(xn) <= 1e12):
                    bad += 1
        else:
            for j in range(d):
                xo = state[i, j]
                po = state[i, d + j]
                g = grad[i, j]
                z1 = z[i, j]
                z2 = z[i, d + j]
                xn = xo - ax[j] * g * h + cx[j] * po * h + (f11[j] * z1 + f12[j] * z2)
                pn = po - g * h - gamma * po * h + (f21[j] * z1 + f22[j] * z2)
                state[i, j] = xn
                state[i, d + j] = pn
                if not (fabs(xn) <= 1e12):
                    bad += 1
                if not (fabs(pn) <= 1e12):
                    bad += 1
    return int(bad)


def rk4_covariance(s11, s22, s12, ac, c, gamma, s, double dt, Py_ssize_t nsteps,
                   Py_ssize_t record_every):
    cdef double[::1] y11 = np.array(s11, dtype=np.float64).ravel()
    cdef double[::1] y22 = np.array(s22, dtype=np.float64).ravel()
    cdef double[::1] y12 = np.array(s12, dtype=np.float64).ravel()
    cdef Py_ssize_t d = y11.shape[0]
    cdef double[::1] vac = np.broadcast_to(np.asarray(ac, dtype=np.float64), (d,)).copy()
    cdef double[::1] vc = np.broadcast_to(np.asarray(c, dtype=np.float64), (d,)).copy()
    cdef double[::1] vg = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (d,)).copy()
    cdef double[::1] vs = np.broadcast_to(np.asarray(s, dtype=np.float64), (d,)).copy()
    cdef Py_ssize_t nrec = nsteps // record_every + 1
    r11 = np.empty((nrec, d))
    r22 = np.empty((nrec, d))
    r12 = np.empty((nrec, d))
    cdef double[:, ::1] o11 = r11
    cdef double[:, ::1] o22 = r22
    cdef double[:, ::1] o12 = r12
    cdef Py_ssize_t i, k, bad = -1, last = 0
    cdef double a11, a22, a12, A, C, G, S, half = 0.5 * dt
    cdef double k11, k22, k12, l11, l22, l12, m11, m22, m12, n11, n22, n12
    cdef double t11, t22, t12, tr, rad
    for i in range(d):
        o11[0, i] = y11[i]
        o22[0, i] = y22[i]
        o12[0, i] = y12[i]
    with nogil:
        for k in range(1, nsteps + 1):
            for i in range(d):
                A = vac[i]
                C = vc[i]
                G = vg[i]
                S = vs[i]
                a11 = y11[i]
                a22 = y22[i]
                a12 = y12[i]
                k11 = -2.0 * (A * S * a11 - A) + 2.0 * C * a12
                k22 = -2.0 * S * a12 - 2.0 * G * (a22 - 1.0)
                k12 = -A * S * a12 - (C - C * a22) + (1.0 - a11 * S) - G * a12
                t11 = a11 + half * k11
                t22 = a22 + half * k22
                t12 = a12 + half * k12
                l11 = -2.0 * (A * S * t11 - A) + 2.0 * C * t12
                l22 = -2.0 * S * t12 - 2.0 * G * (t22 - 1.0)
                l12 = -A * S * t12 - (C - C * t22) + (1.0 - t11 * S) - G * t12
                t11 = a11 + half * l11
                t22 = a22 + half * l22
                t12 = a12 + half * l12
                m11 = -2.0 * (A * S * t11 - A) + 2.0 * C * t12
                m22 = -2.0 * S * t12 - 2.0 * G * (t22 - 1.0)
                m12 = -A * S * t12 - (C - C * t22) + (1.0 - t11 * S) - G * t12
                t11 = a11 + dt * m11
                t22 = a22 + dt * m22
                t12 = a12 + dt * m12
                n11 = -2.0 * (A * S * t11 - A) + 2.0 * C * t12
                n22 = -2.0 * S * t12 - 2.0 * G * (t22 - 1.0)
                n12 = -A * S * t12 - (C - C * t22) + (1.0 - t11 * S) - G * t12
                a11 = a11 + dt / 6.0 * (k11 + 2.0 * l11 + 2.0 * m11 + n11)
                a22 = a22 + dt / 6.0 * (k22 + 2.0 * l22 + 2.0 * m22 + n22)
                a12 = a12 + dt / 6.0 * (k12 + 2.0 * l12 + 2.0 * m12 + n12)
                y11[i] = a11
                y22[i] = a22
                y12[i] = a12
                tr = 0.5 * (a11 + a22)
                rad = sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12)
                if tr - rad < -1e-8:
                    bad = k
            if bad >= 0:
                break
            if k % record_every == 0:
                last = k // record_every
                for i in range(d):
                    o11[last, i] = y11[i]
                    o22[last, i] = y22[i]
                    o12[last, i] = y12[i]
    if bad >= 0:
        n = (bad - 1) // record_every + 1
        return r11[:n], r22[:n], r12[:n], int(bad)
    return r11, r22, r12, -1
