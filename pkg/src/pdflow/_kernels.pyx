# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DOPRI5 / RK4 loops for affine time-varying right-hand sides.

Mirrors the pure-Python stepper in pdflow.integrator step for step: same
tableau, same PI controller constants, same dense-output interpolant, same
error norm.  The two backends agree to integration tolerance (not bitwise;
summation orders differ).
"""

import numpy as np

from libc.math cimport ceil, fabs, isfinite, pow, sqrt


cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0

cdef double PI_BETA = 0.04
cdef double PI_EXPO = 0.2 - 0.75 * PI_BETA
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 5.0
cdef double ERR_TINY = 1e-30


cdef inline void _field(double t, double[::1] z, double[::1] wc, double[::1] wr,
                        double[:, :, ::1] M, double[:, ::1] V, double[::1] dz) noexcept:
    cdef Py_ssize_t K = wc.shape[0]
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double w, s
    for i in range(n):
        dz[i] = 0.0
    for k in range(K):
        w = wc[k] * pow(t, wr[k])
        for i in range(n):
            s = V[k, i]
            for j in range(n):
                s += M[k, i, j] * z[j]
            dz[i] += w * s


cdef inline bint _all_finite(double[::1] v) noexcept:
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        if not isfinite(v[i]):
            return 0
    return 1


def dopri5_affine(double[::1] wc, double[::1] wr, double[:, :, ::1] M, double[:, ::1] V,
                  double t0, double T, double[::1] z0, double rtol, double atol,
                  double h_init, double h_max, long max_steps, double safety,
                  double[::1] ts):
    """Returns (samples, n_accepted, n_rejected, n_rhs_evals, h_final, status, bad_t).

    status: 0 ok, 1 budget exhausted, 2 step-size underflow, 3 poisoned state.
    """
    cdef Py_ssize_t n = z0.shape[0]
    cdef Py_ssize_t S = ts.shape[0]
    out_arr = np.empty((S, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    work = np.empty((10, n), dtype=np.float64)
    cdef double[::1] y = work[0]
    cdef double[::1] ynew = work[1]
    cdef double[::1] ytmp = work[2]
    cdef double[::1] k1 = work[3]
    cdef double[::1] k2 = work[4]
    cdef double[::1] k3 = work[5]
    cdef double[::1] k4 = work[6]
    cdef double[::1] k5 = work[7]
    cdef double[::1] k6 = work[8]
    cdef double[::1] k7 = work[9]

    cdef double t = t0
    cdef double h = h_init
    if h > h_max:
        h = h_max
    if h > T - t0:
        h = T - t0
    cdef double facold = 1e-4
    cdef bint last_rejected = 0
    cdef long naccept = 0
    cdef long nreject = 0
    cdef long nfev = 0
    cdef int status = 0
    cdef Py_ssize_t i_s = 1
    cdef Py_ssize_t i
    cdef bint clamped
    cdef double t_new, err, sc, e, err_c, factor, theta
    cdef double ydiff_i, bspl_i, r4_i, r5_i
    cdef double tmp

    for i in range(n):
        y[i] = z0[i]
        out[0, i] = z0[i]

    _field(t, y, wc, wr, M, V, k1)
    nfev = 1
    if not _all_finite(k1):
        return out_arr, naccept, nreject, nfev, h, 3, t

    while t < T:
        if naccept + nreject >= max_steps:
            status = 1
            break
        tmp = 1e-14 * fabs(t)
        if tmp < 1e-300:
            tmp = 1e-300
        if h < tmp:
            status = 2
            break
        clamped = 0
        if h >= T - t:
            h = T - t
            clamped = 1

        for i in range(n):
            ytmp[i] = y[i] + h * (A21 * k1[i])
        _field(t + C2 * h, ytmp, wc, wr, M, V, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        _field(t + C3 * h, ytmp, wc, wr, M, V, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _field(t + C4 * h, ytmp, wc, wr, M, V, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _field(t + C5 * h, ytmp, wc, wr, M, V, k5)
        for i in range(n):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        _field(t + h, ytmp, wc, wr, M, V, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        _field(t + h, ynew, wc, wr, M, V, k7)
        nfev += 6

        err = 0.0
        for i in range(n):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ynew[i]) else fabs(ynew[i]))
            e = e / sc
            err += e * e
        err = sqrt(err / n)

        if not isfinite(err):
            if _all_finite(y) and _all_finite(k1):
                err = 1e10
            else:
                status = 3
                break

        if err <= 1.0:
            t_new = T if clamped else t + h
            if i_s < S and ts[i_s] <= t_new:
                while i_s < S and ts[i_s] <= t_new:
                    theta = (ts[i_s] - t) / h
                    if theta >= 1.0 - 1e-12:
                        for i in range(n):
                            out[i_s, i] = ynew[i]
                    else:
                        for i in range(n):
                            ydiff_i = ynew[i] - y[i]
                            bspl_i = h * k1[i] - ydiff_i
                            r4_i = ydiff_i - h * k7[i] - bspl_i
                            r5_i = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i]
                                        + D6 * k6[i] + D7 * k7[i])
                            out[i_s, i] = y[i] + theta * (
                                ydiff_i + (1.0 - theta) * (bspl_i + theta * (r4_i + (1.0 - theta) * r5_i))
                            )
                    i_s += 1
            err_c = err if err > ERR_TINY else ERR_TINY
            factor = safety * pow(facold, PI_BETA) / pow(err_c, PI_EXPO)
            if factor > MAX_FACTOR:
                factor = MAX_FACTOR
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            if last_rejected and factor > 1.0:
                factor = 1.0
            facold = err if err > 1e-4 else 1e-4
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            naccept += 1
            last_rejected = 0
            h *= factor
        else:
            err_c = err if err > ERR_TINY else ERR_TINY
            factor = safety / pow(err_c, PI_EXPO)
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h *= factor
            nreject += 1
            last_rejected = 1

    return out_arr, naccept, nreject, nfev, h, status, t


def rk4_affine(double[::1] wc, double[::1] wr, double[:, :, ::1] M, double[:, ::1] V,
               double[::1] z0, double h, double[::1] ts):
    """Fixed-step classical RK4 hitting every sample instant exactly."""
    cdef Py_ssize_t n = z0.shape[0]
    cdef Py_ssize_t S = ts.shape[0]
    out_arr = np.empty((S, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    work = np.empty((6, n), dtype=np.float64)
    cdef double[::1] y = work[0]
    cdef double[::1] ytmp = work[1]
    cdef double[::1] k1 = work[2]
    cdef double[::1] k2 = work[3]
    cdef double[::1] k3 = work[4]
    cdef double[::1] k4 = work[5]

    cdef Py_ssize_t i, s, sub
    cdef long nsub, nsteps = 0
    cdef double ta, tb, hs, t

    for i in range(n):
        y[i] = z0[i]
        out[0, i] = z0[i]

    for s in range(1, S):
        ta = ts[s - 1]
        tb = ts[s]
        nsub = <long> ceil((tb - ta) / h - 1e-12)
        if nsub < 1:
            nsub = 1
        hs = (tb - ta) / nsub
        t = ta
        for sub in range(nsub):
            _field(t, y, wc, wr, M, V, k1)
            for i in range(n):
                ytmp[i] = y[i] + 0.5 * hs * k1[i]
            _field(t + 0.5 * hs, ytmp, wc, wr, M, V, k2)
            for i in range(n):
                ytmp[i] = y[i] + 0.5 * hs * k2[i]
            _field(t + 0.5 * hs, ytmp, wc, wr, M, V, k3)
            for i in range(n):
                ytmp[i] = y[i] + hs * k3[i]
            _field(t + hs, ytmp, wc, wr, M, V, k4)
            for i in range(n):
                y[i] = y[i] + (hs / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            t += hs
        if not _all_finite(y):
            return out_arr, nsteps, 3, t
        for i in range(n):
            out[s, i] = y[i]
        nsteps += nsub

    return out_arr, nsteps, 0, ts[S - 1]
