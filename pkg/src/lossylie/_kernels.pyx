# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DOPRI5 driver for ``y' = (sum_p theta_p(t) G_p) y``.

Same tableau, error norm and step control as ``_dopri.solve``; the
schedules theta_p are piecewise linear and evaluated in C.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, isfinite
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport zgemv

cnp.import_array()

ctypedef double complex cplx

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double D1 = -12715105075.0 / 11282082432
cdef double D3 = 87487479700.0 / 32700410799
cdef double D4 = -10690763975.0 / 1880347072
cdef double D5 = 701980252875.0 / 199316789632
cdef double D6 = -1453857185.0 / 822651844
cdef double D7 = 69997945.0 / 29380423
cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 10.0

cdef enum:
    STATUS_OK = 0
    STATUS_MAX_STEPS = 1
    STATUS_NONFINITE = 2
    STATUS_UNDERFLOW = 3


cdef struct System:
    int n
    int n_par
    bint constant
    cplx *gens       # (n_par * n, n) row major, or the combined (n, n) when constant
    double *knot_t
    double *knot_v
    long *knot_off
    double *theta
    cplx *work       # n_par * n


cdef double _interp(System *s, int p, double t) noexcept nogil:
    cdef long lo = s.knot_off[p], hi = s.knot_off[p + 1], i
    if hi - lo == 1 or t <= s.knot_t[lo]:
        return s.knot_v[lo]
    if t >= s.knot_t[hi - 1]:
        return s.knot_v[hi - 1]
    i = lo
    while s.knot_t[i + 1] < t:
        i += 1
    return s.knot_v[i] + (s.knot_v[i + 1] - s.knot_v[i]) * (t - s.knot_t[i]) / (s.knot_t[i + 1] - s.knot_t[i])


cdef void _rhs(System *s, double t, cplx *y, cplx *out) noexcept nogil:
    cdef char trans = b'T'
    cdef int n = s.n, m_rows, inc = 1, p, i
    cdef cplx one = 1.0, zero = 0.0, acc
    if s.constant:
        zgemv(&trans, &n, &n, &one, s.gens, &n, y, &inc, &zero, out, &inc)
        return
    m_rows = s.n_par * n
    zgemv(&trans, &n, &m_rows, &one, s.gens, &n, y, &inc, &zero, s.work, &inc)
    for p in range(s.n_par):
        s.theta[p] = _interp(s, p, t)
    for i in range(n):
        acc = 0.0
        for p in range(s.n_par):
            acc = acc + s.theta[p] * s.work[p * n + i]
        out[i] = acc


cdef inline double _cabs(cplx z) noexcept nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef double _rms_scaled(int n, cplx *x, cplx *ya, cplx *yb, double rtol, double atol, double scale) noexcept nogil:
    cdef double acc = 0.0, sk, a, b, e
    cdef int i
    for i in range(n):
        a = _cabs(ya[i])
        b = _cabs(yb[i]) if yb != NULL else a
        sk = atol + rtol * (a if a > b else b)
        e = scale * _cabs(x[i]) / sk
        acc += e * e
    return sqrt(acc / n)


def integrate_affine(
    const cplx[:, :, ::1] gens,
    const double[::1] knot_t,
    const double[::1] knot_v,
    const long[::1] knot_off,
    const cplx[::1] y0,
    const double[::1] t_eval,
    double rtol,
    double atol,
    long max_steps,
    double h_init,
):
    """Return ``(out, n_steps, n_accepted, n_rejected, status, t_reached)``."""
    cdef int n_par = gens.shape[0], n = gens.shape[1]
    cdef int n_out = t_eval.shape[0]
    cdef System s
    cdef bint constant = True
    cdef int p, i, j
    cdef long q

    for p in range(n_par):
        for q in range(knot_off[p] + 1, knot_off[p + 1]):
            if knot_v[q] != knot_v[knot_off[p]]:
                constant = False

    out_arr = np.empty((n_out, n), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    gen_buf = None
    cdef cplx[:, ::1] combined
    if constant:
        combined = np.zeros((n, n), dtype=np.complex128)
        for p in range(n_par):
            for i in range(n):
                for j in range(n):
                    combined[i, j] = combined[i, j] + knot_v[knot_off[p]] * gens[p, i, j]
        gen_buf = combined
        s.gens = &combined[0, 0]
    else:
        gen_buf = np.array(gens, dtype=np.complex128, copy=True).reshape(n_par * n, n)
        combined = gen_buf
        s.gens = &combined[0, 0]
    s.n = n
    s.n_par = n_par
    s.constant = constant
    s.knot_t = <double *> &knot_t[0]
    s.knot_v = <double *> &knot_v[0]
    s.knot_off = <long *> &knot_off[0]

    cdef cplx *buf = <cplx *> malloc(sizeof(cplx) * (n * 14 + n_par * n))
    cdef double *theta = <double *> malloc(sizeof(double) * (n_par if n_par > 0 else 1))
    if buf == NULL or theta == NULL:
        free(buf)
        free(theta)
        raise MemoryError()
    s.theta = theta
    s.work = buf + 14 * n
    cdef cplx *y = buf
    cdef cplx *k1 = buf + n
    cdef cplx *k2 = buf + 2 * n
    cdef cplx *k3 = buf + 3 * n
    cdef cplx *k4 = buf + 4 * n
    cdef cplx *k5 = buf + 5 * n
    cdef cplx *k6 = buf + 6 * n
    cdef cplx *k7 = buf + 7 * n
    cdef cplx *ytmp = buf + 8 * n
    cdef cplx *ynew = buf + 9 * n
    cdef cplx *r2 = buf + 10 * n
    cdef cplx *r3 = buf + 11 * n
    cdef cplx *r4 = buf + 12 * n
    cdef cplx *r5 = buf + 13 * n

    cdef double t0 = t_eval[0], t_end = t_eval[n_out - 1], t, h, t_new, err, fac
    cdef double d0, d1, d2, big, h0, theta_s, th1, te
    cdef long n_steps = 0, n_acc = 0, n_rej = 0
    cdef int status = STATUS_OK, next_out = 1
    cdef bint last_rejected = False
    cdef cplx ydiff, bspl

    try:
        for i in range(n):
            y[i] = y0[i]
            out[0, i] = y0[i]
        t = t0
        if t_end == t0:
            for j in range(1, n_out):
                for i in range(n):
                    out[j, i] = y0[i]
            return out_arr, 0, 0, 0, status, t
        with nogil:
            _rhs(&s, t, y, k1)
            if h_init > 0:
                h = h_init
            else:
                d0 = _rms_scaled(n, y, y, NULL, rtol, atol, 1.0)
                d1 = _rms_scaled(n, k1, y, NULL, rtol, atol, 1.0)
                if d0 > 1e-5 and d1 > 1e-5:
                    h0 = 0.01 * d0 / d1
                else:
                    h0 = 1e-6
                if h0 > t_end - t:
                    h0 = t_end - t
                for i in range(n):
                    ytmp[i] = y[i] + h0 * k1[i]
                _rhs(&s, t + h0, ytmp, k2)
                for i in range(n):
                    k3[i] = k2[i] - k1[i]
                d2 = _rms_scaled(n, k3, y, NULL, rtol, atol, 1.0) / h0
                big = d1 if d1 > d2 else d2
                if big > 1e-15:
                    h = pow(0.01 / big, 0.2)
                else:
                    h = h0 * 1e-3
                    if h < 1e-6:
                        h = 1e-6
                if h > 100 * h0:
                    h = 100 * h0
                if h > t_end - t:
                    h = t_end - t

            while next_out < n_out and t_eval[next_out] <= t0:
                for i in range(n):
                    out[next_out, i] = y[i]
                next_out += 1

            while t < t_end:
                if n_steps >= max_steps:
                    status = STATUS_MAX_STEPS
                    break
                n_steps += 1
                if t + 1.01 * h >= t_end:
                    h = t_end - t
                if h < 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                    status = STATUS_UNDERFLOW
                    break

                for i in range(n):
                    ytmp[i] = y[i] + h * A21 * k1[i]
                _rhs(&s, t + C2 * h, ytmp, k2)
                for i in range(n):
                    ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
                _rhs(&s, t + C3 * h, ytmp, k3)
                for i in range(n):
                    ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                _rhs(&s, t + C4 * h, ytmp, k4)
                for i in range(n):
                    ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                _rhs(&s, t + C5 * h, ytmp, k5)
                for i in range(n):
                    ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
                _rhs(&s, t + h, ytmp, k6)
                for i in range(n):
                    ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
                _rhs(&s, t + h, ynew, k7)
                for i in range(n):
                    ytmp[i] = E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]
                err = _rms_scaled(n, ytmp, y, ynew, rtol, atol, h)

                if not isfinite(err):
                    status = STATUS_NONFINITE
                    break
                for i in range(n):
                    if not (isfinite(ynew[i].real) and isfinite(ynew[i].imag)):
                        status = STATUS_NONFINITE
                        break
                if status != STATUS_OK:
                    break

                if err <= 1.0:
                    n_acc += 1
                    if h == t_end - t:
                        t_new = t_end
                    else:
                        t_new = t + h
                    if next_out < n_out and t_eval[next_out] <= t_new:
                        for i in range(n):
                            ydiff = ynew[i] - y[i]
                            bspl = h * k1[i] - ydiff
                            r2[i] = ydiff
                            r3[i] = bspl
                            r4[i] = ydiff - h * k7[i] - bspl
                            r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                        while next_out < n_out and t_eval[next_out] <= t_new:
                            te = t_eval[next_out]
                            if te == t_new:
                                for i in range(n):
                                    out[next_out, i] = ynew[i]
                            else:
                                theta_s = (te - t) / h
                                th1 = 1.0 - theta_s
                                for i in range(n):
                                    out[next_out, i] = y[i] + theta_s * (r2[i] + th1 * (r3[i] + theta_s * (r4[i] + th1 * r5[i])))
                            next_out += 1
                    if err > 0:
                        fac = SAFETY * pow(err, -0.2)
                    else:
                        fac = FAC_MAX
                    if fac > FAC_MAX:
                        fac = FAC_MAX
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                    if last_rejected and fac > 1.0:
                        fac = 1.0
                    last_rejected = False
                    t = t_new
                    for i in range(n):
                        y[i] = ynew[i]
                        k1[i] = k7[i]
                    h = h * fac
                else:
                    n_rej += 1
                    last_rejected = True
                    fac = SAFETY * pow(err, -0.2)
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                    h = h * fac
        return out_arr, n_steps, n_acc, n_rej, status, t
    finally:
        free(buf)
        free(theta)
