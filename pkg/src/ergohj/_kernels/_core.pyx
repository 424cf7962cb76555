# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled path-stepping kernel; mirrors _pykernels.em_chunk line for line."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, pow, sqrt

cnp.import_array()


cdef inline double _drift(double r, const double* P) nogil:
    cdef double delta = P[0], rho = P[1], a = P[2], R = P[4]
    cdef double p0 = P[7], p1 = P[8], p2 = P[9]
    cdef double r2
    if r >= R:
        return (rho + a / r) * pow(r, delta)
    r2 = r * r
    return r * (p0 + r2 * (p1 + r2 * p2))


cdef inline double _potential(double r, const double* P) nogil:
    cdef double eta = P[3], R = P[4], compact = P[5], Rp = P[6]
    cdef double c = P[10], a1 = P[11], a2 = P[12]
    cdef double s, t, step, outer
    if r >= R:
        outer = pow(r, -eta)
        if compact != 0.0:
            if r >= Rp:
                return 0.0
            t = (Rp - r) / (Rp - R)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            step = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
            return outer * step
        return outer
    s = r * r - R * R
    return exp(c + s * (a1 + a2 * s))


cdef inline double _control(
    double r, const double* ctrl_r, const double* ctrl_xi, Py_ssize_t n_ctrl,
    const double* P,
) nogil:
    cdef Py_ssize_t lo, hi, mid, j
    cdef double w
    if r > ctrl_r[n_ctrl - 1]:
        return -_drift(r, P)
    # largest j with ctrl_r[j] <= r, clipped to n_ctrl - 2
    lo = 0
    hi = n_ctrl
    while lo < hi:
        mid = (lo + hi) >> 1
        if ctrl_r[mid] <= r:
            lo = mid + 1
        else:
            hi = mid
    j = lo - 1
    if j < 0:
        j = 0
    elif j > n_ctrl - 2:
        j = n_ctrl - 2
    w = (r - ctrl_r[j]) / (ctrl_r[j + 1] - ctrl_r[j])
    return ctrl_xi[j] + w * (ctrl_xi[j + 1] - ctrl_xi[j])


def em_chunk(
    cnp.ndarray[cnp.float64_t, ndim=1] r,
    cnp.ndarray[cnp.float64_t, ndim=1] acc,
    cnp.ndarray[cnp.uint8_t, ndim=1, cast=True] alive,
    long step0,
    long burn_steps,
    cnp.ndarray[cnp.float64_t, ndim=2] dW,
    cnp.ndarray[cnp.float64_t, ndim=1] ctrl_r,
    cnp.ndarray[cnp.float64_t, ndim=1] ctrl_xi,
    cnp.ndarray[cnp.float64_t, ndim=1] params,
    double m_star,
    double d,
    double beta,
    double dt,
    double r_floor,
    double r_abort,
):
    """See _pykernels.em_chunk; identical contract and arithmetic."""
    cdef Py_ssize_t n_paths = r.shape[0]
    cdef Py_ssize_t k = dW.shape[1]
    cdef Py_ssize_t n_ctrl = ctrl_r.shape[0]
    cdef double sq2dt = sqrt(2.0 * dt)
    cdef double bessel = d - 1.0
    cdef const double* P = &params[0]
    cdef const double* cr = &ctrl_r[0]
    cdef const double* cx = &ctrl_xi[0]
    cdef double[:] rv = r
    cdef double[:] av = acc
    cdef cnp.uint8_t[:] lv = alive
    cdef double[:, :] w = dW
    cdef Py_ssize_t p, i
    cdef long step
    cdef long counted = 0
    cdef double rp, xi, cost, drift, r_new

    with nogil:
        for p in range(n_paths):
            rp = rv[p]
            for i in range(k):
                step = step0 + i
                xi = _control(rp, cr, cx, n_ctrl, P)
                cost = pow(fabs(xi), m_star) / m_star + beta * _potential(rp, P)
                if step >= burn_steps:
                    if lv[p]:
                        av[p] += cost
                    if p == 0:
                        counted += 1
                drift = -xi - _drift(rp, P) + bessel / rp
                r_new = rp + drift * dt + sq2dt * w[p, i]
                if r_new < r_floor:
                    r_new = 2.0 * r_floor - r_new
                if lv[p]:
                    rp = r_new
                if rp > r_abort:
                    lv[p] = 0
            rv[p] = rp
    return int(counted)
