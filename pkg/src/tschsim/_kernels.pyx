# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled feature pass; must match ``_kernels_py.neighbor_features`` exactly."""

from libc.math cimport exp, floor, sqrt, fmod, INFINITY

BACKEND = "cython"


def neighbor_features(double asn, list flat, tuple params):
    cdef int B = params[0], D = params[1], b_th = params[2], C_max = params[3]
    cdef double r_max = params[4], alpha_c = params[5], beta_c = params[6]
    cdef double sigma_min = params[7], eps_p = params[8], zeta = params[9]
    cdef Py_ssize_t n = len(flat) // 4, i
    cdef double last, mu, sigma, expected, lo, elapsed, phi, d, ref
    cdef double d_min = INFINITY, sig_min_d = 1.0, none = 1.0, edge, p
    cdef long b, b_sum = 0
    cdef int short = 0, near = 0, overdue = 0, mean_bin, dmin_bin, k
    if n == 0:
        raise ValueError("empty neighborhood")
    for i in range(n):
        last = flat[4 * i]
        mu = flat[4 * i + 1]
        sigma = sqrt(<double>flat[4 * i + 2])
        expected = flat[4 * i + 3]
        lo = beta_c * mu
        if sigma_min > lo:
            lo = sigma_min
        if sigma < lo:
            sigma = lo
        if alpha_c * mu < sigma:
            sigma = alpha_c * mu
        elapsed = asn - last
        b = <long>floor(elapsed / mu * B / r_max)
        if b > B - 1:
            b = B - 1
        b_sum += b
        if b < b_th:
            short += 1
        ref = last if last > expected else expected
        # floored modulo, same convention as Python's %
        phi = fmod(asn - ref, mu)
        if phi < 0:
            phi += mu
            if phi >= mu:
                phi = 0.0
        d = mu - phi if mu - phi < phi else phi
        if d < d_min:
            d_min = d
            sig_min_d = sigma
        if d <= sigma:
            near += 1
        if elapsed >= mu + zeta * sigma:
            overdue += 1
        none *= 1.0 - exp(-0.5 * d * d / (sigma * sigma))
    mean_bin = <int>floor(<double>b_sum / n + 0.5)
    if mean_bin > B - 1:
        mean_bin = B - 1
    edge = 0.5 * sig_min_d
    dmin_bin = D - 1
    for k in range(D - 1):
        if d_min < edge:
            dmin_bin = k
            break
        edge *= 2.0
    p = 1.0 - none
    if p < eps_p:
        p = eps_p
    elif p > 1.0 - eps_p:
        p = 1.0 - eps_p
    return (mean_bin, short if short < C_max else C_max, dmin_bin,
            near if near < C_max else C_max, p, overdue)
