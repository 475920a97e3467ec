"""Pure-Python twin of ``_kernels.pyx``; used when the extension is not built."""

from math import exp, floor, inf, sqrt

BACKEND = "python"


def neighbor_features(asn, flat, params):
    """Feature pass over a flattened neighborhood.

    ``flat`` holds ``(last_asn, mu, var, expected_asn)`` for each neighbor
    back to back; ``params`` is ``(B, D, b_th, C_max, r_max, alpha_c,
    beta_c, sigma_min, eps_p, zeta)``. Returns ``(mean_bin, short_count,
    dmin_bin, near_count, p_any, overdue)``.
    """
    B, D, b_th, C_max, r_max, alpha_c, beta_c, sigma_min, eps_p, zeta = params
    n = len(flat) // 4
    if n == 0:
        raise ValueError("empty neighborhood")
    b_sum = short = near = overdue = 0
    d_min = inf
    sig_min_d = 1.0
    none = 1.0
    for i in range(0, 4 * n, 4):
        last = flat[i]
        mu = flat[i + 1]
        sigma = sqrt(flat[i + 2])
        expected = flat[i + 3]
        lo = beta_c * mu
        if sigma_min > lo:
            lo = sigma_min
        if sigma < lo:
            sigma = lo
        if alpha_c * mu < sigma:
            sigma = alpha_c * mu
        elapsed = asn - last
        b = int(floor(elapsed / mu * B / r_max))
        if b > B - 1:
            b = B - 1
        b_sum += b
        if b < b_th:
            short += 1
        phi = (asn - (last if last > expected else expected)) % mu
        d = mu - phi if mu - phi < phi else phi
        if d < d_min:
            d_min = d
            sig_min_d = sigma
        if d <= sigma:
            near += 1
        if elapsed >= mu + zeta * sigma:
            overdue += 1
        none *= 1.0 - exp(-0.5 * d * d / (sigma * sigma))
    mean_bin = int(floor(b_sum / n + 0.5))
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
