"""Numpy fallback for the path-stepping kernel.

The time loop is inherently sequential, so the fallback vectorizes across
paths inside each chunk of Brownian increments.  Every formula mirrors the
compiled kernel line for line (same operations, same order); backends agree
to rounding level and each is bit-exactly reproducible for a fixed seed.
"""

import numpy as np


def _drift(r, P):
    delta, rho, a, R = P[0], P[1], P[2], P[4]
    p0, p1, p2 = P[7], P[8], P[9]
    r2 = r * r
    inner = r * (p0 + r2 * (p1 + r2 * p2))
    outer = (rho + a / r) * r**delta
    return np.where(r >= R, outer, inner)


def _potential(r, P):
    eta, R = P[3], P[4]
    compact, Rp = P[5], P[6]
    c, a1, a2 = P[10], P[11], P[12]
    # inner branch only selected for r < R; clamp so the branch-blind vector
    # evaluation cannot overflow the exponential
    s = np.minimum(r, R) ** 2 - R * R
    inner = np.exp(c + s * (a1 + a2 * s))
    outer = r ** (-eta)
    if compact != 0.0:
        t = np.clip((Rp - r) / (Rp - R), 0.0, 1.0)
        step = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        outer = np.where(r >= Rp, 0.0, outer * step)
    return np.where(r >= R, outer, inner)


def _control(r, ctrl_r, ctrl_xi, P):
    # linear interpolation on the table, optimal-cancellation beyond it
    j = np.clip(np.searchsorted(ctrl_r, r, side="right") - 1, 0, ctrl_r.size - 2)
    w = (r - ctrl_r[j]) / (ctrl_r[j + 1] - ctrl_r[j])
    xi = ctrl_xi[j] + w * (ctrl_xi[j + 1] - ctrl_xi[j])
    return np.where(r <= ctrl_r[-1], xi, -_drift(r, P))


def em_chunk(
    r,
    acc,
    alive,
    step0,
    burn_steps,
    dW,
    ctrl_r,
    ctrl_xi,
    params,
    m_star,
    d,
    beta,
    dt,
    r_floor,
    r_abort,
):
    """Advance every path through one chunk of increments, in place.

    r, acc, alive: per-path state (radius, accumulated cost, not-aborted);
    dW: (n_paths, k) standard normal increments; cost is sampled at the
    pre-step radius and accumulated from global step index `burn_steps` on.
    Returns the number of accumulated (post-burn-in) steps in this chunk.
    """
    P = params
    sq2dt = np.sqrt(2.0 * dt)
    bessel = d - 1.0
    k = dW.shape[1]
    counted = 0
    for i in range(k):
        step = step0 + i
        xi = _control(r, ctrl_r, ctrl_xi, P)
        cost = np.abs(xi) ** m_star / m_star + beta * _potential(r, P)
        if step >= burn_steps:
            acc += np.where(alive, cost, 0.0)
            counted += 1
        drift = -xi - _drift(r, P) + bessel / r
        r_new = r + drift * dt + sq2dt * dW[:, i]
        r_new = np.where(r_new < r_floor, 2.0 * r_floor - r_new, r_new)
        np.copyto(r, np.where(alive, r_new, r))
        alive &= r <= r_abort
    return counted
