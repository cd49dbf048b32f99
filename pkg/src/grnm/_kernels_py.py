"""Pure-Python twins of the compiled inner loops.

Same contract as ``grnm._kernels``: minimize

    phi(d) = <g, d> + 0.5 <H d, d> + (mu / p) ||d||^p + rho ||d||_1

treating only the quadratic part as smooth (its Lipschitz constant is known
exactly, so a constant step size is provably stable) and applying the
norm-power plus l1 terms through an exact joint proximal map: soft-threshold,
then shrink the radius to the root of a monotone scalar equation.  Objective
comparisons steer nothing but momentum restarts; any loop that picks step
sizes by comparing values stalls near sqrt(eps) accuracy once the differences
sink below rounding.

Results agree with the compiled twins to rounding: vectorized reductions sum
in a different order than the C loops, so individual iterates may differ by
ulps and iteration counts by a step or two, but both land on the same
minimizer within the requested tolerance.
"""

from __future__ import annotations

import numpy as np

_EPS = float(np.finfo(np.float64).eps)


def _power_coeff(mu: float, p: float, nd: float) -> float:
    # mu * nd**(p-2); zero at the origin since nd**(p-1) -> 0 for p > 1.
    if nd <= 0.0:
        return 0.0
    return mu * nd ** (p - 2.0)


def _smooth_value(g, Hd, mu, p, d, nd):
    # <g, d> + 0.5 <Hd, d> + (mu/p) nd**p, with Hd = H @ d precomputed.
    v = float((g + 0.5 * Hd) @ d)
    if nd > 0.0:
        v += (mu / p) * nd**p
    return v


def _kkt_residual(g, Hd, mu, p, rho, d, nd):
    # Norm of the minimal-norm element of the model subdifferential at d.
    v = g + Hd + _power_coeff(mu, p, nd) * d
    active = v + rho * np.sign(d)
    inactive = np.maximum(np.abs(v) - rho, 0.0)
    return float(np.linalg.norm(np.where(d != 0.0, active, inactive)))


def _radial_root(a: float, p: float, w: float) -> float:
    # Unique r >= 0 with r + a*r**(p-1) = w, for a >= 0, w >= 0.  Safeguarded
    # Newton inside the bracket [0, w]; the function is strictly increasing,
    # so each sign test tightens the bracket and a rejected Newton trial
    # falls back to its midpoint.
    if w <= 0.0:
        return 0.0
    if a <= 0.0:
        return w
    lo, hi, r = 0.0, w, w
    for _ in range(110):
        try:
            val = r + a * r ** (p - 1.0) - w
        except OverflowError:
            val = np.inf
        if val > 0.0:
            hi = r
        elif val < 0.0:
            lo = r
        else:
            return r
        rp = r if r > 1e-300 else 1e-300
        try:
            der = 1.0 + a * (p - 1.0) * rp ** (p - 2.0)
        except OverflowError:
            der = np.inf
        trial = r - val / der if der < 1e308 else 0.5 * (lo + hi)
        if trial <= lo or trial >= hi or trial == r:
            trial = 0.5 * (lo + hi)
        if trial == r or trial <= lo or trial >= hi:
            break
        r = trial
    return r


def _prox_step(y, grad, gamma, mu, p, rho):
    # prox of gamma*((mu/p)||.||^p + rho*||.||_1) at y - gamma*grad.
    # Soft-threshold first, then shrink the radius to the scalar root.
    z = y - gamma * grad
    t = gamma * rho
    s = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    w = float(np.linalg.norm(s))
    if w <= 0.0:
        return s, 0.0
    r = _radial_root(gamma * mu, p, w)
    return s * (r / w), r


def _step_base(g, hnorm, mu, p, rho):
    # Constant inverse step size.  The quadratic part alone bounds the smooth
    # curvature by ||H||_F; the norm-power term at the solution-reach radius
    # ((||g|| + sqrt(n)*rho)/mu)**(1/(p-1)) is added as a conditioning floor
    # so a vanishing Hessian still yields a finite, well-scaled step.
    n = g.shape[0]
    try:
        reach = ((float(np.linalg.norm(g)) + np.sqrt(n) * rho) / mu) ** (1.0 / (p - 1.0))
    except OverflowError:
        reach = 1e150
    if not reach > 1e-8:  # also catches NaN
        reach = 1e-8
    elif reach > 1e150:
        reach = 1e150
    lbase = hnorm + _power_coeff(mu, p, reach)
    return lbase if lbase > 1e-300 else 1e-300


def accelerated_prox_min(g, H, mu, p, rho, d0, max_iter, tol):
    """FISTA on the quadratic part with an exact power-plus-l1 prox and restarts.

    Returns ``(d, iterations, residual)`` where ``residual`` is the subgradient
    optimality residual of ``d``.  The iterate with the smallest residual seen
    is returned, so callers decide success by comparing ``residual`` with
    ``tol``.
    """
    g = np.asarray(g, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    d = np.array(d0, dtype=np.float64, copy=True)

    hnorm = float(np.sqrt(np.sum(H * H)))
    gamma = 1.0 / _step_base(g, hnorm, mu, p, rho)

    nd = float(np.linalg.norm(d))
    Hd = H @ d
    phi_d = _smooth_value(g, Hd, mu, p, d, nd) + rho * float(np.sum(np.abs(d)))
    res = _kkt_residual(g, Hd, mu, p, rho, d, nd)
    if res <= tol:
        return d, 0, res

    best = d.copy()
    best_res = res
    y = d.copy()
    t = 1.0

    for it in range(1, max_iter + 1):
        grad = g + H @ y
        c, nc = _prox_step(y, grad, gamma, mu, p, rho)

        Hc = H @ c
        s_c = _smooth_value(g, Hc, mu, p, c, nc)
        phi_c = s_c + rho * float(np.sum(np.abs(c)))
        if phi_c > phi_d + 16.0 * _EPS * (1.0 + abs(phi_d)):
            # Momentum overshot: restart the acceleration from the current
            # iterate.  The cushion accepts rounding-level wobble; a strict
            # test can cycle forever at the numerical floor.
            y = d.copy()
            t = 1.0
            continue

        res_c = _kkt_residual(g, Hc, mu, p, rho, c, nc)
        if res_c < best_res:
            best_res = res_c
            best = c.copy()

        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        y = c + beta * (c - d)
        d = c
        t = t_new
        phi_d = phi_c

        if res_c <= tol:
            return d, it, res_c

    return best, max_iter, best_res


def plain_prox_min(g, H, mu, p, rho, d0, max_iter):
    """Monotone proximal descent with the same exact prox; no acceleration.

    Runs until ``max_iter`` or until the update is an exact fixed point in
    double precision.  Returns ``(d, iterations)``.
    """
    g = np.asarray(g, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    d = np.array(d0, dtype=np.float64, copy=True)

    hnorm = float(np.sqrt(np.sum(H * H)))
    gamma = 1.0 / _step_base(g, hnorm, mu, p, rho)

    it = 0
    for it in range(1, max_iter + 1):
        grad = g + H @ d
        c, _ = _prox_step(d, grad, gamma, mu, p, rho)
        if np.array_equal(c, d):
            return d, it
        d = c
    return d, max_iter
