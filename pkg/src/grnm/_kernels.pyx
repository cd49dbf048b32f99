# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the step-direction subproblem.

Both entry points minimize the composite model

    phi(d) = <g, d> + 0.5 <H d, d> + (mu / p) ||d||^p + rho ||d||_1

over d in R^n, with H symmetric positive semidefinite, mu > 0, p in (1, 3]
and rho >= 0.  Only the quadratic part is treated as smooth -- its Lipschitz
constant is known exactly, so a constant step size is provably stable -- and
the norm-power plus l1 terms are handled jointly by an exact proximal map: a
soft-threshold followed by a radial rescale whose factor solves a monotone
scalar equation.  Objective comparisons steer nothing but momentum restarts;
any loop that picks step sizes by comparing values stalls near sqrt(eps)
accuracy once the differences sink below rounding.

``accelerated_prox_min`` is the production path (FISTA with restarts);
``plain_prox_min`` is a deliberately simple monotone proximal-descent loop
kept as an independent cross-check.  ``grnm._kernels_py`` carries pure-Python
twins with the same signatures and contract; ``grnm.kernels`` selects
whichever is importable.
"""

from libc.math cimport fabs, sqrt, pow
from libc.float cimport DBL_EPSILON

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef inline double _norm2(const double* x, Py_ssize_t n) noexcept nogil:
    return sqrt(_dot(x, x, n))


cdef inline double _norm1(const double* x, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += fabs(x[i])
    return s


cdef inline void _symv(const double* H, const double* x, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += H[i * n + j] * x[j]
        out[i] = acc


cdef inline double _power_coeff(double mu, double p, double nd) noexcept nogil:
    # mu * nd**(p-2); zero at the origin since nd**(p-1) -> 0 for p > 1.
    if nd <= 0.0:
        return 0.0
    return mu * pow(nd, p - 2.0)


cdef inline double _smooth_value(const double* g, const double* Hd, double mu, double p,
                                 const double* d, double nd, Py_ssize_t n) noexcept nogil:
    # <g, d> + 0.5 <Hd, d> + (mu/p) nd**p, with Hd = H @ d precomputed.
    cdef double v = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        v += (g[i] + 0.5 * Hd[i]) * d[i]
    if nd > 0.0:
        v += (mu / p) * pow(nd, p)
    return v


cdef double _kkt_residual(const double* g, const double* Hd, double mu, double p,
                          double rho, const double* d, double nd, Py_ssize_t n) noexcept nogil:
    # Norm of the minimal-norm element of the model subdifferential at d.
    cdef double coef = _power_coeff(mu, p, nd)
    cdef double acc = 0.0
    cdef double v
    cdef Py_ssize_t i
    for i in range(n):
        v = g[i] + Hd[i] + coef * d[i]
        if d[i] > 0.0:
            v = v + rho
        elif d[i] < 0.0:
            v = v - rho
        else:
            v = fabs(v) - rho
            if v < 0.0:
                v = 0.0
        acc += v * v
    return sqrt(acc)


cdef double _radial_root(double a, double p, double w) noexcept nogil:
    # Unique r >= 0 with r + a*r**(p-1) = w, for a >= 0, w >= 0.  Safeguarded
    # Newton inside the bracket [0, w]; the function is strictly increasing,
    # so each sign test tightens the bracket and a rejected Newton trial
    # falls back to its midpoint.
    cdef double lo = 0.0
    cdef double hi = w
    cdef double r = w
    cdef double val, der, trial, rp
    cdef int i
    if w <= 0.0:
        return 0.0
    if a <= 0.0:
        return w
    for i in range(110):
        val = r + a * pow(r, p - 1.0) - w
        if val > 0.0:
            hi = r
        elif val < 0.0:
            lo = r
        else:
            return r
        rp = r if r > 1e-300 else 1e-300
        der = 1.0 + a * (p - 1.0) * pow(rp, p - 2.0)
        if der < 1e308:
            trial = r - val / der
        else:
            trial = 0.5 * (lo + hi)
        if trial <= lo or trial >= hi or trial == r:
            trial = 0.5 * (lo + hi)
        if trial == r or trial <= lo or trial >= hi:
            break
        r = trial
    return r


cdef inline double _prox_step(const double* y, const double* grad, double gamma,
                              double mu, double p, double rho,
                              double* out, Py_ssize_t n) noexcept nogil:
    # out = prox of gamma*((mu/p)||.||^p + rho*||.||_1) at y - gamma*grad.
    # Soft-threshold first, then shrink the radius to the scalar root.
    # Returns ||out||.
    cdef double t = gamma * rho
    cdef double z, w2 = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        z = y[i] - gamma * grad[i]
        if z > t:
            out[i] = z - t
        elif z < -t:
            out[i] = z + t
        else:
            out[i] = 0.0
        w2 += out[i] * out[i]
    cdef double w = sqrt(w2)
    if w <= 0.0:
        return 0.0
    cdef double r = _radial_root(gamma * mu, p, w)
    cdef double scale = r / w
    for i in range(n):
        out[i] *= scale
    return r


cdef double _step_base(const double* g, double hnorm, double mu, double p,
                       double rho, Py_ssize_t n) noexcept nogil:
    # Constant inverse step size.  The quadratic part alone bounds the smooth
    # curvature by ||H||_F; the norm-power term at the solution-reach radius
    # ((||g|| + sqrt(n)*rho)/mu)**(1/(p-1)) is added as a conditioning floor
    # so a vanishing Hessian still yields a finite, well-scaled step.
    cdef double reach = (_norm2(g, n) + sqrt(<double> n) * rho) / mu
    reach = pow(reach, 1.0 / (p - 1.0))
    if not (reach > 1e-8):  # also catches NaN
        reach = 1e-8
    elif reach > 1e150:
        reach = 1e150
    cdef double lbase = hnorm + _power_coeff(mu, p, reach)
    if not (lbase > 1e-300):
        lbase = 1e-300
    return lbase


def accelerated_prox_min(double[::1] g, double[:, ::1] H, double mu, double p, double rho,
                         double[::1] d0, Py_ssize_t max_iter, double tol):
    """FISTA on the quadratic part with an exact power-plus-l1 prox and restarts.

    Returns ``(d, iterations, residual)`` where ``residual`` is the subgradient
    optimality residual of ``d``.  The iterate with the smallest residual seen
    is returned, so callers decide success by comparing ``residual`` with
    ``tol``.
    """
    cdef Py_ssize_t n = g.shape[0]
    cdef cnp.ndarray[double, ndim=1] d_arr = np.array(d0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] dprev_arr = d_arr.copy()
    cdef cnp.ndarray[double, ndim=1] y_arr = d_arr.copy()
    cdef cnp.ndarray[double, ndim=1] best_arr = d_arr.copy()
    cdef cnp.ndarray[double, ndim=1] c_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] grad_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hwork_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hc_arr = np.empty(n, dtype=np.float64)

    cdef double* d = <double*> d_arr.data
    cdef double* dprev = <double*> dprev_arr.data
    cdef double* y = <double*> y_arr.data
    cdef double* best = <double*> best_arr.data
    cdef double* c = <double*> c_arr.data
    cdef double* grad = <double*> grad_arr.data
    cdef double* hwork = <double*> hwork_arr.data
    cdef double* hc = <double*> hc_arr.data
    cdef const double* gp = &g[0]
    cdef const double* Hp = &H[0, 0]

    cdef double hnorm = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            hnorm += Hp[i * n + j] * Hp[i * n + j]
    hnorm = sqrt(hnorm)

    cdef double gamma = 1.0 / _step_base(gp, hnorm, mu, p, rho, n)

    cdef double nd = _norm2(d, n)
    _symv(Hp, d, hwork, n)
    cdef double phi_d = _smooth_value(gp, hwork, mu, p, d, nd, n) + rho * _norm1(d, n)
    cdef double res = _kkt_residual(gp, hwork, mu, p, rho, d, nd, n)
    cdef double best_res = res
    cdef double t = 1.0
    cdef double t_new, beta, s_c, nc, phi_c, res_c
    cdef Py_ssize_t it = 0

    if res <= tol:
        return d_arr, 0, res

    for it in range(1, max_iter + 1):
        _symv(Hp, y, hwork, n)
        for i in range(n):
            grad[i] = gp[i] + hwork[i]

        nc = _prox_step(y, grad, gamma, mu, p, rho, c, n)

        _symv(Hp, c, hc, n)
        s_c = _smooth_value(gp, hc, mu, p, c, nc, n)
        phi_c = s_c + rho * _norm1(c, n)
        if phi_c > phi_d + 16.0 * DBL_EPSILON * (1.0 + fabs(phi_d)):
            # Momentum overshot: restart the acceleration from the current
            # iterate.  The cushion accepts rounding-level wobble; a strict
            # test can cycle forever at the numerical floor.
            for i in range(n):
                y[i] = d[i]
            t = 1.0
            continue

        res_c = _kkt_residual(gp, hc, mu, p, rho, c, nc, n)
        if res_c < best_res:
            best_res = res_c
            for i in range(n):
                best[i] = c[i]

        t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_new
        for i in range(n):
            dprev[i] = d[i]
            d[i] = c[i]
            y[i] = c[i] + beta * (c[i] - dprev[i])
        t = t_new
        phi_d = phi_c

        if res_c <= tol:
            return d_arr, it, res_c

    return best_arr, max_iter, best_res


def plain_prox_min(double[::1] g, double[:, ::1] H, double mu, double p, double rho,
                   double[::1] d0, Py_ssize_t max_iter):
    """Monotone proximal descent with the same exact prox; no acceleration.

    Runs until ``max_iter`` or until the update is an exact fixed point in
    double precision.  Returns ``(d, iterations)``.
    """
    cdef Py_ssize_t n = g.shape[0]
    cdef cnp.ndarray[double, ndim=1] d_arr = np.array(d0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] c_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] grad_arr = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hd_arr = np.empty(n, dtype=np.float64)

    cdef double* d = <double*> d_arr.data
    cdef double* c = <double*> c_arr.data
    cdef double* grad = <double*> grad_arr.data
    cdef double* hd = <double*> hd_arr.data
    cdef const double* gp = &g[0]
    cdef const double* Hp = &H[0, 0]

    cdef double hnorm = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            hnorm += Hp[i * n + j] * Hp[i * n + j]
    hnorm = sqrt(hnorm)

    cdef double gamma = 1.0 / _step_base(gp, hnorm, mu, p, rho, n)

    cdef Py_ssize_t it = 0
    cdef int same

    for it in range(1, max_iter + 1):
        _symv(Hp, d, hd, n)
        for i in range(n):
            grad[i] = gp[i] + hd[i]

        _prox_step(d, grad, gamma, mu, p, rho, c, n)

        same = 1
        for i in range(n):
            if c[i] != d[i]:
                same = 0
                break
        if same:
            return d_arr, it

        for i in range(n):
            d[i] = c[i]

    return d_arr, max_iter
