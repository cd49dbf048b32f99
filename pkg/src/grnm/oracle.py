"""Benchmark objectives with certified metadata.

Each factory returns an oracle exposing value/gradient/hessian plus a
:class:`ProblemMetadata` carrying everything the certification layer can use:
a cubic Taylor-remainder modulus, the optimal value and a minimizer (computed
at construction for the non-quadratic families, to far below certificate
tolerances), a radius bounding the starting sublevel set when one can be
established, and a gradient error-bound coefficient where available.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp, softmax

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class ProblemMetadata:
    """Known facts about an objective.

    taylor_bound      modulus L in the cubic Taylor-remainder bounds
                      ||grad f(x) - grad f(y) - hess f(y)(x-y)|| <= L ||x-y||^2
                      and |f(x) - f(y) - <grad,(x-y)> - 0.5 <hess (x-y),(x-y)>|
                      <= (L/3) ||x-y||^3.
    f_star / x_star   optimal value and a minimizer, or None when unknown.
    sublevel_radius   radius of a ball certainly containing the sublevel set
                      of the default start, or None when not established.
    error_bound_coeff coefficient m with dist(x, argmin) <= m ||grad f(x)||,
                      or None.
    start_value       objective value at the default start (the sublevel the
                      radius refers to).
    """

    taylor_bound: float
    f_star: float | None = None
    x_star: np.ndarray | None = None
    sublevel_radius: float | None = None
    error_bound_coeff: float | None = None
    start_value: float | None = None


class ObjectiveOracle:
    """Base class: a twice-differentiable convex objective on R^n."""

    kind = "generic"

    def __init__(self, n, metadata):
        self.n = int(n)
        self.metadata = metadata

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def default_start(self):
        return np.zeros(self.n)

    def distance_to_solutions(self, x):
        """Distance to the solution set, or an upper bound; None if unknown."""
        if self.metadata.x_star is None:
            return None
        return float(np.linalg.norm(np.asarray(x) - self.metadata.x_star))


class _BareOracle(ObjectiveOracle):
    # construction-time shim: lets the outer solver run before metadata exists
    def __init__(self, n, value, gradient, hessian, taylor_bound):
        super().__init__(n, ProblemMetadata(taylor_bound=taylor_bound))
        self._value, self._gradient, self._hessian = value, gradient, hessian

    def value(self, x):
        return self._value(x)

    def gradient(self, x):
        return self._gradient(x)

    def hessian(self, x):
        return self._hessian(x)


def _newton_polish(bare, x, max_steps=60):
    """Full Newton steps until the gradient norm stops improving."""
    x = np.asarray(x, dtype=np.float64)
    g = bare.gradient(x)
    best_x, best_gn = x, float(np.linalg.norm(g))
    for _ in range(max_steps):
        H = bare.hessian(x)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        x = x - step
        g = bare.gradient(x)
        gn = float(np.linalg.norm(g))
        if not math.isfinite(gn) or gn >= best_gn:
            break
        best_x, best_gn = x, gn
    return best_x


def _stationary_point(bare, label):
    """Drive the gradient to rounding level; used to pin f_star at build time."""
    from .schedule import ScheduleConfig
    from .solver import SolverConfig, run

    c1 = max(bare.metadata.taylor_bound, 1e-3)
    config = SolverConfig(
        schedule=ScheduleConfig(p=3.0, c1=c1).bind(bare.n),
        epsilon=1e-12,
        max_outer=2000,
    )
    trajectory = run(bare, bare.default_start(), config)
    if trajectory.termination != "converged":
        raise ValueError(f"{label}: failed to locate the minimum at construction "
                         f"(terminated with {trajectory.termination!r}); the instance may be "
                         "unbounded below or badly scaled")
    return _newton_polish(bare, trajectory.records[-1].x)


class QuadraticOracle(ObjectiveOracle):
    """f(x) = 0.5 <A x, x> - <b, x> with A symmetric PSD and b in range(A)."""

    kind = "quadratic"

    def __init__(self, matrix, linear):
        A = np.asarray(matrix, dtype=np.float64)
        b = np.asarray(linear, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("need a square matrix and a matching vector")
        if not (np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("matrix and vector must be finite")
        scale = max(1.0, float(np.abs(A).max()))
        if float(np.abs(A - A.T).max()) > 1e-10 * scale:
            raise ValueError("matrix must be symmetric")
        lam, basis = np.linalg.eigh(A)
        top = float(lam[-1]) if lam.size else 0.0
        if lam.size and float(lam[0]) < -1e-10 * max(abs(top), 1.0):
            raise ValueError("matrix must be positive semidefinite")
        cutoff = 1e-12 * max(top, 1e-300)
        in_range = lam > cutoff
        b_hat = basis.T @ b
        stray = float(np.abs(b_hat[~in_range]).max(initial=0.0))
        if stray > 1e-8 * max(1.0, float(np.linalg.norm(b))):
            raise ValueError("linear term has a component outside the range of the "
                             "matrix; the objective is unbounded below")
        x_star_hat = np.where(in_range, b_hat / np.where(in_range, lam, 1.0), 0.0)
        x_star = basis @ x_star_hat

        self.A, self.b = A, b
        self._eigenvalues, self._basis, self._in_range = lam, basis, in_range
        self.rank = int(in_range.sum())

        f_star = -0.5 * float(b @ x_star)
        positive = lam[in_range]
        m1 = 1.0 / float(positive.min()) if self.rank else None
        start = np.zeros(A.shape[0])
        start_value = 0.5 * float(start @ (A @ start)) - float(b @ start)
        radius = None
        if self.rank == A.shape[0]:
            gap = max(start_value - f_star, 0.0)
            radius = float(np.linalg.norm(x_star)) + math.sqrt(2.0 * gap / float(lam[0]))
        super().__init__(A.shape[0], ProblemMetadata(
            taylor_bound=0.0,
            f_star=f_star,
            x_star=x_star,
            sublevel_radius=radius,
            error_bound_coeff=m1,
            start_value=start_value,
        ))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * float(x @ (self.A @ x)) - float(self.b @ x)

    def gradient(self, x):
        return self.A @ np.asarray(x, dtype=np.float64) - self.b

    def hessian(self, x):
        return self.A

    def distance_to_solutions(self, x):
        # exact: the solution set is x_star + null(A)
        offset = self._basis.T @ (np.asarray(x, dtype=np.float64) - self.metadata.x_star)
        return float(np.linalg.norm(offset[self._in_range]))


class LogisticOracle(ObjectiveOracle):
    """Mean logistic loss over rows with labels in {-1, +1}."""

    kind = "logistic"

    def __init__(self, features, labels):
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],) or X.shape[0] < 1:
            raise ValueError("need a nonempty feature matrix and matching labels")
        if not np.isfinite(X).all():
            raise ValueError("features must be finite")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be -1 or +1")
        self.signed = y[:, None] * X
        self.m = X.shape[0]
        n = X.shape[1]
        # |third derivative of log(1+e^-t)| peaks at 1/(6 sqrt(3)); the mean of
        # rank-one terms then obeys the remainder bounds with L below.
        row_norms = np.linalg.norm(X, axis=1)
        L = float(row_norms.max() ** 3) / (12.0 * math.sqrt(3.0))

        bare = _BareOracle(n, self._value_at, self._gradient_at, self._hessian_at, L)
        x_star = _stationary_point(bare, "logistic objective")
        start_value = self._value_at(np.zeros(n))
        super().__init__(n, ProblemMetadata(
            taylor_bound=L,
            f_star=self._value_at(x_star),
            x_star=x_star,
            sublevel_radius=_logistic_radius(
                X, self.m, x_star, self._value_at(x_star), start_value),
            error_bound_coeff=None,
            start_value=start_value,
        ))

    def _value_at(self, x):
        t = self.signed @ x
        return float(np.mean(np.logaddexp(0.0, -t)))

    def _gradient_at(self, x):
        t = self.signed @ x
        return -(self.signed.T @ expit(-t)) / self.m

    def _hessian_at(self, x):
        t = self.signed @ x
        w = expit(t) * expit(-t)
        H = (self.signed * w[:, None]).T @ self.signed / self.m
        return 0.5 * (H + H.T)

    def value(self, x):
        return self._value_at(np.asarray(x, dtype=np.float64))

    def gradient(self, x):
        return self._gradient_at(np.asarray(x, dtype=np.float64))

    def hessian(self, x):
        return self._hessian_at(np.asarray(x, dtype=np.float64))


class LogSumExpOracle(ObjectiveOracle):
    """f(x) = log sum_i exp(<a_i, x> + b_i) over at least two affine pieces."""

    kind = "logsumexp"

    def __init__(self, rows, offsets):
        A = np.asarray(rows, dtype=np.float64)
        b = np.asarray(offsets, dtype=np.float64)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValueError("need a row matrix and matching offsets")
        if A.shape[0] < 2:
            raise ValueError("need at least two affine pieces; a single piece is "
                             "affine and has no interior minimum")
        if not (np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("rows and offsets must be finite")
        self.rows, self.offsets = A, b
        n = A.shape[1]
        row_norms = np.linalg.norm(A, axis=1)
        # symmetric-tensor norm of the third differential is attained on the
        # diagonal, and the scalar third cumulant is bounded by 2 max|t|^3
        L = float(row_norms.max() ** 3)

        bare = _BareOracle(n, self._value_at, self._gradient_at, self._hessian_at, L)
        x_star = _stationary_point(bare, "log-sum-exp objective")
        start_value = self._value_at(np.zeros(n))
        super().__init__(n, ProblemMetadata(
            taylor_bound=L,
            f_star=self._value_at(x_star),
            x_star=x_star,
            sublevel_radius=_logsumexp_radius(
                A, b, x_star, self._value_at(x_star), start_value),
            error_bound_coeff=None,
            start_value=start_value,
        ))

    def _value_at(self, x):
        return float(logsumexp(self.rows @ x + self.offsets))

    def _gradient_at(self, x):
        w = softmax(self.rows @ x + self.offsets)
        return self.rows.T @ w

    def _hessian_at(self, x):
        w = softmax(self.rows @ x + self.offsets)
        weighted = self.rows * w[:, None]
        g = self.rows.T @ w
        H = weighted.T @ self.rows - np.outer(g, g)
        return 0.5 * (H + H.T)

    def value(self, x):
        return self._value_at(np.asarray(x, dtype=np.float64))

    def gradient(self, x):
        return self._gradient_at(np.asarray(x, dtype=np.float64))

    def hessian(self, x):
        return self._hessian_at(np.asarray(x, dtype=np.float64))


def make_quadratic(matrix, linear):
    """Quadratic objective 0.5 <A x, x> - <b, x>; rejects b outside range(A)."""
    return QuadraticOracle(matrix, linear)


def make_logistic(features, labels):
    """Mean logistic loss; the minimizer is located at construction time."""
    return LogisticOracle(features, labels)


def make_logsumexp(rows, offsets):
    """Softmax of affine pieces; the minimizer is located at construction time."""
    return LogSumExpOracle(rows, offsets)


def _logistic_radius(X, m, x_star, f_star, start_value):
    """Ball radius trapping the start sublevel set, or None.

    On a centered ball of radius rho the logistic Hessian dominates the fixed
    matrix built from the smallest possible per-row weights, giving a strong
    convexity constant there; if the induced growth at the sphere exceeds the
    start gap, the (connected) sublevel set cannot reach the sphere.
    """
    gap = start_value - f_star
    if gap <= 0.0:
        return None
    base = float(np.linalg.norm(x_star))
    row_norms = np.linalg.norm(X, axis=1)
    for factor in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 1024.0):
        rho = 1.25 * base + factor
        weights = expit(row_norms * rho) * expit(-row_norms * rho)
        bound = (X * weights[:, None]).T @ X / m
        lam = float(np.linalg.eigvalsh(bound)[0])
        if lam > 0.0 and 0.5 * lam * (rho - base) ** 2 > gap * (1.0 + 1e-9):
            return rho
    return None


def _logsumexp_radius(A, b, x_star, f_star, start_value):
    """Same trapping argument for log-sum-exp; weights bounded via the value span."""
    gap = start_value - f_star
    if gap <= 0.0:
        return None
    m = A.shape[0]
    base = float(np.linalg.norm(x_star))
    row_norms = np.linalg.norm(A, axis=1)
    centered = np.eye(m) - np.full((m, m), 1.0 / m)
    curvature_core = float(np.linalg.eigvalsh(A.T @ centered @ A)[0])
    if curvature_core <= 0.0:
        return None
    for factor in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 1024.0):
        rho = 1.25 * base + factor
        span = float((b + row_norms * rho).max() - (b - row_norms * rho).min())
        lam = math.exp(-span) / m * curvature_core
        if lam > 0.0 and 0.5 * lam * (rho - base) ** 2 > gap * (1.0 + 1e-9):
            return rho
    return None


@dataclass(frozen=True)
class TaylorReport:
    """Worst observed cubic Taylor remainders and their ratios to the bound."""

    grad_residual_max: float
    value_residual_max: float
    grad_ratio_max: float | None
    value_ratio_max: float | None


def check_taylor_bound(oracle, pairs, taylor_bound=None):
    """Measure the remainder bounds on sample pairs (x, y).

    Ratios are against L ||x-y||^2 (gradient) and (L/3) ||x-y||^3 (value);
    they are None when L = 0, in which case the raw residuals should sit at
    rounding level.
    """
    L = oracle.metadata.taylor_bound if taylor_bound is None else taylor_bound
    grad_res, value_res, grad_ratio, value_ratio = 0.0, 0.0, 0.0, 0.0
    for x, y in pairs:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        delta = x - y
        nd = float(np.linalg.norm(delta))
        if nd == 0.0:
            continue
        g_y = oracle.gradient(y)
        H_y = oracle.hessian(y)
        gres = float(np.linalg.norm(oracle.gradient(x) - g_y - H_y @ delta))
        vres = abs(oracle.value(x) - oracle.value(y) - float(g_y @ delta)
                   - 0.5 * float(delta @ (H_y @ delta)))
        grad_res = max(grad_res, gres)
        value_res = max(value_res, vres)
        if L > 0.0:
            grad_ratio = max(grad_ratio, gres / (L * nd**2))
            value_ratio = max(value_ratio, vres / ((L / 3.0) * nd**3))
    if L == 0.0:
        return TaylorReport(grad_res, value_res, None, None)
    return TaylorReport(grad_res, value_res, grad_ratio, value_ratio)


def check_derivatives(oracle, points, step=1e-5):
    """Central finite-difference check; returns max relative errors (grad, hess)."""
    worst_g, worst_h = 0.0, 0.0
    for x in points:
        x = np.asarray(x, dtype=np.float64)
        h = step * (1.0 + float(np.linalg.norm(x)))
        g = oracle.gradient(x)
        H = oracle.hessian(x)
        fd_g = np.empty_like(g)
        fd_H = np.empty_like(H)
        for i in range(oracle.n):
            e = np.zeros(oracle.n)
            e[i] = h
            fd_g[i] = (oracle.value(x + e) - oracle.value(x - e)) / (2.0 * h)
            fd_H[:, i] = (oracle.gradient(x + e) - oracle.gradient(x - e)) / (2.0 * h)
        scale_g = max(float(np.linalg.norm(g)), 1e-12)
        scale_h = max(float(np.linalg.norm(H)), 1e-12)
        worst_g = max(worst_g, float(np.linalg.norm(fd_g - g)) / scale_g)
        worst_h = max(worst_h, float(np.linalg.norm(fd_H - H)) / scale_h)
    return worst_g, worst_h
