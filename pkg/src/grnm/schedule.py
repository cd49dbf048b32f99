"""Regularization-weight schedules and their admissibility analysis.

The solver damps each Newton system with two weights driven by the current
gradient norm ``g``:

    mu  = c1**((p-1)/2) * g**((3-p)/2)
    rho = min((q / sqrt(n)) * g, c2 * g**((p+1)/2))

This module computes those weights, the derived per-step constants that the
certification tools rely on (the decrease coefficient ``3 - (1+q)**x`` with
``x = (3-p)/(p-1)``, the gradient growth factor ``1 + 2q + (1+q)**(2/(p-1))``,
and the sufficient-decrease constant ``tau``), and validates that a given
``(p, q, theta)`` triple actually yields an O(1/k^2) certificate.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

#: Damping-ratio presets: name -> (q, theta).  "example1" disables the l1 term
#: entirely; "example2" keeps a p-dependent l1 weight small enough that the
#: certificate constants stay admissible on all of (1, 3].
PRESET_NAMES = ("example1", "example2")


@dataclass(frozen=True)
class ScheduleConfig:
    """Weight-schedule parameters; ``n`` is bound when attached to a problem."""

    p: float
    c1: float
    c2: float = 0.5
    q: float = 0.0
    n: int | None = None

    def __post_init__(self):
        if not 1.0 < self.p <= 3.0:
            raise ValueError("p must lie in (1, 3]")
        if self.c1 <= 0.0:
            raise ValueError("c1 must be positive")
        if not 0.0 < self.c2 < 1.0:
            raise ValueError("c2 must lie in (0, 1)")
        if self.q < 0.0:
            raise ValueError("q must be nonnegative")
        if self.n is not None and self.n < 1:
            raise ValueError("n must be a positive integer")

    def bind(self, n):
        """Copy of this config with the problem dimension filled in."""
        return replace(self, n=int(n))


@dataclass(frozen=True)
class AssumptionReport:
    """Admissibility report for a ``(p, q, theta)`` triple.

    ``decrease_coeff`` is ``3 - (1+q)**((3-p)/(p-1))`` (one third of it
    multiplies mu*||d||^p in the per-step decrease bound) and
    ``growth_factor`` bounds ||grad f(x_{k+1})|| / ||grad f(x_k)||.  ``nu``
    and ``ell`` witness the k^-2 envelopes theta**k <= nu/k^2 and
    (growth_factor*theta)**(k/2) <= nu/k^2 for k >= ell; they are None when
    the triple is inadmissible.
    """

    p: float
    q: float
    theta: float
    decrease_coeff: float
    growth_factor: float
    product: float
    ok_decrease: bool
    ok_growth: bool
    ok_rate: bool
    nu: float | None
    ell: int | None

    @property
    def all_ok(self):
        return self.ok_decrease and self.ok_growth and self.ok_rate


def mu_rho(config, grad_norm):
    """Regularization weights (mu, rho) for the current gradient norm."""
    if grad_norm <= 0.0:
        raise ValueError("grad_norm must be positive; the outer loop stops at zero gradients")
    if config.n is None:
        raise ValueError("schedule is not bound to a problem dimension; call bind(n)")
    p = config.p
    mu = config.c1 ** ((p - 1.0) / 2.0) * grad_norm ** ((3.0 - p) / 2.0)
    rho = min(
        (config.q / math.sqrt(config.n)) * grad_norm,
        config.c2 * grad_norm ** ((p + 1.0) / 2.0),
    )
    return mu, rho


def decrease_coefficient(p, q):
    """3 - (1+q)**((3-p)/(p-1)); positive is required for per-step descent."""
    return 3.0 - (1.0 + q) ** ((3.0 - p) / (p - 1.0))


def growth_factor(p, q):
    """Upper bound on the one-step gradient-norm growth ratio."""
    return 1.0 + 2.0 * q + (1.0 + q) ** (2.0 / (p - 1.0))


def preset(name, p):
    """Damping ratios (q, theta) for a named preset at exponent ``p``."""
    if not 1.0 < p <= 3.0:
        raise ValueError("p must lie in (1, 3]")
    if name == "example1":
        return 0.0, 3.0 / 8.0
    if name == "example2":
        # First branch blows up as p -> 3 while the second tends to 1/20, so
        # the min passes to the limit value there.
        if p == 3.0:
            q = 0.05
        else:
            q1 = (2.0 ** ((p - 1.0) / (3.0 - p)) - 1.0) / 10.0
            q2 = 2.0 ** ((3.0 - p) / (p - 1.0)) / 20.0
            q = min(q1, q2)
        return q, 0.2
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


def minimal_nu(theta, gamma):
    """Smallest nu such that theta**k <= nu/k^2 and (gamma*theta)**(k/2) <= nu/k^2 for all k >= 1.

    Both k^2-weighted sequences are unimodal in k, so scanning a few indices
    past their analytic maximizers 2/log(1/theta) and 4/log(1/(gamma*theta))
    is exhaustive.
    """
    product = gamma * theta
    if not (0.0 < theta < 1.0 and 0.0 < product < 1.0):
        raise ValueError("need theta in (0,1) and gamma*theta < 1")
    k_top = max(2.0 / math.log(1.0 / theta), 4.0 / math.log(1.0 / product))
    k_max = max(int(math.ceil(k_top)) + 3, 4)
    nu = 0.0
    for k in range(1, k_max + 1):
        nu = max(nu, k * k * theta**k, k * k * product ** (k / 2.0))
    return nu


def validate_assumptions(p, q, theta):
    """Check a ``(p, q, theta)`` triple and compute its certificate witnesses."""
    if not 1.0 < p <= 3.0:
        raise ValueError("p must lie in (1, 3]")
    if q < 0.0:
        raise ValueError("q must be nonnegative")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    s = decrease_coefficient(p, q)
    gamma = growth_factor(p, q)
    product = gamma * theta
    ok_rate = q < theta and product < 1.0
    nu = minimal_nu(theta, gamma) if ok_rate else None
    return AssumptionReport(
        p=p,
        q=q,
        theta=theta,
        decrease_coeff=s,
        growth_factor=gamma,
        product=product,
        ok_decrease=s > 0.0,
        ok_growth=gamma >= 1.0,
        ok_rate=ok_rate,
        nu=nu,
        ell=1 if ok_rate else None,
    )


def rate_constants(p, q, theta, c1, radius, x_star_norm):
    """Distance bound D and sufficient-decrease constant tau for a certificate.

    ``radius`` bounds the iterate norms over the run and ``x_star_norm`` is the
    norm of the reference minimizer; D = radius + x_star_norm.  tau scales the
    per-step decrease -tau*(f(x_k)-f*)^(3/2) required on slow steps.
    """
    if theta <= q:
        raise ValueError("theta must exceed q; the decrease constant vanishes otherwise")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if radius <= 0.0 or x_star_norm < 0.0:
        raise ValueError("radius must be positive and x_star_norm nonnegative")
    if c1 <= 0.0:
        raise ValueError("c1 must be positive")
    big_d = radius + x_star_norm
    expo = (3.0 - p) / (p - 1.0)
    power = p / (p - 1.0)
    tau = ((theta - q) ** power * decrease_coefficient(p, q)) / (
        3.0 * math.sqrt(c1) * big_d**1.5 * (1.0 + (1.0 + q) ** expo) ** power
    )
    return big_d, tau


@dataclass(frozen=True)
class ParameterScan:
    """Grid evaluation of the l1-enabled preset over p in [1.01, 3]."""

    p_grid: np.ndarray
    q_values: np.ndarray
    decrease_values: np.ndarray
    growth_values: np.ndarray
    damped_growth_values: np.ndarray  # theta * growth_factor at theta = 1/5
    q_increasing_below_two: bool
    q_decreasing_above_two: bool


def monotonicity_scan(step=0.01):
    """Evaluate the l1-enabled preset on a p-grid and report shape facts.

    The grid runs from 1.01 to 3.0 inclusive.  Monotonicity of q is checked
    with strict comparisons on both sides of its maximum at p = 2.
    """
    if step > 0.01:
        raise ValueError("grid step must be at most 0.01")
    count = int(round((3.0 - 1.01) / step)) + 1
    p_grid = np.linspace(1.01, 3.0, count)
    q_values = np.empty(count)
    theta = 0.2
    for i, p in enumerate(p_grid):
        q_values[i], _ = preset("example2", float(p))
    decrease_values = np.array(
        [decrease_coefficient(float(p), float(q)) for p, q in zip(p_grid, q_values)]
    )
    growth_values = np.array(
        [growth_factor(float(p), float(q)) for p, q in zip(p_grid, q_values)]
    )
    left = p_grid <= 2.0 + 1e-9
    right = p_grid >= 2.0 - 1e-9
    return ParameterScan(
        p_grid=p_grid,
        q_values=q_values,
        decrease_values=decrease_values,
        growth_values=growth_values,
        damped_growth_values=theta * growth_values,
        q_increasing_below_two=bool(np.all(np.diff(q_values[left]) > 0.0)),
        q_decreasing_above_two=bool(np.all(np.diff(q_values[right]) < 0.0)),
    )
