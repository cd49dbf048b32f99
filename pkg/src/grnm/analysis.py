"""Convergence certificates: global O(1/k^2) envelopes and local rates.

A certificate re-examines a finished trajectory against the quantities that
drive the global guarantee: monotone values, bounded gradient growth, the
gap-gradient inequality with the distance constant D, sufficient decrease on
"slow" steps (those whose gradient norm shrinks by less than theta), and the
resulting k^-2 envelope on the optimality gap.  Local tools estimate the
observed convergence order from tail errors.
"""

import math
from dataclasses import dataclass

import numpy as np

from .schedule import growth_factor, rate_constants, validate_assumptions

_EPS = float(np.finfo(np.float64).eps)
_REL = 1e-6  # relative slack applied to every inequality re-check


def slow_step_indices(grad_norms, theta):
    """Indices i with theta * ||g_i|| <= ||g_{i+1}||: steps with slow gradient decay."""
    g = np.asarray(grad_norms, dtype=np.float64)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return np.nonzero(theta * g[:-1] <= g[1:])[0]


@dataclass(frozen=True)
class SeriesCheck:
    """One inequality re-checked across a trajectory."""

    name: str
    ok: bool
    first_violation: int | None
    margin: float  # min over indices of allowed/observed; inf when unconstrained

    def to_json_dict(self):
        margin = None if math.isinf(self.margin) else self.margin
        return {"name": self.name, "ok": self.ok,
                "first_violation": self.first_violation, "margin": margin}


def _series(name, ok_flags, margins, indices):
    ok_flags = np.asarray(ok_flags, dtype=bool)
    margins = np.asarray(margins, dtype=np.float64)
    if ok_flags.size == 0:
        return SeriesCheck(name, True, None, math.inf)
    ok = bool(ok_flags.all())
    first = None if ok else int(indices[int(np.argmin(ok_flags))])
    margin = float(margins.min()) if margins.size else math.inf
    return SeriesCheck(name, ok, first, margin)


def _ratio(allowed, observed):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(observed > 0.0, allowed / np.maximum(observed, 1e-300), math.inf)
    return out


@dataclass
class CertificateReport:
    """Outcome of a global-rate certification."""

    theta: float
    gamma: float
    delta: float
    tau: float
    nu: float
    ell: int
    slow_indices: np.ndarray
    case: str  # "finite_slow_set" | "persistent_slow_set"
    hypothesis_checks: tuple
    envelope_check: SeriesCheck
    envelope_start: int
    envelope_values: np.ndarray
    gaps: np.ndarray
    empirical_radius: bool
    passed: bool

    @property
    def min_margin(self):
        return self.envelope_check.margin

    def all_checks(self):
        return tuple(self.hypothesis_checks) + (self.envelope_check,)

    def counts(self):
        """(passed, failed) over all individual checks."""
        ok = sum(1 for c in self.all_checks() if c.ok)
        return ok, len(self.all_checks()) - ok

    def to_json_dict(self):
        return {
            "passed": self.passed,
            "case": self.case,
            "empirical_radius": self.empirical_radius,
            "constants": {"theta": self.theta, "gamma": self.gamma, "delta": self.delta,
                          "tau": self.tau, "nu": self.nu, "ell": self.ell},
            "slow_indices": [int(i) for i in self.slow_indices],
            "envelope_start": int(self.envelope_start),
            "checks": [c.to_json_dict() for c in self.all_checks()],
        }

    def format_table(self):
        rows = [f"{'check':34s} {'status':7s} {'first-violation':16s} margin"]
        for c in self.all_checks():
            status = "pass" if c.ok else "FAIL"
            where = "-" if c.first_violation is None else str(c.first_violation)
            margin = "inf" if math.isinf(c.margin) else f"{c.margin:.6g}"
            rows.append(f"{c.name:34s} {status:7s} {where:16s} {margin}")
        note = " (empirical radius: necessary-condition check only)" if self.empirical_radius else ""
        rows.append(f"case: {self.case}{note}")
        return "\n".join(rows)


def check_rate_certificate(f_values, grad_norms, f_star, theta, gamma, delta, tau,
                           nu=None, ell=None, empirical_radius=False):
    """Re-check every ingredient of the global k^-2 guarantee on observed data.

    All inequalities get 1e-6 relative slack plus rounding-level cushions.
    The envelope compares f_k - f_star against theta**-(i+1) * nu * delta *
    ||g_{i+1}|| / k^2 past the last slow step i when the slow set ends early,
    and against max(36/(tau^2 (k+4)^2), nu * delta * ||g_0|| / k^2) otherwise.
    """
    fs = np.asarray(f_values, dtype=np.float64)
    gs = np.asarray(grad_norms, dtype=np.float64)
    if fs.shape != gs.shape or fs.ndim != 1 or fs.size == 0:
        raise ValueError("need matching nonempty value and gradient-norm sequences")
    if nu is None or ell is None:
        raise ValueError("nu and ell are required; compute them via validate_assumptions")
    last = fs.size - 1
    gaps = fs - f_star
    f_cushion = 64.0 * _EPS * np.maximum(np.abs(fs), 1.0)

    checks = []
    pair_idx = np.arange(last)

    drop = fs[1:] - fs[:-1]
    allowed = f_cushion[:-1]
    checks.append(_series("monotone_values", drop <= allowed,
                          np.where(drop > 0, _ratio(allowed, drop), math.inf), pair_idx))

    allowed = gamma * gs[:-1] * (1.0 + _REL) + 64.0 * _EPS * gs[:-1]
    checks.append(_series("gradient_growth", gs[1:] <= allowed,
                          _ratio(allowed, gs[1:]), pair_idx))

    allowed = delta * gs * (1.0 + _REL) + f_cushion
    checks.append(_series("gap_gradient_bound", gaps <= allowed,
                          _ratio(allowed, gaps), np.arange(fs.size)))

    admissible = 0.0 < theta < 1.0 and gamma * theta < 1.0 and nu > 0.0 and ell >= 1
    checks.append(SeriesCheck("envelope_constants", admissible, None,
                              math.inf if admissible else 0.0))

    slow = slow_step_indices(gs, theta)
    if slow.size:
        required = -tau * np.maximum(gaps[slow], 0.0) ** 1.5
        slow_drop = fs[slow + 1] - fs[slow]
        tol = _REL * np.abs(required) + f_cushion[slow]
        with np.errstate(divide="ignore", invalid="ignore"):
            margins = np.where(required < 0.0,
                               np.where(slow_drop < 0.0, slow_drop / required, 0.0),
                               math.inf)
        checks.append(_series("slow_step_decrease", slow_drop <= required + tol, margins, slow))
    else:
        checks.append(SeriesCheck("slow_step_decrease", True, None, math.inf))

    top = int(slow.max()) if slow.size else -1
    if top + 2 <= last:
        case = "finite_slow_set"
        start = max(int(ell), top + 2)
        ks = np.arange(start, last + 1)
        envelope = (theta ** -(top + 1)) * nu * delta * gs[top + 1] / ks.astype(np.float64) ** 2
    else:
        case = "persistent_slow_set"
        start = int(ell)
        ks = np.arange(start, last + 1)
        kf = ks.astype(np.float64)
        envelope = np.maximum(36.0 / (tau**2 * (kf + 4.0) ** 2), nu * delta * gs[0] / kf**2)
    if ks.size:
        allowed = envelope * (1.0 + _REL) + f_cushion[ks]
        env_check = _series("gap_envelope", gaps[ks] <= allowed,
                            _ratio(envelope, np.maximum(gaps[ks], 0.0)), ks)
    else:
        env_check = SeriesCheck("gap_envelope", True, None, math.inf)

    passed = all(c.ok for c in checks) and env_check.ok
    return CertificateReport(
        theta=theta, gamma=gamma, delta=delta, tau=tau, nu=nu, ell=int(ell),
        slow_indices=slow, case=case, hypothesis_checks=tuple(checks),
        envelope_check=env_check, envelope_start=start,
        envelope_values=envelope, gaps=gaps, empirical_radius=empirical_radius,
        passed=passed,
    )


def certify_run(trajectory, schedule_config, theta, metadata, radius=None):
    """Certify a finished run against the global guarantee.

    The iterate-norm radius comes from, in order: the ``radius`` argument, the
    problem's sublevel radius (when the run starts at or below the value it
    was derived for), else the observed sup of iterate norms — in which case
    the certificate is marked empirical (necessary-condition check only).
    Requires the problem's optimal value and a reference minimizer.
    """
    if metadata.f_star is None or metadata.x_star is None:
        raise ValueError("certification needs the optimal value and a minimizer")
    sched = schedule_config
    if sched.n is None:
        raise ValueError("schedule is not bound to a problem dimension")
    records = trajectory.records
    iterate_norms = np.array([float(np.linalg.norm(r.x)) for r in records])
    empirical = False
    if radius is None:
        radius = metadata.sublevel_radius
        if radius is not None and metadata.start_value is not None:
            sv = metadata.start_value
            if records[0].f > sv + 1e-9 * max(1.0, abs(sv)):
                radius = None  # started above the sublevel the radius certifies
        if radius is None:
            radius = float(iterate_norms.max())
            empirical = True
    if not empirical and float(iterate_norms.max()) > radius * (1.0 + 1e-9):
        raise RuntimeError("iterates left the claimed sublevel ball; the stated radius "
                           "does not apply to this run")

    x_star_norm = float(np.linalg.norm(metadata.x_star))
    admissibility = validate_assumptions(sched.p, sched.q, theta)
    if not admissibility.all_ok:
        raise ValueError("the (p, q, theta) triple is inadmissible; no certificate exists")
    delta, tau = rate_constants(sched.p, sched.q, theta, sched.c1, radius, x_star_norm)
    gamma = growth_factor(sched.p, sched.q)
    return check_rate_certificate(
        trajectory.f_values(), trajectory.grad_norms(), metadata.f_star,
        theta, gamma, delta, tau,
        nu=admissibility.nu, ell=admissibility.ell, empirical_radius=empirical,
    )


@dataclass(frozen=True)
class LocalRateEstimate:
    """Observed local order from tail errors e_{k+1} ~ e_k^order."""

    order: float | None
    ratios: tuple
    indices: tuple
    conclusive: bool


def estimate_order_from_errors(errors, window=6, floor=None, cap=1e-2):
    """Median of log e_{k+1} / log e_k over usable consecutive tail errors.

    Usable means strictly inside (floor, cap); floor defaults to 100 eps,
    below which distances are rounding noise.  Inconclusive (order None) with
    fewer than three usable points.
    """
    if floor is None:
        floor = 100.0 * _EPS
    errors = [None if e is None else float(e) for e in errors]
    usable = [i for i, e in enumerate(errors) if e is not None and floor < e < cap]
    usable = usable[-window:]
    pairs = [(i, i + 1) for i in usable if i + 1 in set(usable)]
    if len(usable) < 3 or len(pairs) < 2:
        return LocalRateEstimate(None, (), tuple(usable), False)
    ratios = tuple(math.log(errors[j]) / math.log(errors[i]) for i, j in pairs)
    return LocalRateEstimate(float(np.median(ratios)), ratios, tuple(usable), True)


def estimate_local_order(trajectory, oracle, window=6, cap=1e-2):
    """Observed convergence order of a run that reached a tight optimum.

    The run must end with gradient norm <= 1e-8, and the oracle must know its
    solution set (distances are measured against it).
    """
    if trajectory.final.grad_norm > 1e-8:
        raise ValueError("run did not reach a tight stationary point; the tail is "
                         "not in the local regime")
    errors = [oracle.distance_to_solutions(r.x) for r in trajectory.records]
    if any(e is None for e in errors):
        raise ValueError("oracle does not expose its solution set")
    return estimate_order_from_errors(errors, window=window, cap=cap)


@dataclass(frozen=True)
class StepDistanceReport:
    """Ratios ||d_k|| / dist(x_k) over the tail; both sides should stay bounded."""

    ratios: tuple
    min_ratio: float
    max_ratio: float
    ok: bool


def check_step_distance_ratios(trajectory, oracle, tail=10):
    """Compare step lengths with distances to the solution set near the end.

    Near a minimizer the step is equivalent to the distance, so the ratios
    must stay strictly positive and bounded; a vanishing ratio flags a stall
    (zero steps away from the solution set).
    """
    rows = []
    for r in trajectory.records:
        if not r.has_step:
            continue
        e = oracle.distance_to_solutions(r.x)
        if e is None:
            raise ValueError("oracle does not expose its solution set")
        if e <= 100.0 * _EPS:
            continue  # inside rounding noise of the solution set
        rows.append(r.d_norm / e)
    rows = rows[-tail:]
    if not rows:
        return StepDistanceReport((), math.inf, 0.0, False)
    finite = all(math.isfinite(v) for v in rows)
    return StepDistanceReport(tuple(rows), min(rows), max(rows),
                              finite and min(rows) > 0.0)
