"""Outer loop: damped Newton steps from the regularized local model.

Each iteration evaluates the objective, stops if the gradient norm is within
tolerance, computes the weights from the schedule, solves the inner model to
a gradient-scaled tolerance, and takes the full step.  The trajectory records
everything needed to re-check the per-step decrease/growth bounds and the
global rate certificate after the fact.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import subproblem
from .schedule import decrease_coefficient, growth_factor, mu_rho

_EPS = float(np.finfo(np.float64).eps)

#: trajectory CSV column order (wall times live in the JSON form only, to keep
#: CSV output bit-reproducible across runs)
CSV_COLUMNS = ("k", "f", "grad_norm", "mu", "rho", "d_norm", "inner_residual")


class ConfigurationError(ValueError):
    """Run refused: the configuration violates a precondition of the method."""


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop settings.  ``schedule`` may be unbound; run() binds it.

    The inner tolerance at gradient norm g is
    max(min(inner_tol_cap, inner_tol_coeff * g**((p+1)/2)), 64 eps g); the
    last term keeps the target above what double precision can certify.
    A run is refused when c1 undercuts the problem's Taylor modulus unless
    ``allow_small_c1`` is set.  ``debug_assertions`` re-checks the per-step
    bounds online and raises on violation.
    """

    schedule: object
    epsilon: float = 1e-8
    max_outer: int = 500
    inner_tol_cap: float = 1e-10
    inner_tol_coeff: float = 1e-3
    max_inner: int = 200_000
    allow_small_c1: bool = False
    debug_assertions: bool = False

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not (self.inner_tol_cap > 0.0 and self.inner_tol_coeff > 0.0):
            raise ValueError("inner tolerance parameters must be positive")


@dataclass
class IterationRecord:
    """State at iterate k plus, when a step was taken, its step data."""

    k: int
    x: np.ndarray
    f: float
    grad_norm: float
    grad_inf_norm: float
    gradient: np.ndarray
    mu: float | None = None
    rho: float | None = None
    d: np.ndarray | None = None
    d_norm: float | None = None
    inner_residual: float | None = None
    inner_tolerance: float | None = None
    inner_iterations: int | None = None
    subproblem_objective: float | None = None
    hessian_norm: float | None = None  # Frobenius; sizes the residual noise floor
    wall_time_ms: float | None = None

    @property
    def has_step(self):
        return self.d is not None


def _csv_cell(value):
    return "" if value is None else repr(float(value))


@dataclass
class Trajectory:
    """A full run: visited iterates, step data, and how the run ended."""

    records: list
    termination: str  # "converged" | "max_iterations" | "inner_failure"
    problem: str = ""
    config: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.records[-1]

    @property
    def iterations(self):
        return len(self.records) - 1

    def f_values(self):
        return np.array([r.f for r in self.records])

    def grad_norms(self):
        return np.array([r.grad_norm for r in self.records])

    def csv_text(self):
        lines = [",".join(CSV_COLUMNS)]
        for r in self.records:
            lines.append(",".join([
                str(r.k),
                repr(float(r.f)),
                repr(float(r.grad_norm)),
                _csv_cell(r.mu),
                _csv_cell(r.rho),
                _csv_cell(r.d_norm),
                _csv_cell(r.inner_residual),
            ]))
        return "\n".join(lines) + "\n"

    def to_json_dict(self):
        records = []
        for r in self.records:
            records.append({
                "k": r.k,
                "x": [float(v) for v in r.x],
                "f": float(r.f),
                "grad_norm": float(r.grad_norm),
                "grad_inf_norm": float(r.grad_inf_norm),
                "gradient": [float(v) for v in r.gradient],
                "mu": None if r.mu is None else float(r.mu),
                "rho": None if r.rho is None else float(r.rho),
                "d": None if r.d is None else [float(v) for v in r.d],
                "d_norm": None if r.d_norm is None else float(r.d_norm),
                "inner_residual": None if r.inner_residual is None else float(r.inner_residual),
                "inner_tolerance": None if r.inner_tolerance is None else float(r.inner_tolerance),
                "inner_iterations": r.inner_iterations,
                "subproblem_objective": None if r.subproblem_objective is None
                                        else float(r.subproblem_objective),
                "hessian_norm": None if r.hessian_norm is None else float(r.hessian_norm),
                "wall_time_ms": None if r.wall_time_ms is None else float(r.wall_time_ms),
            })
        return {
            "problem": self.problem,
            "termination": self.termination,
            "config": self.config,
            "records": records,
        }

    def to_json_text(self):
        return json.dumps(self.to_json_dict(), indent=1) + "\n"

    @classmethod
    def from_json_dict(cls, data):
        records = []
        for r in data["records"]:
            records.append(IterationRecord(
                k=int(r["k"]),
                x=np.array(r["x"], dtype=np.float64),
                f=float(r["f"]),
                grad_norm=float(r["grad_norm"]),
                grad_inf_norm=float(r["grad_inf_norm"]),
                gradient=np.array(r["gradient"], dtype=np.float64),
                mu=r["mu"],
                rho=r["rho"],
                d=None if r["d"] is None else np.array(r["d"], dtype=np.float64),
                d_norm=r["d_norm"],
                inner_residual=r["inner_residual"],
                inner_tolerance=r["inner_tolerance"],
                inner_iterations=r["inner_iterations"],
                subproblem_objective=r["subproblem_objective"],
                hessian_norm=r.get("hessian_norm"),
                wall_time_ms=r["wall_time_ms"],
            ))
        return cls(records=records, termination=data["termination"],
                   problem=data.get("problem", ""), config=dict(data.get("config", {})))


def inner_tolerance(config, schedule_config, grad_norm):
    """Gradient-scaled target for the inner optimality residual."""
    scaled = config.inner_tol_coeff * grad_norm ** ((schedule_config.p + 1.0) / 2.0)
    return max(min(config.inner_tol_cap, scaled), 64.0 * _EPS * grad_norm)


def run(oracle, x0, config):
    """Minimize ``oracle`` from ``x0``; returns the full Trajectory.

    Stops with termination "converged" once the gradient norm reaches
    config.epsilon, "max_iterations" after max_outer steps, and
    "inner_failure" if an inner solve cannot reach its tolerance (the failing
    step's best iterate is recorded but not taken).
    """
    sched = config.schedule
    if sched.n is None:
        sched = sched.bind(oracle.n)
    elif sched.n != oracle.n:
        raise ConfigurationError(f"schedule is bound to n={sched.n} but the problem has n={oracle.n}")
    modulus = oracle.metadata.taylor_bound
    if modulus is not None and sched.c1 < modulus and not config.allow_small_c1:
        raise ConfigurationError(
            f"c1={sched.c1:g} is below the problem's Taylor modulus {modulus:g}; the decrease "
            "guarantee needs c1 >= modulus (set allow_small_c1 to run anyway)")

    x = np.array(x0, dtype=np.float64).reshape(-1)
    if x.shape != (oracle.n,):
        raise ValueError(f"x0 must have shape ({oracle.n},)")

    records = []
    termination = "max_iterations"
    for k in range(config.max_outer + 1):
        tick = time.perf_counter()
        f = float(oracle.value(x))
        g = np.asarray(oracle.gradient(x), dtype=np.float64)
        gn = float(np.linalg.norm(g))
        gi = float(np.abs(g).max())
        if not (math.isfinite(f) and math.isfinite(gn)):
            raise RuntimeError(f"objective returned non-finite values at iteration {k}")
        rec = IterationRecord(k=k, x=x.copy(), f=f, grad_norm=gn, grad_inf_norm=gi,
                              gradient=g.copy())
        if config.debug_assertions and records:
            report = check_iteration_bounds(records[-1], rec, sched)
            if not report.all_ok:
                bad = ", ".join(c.name for c in report.failures())
                raise RuntimeError(f"per-step bound violated at iteration {k}: {bad}")
        if gn <= config.epsilon:
            rec.wall_time_ms = (time.perf_counter() - tick) * 1e3
            records.append(rec)
            termination = "converged"
            break
        if k == config.max_outer:
            rec.wall_time_ms = (time.perf_counter() - tick) * 1e3
            records.append(rec)
            termination = "max_iterations"
            break

        mu, rho = mu_rho(sched, gn)
        if rho >= gi:
            raise ConfigurationError(
                f"l1 weight rho={rho:g} reached the max-abs gradient entry {gi:g}; the step "
                "could stall at zero (configure q below 1)")
        tol = inner_tolerance(config, sched, gn)
        H = np.asarray(oracle.hessian(x), dtype=np.float64)
        instance = subproblem.SubproblemInstance(g=g, H=H, mu=mu, p=sched.p, rho=rho)
        try:
            sol = subproblem.solve(instance, tol, config.max_inner)
            failed = False
        except subproblem.InexactSolveError as err:
            sol = err.solution
            failed = True
        rec.mu, rec.rho = mu, rho
        rec.d = sol.d
        rec.d_norm = float(np.linalg.norm(sol.d))
        rec.inner_residual = sol.residual
        rec.inner_tolerance = tol
        rec.inner_iterations = sol.inner_iterations
        rec.subproblem_objective = sol.objective_value
        rec.hessian_norm = float(np.sqrt(np.sum(H * H)))
        rec.wall_time_ms = (time.perf_counter() - tick) * 1e3
        records.append(rec)
        if failed:
            termination = "inner_failure"
            break
        x = x + sol.d

    return Trajectory(records=records, termination=termination, config={
        "p": sched.p, "c1": sched.c1, "c2": sched.c2, "q": sched.q, "n": sched.n,
        "epsilon": config.epsilon, "max_outer": config.max_outer,
        "inner_tol_cap": config.inner_tol_cap, "inner_tol_coeff": config.inner_tol_coeff,
    })


@dataclass(frozen=True)
class BoundCheck:
    name: str
    ok: bool
    lhs: float
    rhs: float
    slack: float


@dataclass(frozen=True)
class StepBoundsReport:
    checks: tuple

    @property
    def all_ok(self):
        return all(c.ok for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.ok]


def check_iteration_bounds(prev, curr, schedule_config):
    """Re-check the one-step bounds between two consecutive records.

    Checked, with 1e-6 relative slack plus rounding- and inexactness-scaled
    cushions: the step is nonzero and a descent direction, the inner residual
    met its tolerance, the value decrease and new-gradient bounds driven by
    the decrease coefficient, the gradient growth factor, and the step-norm
    cap sqrt(grad_norm/c1) * (1+q)^(1/(p-1)).
    """
    if not prev.has_step:
        raise ValueError("previous record carries no step data")
    if schedule_config.n is None:
        raise ValueError("schedule is not bound to a problem dimension")
    p, q, c1, c2 = (schedule_config.p, schedule_config.q,
                    schedule_config.c1, schedule_config.c2)
    n = schedule_config.n
    s = decrease_coefficient(p, q)
    gamma = growth_factor(p, q)
    expo = (3.0 - p) / (p - 1.0)
    rel = 1e-6

    gn, dn, mu, res = prev.grad_norm, prev.d_norm, prev.mu, prev.inner_residual
    f_scale = 64.0 * _EPS * max(abs(prev.f), abs(curr.f), 1.0)
    checks = []

    checks.append(BoundCheck("nonzero_step", dn > 0.0, dn, 0.0, 0.0))

    slope = float(np.dot(prev.gradient, prev.d))
    slope_tol = 64.0 * _EPS * gn * dn
    checks.append(BoundCheck("descent_direction", slope <= slope_tol, slope, 0.0, slope_tol))

    # the residual cannot be certified below its own measurement noise, so
    # the floor built from the recorded magnitudes joins the tolerance
    floor = 64.0 * _EPS * (gn + (prev.hessian_norm or 0.0) * dn
                           + mu * dn ** (p - 1.0) + math.sqrt(n) * prev.rho)
    allowed = max(prev.inner_tolerance, floor)
    checks.append(BoundCheck("inner_residual_within_tolerance",
                             res <= allowed, res, allowed, 0.0))

    rhs = -(s / 3.0) * mu * dn**p
    tol = rel * abs(rhs) + f_scale + res * dn
    checks.append(BoundCheck("value_decrease", curr.f - prev.f <= rhs + tol,
                             curr.f - prev.f, rhs, tol))

    rhs = (1.0 + (1.0 + q) ** expo) * mu * dn ** (p - 1.0) + min(
        q * gn, math.sqrt(n) * c2 * gn ** ((p + 1.0) / 2.0))
    # f_scale floor: on the last steps the measured gradient is pure oracle
    # evaluation rounding while rhs collapses quadratically; below machine
    # noise at the objective's own scale the inequality is unfalsifiable.
    tol = rel * rhs + res + 64.0 * _EPS * gn + f_scale
    checks.append(BoundCheck("new_gradient_bound", curr.grad_norm <= rhs + tol,
                             curr.grad_norm, rhs, tol))

    rhs = gamma * gn
    tol = rel * rhs + res + 64.0 * _EPS * gn
    checks.append(BoundCheck("gradient_growth_factor", curr.grad_norm <= rhs + tol,
                             curr.grad_norm, rhs, tol))

    rhs = (1.0 + q) ** (1.0 / (p - 1.0)) * math.sqrt(gn / c1)
    shift = mu * dn ** (p - 2.0) if dn > 0.0 else 0.0
    tol = rel * rhs + (res / shift if shift > 0.0 else 0.0) + 64.0 * _EPS * rhs
    checks.append(BoundCheck("step_norm_bound", dn <= rhs + tol, dn, rhs, tol))

    return StepBoundsReport(checks=tuple(checks))
