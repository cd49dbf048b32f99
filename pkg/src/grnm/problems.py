"""Benchmark problem construction from JSON-style specs.

A problem spec is a flat dict with a ``kind`` plus either explicit float64
payload arrays (row-major lists) or generator parameters including a ``seed``;
generated instances are reproducible functions of (kind, dimensions, seed).
"""

import numpy as np

from .oracle import make_logistic, make_logsumexp, make_quadratic

PROBLEM_KINDS = ("quadratic", "logistic", "logsumexp")

# allowed keys per kind, split by explicit-payload vs generated route
_EXPLICIT_KEYS = {
    "quadratic": {"a", "b"},
    "logistic": {"x", "y"},
    "logsumexp": {"a", "b"},
}
_GENERATED_KEYS = {
    "quadratic": {"n", "rank", "seed", "eig_min", "eig_max"},
    "logistic": {"m", "n", "seed", "scale"},
    "logsumexp": {"m", "n", "seed", "scale", "offset_scale"},
}
_COMMON_KEYS = {"kind", "name", "start"}


def validate_problem_spec(spec):
    """Check keys and kind; raises ValueError naming any unknown keys."""
    if not isinstance(spec, dict):
        raise ValueError("problem spec must be an object")
    kind = spec.get("kind")
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"problem kind must be one of {PROBLEM_KINDS}, got {kind!r}")
    explicit = bool(_EXPLICIT_KEYS[kind] & set(spec))
    allowed = _COMMON_KEYS | (_EXPLICIT_KEYS[kind] if explicit else _GENERATED_KEYS[kind])
    unknown = sorted(set(spec) - allowed)
    if unknown:
        raise ValueError(f"unknown problem keys: {', '.join(unknown)}")
    if not explicit:
        needed = {"quadratic": {"n", "seed"}, "logistic": {"m", "n", "seed"},
                  "logsumexp": {"m", "n", "seed"}}[kind]
        missing = sorted(needed - set(spec))
        if missing:
            raise ValueError(f"generated {kind} problem needs keys: {', '.join(missing)}")
    return kind, explicit


def generate_quadratic(n, rank=None, seed=0, eig_min=0.5, eig_max=2.0):
    """Random PSD quadratic with the given rank; linear term inside the range."""
    n = int(n)
    rank = n if rank is None else int(rank)
    if not 0 < rank <= n:
        raise ValueError("rank must lie in 1..n")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.zeros(n)
    lam[:rank] = rng.uniform(eig_min, eig_max, rank)
    A = (basis * lam) @ basis.T
    A = 0.5 * (A + A.T)
    b = A @ rng.standard_normal(n)
    return A, b


def generate_logistic(m, n, seed=0, scale=1.0):
    """Random dense logistic data with labels drawn independently of the features."""
    rng = np.random.default_rng(seed)
    X = scale * rng.standard_normal((int(m), int(n)))
    y = rng.choice([-1.0, 1.0], int(m))
    return X, y


def generate_logsumexp(m, n, seed=0, scale=1.0, offset_scale=0.5):
    """Random soft-max instance; rows are centered so a minimizer exists."""
    rng = np.random.default_rng(seed)
    A = scale * rng.standard_normal((int(m), int(n)))
    A = A - A.mean(axis=0)  # zero mean row => 0 in the convex hull of the rows
    b = offset_scale * rng.standard_normal(int(m))
    return A, b


def build_problem(spec):
    """Oracle (plus optional explicit start) from one problem spec.

    Returns (oracle, start) where start is None unless the spec pins one.
    """
    kind, explicit = validate_problem_spec(spec)
    if kind == "quadratic":
        if explicit:
            oracle = make_quadratic(np.asarray(spec["a"], dtype=np.float64),
                                    np.asarray(spec["b"], dtype=np.float64))
        else:
            A, b = generate_quadratic(spec["n"], spec.get("rank"), spec["seed"],
                                      spec.get("eig_min", 0.5), spec.get("eig_max", 2.0))
            oracle = make_quadratic(A, b)
    elif kind == "logistic":
        if explicit:
            oracle = make_logistic(np.asarray(spec["x"], dtype=np.float64),
                                   np.asarray(spec["y"], dtype=np.float64))
        else:
            X, y = generate_logistic(spec["m"], spec["n"], spec["seed"],
                                     spec.get("scale", 1.0))
            oracle = make_logistic(X, y)
    else:
        if explicit:
            oracle = make_logsumexp(np.asarray(spec["a"], dtype=np.float64),
                                    np.asarray(spec["b"], dtype=np.float64))
        else:
            A, b = generate_logsumexp(spec["m"], spec["n"], spec["seed"],
                                      spec.get("scale", 1.0), spec.get("offset_scale", 0.5))
            oracle = make_logsumexp(A, b)
    start = spec.get("start")
    if start is not None:
        start = np.asarray(start, dtype=np.float64)
        if start.shape != (oracle.n,):
            raise ValueError(f"start must have length {oracle.n}")
    return oracle, start
