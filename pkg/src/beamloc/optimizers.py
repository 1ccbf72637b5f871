"""Bounded quasi-Newton drivers with full iterate traces.

Two methods over box-constrained dimensionless stiffness variables: L-BFGS
with a strong-Wolfe line search (bounds by projection of the search segment)
and a dogleg trust region on a BFGS model rebuilt from the same limited
history (box handled by step truncation). Both are monotone on accepted
iterates and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg

from .beam import BeamConfig, DamageParams
from .errors import InvalidInputError
from .measurements import MeasuredModes
from .objective import ObjectiveWeights, evaluate_objective


class Method(Enum):
    LBFGS = "lbfgs"
    TRUST_REGION = "trust_region"


class Termination(Enum):
    GRAD_TOL = "grad_tol"
    STEP_TOL = "step_tol"
    MAX_ITER = "max_iter"
    STALLED = "stalled"
    ERROR = "error"


@dataclass(frozen=True)
class TrustRegionSettings:
    initial_radius: float = 0.5
    max_radius: float = 2.0
    shrink_threshold: float = 0.25
    grow_threshold: float = 0.75
    shrink_factor: float = 0.5
    grow_factor: float = 2.0
    accept_ratio: float = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    method: Method = Method.LBFGS
    memory: int = 10
    max_iterations: int = 200
    grad_tolerance: float = 1e-8
    step_tolerance: float = 1e-12
    bounds: tuple = (0.05, 1.5)
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    trust_region: TrustRegionSettings = field(default_factory=TrustRegionSettings)

    def __post_init__(self):
        if self.memory < 1 or self.max_iterations < 1:
            raise InvalidInputError("memory and max_iterations must be positive")
        if self.grad_tolerance <= 0 or self.step_tolerance <= 0:
            raise InvalidInputError("tolerances must be positive")
        lo, hi = self.bounds
        if not np.all(np.asarray(lo) < np.asarray(hi)):
            raise InvalidInputError(f"bounds must satisfy lo < hi, got {self.bounds}")


@dataclass
class IterationRecord:
    iteration: int
    stage: str
    x: np.ndarray
    theta: np.ndarray
    value: float
    grad_norm: float
    step_norm: float
    n_evals: int


@dataclass
class StageEvent:
    iteration: int
    label: str
    value_before: float
    value_after: float


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    events: list = field(default_factory=list)
    termination: Termination | None = None

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def iterations_in_stage(self, stage: str) -> int:
        return sum(1 for r in self.records if r.stage == stage and r.step_norm > 0)


def _broadcast_bounds(bounds, n: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (n,)).copy()
    return lo, hi


def projected_gradient_norm(x, g, lo, hi) -> float:
    return float(np.max(np.abs(x - np.clip(x - g, lo, hi))))


def two_loop_direction(g: np.ndarray, pairs: list) -> np.ndarray:
    """L-BFGS two-loop recursion: returns -H g for the implicit inverse Hessian."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _strong_wolfe(phi, f0, slope0, alpha_init, alpha_max, c1, c2, max_evals=25):
    """Line search satisfying the strong Wolfe conditions on [0, alpha_max].

    phi(alpha) -> (f, slope, payload). Returns (alpha, f, slope, payload,
    evals) or None if no sufficient-decrease point was found. If the curvature
    condition is unattainable inside the box, the best Armijo point is taken.
    """

    def zoom(a_lo, f_lo, g_lo, a_hi, f_hi, payload_lo, evals):
        for _ in range(max_evals):
            a = 0.5 * (a_lo + a_hi)
            f_a, g_a, payload = phi(a)
            evals += 1
            if f_a > f0 + c1 * a * slope0 or f_a >= f_lo:
                a_hi, f_hi = a, f_a
            else:
                if abs(g_a) <= -c2 * slope0:
                    return a, f_a, g_a, payload, evals
                if g_a * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, g_lo, payload_lo = a, f_a, g_a, payload
            if abs(a_hi - a_lo) < 1e-16:
                break
        if payload_lo is not None:
            return a_lo, f_lo, g_lo, payload_lo, evals
        return None

    alpha_prev, f_prev, g_prev = 0.0, f0, slope0
    payload_prev = None
    alpha = min(alpha_init, alpha_max)
    evals = 0
    for i in range(max_evals):
        f_a, g_a, payload = phi(alpha)
        evals += 1
        if f_a > f0 + c1 * alpha * slope0 or (i > 0 and f_a >= f_prev):
            return zoom(alpha_prev, f_prev, g_prev, alpha, f_a, payload_prev, evals)
        if abs(g_a) <= -c2 * slope0:
            return alpha, f_a, g_a, payload, evals
        if g_a >= 0:
            return zoom(alpha, f_a, g_a, alpha_prev, f_prev, payload, evals)
        if alpha >= alpha_max * (1.0 - 1e-12):
            # Bound active: sufficient decrease holds, curvature cannot.
            return alpha, f_a, g_a, payload, evals
        alpha_prev, f_prev, g_prev, payload_prev = alpha, f_a, g_a, payload
        alpha = min(2.0 * alpha, alpha_max)
    return None


def _max_feasible_step(x, d, lo, hi) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = np.where(d > 0, (hi - x) / d, np.where(d < 0, (lo - x) / d, np.inf))
    return float(np.min(steps))


_CURVATURE_SKIP = 1e-10
_TINY_DECREASE = 1e-14


def _record(trace, iteration, stage, x, theta_of, value, grad_norm, step_norm, n_evals):
    theta = theta_of(x) if theta_of is not None else x.copy()
    trace.records.append(
        IterationRecord(
            iteration=iteration,
            stage=stage,
            x=x.copy(),
            theta=np.asarray(theta, dtype=float),
            value=value,
            grad_norm=grad_norm,
            step_norm=step_norm,
            n_evals=n_evals,
        )
    )


def minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    config: OptimizerConfig,
    *,
    stage: str = "",
    theta_of: Callable[[np.ndarray], np.ndarray] | None = None,
    trace: RunTrace | None = None,
) -> tuple[np.ndarray, RunTrace]:
    """Minimize a smooth objective over a box; returns the best iterate.

    `objective` maps x to (value, gradient). Iterates never leave the box.
    An existing trace may be passed to accumulate multi-stage runs; records
    are appended with the given stage label.
    """
    x0 = np.asarray(x0, dtype=float)
    lo, hi = _broadcast_bounds(config.bounds, len(x0))
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise InvalidInputError("x0 violates bounds")
    if trace is None:
        trace = RunTrace()
    if config.method is Method.LBFGS:
        x = _minimize_lbfgs(objective, x0, config, lo, hi, stage, theta_of, trace)
    elif config.method is Method.TRUST_REGION:
        x = _minimize_trust_region(objective, x0, config, lo, hi, stage, theta_of, trace)
    else:
        raise InvalidInputError(f"unknown method {config.method!r}")
    return x, trace


def _minimize_lbfgs(objective, x0, config, lo, hi, stage, theta_of, trace):
    x = x0.copy()
    start_iter = trace.records[-1].iteration if trace.records else 0
    f, g = objective(x)
    n_evals = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        trace.termination = Termination.ERROR
        _record(trace, start_iter, stage, x, theta_of, f, np.nan, 0.0, n_evals)
        return x
    pg = projected_gradient_norm(x, g, lo, hi)
    _record(trace, start_iter, stage, x, theta_of, f, pg, 0.0, n_evals)

    pairs = []
    ls_failures = 0
    tiny_decreases = 0
    trace.termination = Termination.MAX_ITER
    for it in range(1, config.max_iterations + 1):
        pg = projected_gradient_norm(x, g, lo, hi)
        if pg < config.grad_tolerance:
            trace.termination = Termination.GRAD_TOL
            break

        d = two_loop_direction(g, pairs)
        if d @ g >= 0:
            pairs.clear()
            d = -g
        # Zero components that push against an active bound.
        blocked = ((x <= lo) & (d < 0)) | ((x >= hi) & (d > 0))
        if np.any(blocked):
            d = d.copy()
            d[blocked] = 0.0
            if not np.any(d) or d @ g >= 0:
                pairs.clear()
                d = -g
                d[blocked] = 0.0
                if not np.any(d):
                    trace.termination = Termination.STALLED
                    break
        alpha_max = _max_feasible_step(x, d, lo, hi)

        def phi(alpha):
            x_a = np.clip(x + alpha * d, lo, hi)
            f_a, g_a = objective(x_a)
            return f_a, float(g_a @ d), (x_a, f_a, g_a)

        slope0 = float(g @ d)
        result = _strong_wolfe(
            phi, f, slope0, min(1.0, alpha_max), alpha_max, config.wolfe_c1, config.wolfe_c2
        )
        if result is None:
            ls_failures += 1
            pairs.clear()
            if ls_failures >= 2:
                trace.termination = Termination.STALLED
                break
            continue
        alpha, _, _, (x_new, f_new, g_new), evals = result
        n_evals += evals
        if not np.isfinite(f_new) or not np.all(np.isfinite(g_new)):
            trace.termination = Termination.ERROR
            break
        ls_failures = 0

        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > _CURVATURE_SKIP * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            pairs.append((s, y, rho))
            if len(pairs) > config.memory:
                pairs.pop(0)

        decrease = f - f_new
        step_norm = float(np.max(np.abs(s)))
        x, f, g = x_new, f_new, g_new
        pg = projected_gradient_norm(x, g, lo, hi)
        _record(trace, start_iter + it, stage, x, theta_of, f, pg, step_norm, n_evals)

        if decrease < _TINY_DECREASE:
            tiny_decreases += 1
            if tiny_decreases >= 3:
                trace.termination = Termination.STALLED
                break
        else:
            tiny_decreases = 0
        if step_norm < config.step_tolerance:
            trace.termination = Termination.STEP_TOL
            break
    else:
        trace.termination = Termination.MAX_ITER
    return x


def _bfgs_matrix(pairs, n: int) -> np.ndarray:
    """Dense BFGS Hessian approximation rebuilt from the stored pairs."""
    if pairs:
        s, y, _ = pairs[-1]
        gamma = (y @ y) / (s @ y)
    else:
        gamma = 1.0
    B = gamma * np.eye(n)
    for s, y, _ in pairs:
        Bs = B @ s
        sBs = s @ Bs
        sy = s @ y
        if sy <= _CURVATURE_SKIP * np.linalg.norm(s) * np.linalg.norm(y) or sBs <= 0:
            continue
        B = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
    return B


def _dogleg_step(g, B, radius) -> np.ndarray:
    """Standard dogleg point of the quadratic model within the radius."""
    try:
        c, low = scipy.linalg.cho_factor(B)
        p_newton = scipy.linalg.cho_solve((c, low), -g)
    except scipy.linalg.LinAlgError:
        p_newton = None
    if p_newton is not None and np.linalg.norm(p_newton) <= radius:
        return p_newton
    gBg = g @ B @ g
    if gBg <= 0:
        return -radius * g / np.linalg.norm(g)
    p_cauchy = -(g @ g) / gBg * g
    norm_c = np.linalg.norm(p_cauchy)
    if p_newton is None or norm_c >= radius:
        return -radius * g / np.linalg.norm(g)
    # ||p_c + t (p_n - p_c)|| = radius, t in [0, 1]
    delta = p_newton - p_cauchy
    a = delta @ delta
    b = 2.0 * p_cauchy @ delta
    cc = norm_c**2 - radius**2
    t = (-b + np.sqrt(b**2 - 4 * a * cc)) / (2 * a)
    return p_cauchy + t * delta


def _minimize_trust_region(objective, x0, config, lo, hi, stage, theta_of, trace):
    tr = config.trust_region
    x = x0.copy()
    start_iter = trace.records[-1].iteration if trace.records else 0
    f, g = objective(x)
    n_evals = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        trace.termination = Termination.ERROR
        _record(trace, start_iter, stage, x, theta_of, f, np.nan, 0.0, n_evals)
        return x
    pg = projected_gradient_norm(x, g, lo, hi)
    _record(trace, start_iter, stage, x, theta_of, f, pg, 0.0, n_evals)

    pairs = []
    radius = tr.initial_radius
    tiny_decreases = 0
    accepted = 0
    trace.termination = Termination.MAX_ITER
    for _ in range(config.max_iterations):
        pg = projected_gradient_norm(x, g, lo, hi)
        if pg < config.grad_tolerance:
            trace.termination = Termination.GRAD_TOL
            break
        if accepted >= config.max_iterations:
            break

        B = _bfgs_matrix(pairs, len(x))
        p = _dogleg_step(g, B, radius)
        # Box intersection: truncate the step to stay feasible, then clip.
        t_box = min(1.0, _max_feasible_step(x, p, lo, hi))
        p = p * t_box
        x_new = np.clip(x + p, lo, hi)
        p = x_new - x
        predicted = -(g @ p + 0.5 * p @ B @ p)
        if predicted <= 0 or not np.any(p):
            radius *= tr.shrink_factor
            if radius < config.step_tolerance:
                trace.termination = Termination.STALLED
                break
            continue

        f_new, g_new = objective(x_new)
        n_evals += 1
        if not np.isfinite(f_new) or not np.all(np.isfinite(g_new)):
            trace.termination = Termination.ERROR
            break
        ratio = (f - f_new) / predicted

        if ratio < tr.shrink_threshold:
            radius *= tr.shrink_factor
        elif ratio > tr.grow_threshold and np.linalg.norm(p) >= 0.99 * radius:
            radius = min(tr.grow_factor * radius, tr.max_radius)
        if radius < config.step_tolerance:
            trace.termination = Termination.STALLED
            break

        if ratio > tr.accept_ratio and f_new < f:
            s = x_new - x
            y = g_new - g
            sy = s @ y
            if sy > _CURVATURE_SKIP * np.linalg.norm(s) * np.linalg.norm(y):
                pairs.append((s, y, 1.0 / sy))
                if len(pairs) > config.memory:
                    pairs.pop(0)
            decrease = f - f_new
            step_norm = float(np.max(np.abs(s)))
            x, f, g = x_new, f_new, g_new
            accepted += 1
            pg = projected_gradient_norm(x, g, lo, hi)
            _record(trace, start_iter + accepted, stage, x, theta_of, f, pg, step_norm, n_evals)
            if decrease < _TINY_DECREASE:
                tiny_decreases += 1
                if tiny_decreases >= 3:
                    trace.termination = Termination.STALLED
                    break
            else:
                tiny_decreases = 0
            if step_norm < config.step_tolerance:
                trace.termination = Termination.STEP_TOL
                break
    return x


def healthy_calibration(
    config: BeamConfig,
    measured_healthy: MeasuredModes,
    weights: ObjectiveWeights,
    opt_config: OptimizerConfig | None = None,
    initial_modulus: float = 10e9,
) -> tuple[DamageParams, RunTrace]:
    """Recover the healthy modulus field from an undamaged measurement.

    Runs the two-term objective (curvature weight forced to zero, as the
    global terms carry all the information for a homogeneous state) from a
    homogeneous initial guess.
    """
    if opt_config is None:
        opt_config = OptimizerConfig()
    weights = replace(weights, alpha_c=0.0, penalty_form=weights.penalty_form)
    e_h = config.healthy_youngs_modulus

    def objective(x):
        ev = evaluate_objective(config, DamageParams(x * e_h), measured_healthy, weights)
        return ev.value, ev.gradient * e_h

    x0 = np.full(config.n_elements, initial_modulus / e_h)
    x_best, trace = minimize(
        objective, x0, opt_config, stage="healthy", theta_of=lambda x: x * e_h
    )
    return DamageParams(x_best * e_h), trace
