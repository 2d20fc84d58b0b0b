"""Minimization engine for the mean field grand potential.

Two-stage scheme shared by both solvers:

1. damped fixed-point iteration on the self-consistency map
   x <- (1-alpha)*x + alpha*G(x), where G returns the gap-equation right-hand
   side; alpha starts at ``mix`` and is halved when successive updates
   anti-align (two-cycling near first-order boundaries) and grown back toward
   a full step when they align;
2. a derivative-free Nelder-Mead polish of the objective, which never returns
   a value above its start.

The best converged candidate across all seeds wins, ties broken by seed
order, so a fixed seed list gives bit-identical output.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize


@dataclass
class MinimizeSpec:
    seeds: Sequence[np.ndarray]
    fatol: float = 1e-10        # objective change between outer iterations
    residual_tol: float = 1e-8  # gap-equation residual norm
    mix: float = 0.5
    max_fixed_point: int = 3000
    max_polish: int = 2000      # Nelder-Mead function-evaluation budget
    polish: bool = True
    collapse_index: int | None = None  # component watched for branch collapse
    collapse_tol: float = 1e-6
    collapse_patience: int = 10

    def __post_init__(self) -> None:
        if len(self.seeds) == 0:
            raise ValueError("at least one seed is required")
        if self.max_fixed_point <= 0 or self.max_polish <= 0:
            raise ValueError("iteration caps must be positive")


@dataclass
class MinimizeResult:
    x: np.ndarray
    value: float
    residual_norm: float
    converged: bool
    status: str  # 'converged' | 'collapsed' | 'max-iterations'
    n_iter: int
    seed_index: int = 0
    seed_statuses: list = field(default_factory=list)


ALPHA_MIN = 1e-7


def _fixed_point(evaluate, x0, spec: MinimizeSpec):
    """Stage 1: damped iteration of the self-consistency map.

    ``evaluate(x)`` returns the pair (objective value, map image); one call
    per iteration supplies both the residual and the descent monitor.

    Each component carries its own mixing weight, adapted from a secant
    estimate of that component's map slope: consecutive update steps satisfy
    step'_i ~ M_i * step_i with M_i = 1 + alpha_i*(G'_i - 1), so
    alpha_i/(1 - m_i) with m_i = step'_i/step_i is the weight that
    annihilates the error mode. This damps two-cycles (m < 0, including the
    near-discontinuous level-crossing steps that appear at very low
    temperature) and accelerates crawling modes (0 < m < 1). A global
    overshoot test retreats to the previous iterate whenever the residual
    norm doubles, so large trial weights are safe.

    At very low temperature the map is a staircase at fine scales (each
    single-particle level crossing the Fermi energy moves the order
    parameters by O(1/L^2)), and the self-consistent point can sit on a
    plateau boundary. The damped iteration then settles into a limit cycle
    between plateaus whose images lie in each other's regions, and no local
    slope information helps. When a stall with anti-aligned consecutive
    steps is detected the update switches to bisection between the two cycle
    points on the sign of <F(x), u>, u being the initial step direction;
    that sign flips across the boundary, so the midpoints home in on the
    thermally smoothed layer where the genuine root lives.
    """
    x = np.array(x0, dtype=float)
    alpha = np.full(x.shape, spec.mix)
    f, g = evaluate(x)
    df = np.inf
    step_old = None
    resid_old = np.inf
    x_prev = None
    best_resid = np.inf
    stall = 0
    bracket = None
    stag_ref = np.inf
    stag_iter = 0
    collapse_run = 0
    status = "max-iterations"
    n = 0
    for n in range(1, spec.max_fixed_point + 1):
        step = g - x
        resid = float(np.linalg.norm(step))
        if resid < spec.residual_tol and df < spec.fatol:
            status = "converged"
            break
        if resid < 0.5 * stag_ref:
            stag_ref = resid
            stag_iter = n
        elif n - stag_iter > 300:
            # No factor-two residual progress for a long stretch: stop
            # spending budget here and let the polish stage take over.
            status = "stalled"
            break
        if resid < 0.95 * best_resid:
            best_resid = resid
            stall = 0
        else:
            stall += 1
        x_next = None
        if bracket is not None:
            x_lo, x_hi, u, r_entry = bracket
            tiny = float(np.linalg.norm(x_hi - x_lo)) < 1e-13 * (
                1.0 + float(np.linalg.norm(x_lo)))
            if resid < 0.05 * r_entry or tiny:
                # Well inside the smoothed layer (or interval exhausted);
                # the damped iteration finishes faster from here.
                bracket = None
                stall = 0
                step_old = None
            else:
                # x is the midpoint probed last iteration; shrink.
                if float(np.dot(step, u)) > 0.0:
                    x_lo = x
                else:
                    x_hi = x
                bracket = (x_lo, x_hi, u, r_entry)
                x_next = 0.5 * (x_lo + x_hi)
        if bracket is None and x_next is None and stall >= 4 \
                and step_old is not None \
                and float(np.dot(step, step_old)) < 0.0:
            bracket = (x_prev, x, step_old / np.linalg.norm(step_old), resid)
            x_next = 0.5 * (x_prev + x)
        if x_next is None:
            if step_old is not None and resid > 2.0 * resid_old \
                    and float(alpha.max()) > ALPHA_MIN:
                # Overshot a stiff region: retreat to the previous iterate
                # and retake its step with smaller weights.
                alpha = np.maximum(alpha / 4.0, ALPHA_MIN)
                x = x_prev + alpha * step_old
                f_new, g = evaluate(x)
                df = abs(f_new - f)
                f = f_new
                continue
            if step_old is not None:
                scale = float(np.linalg.norm(step_old))
                active = np.abs(step_old) > 1e-3 * scale
                ratio = np.divide(step, step_old,
                                  out=np.zeros_like(step), where=active)
                denom = 1.0 - ratio
                contracting = active & (denom > 1e-12)
                secant = alpha / np.where(contracting, denom, 1.0)
                # Components with an expanding mode (ratio >= 1) have no
                # stable weight; damp them and leave the rest to the polish
                # stage. Components with no usable signal keep their weight.
                updated = np.where(contracting,
                                   np.clip(secant, ALPHA_MIN, 1.0),
                                   np.maximum(alpha / 2.0, ALPHA_MIN))
                alpha = np.where(active, updated, alpha)
            x_next = x + alpha * step
        x_prev = x
        x = x_next
        step_old = step
        resid_old = resid
        if spec.collapse_index is not None:
            if abs(x[spec.collapse_index]) < spec.collapse_tol:
                collapse_run += 1
                if collapse_run >= spec.collapse_patience:
                    status = "collapsed"
                    break
            else:
                collapse_run = 0
        f_new, g = evaluate(x)
        df = abs(f_new - f)
        f = f_new
    return x, f, status, n


def _polish(objective, evaluate, x, f, spec: MinimizeSpec):
    """Stage 2: simplex descent from the stage-1 point; monotone by design.

    The simplex search is restarted once from its own result: a fresh simplex
    recovers from the degenerate (collapsed-along-a-groove) configurations
    that Nelder-Mead is known to terminate in on narrow valleys.
    """
    options = {"xatol": 1e-10, "fatol": spec.fatol / 10.0,
               "maxfev": spec.max_polish}
    for _ in range(2):
        res = optimize.minimize(objective, x, method="Nelder-Mead",
                                options=options)
        if float(res.fun) <= f:
            x, f = np.asarray(res.x, dtype=float), float(res.fun)
    # The simplex controls only the objective, so it may stop anywhere inside
    # its flat termination region; where the map is stiff that leaves a large
    # stationarity residual.  A short adaptive fixed-point pass restores it,
    # accepted only if it does not raise the objective materially.
    resid = float(np.linalg.norm(evaluate(x)[1] - x))
    if resid >= spec.residual_tol:
        refine = replace(spec, max_fixed_point=200, collapse_index=None)
        x_ref, f_ref, _, _ = _fixed_point(evaluate, x, refine)
        resid_ref = float(np.linalg.norm(evaluate(x_ref)[1] - x_ref))
        if resid_ref < resid and f_ref <= f + 10.0 * spec.fatol:
            x, f = x_ref, f_ref
    return x, f


def minimize(objective: Callable[[np.ndarray], float],
             gap_map: Callable[[np.ndarray], np.ndarray],
             spec: MinimizeSpec,
             combined: Callable[[np.ndarray],
                                tuple[float, np.ndarray]] | None = None,
             ) -> MinimizeResult:
    """Minimize the objective over all seeds; see the module docstring.

    ``gap_map`` must return the self-consistency right-hand side, so that
    ``gap_map(x) - x`` is the stationarity residual; both callbacks must be
    pure and deterministic. When objective and map share their expensive
    inner evaluation, pass ``combined`` returning both at once and the
    iteration uses a single evaluation per step.
    """
    if combined is None:
        def combined(x):
            return float(objective(x)), gap_map(x)
    stage1 = []
    for i, seed in enumerate(spec.seeds):
        x, f, status, n = _fixed_point(combined, seed, spec)
        resid = float(np.linalg.norm(combined(x)[1] - x))
        stage1.append([np.asarray(x, dtype=float), float(f), resid,
                       status, n, i])
    if spec.polish:
        # Simplex time goes only where it can matter: seeds whose
        # fixed-point stage could not reach the residual tolerance (the
        # rescue cases, e.g. a near-unit map slope that makes the map
        # crawl or stall).  A seed that already converged is a stationary
        # point to 1e-8; polishing it would spend hundreds of objective
        # evaluations re-confirming it.
        for c in stage1:
            if c[3] == "collapsed" or c[2] < spec.residual_tol:
                continue
            # The polish may wander within its flat termination region,
            # so keep whichever endpoint is better: prefer a point that
            # meets the residual tolerance, then the lower objective.
            x_p, f_p = _polish(objective, combined, c[0], c[1], spec)
            r_p = float(np.linalg.norm(combined(x_p)[1] - x_p))
            key_s = (c[2] >= spec.residual_tol, c[1], c[2])
            key_p = (r_p >= spec.residual_tol, f_p, r_p)
            if key_p < key_s:
                c[0], c[1], c[2] = x_p, f_p, r_p
    candidates: list[MinimizeResult] = []
    statuses = []
    for x, f, resid, status, n, i in stage1:
        # Collapse is a statement about the answer, not the path: the
        # patience counter above only saves budget, while a fast-decaying
        # component can reach the residual tolerance first.
        if spec.collapse_index is not None \
                and abs(x[spec.collapse_index]) < spec.collapse_tol:
            status = "collapsed"
        converged = status != "collapsed" and resid < spec.residual_tol
        if converged:
            status = "converged"
        candidates.append(MinimizeResult(x, f, resid, converged, status, n,
                                         seed_index=i))
        statuses.append((i, status, float(f)))
    converged_ones = [c for c in candidates if c.status == "converged"]
    if converged_ones:
        best = min(converged_ones, key=lambda c: (c.value, c.seed_index))
    else:
        collapsed = [c for c in candidates if c.status == "collapsed"]
        best = collapsed[0] if collapsed else min(
            candidates, key=lambda c: (c.value, c.seed_index))
    best.seed_statuses = statuses
    return best
