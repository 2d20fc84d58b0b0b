"""Phase mapping built on the two branch solvers.

A *scan* walks a chemical-potential grid and converges both branches at
every point (warm-started from the previous point, with a periodic cold
multistart as a guard against branch-following errors).  Crossings of the
two grand-potential curves are then refined by bisection with full
re-solves, giving the first-order boundaries and the four boundary
fillings that bound the mixed (phase-separated) window.  Continuous
transitions, where the gap closes without any crossing, are located
separately as the point where the converged gap falls below a small
threshold.  Columns of such scans assemble into two-parameter phase
diagrams; columns are persisted individually so an interrupted sweep can
resume where it stopped.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import ttpv as _ttpv
from .antinodal import (
    LuttParams,
    ValidityWarning,
    fix_Q,
    self_consistent_point,
)
from .grids import eps
from .ttpv import TtpvParams

__all__ = [
    "CDW",
    "N",
    "MIXED",
    "NONE",
    "SECOND_ORDER_GAP_FRACTION",
    "PointRecord",
    "TtpvModel",
    "LuttModel",
    "make_model",
    "make_factory",
    "MuScan",
    "scan_mu",
    "Crossing",
    "BoundarySet",
    "find_crossings",
    "classify",
    "ColumnResult",
    "PhaseDiagram",
    "sweep2d",
    "BisectionResult",
    "critical_coupling",
    "mixed_closure_temperature",
]

# Phase labels.  NONE marks cells whose column failed to resolve.
CDW = "CDW"
N = "N"
MIXED = "MIXED"
NONE = "NONE"

# A converged gap below this fraction of t counts as closed; it separates
# a continuous (second-order) boundary from a first-order crossing.
SECOND_ORDER_GAP_FRACTION = 1e-4

# Grand-potential agreement demanded of a refined first-order crossing.
CROSSING_OMEGA_TOL = 1e-9

# |Omega_CDW - Omega_N| below this at *both* grid endpoints means the two
# branches have merged (continuous closure); a sign change there is solver
# noise, not a first-order crossing.
DEGENERATE_OMEGA = 1e-8

SWEEP_AXES = ("V", "t_prime", "kappa", "Q", "inv_beta")

_COLUMN_SCHEMA = 1


# ---------------------------------------------------------------------------
# point records and model handles


@dataclass(frozen=True)
class PointRecord:
    """One branch converged (or honestly failed) at one chemical potential."""

    omega: float
    nu: float
    gap: float
    converged: bool
    status: str
    tq: float | None = None
    q_star: float | None = None
    nu_a: float | None = None
    seed: tuple | None = None  # opaque warm-start payload for the next point


def _better(warm_rec: PointRecord, cold_rec: PointRecord) -> PointRecord:
    """Pick the more trustworthy of a warm-started and a cold re-solve."""
    if warm_rec.converged != cold_rec.converged:
        return warm_rec if warm_rec.converged else cold_rec
    if not warm_rec.converged:
        # Neither converged: a definite collapse beats a stall.
        if cold_rec.status == "collapsed" and warm_rec.status != "collapsed":
            return cold_rec
        return warm_rec
    if cold_rec.omega < warm_rec.omega:
        return cold_rec
    return warm_rec


class TtpvModel:
    """Handle for the lattice model: fixed couplings, mu left free.

    Warm state is the previous point's restricted ansatz per branch.  A
    collapsed gapped branch clears its seed; the next point then re-tries
    the gapped branch from the single default seed (the periodic cold
    multistart of the scan still runs the full seed set, which catches
    re-entrant regions).
    """

    label = "ttpv"

    def __init__(self, t: float = 1.0, t_prime: float = 0.0, V: float = 1.0,
                 beta: float = 1e5, L: int = 100, polish: bool = True):
        self.t = float(t)
        self.t_prime = float(t_prime)
        self.V = float(V)
        self.beta = float(beta)
        self.L = int(L)
        self.polish = bool(polish)
        # Validate everything but mu once, up front.
        self.params(0.0)

    def params(self, mu: float) -> TtpvParams:
        return TtpvParams(t=self.t, t_prime=self.t_prime, V=self.V,
                          mu=float(mu), beta=self.beta, L=self.L)

    def describe(self) -> dict:
        return {"model": self.label, "t": self.t, "t_prime": self.t_prime,
                "V": self.V, "beta": self.beta, "L": self.L}

    def auto_mu_window(self) -> tuple[float, float]:
        lo, hi = _band_range(self.t, self.t_prime)
        return lo - 0.5, hi + 2.0 * self.V + 0.5

    def solve_pair(self, mu: float, warm: dict | None,
                   exact: bool = False) -> dict[str, PointRecord]:
        params = self.params(mu)
        recs: dict[str, PointRecord] = {}
        for branch in (N, CDW):
            seeds = None
            if warm is not None:
                if warm.get(branch) is not None:
                    seeds = [np.asarray(warm[branch], dtype=float)]
                elif branch == CDW:
                    # Gapped branch collapsed at the previous point: a
                    # light single-seed re-attempt keeps the scan cheap.
                    seeds = _ttpv.default_seeds(params, branch)[:1]
            sol = _ttpv.solve_branch(params, branch, seeds=seeds,
                                     polish=self.polish)
            q = sol.ansatz.q
            if branch == CDW:
                seed = (float(q[0]), float(q[1]), float(sol.ansatz.delta))
            else:
                seed = (float(q[0]), float(q[1]))
            recs[branch] = PointRecord(
                omega=sol.omega_per_site, nu=sol.nu, gap=sol.gap,
                converged=sol.converged, status=sol.status, seed=seed)
        return recs

    def warm_from(self, recs: dict[str, PointRecord],
                  prev: dict | None) -> dict:
        return {branch: (rec.seed if rec.converged else None)
                for branch, rec in recs.items()}


class LuttModel:
    """Handle for the antinodal (effective) model.

    The ordering vector is either held fixed (``q_policy='fixed'``) or
    re-fixed at every chemical potential by iterating Q -> tQ within the
    ``q_from`` branch (default the gapped one, falling back to the
    ungapped branch where the gapped one is absent).  Both branches are
    then evaluated at that same Q, so their grand potentials are directly
    comparable.  Warm state carries the previous point's Q and per-branch
    antinodal filling.
    """

    label = "lutt"

    def __init__(self, t: float = 1.0, t_prime: float = 0.0, V: float = 1.0,
                 kappa: float = 0.8, beta: float = 1e5,
                 Q: float | None = None, band: str = "taylor",
                 antinodal_count: int = 6400,
                 q_policy: str = "selfconsistent", q_from: str = CDW,
                 q_tol: float = 1e-7, polish: bool = True):
        if q_policy not in ("selfconsistent", "fixed"):
            raise ValueError(f"unknown q_policy {q_policy!r}")
        if q_from not in (N, CDW):
            raise ValueError(f"unknown q_from branch {q_from!r}")
        self.t = float(t)
        self.t_prime = float(t_prime)
        self.V = float(V)
        self.kappa = float(kappa)
        self.beta = float(beta)
        self.Q = math.pi / 2 if Q is None else float(Q)
        self.band = band
        self.antinodal_count = int(antinodal_count)
        self.q_policy = q_policy
        self.q_from = q_from
        self.q_tol = float(q_tol)
        self.polish = bool(polish)
        with warnings.catch_warnings():
            if q_policy == "selfconsistent":
                # Q is only the iteration seed here; midpoint caveats
                # apply to points actually evaluated at it.
                warnings.simplefilter("ignore", ValidityWarning)
            self.params(self.Q)  # validate once, up front

    def params(self, Q: float) -> LuttParams:
        return LuttParams(t=self.t, t_prime=self.t_prime, V=self.V,
                          kappa=self.kappa, Q=float(Q), beta=self.beta,
                          band=self.band,
                          antinodal_count=self.antinodal_count)

    def describe(self) -> dict:
        return {"model": self.label, "t": self.t, "t_prime": self.t_prime,
                "V": self.V, "kappa": self.kappa, "beta": self.beta,
                "Q": self.Q, "band": self.band,
                "antinodal_count": self.antinodal_count,
                "q_policy": self.q_policy, "q_from": self.q_from}

    def auto_mu_window(self) -> tuple[float, float]:
        lo, hi = _band_range(self.t, self.t_prime)
        return lo - 0.5, hi + 2.0 * self.V + 0.5

    def _clamp_Q(self, Q: float) -> float:
        lo = (1.0 - self.kappa) * math.pi / 2
        hi = (1.0 + self.kappa) * math.pi / 2
        pad = 1e-9 * math.pi
        return min(max(Q, lo + pad), hi - pad)

    def solve_pair(self, mu: float, warm: dict | None,
                   exact: bool = False) -> dict[str, PointRecord]:
        """Both branches at one mu, sharing the same ordering vector.

        With ``exact=False`` the branch the Q fix iterated in reuses the
        fix's own final inner solution, saving one full solve per point;
        its Q then differs from the other branch's by at most q_tol
        (grand-potential skew of order 1e-8).  Crossing refinement passes
        ``exact=True`` to re-solve both branches at the identical Q.
        """
        q0 = self.Q if warm is None else warm.get("Q", self.Q)
        nu_a0 = {N: 0.5, CDW: 0.5}
        if warm is not None:
            for branch in (N, CDW):
                val = warm.get("nu_a", {}).get(branch)
                if val is not None:
                    nu_a0[branch] = val
        recs: dict[str, PointRecord] = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            q_status = "fixed"
            q_star = self.Q
            reuse: tuple[str, PointRecord] | None = None
            if self.q_policy == "selfconsistent":
                res = fix_Q(self.params(self._clamp_Q(q0)), mu,
                            branch=self.q_from, tol=self.q_tol,
                            nu_a0=nu_a0[self.q_from], polish=self.polish)
                q_star, q_status = res.Q_star, res.status
                if q_status != "converged" and self.q_from == CDW:
                    # No gapped stationary point here; fix Q in the
                    # branch that always exists instead.
                    res = fix_Q(self.params(self._clamp_Q(q0)), mu,
                                branch=N, tol=self.q_tol,
                                nu_a0=nu_a0[N], polish=self.polish)
                    if res.status == "converged":
                        q_star, q_status = res.Q_star, "converged-from-N"
                if not exact and q_status.startswith("converged") \
                        and res.solution is not None \
                        and res.solution.converged:
                    branch = N if q_status == "converged-from-N" \
                        else self.q_from
                    reuse = (branch, self._record_from(res.solution,
                                                       q_status))
            for branch in (N, CDW):
                if reuse is not None and reuse[0] == branch:
                    recs[branch] = reuse[1]
                else:
                    recs[branch] = self._solve_branch(
                        mu, q_star, branch, nu_a0[branch], q_status)
        return recs

    def _record_from(self, sol, q_status: str) -> PointRecord:
        status = sol.status
        if q_status not in ("converged", "fixed"):
            status = f"{status}/q-fix: {q_status}"
        if not sol.nodal.in_window:
            status = f"{status}/tq-outside-window"
        return PointRecord(
            omega=sol.omega_per_site, nu=sol.nu, gap=sol.antinodal.gap,
            converged=sol.converged, status=status, tq=sol.nodal.tQ,
            q_star=sol.nodal.tQ, nu_a=sol.antinodal.nu,
            seed=(sol.antinodal.nu,))

    def _solve_branch(self, mu: float, q_star: float, branch: str,
                      nu_a0: float, q_status: str) -> PointRecord:
        try:
            params = self.params(self._clamp_Q(q_star))
        except ValueError as err:
            return PointRecord(omega=math.nan, nu=math.nan, gap=math.nan,
                               converged=False, status=f"invalid: {err}",
                               q_star=q_star)
        sol = self_consistent_point(params, mu, branch, nu_a0=nu_a0,
                                    polish=self.polish)
        status = sol.status
        if q_status not in ("converged", "fixed"):
            status = f"{status}/q-fix: {q_status}"
        if not sol.nodal.in_window:
            status = f"{status}/tq-outside-window"
        return PointRecord(
            omega=sol.omega_per_site, nu=sol.nu, gap=sol.antinodal.gap,
            converged=sol.converged, status=status, tq=sol.nodal.tQ,
            q_star=params.Q, nu_a=sol.antinodal.nu,
            seed=(sol.antinodal.nu,))

    def warm_from(self, recs: dict[str, PointRecord],
                  prev: dict | None) -> dict:
        q_values = [rec.q_star for rec in recs.values()
                    if rec.converged and rec.q_star is not None]
        if q_values:
            q_next = q_values[0]
        elif prev is not None:
            q_next = prev.get("Q", self.Q)
        else:
            q_next = self.Q
        return {"Q": q_next,
                "nu_a": {branch: (rec.nu_a if rec.converged else None)
                         for branch, rec in recs.items()}}


def _band_range(t: float, t_prime: float) -> tuple[float, float]:
    k = np.linspace(-math.pi, math.pi, 129)
    e = eps(k[:, None], k[None, :], t, t_prime)
    return float(e.min()), float(e.max())


def make_model(kind: str, **kwargs):
    """Build a model handle by name ('ttpv' or 'lutt')."""
    if kind == "ttpv":
        return TtpvModel(**kwargs)
    if kind == "lutt":
        return LuttModel(**kwargs)
    raise ValueError(f"unknown model kind {kind!r}")


def make_factory(kind: str, axis: str,
                 base: dict) -> Callable[[float], object]:
    """Factory mapping a sweep-axis value to a model handle.

    axis is one of V, t_prime, kappa, Q, inv_beta; kappa and Q apply to
    the antinodal model only.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; "
                         f"expected one of {SWEEP_AXES}")
    if kind == "ttpv" and axis in ("kappa", "Q"):
        raise ValueError(f"axis {axis!r} does not apply to the lattice model")

    def factory(value: float):
        kw = dict(base)
        if axis == "inv_beta":
            if not value > 0:
                raise ValueError(f"1/beta must be positive, got {value}")
            kw["beta"] = 1.0 / value
        else:
            kw[axis] = value
        return make_model(kind, **kw)

    return factory


# ---------------------------------------------------------------------------
# mu scans


@dataclass
class MuScan:
    """Both branches converged along a strictly increasing mu grid."""

    mu: np.ndarray
    points: dict[str, list[PointRecord]]
    model: object

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.ndim != 1 or self.mu.size < 2:
            raise ValueError("mu grid must be a 1-d array with >= 2 points")
        if not np.all(np.diff(self.mu) > 0):
            raise ValueError("mu grid must be strictly increasing")
        for branch, recs in self.points.items():
            if len(recs) != self.mu.size:
                raise ValueError(
                    f"branch {branch!r} has {len(recs)} records for "
                    f"{self.mu.size} grid points")

    def _field(self, branch: str, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.points[branch]])

    def omega(self, branch: str) -> np.ndarray:
        return self._field(branch, "omega")

    def nu(self, branch: str) -> np.ndarray:
        return self._field(branch, "nu")

    def gap(self, branch: str) -> np.ndarray:
        return self._field(branch, "gap")

    def converged(self, branch: str) -> np.ndarray:
        return np.array([r.converged for r in self.points[branch]],
                        dtype=bool)

    def status(self, branch: str) -> list[str]:
        return [r.status for r in self.points[branch]]


def scan_mu(model, mu_min: float, mu_max: float, n_points: int = 201,
            cold_every: int = 10) -> MuScan:
    """Converge both branches on a uniform mu grid.

    Warm-start continuation from point to point, with a full cold
    multistart every ``cold_every`` points whose result replaces the warm
    one when it converges lower.  Unconverged points are recorded with
    their status and the scan continues.
    """
    if n_points < 16:
        raise ValueError(f"n_points must be >= 16, got {n_points}")
    if not mu_max > mu_min:
        raise ValueError("mu_max must exceed mu_min")
    grid = np.linspace(mu_min, mu_max, n_points)
    points: dict[str, list[PointRecord]] = {N: [], CDW: []}
    warm = None
    for i, mu in enumerate(grid):
        recs = model.solve_pair(float(mu), warm)
        if i > 0 and cold_every > 0 and i % cold_every == 0:
            cold = model.solve_pair(float(mu), None)
            recs = {branch: _better(recs[branch], cold[branch])
                    for branch in recs}
        for branch, rec in recs.items():
            points[branch].append(rec)
        warm = model.warm_from(recs, warm)

    # Backward healing pass.  Walking up-grid leaves the gapped branch
    # unseeded just above an onset boundary (the forward warm seed was
    # cleared by the preceding collapse), which can mark a point as
    # collapsed although the gapped solution exists there.  Re-attempt
    # each such point from its upper neighbor's converged state; the
    # chain stops at the first genuine collapse.
    for i in range(n_points - 2, -1, -1):
        if points[CDW][i].converged or not points[CDW][i + 1].converged:
            continue
        warm = model.warm_from(
            {N: points[N][i], CDW: points[CDW][i + 1]}, None)
        recs = model.solve_pair(float(grid[i]), warm)
        points[CDW][i] = _better(recs[CDW], points[CDW][i])
        points[N][i] = _better(recs[N], points[N][i])
    return MuScan(mu=grid, points=points, model=model)


# ---------------------------------------------------------------------------
# boundary location


@dataclass(frozen=True)
class Crossing:
    """One resolved CDW/N boundary along mu."""

    mu: float
    sense: str   # 'onset': CDW becomes lower with increasing mu; 'exit'
    order: str   # 'first' | 'second'
    nu_cdw: float
    nu_n: float
    gap_cdw: float
    tq_cdw: float | None = None
    tq_n: float | None = None


@dataclass
class BoundarySet:
    """All boundaries found in one scan window, sorted by mu.

    mu1/mu2 and the four boundary fillings expose the outermost
    onset/exit pair; with more than two crossings the inner ones stay in
    ``crossings`` and a note records the anomaly.
    """

    crossings: list[Crossing] = field(default_factory=list)
    n_everywhere: bool = False
    cdw_everywhere: bool = False
    notes: list[str] = field(default_factory=list)

    def _outer(self, sense: str) -> Crossing | None:
        matches = [c for c in self.crossings if c.sense == sense]
        if not matches:
            return None
        return matches[0] if sense == "onset" else matches[-1]

    def intervals(self) -> list[tuple[float, float, str, float]]:
        """Partition of the filling axis implied by the crossings.

        Returns (lo, hi, label, lam_lo) tuples in increasing-nu order;
        lam_lo is the gapped-phase volume fraction at the lo end (it
        runs linearly to 1 - lam_lo across a mixed window, and is
        constant over pure intervals).  Several disjoint gapped regions
        (e.g. a narrow pocket next to the main lobe) partition
        correctly: each onset/exit pair contributes its own CDW interval
        with mixed windows on both flanks.
        """
        out: list[tuple[float, float, str, float]] = []
        cursor = -math.inf
        in_cdw = self.cdw_everywhere
        for c in self.crossings:
            if c.sense == "onset":
                if in_cdw:
                    continue  # malformed pairing; skip conservatively
                out.append((cursor, c.nu_n, N, 0.0))
                out.append((c.nu_n, c.nu_cdw, MIXED, 0.0))
                cursor = c.nu_cdw
                in_cdw = True
            else:
                if not in_cdw and not out:
                    # window opened inside a gapped region
                    in_cdw = True
                if not in_cdw:
                    continue
                out.append((cursor, c.nu_cdw, CDW, 1.0))
                out.append((c.nu_cdw, c.nu_n, MIXED, 1.0))
                cursor = c.nu_n
                in_cdw = False
        out.append((cursor, math.inf, CDW if in_cdw else N, 1.0 if in_cdw else 0.0))
        return out

    def cdw_filling_width(self) -> float:
        """Total filling width occupied by the pure gapped phase."""
        total = 0.0
        for lo, hi, label, _ in self.intervals():
            if label == CDW and math.isfinite(lo) and math.isfinite(hi):
                total += max(0.0, hi - lo)
        return total

    def regions(self) -> list[tuple[float, float, float]]:
        """Contiguous gapped regions as (nu_lo, nu_hi, max boundary gap).

        Regions that extend past the scanned window are open-ended
        (+-inf).  The gap is the largest one observed at the region's
        own crossings; interior gaps are at least as large.
        """
        out: list[tuple[float, float, float]] = []
        in_cdw = self.cdw_everywhere
        start = -math.inf
        gaps: list[float] = [0.0]
        seen_onset = False
        for c in self.crossings:
            if c.sense == "onset":
                if not in_cdw:
                    start, gaps, in_cdw = c.nu_cdw, [c.gap_cdw], True
                seen_onset = True
            else:
                if not in_cdw and not out and not seen_onset:
                    in_cdw = True  # window opened inside a gapped region
                if in_cdw:
                    out.append((start, c.nu_cdw, max(gaps + [c.gap_cdw])))
                    in_cdw = False
        if in_cdw:
            out.append((start, math.inf, max(gaps)))
        return out

    @property
    def mu1(self) -> float | None:
        c = self._outer("onset")
        return None if c is None else c.mu

    @property
    def mu2(self) -> float | None:
        c = self._outer("exit")
        return None if c is None else c.mu

    @property
    def nu_n1(self) -> float | None:
        c = self._outer("onset")
        return None if c is None else c.nu_n

    @property
    def nu_cdw1(self) -> float | None:
        c = self._outer("onset")
        return None if c is None else c.nu_cdw

    @property
    def nu_cdw2(self) -> float | None:
        c = self._outer("exit")
        return None if c is None else c.nu_cdw

    @property
    def nu_n2(self) -> float | None:
        c = self._outer("exit")
        return None if c is None else c.nu_n


def _usable(rec_cdw: PointRecord, rec_n: PointRecord,
            gap_thr: float) -> bool:
    return (rec_cdw.converged and rec_n.converged
            and rec_cdw.gap > gap_thr)


def _refine_first(model, mu_lo: float, mu_hi: float,
                  warm: dict | None, cdw_lower_at_lo: bool,
                  gap_thr: float,
                  omega_tol: float = CROSSING_OMEGA_TOL,
                  max_iter: int = 80) -> tuple[dict[str, PointRecord], float]:
    """Bisect mu for Omega_CDW = Omega_N, re-solving both branches.

    ``warm`` must carry a gapped ansatz (seed from the scan point on the
    CDW-lower side of the bracket), so the metastable branch is tracked
    right up to the crossing.  A trial where the gapped branch still
    comes out absent counts as 'CDW not lower' and falls back to a plain
    bisection step; where both branch values are available the step is
    Illinois false position on their difference, which typically needs
    about a dozen re-solves.  Returns the last pair with the gapped
    branch present, and the refined mu.
    """
    lo, hi = float(mu_lo), float(mu_hi)
    d_lo: float | None = None   # branch difference where known
    d_hi: float | None = None
    side = 0                    # consecutive replacements of one endpoint
    best: tuple[dict[str, PointRecord], float, float] | None = None
    seen_pos = seen_neg = False
    for _ in range(max_iter):
        if d_lo is not None and d_hi is not None and d_lo * d_hi < 0:
            mid = lo - d_lo * (hi - lo) / (d_hi - d_lo)
            span = hi - lo
            if not lo + 0.01 * span < mid < hi - 0.01 * span:
                mid = 0.5 * (lo + hi)
        else:
            mid = 0.5 * (lo + hi)
        recs = model.solve_pair(mid, warm, exact=True)
        has_cdw = _usable(recs[CDW], recs[N], gap_thr)
        if has_cdw:
            warm = model.warm_from(recs, warm)
            diff = recs[CDW].omega - recs[N].omega
            seen_pos |= diff > 0
            seen_neg |= diff < 0
            if best is None or abs(diff) < abs(best[2]):
                best = (recs, mid, diff)
            if abs(diff) < omega_tol:
                return recs, mid
            cdw_lower_at_mid = diff < 0
        else:
            diff = None
            cdw_lower_at_mid = False
        if cdw_lower_at_mid == cdw_lower_at_lo:
            lo, d_lo = mid, diff
            if side == 1 and d_hi is not None:
                d_hi *= 0.5     # Illinois: unstick the stale endpoint
            side = 1
        else:
            hi, d_hi = mid, diff
            if side == -1 and d_lo is not None:
                d_lo *= 0.5
            side = -1
        if hi - lo < 1e-13 * max(1.0, abs(lo)):
            break
    if best is None:
        raise RuntimeError(
            "bisection never saw the gapped branch inside the bracket")
    if not (seen_pos and seen_neg) and abs(best[2]) > omega_tol:
        # Every trial with the gapped branch present fell on one side:
        # the equality point is not inside this cell (typically the
        # neighboring grid record was wrong about the branch's absence).
        raise RuntimeError(
            "grand potentials never changed sign inside the bracket "
            f"(closest approach {best[2]:.3e})")
    return best[0], best[1]


def _refine_second(model, mu_lo: float, mu_hi: float, warm: dict | None,
                   gap_thr: float, mu_tol: float = 1e-10,
                   max_iter: int = 60) -> tuple[dict[str, PointRecord], float]:
    """Bisect mu for gap = threshold along a converged gapped branch."""
    lo, hi = float(mu_lo), float(mu_hi)
    recs_lo = model.solve_pair(lo, warm, exact=True)
    open_at_lo = recs_lo[CDW].converged and recs_lo[CDW].gap > gap_thr
    best = (recs_lo, lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        recs = model.solve_pair(mid, warm, exact=True)
        warm = model.warm_from(recs, warm)
        open_at_mid = recs[CDW].converged and recs[CDW].gap > gap_thr
        best = (recs, mid)
        if open_at_mid == open_at_lo:
            lo = mid
        else:
            hi = mid
        if hi - lo < mu_tol * max(1.0, abs(lo)):
            break
    return best


def find_crossings(model, scan: MuScan,
                   omega_tol: float = CROSSING_OMEGA_TOL) -> BoundarySet:
    """Locate and refine every CDW/N boundary inside a scan window.

    First-order boundaries are sign changes of Omega_CDW - Omega_N
    between grid points where both branches converged, refined by
    bisection (with full re-solves) until the two grand potentials agree
    to ``omega_tol`` per site.  Second-order boundaries are the points
    where the converged gap crosses the closure threshold; there the two
    fillings coincide.  An empty crossing list with ``n_everywhere`` set
    means the ungapped branch wins throughout; ``cdw_everywhere`` means
    the gapped branch does.
    """
    gap_thr = SECOND_ORDER_GAP_FRACTION * model.t
    n_pts = scan.mu.size
    om_c, om_n = scan.omega(CDW), scan.omega(N)
    conv_c, conv_n = scan.converged(CDW), scan.converged(N)
    gap_c = scan.gap(CDW)
    usable = conv_c & conv_n & (gap_c > gap_thr)
    diff = om_c - om_n
    cdw_lower = usable & (diff < 0)

    result = BoundarySet()
    for i in range(n_pts - 1):
        if not (conv_n[i] and conv_n[i + 1]):
            result.notes.append(
                f"ungapped branch unconverged near mu={scan.mu[i]:.6g}; "
                "cell skipped")
            continue
        if conv_c[i] and conv_c[i + 1] \
                and (gap_c[i] > gap_thr) != (gap_c[i + 1] > gap_thr):
            # The gap closes along a converged gapped branch: a
            # continuous transition, located at the closure threshold.
            warm = model.warm_from(
                {N: scan.points[N][i], CDW: scan.points[CDW][i]}, None)
            sense = "exit" if gap_c[i] > gap_thr else "onset"
            recs, mu_star = _refine_second(
                model, scan.mu[i], scan.mu[i + 1], warm, gap_thr)
            result.crossings.append(Crossing(
                mu=mu_star, sense=sense, order="second",
                nu_cdw=recs[CDW].nu, nu_n=recs[N].nu,
                gap_cdw=recs[CDW].gap,
                tq_cdw=recs[CDW].tq, tq_n=recs[N].tq))
            continue
        # First-order detection: a point where the gapped branch is
        # absent counts as 'not lower', so a boundary hiding against a
        # collapsed grid point is still bracketed.
        if usable[i] and usable[i + 1] \
                and max(abs(diff[i]), abs(diff[i + 1])) < DEGENERATE_OMEGA \
                and diff[i] * diff[i + 1] < 0:
            result.notes.append(
                f"near-degenerate branches around mu={scan.mu[i]:.6g}; "
                "sign change ignored")
            continue
        lower_lo = bool(cdw_lower[i])
        lower_hi = bool(cdw_lower[i + 1])
        if lower_lo == lower_hi:
            continue
        # Warm-start the refinement from the side where the gapped
        # branch wins, so its (meta)stable ansatz is tracked inside the
        # bracket.
        k = i if lower_lo else i + 1
        warm = model.warm_from(
            {N: scan.points[N][k], CDW: scan.points[CDW][k]}, None)
        sense = "exit" if lower_lo else "onset"
        try:
            recs, mu_star = _refine_first(
                model, scan.mu[i], scan.mu[i + 1], warm,
                cdw_lower_at_lo=lower_lo, gap_thr=gap_thr,
                omega_tol=omega_tol)
        except RuntimeError as err:
            result.notes.append(
                f"refinement failed in [{scan.mu[i]:.6g}, "
                f"{scan.mu[i + 1]:.6g}]: {err}")
            continue
        result.crossings.append(Crossing(
            mu=mu_star, sense=sense, order="first",
            nu_cdw=recs[CDW].nu, nu_n=recs[N].nu,
            gap_cdw=recs[CDW].gap,
            tq_cdw=recs[CDW].tq, tq_n=recs[N].tq))

    result.crossings.sort(key=lambda c: c.mu)
    onsets = sum(c.sense == "onset" for c in result.crossings)
    exits = sum(c.sense == "exit" for c in result.crossings)
    if onsets > 1 or exits > 1:
        result.notes.append(
            f"{len(result.crossings)} crossings found; outermost "
            "onset/exit pair used for the boundary fillings")

    if not result.crossings:
        if not usable.any():
            result.n_everywhere = True
        elif cdw_lower.any():
            result.cdw_everywhere = not (usable & ~cdw_lower).any()
            if not result.cdw_everywhere:
                result.notes.append(
                    "gapped branch lower on part of the window but no "
                    "crossing bracketed; refine the grid")
        else:
            result.n_everywhere = True
    else:
        # A gapped region that ends in a collapse without a preceding
        # crossing would leave the boundary unresolved; note it.
        for i in range(n_pts - 1):
            if cdw_lower[i] and not conv_c[i + 1] \
                    and scan.points[CDW][i + 1].status == "collapsed":
                covered = any(scan.mu[i] <= c.mu <= scan.mu[i + 1]
                              for c in result.crossings)
                if not covered:
                    result.notes.append(
                        f"gapped region ends by collapse near "
                        f"mu={scan.mu[i + 1]:.6g} without a crossing")
    return result


# ---------------------------------------------------------------------------
# classification


def classify(nu: float, boundaries: BoundarySet | None,
             atol: float = 1e-7) -> tuple[str, float]:
    """Label a filling given one window's boundary fillings.

    Returns (label, lam) where lam is the gapped-phase volume fraction:
    1 inside the CDW window, 0 in the N phase, and the lever rule
    (nu - nu_N) / (nu_CDW - nu_N) strictly between 0 and 1 in the mixed
    window.
    """
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"filling must lie in [0, 1], got {nu}")
    if boundaries is None or not boundaries.crossings:
        if boundaries is not None and boundaries.cdw_everywhere:
            return CDW, 1.0
        return N, 0.0

    # Walk the interval partition so that disjoint gapped regions are
    # each matched against their own filling range; a filling between
    # two regions is N (or mixed at their flanks), never swallowed by
    # the outermost pair.
    parts = boundaries.intervals()
    for lo, hi, label, _ in parts:
        if label == CDW and lo - atol <= nu <= hi + atol:
            return CDW, 1.0
    for lo, hi, label, lam_lo in parts:
        if label == MIXED and lo + atol < nu < hi - atol:
            frac = (nu - lo) / (hi - lo)
            return MIXED, lam_lo + frac * (1.0 - 2.0 * lam_lo)
    return N, 0.0


# ---------------------------------------------------------------------------
# two-parameter sweeps


@dataclass
class ColumnResult:
    """One sweep column: boundaries plus cell labels along the nu grid."""

    value: float
    status: str                      # 'ok' | 'failed: ...'
    boundaries: BoundarySet | None
    labels: list[str]
    lam: list[float]


@dataclass
class PhaseDiagram:
    """Cell labels over (axis value) x (filling), with boundary paths."""

    axis: str
    axis_values: np.ndarray
    nu_grid: np.ndarray
    labels: np.ndarray               # shape (n_values, n_nu), strings
    lam: np.ndarray                  # shape (n_values, n_nu)
    columns: list[ColumnResult]
    boundary_paths: dict[str, list[tuple[float, float]]]
    metadata: dict


def _crossing_to_dict(c: Crossing) -> dict:
    return {"mu": c.mu, "sense": c.sense, "order": c.order,
            "nu_cdw": c.nu_cdw, "nu_n": c.nu_n, "gap_cdw": c.gap_cdw,
            "tq_cdw": c.tq_cdw, "tq_n": c.tq_n}


def _crossing_from_dict(d: dict) -> Crossing:
    return Crossing(**d)


def boundary_set_to_dict(b: BoundarySet) -> dict:
    return {"crossings": [_crossing_to_dict(c) for c in b.crossings],
            "n_everywhere": b.n_everywhere,
            "cdw_everywhere": b.cdw_everywhere,
            "notes": list(b.notes)}


def boundary_set_from_dict(d: dict) -> BoundarySet:
    return BoundarySet(
        crossings=[_crossing_from_dict(c) for c in d["crossings"]],
        n_everywhere=d["n_everywhere"],
        cdw_everywhere=d["cdw_everywhere"],
        notes=list(d["notes"]))


def _column_to_dict(col: ColumnResult) -> dict:
    return {"schema": _COLUMN_SCHEMA,
            "value": col.value,
            "status": col.status,
            "boundaries": (None if col.boundaries is None
                           else boundary_set_to_dict(col.boundaries)),
            "labels": list(col.labels),
            "lam": [float(x) for x in col.lam]}


def _column_from_dict(d: dict) -> ColumnResult:
    if d.get("schema") != _COLUMN_SCHEMA:
        raise ValueError(f"unsupported column schema {d.get('schema')!r}")
    b = d["boundaries"]
    return ColumnResult(value=d["value"], status=d["status"],
                        boundaries=None if b is None
                        else boundary_set_from_dict(b),
                        labels=list(d["labels"]),
                        lam=[float(x) for x in d["lam"]])


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _compute_column(model, value: float, nu_grid: np.ndarray,
                    window: tuple[float, float], n_mu: int,
                    cold_every: int) -> ColumnResult:
    scan = scan_mu(model, window[0], window[1], n_points=n_mu,
                   cold_every=cold_every)
    bset = find_crossings(model, scan)

    # Fillings outside what the mu window actually reached are not
    # determined by this scan; label them NONE rather than extending the
    # edge phase to the whole axis.
    seen = [r.nu for recs in (scan.points[N], scan.points[CDW])
            for r in (recs[0], recs[-1]) if r is not None and r.converged]
    nu_lo, nu_hi = (min(seen), max(seen)) if seen else (0.0, 1.0)

    labels, lam = [], []
    for nu in nu_grid:
        if not nu_lo - 1e-12 <= nu <= nu_hi + 1e-12:
            labels.append(NONE)
            lam.append(math.nan)
            continue
        lab, frac = classify(float(nu), bset)
        labels.append(lab)
        lam.append(frac)
    return ColumnResult(value=float(value), status="ok", boundaries=bset,
                        labels=labels, lam=lam)


def sweep2d(factory: Callable[[float], object], axis: str,
            axis_values: Iterable[float],
            nu_grid: np.ndarray | None = None,
            mu_window=None, n_mu: int = 201, cold_every: int = 10,
            store_dir: str | Path | None = None,
            progress: Callable[[int, ColumnResult], None] | None = None,
            ) -> PhaseDiagram:
    """Assemble a phase diagram column by column.

    For every axis value a fresh model handle is built, a mu scan run,
    its boundaries refined and each filling cell labeled.  A failing
    column is recorded with its error and NONE labels; the sweep
    continues.  With ``store_dir`` set, finished columns are persisted
    (one JSON file each, written atomically) and an interrupted sweep
    picks up from the stored columns on rerun.

    ``mu_window`` may be a (lo, hi) pair, a callable mapping the model
    handle to one, or None for the handle's automatic window.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; "
                         f"expected one of {SWEEP_AXES}")
    values = np.asarray(list(axis_values), dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("axis_values must be a non-empty 1-d sequence")
    nu = np.linspace(0.0, 1.0, 81) if nu_grid is None \
        else np.asarray(nu_grid, dtype=float)

    store = None
    if store_dir is not None:
        store = Path(store_dir)
        store.mkdir(parents=True, exist_ok=True)

    columns: list[ColumnResult] = []
    meta_model: dict = {}
    for j, value in enumerate(values):
        col = None
        if store is not None:
            path = store / f"column_{j:04d}.json"
            if path.exists():
                payload = json.loads(path.read_text())
                if abs(payload["value"] - value) > 1e-12 * max(
                        1.0, abs(value)) or payload["axis"] != axis:
                    raise ValueError(
                        f"stored column {path} was computed for "
                        f"{payload['axis']}={payload['value']}, not "
                        f"{axis}={value}; clear the store directory")
                col = _column_from_dict(payload["column"])
        if col is None:
            try:
                model = factory(float(value))
                if not meta_model:
                    meta_model = model.describe()
                if callable(mu_window):
                    window = mu_window(model)
                elif mu_window is not None:
                    window = mu_window
                else:
                    window = model.auto_mu_window()
                col = _compute_column(model, value, nu, window, n_mu,
                                      cold_every)
            except Exception as err:  # noqa: BLE001 - column isolation
                col = ColumnResult(value=float(value),
                                   status=f"failed: {err}",
                                   boundaries=None,
                                   labels=[NONE] * nu.size,
                                   lam=[math.nan] * nu.size)
            if store is not None:
                payload = {"axis": axis, "value": float(value),
                           "column": _column_to_dict(col)}
                _atomic_write_text(store / f"column_{j:04d}.json",
                                   json.dumps(payload, indent=1))
        columns.append(col)
        if progress is not None:
            progress(j, col)

    if not meta_model:
        try:
            meta_model = factory(float(values[0])).describe()
        except Exception:  # noqa: BLE001 - metadata only
            meta_model = {}

    labels = np.array([c.labels for c in columns], dtype=object)
    lam = np.array([c.lam for c in columns], dtype=float)
    paths: dict[str, list[tuple[float, float]]] = {
        "n_lower": [], "cdw_lower": [], "cdw_upper": [], "n_upper": [],
        "second_order": []}
    for col in columns:
        b = col.boundaries
        if b is None:
            continue
        for name, val in (("n_lower", b.nu_n1), ("cdw_lower", b.nu_cdw1),
                          ("cdw_upper", b.nu_cdw2), ("n_upper", b.nu_n2)):
            if val is not None:
                paths[name].append((col.value, val))
        for c in b.crossings:
            if c.order == "second":
                paths["second_order"].append((col.value, c.nu_cdw))

    metadata = {
        "axis": axis,
        "n_mu": n_mu,
        "model": meta_model,
        "finite_size": (
            "boundary fillings carry the finite-resolution error of the "
            "momentum grid; refine L / the antinodal count to check"),
    }
    return PhaseDiagram(axis=axis, axis_values=values, nu_grid=nu,
                        labels=labels, lam=lam, columns=columns,
                        boundary_paths=paths, metadata=metadata)


# ---------------------------------------------------------------------------
# scalar bisection helpers on top of scans


@dataclass(frozen=True)
class BisectionResult:
    """Outcome of a scalar bisection on a parameter axis."""

    value: float
    bracket: tuple[float, float]
    converged: bool
    status: str
    n_eval: int


def _bisect_predicate(predicate: Callable[[float], bool], lo: float,
                      hi: float, tol: float,
                      max_iter: int = 60) -> BisectionResult:
    p_lo, p_hi = predicate(lo), predicate(hi)
    n_eval = 2
    if p_lo == p_hi:
        return BisectionResult(math.nan, (lo, hi), False,
                               f"not bracketed: predicate is {p_lo} at "
                               "both ends", n_eval)
    while hi - lo > tol and n_eval < max_iter:
        mid = 0.5 * (lo + hi)
        if predicate(mid) == p_lo:
            lo = mid
        else:
            hi = mid
        n_eval += 1
    return BisectionResult(0.5 * (lo + hi), (lo, hi), True, "converged",
                           n_eval)


def critical_coupling(factory: Callable[[float], object],
                      v_lo: float, v_hi: float, tol: float = 0.02,
                      mu_window=None, n_mu: int = 61,
                      cold_every: int = 10, min_width: float = 0.0,
                      min_gap: float = 0.0) -> BisectionResult:
    """Smallest V at which the gapped phase appears anywhere in the window.

    Bisects on V with the predicate 'the scan window contains a gapped
    region that wins somewhere'.  The bracket must straddle the onset:
    no gapped region at ``v_lo``, one at ``v_hi``.

    With the default thresholds any winning gapped region counts, which
    on a finite momentum grid includes single-shell pockets pinned to
    the van Hove filling: their filling width shrinks like 1/L and their
    gap stays tiny, so they are lattice-size artifacts rather than bulk
    phases.  Pass ``min_width`` (in filling, e.g. one shell's weight
    2/L) and/or ``min_gap`` (in units of t) to ignore such slivers and
    locate the bulk onset instead.
    """

    def has_cdw(v: float) -> bool:
        model = factory(float(v))
        if callable(mu_window):
            window = mu_window(model)
        elif mu_window is not None:
            window = mu_window
        else:
            window = model.auto_mu_window()
        scan = scan_mu(model, window[0], window[1], n_points=n_mu,
                       cold_every=cold_every)
        bset = find_crossings(model, scan)
        if bset.cdw_everywhere:
            return True
        for nu_lo, nu_hi, gap in bset.regions():
            if nu_hi - nu_lo > min_width and gap >= min_gap:
                return True
        return False

    return _bisect_predicate(has_cdw, v_lo, v_hi, tol)


def mixed_closure_temperature(factory: Callable[[float], object],
                              inv_beta_lo: float, inv_beta_hi: float,
                              side: str = "hole", jump_tol: float = 1e-3,
                              tol: float = 0.01, mu_window=None,
                              n_mu: int = 41,
                              cold_every: int = 10) -> BisectionResult:
    """Temperature 1/beta at which one mixed window closes.

    The mixed window on the chosen side is open when the boundary filling
    jump across the first-order crossing exceeds ``jump_tol``; it is
    closed when the jump falls below that, or when the crossing itself
    has disappeared (the status notes which).  Bisects on 1/beta between
    an open low-temperature end and a closed high-temperature end.
    """
    if side not in ("hole", "particle"):
        raise ValueError(f"side must be 'hole' or 'particle', got {side!r}")
    crossing_seen = {"lost": False}

    def window_open(inv_beta: float) -> bool:
        model = factory(float(inv_beta))
        if callable(mu_window):
            window = mu_window(model)
        elif mu_window is not None:
            window = mu_window
        else:
            window = model.auto_mu_window()
        scan = scan_mu(model, window[0], window[1], n_points=n_mu,
                       cold_every=cold_every)
        bset = find_crossings(model, scan)
        if side == "hole":
            if bset.mu1 is None:
                crossing_seen["lost"] = True
                return False
            jump = bset.nu_cdw1 - bset.nu_n1
        else:
            if bset.mu2 is None:
                crossing_seen["lost"] = True
                return False
            jump = bset.nu_n2 - bset.nu_cdw2
        return jump > jump_tol

    res = _bisect_predicate(window_open, inv_beta_lo, inv_beta_hi, tol)
    if res.converged and crossing_seen["lost"]:
        return replace(res, status="converged; crossing disappeared at the "
                                   "closed end of the bracket")
    return res
