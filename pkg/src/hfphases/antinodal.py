"""Effective antinodal model: two saddle-point fermion flavors with a contact
coupling, plus closed-form bookkeeping for the linearized diagonal (nodal)
bands that were integrated out.

The degrees of freedom are fermions on the rotated grid around the two band
saddle points (flavors r = +-1), with quadratic (or full) bands E_r(k), a
renormalized contact coupling g_a and their own chemical potential mu_a.  The
diagonal band segments enter only through closed forms: the Fermi-arc tip
momentum tQ, the total filling

    nu = 1/2 + (1-kappa)(2 tQ/pi - 1) + kappa^2 (nu_a - 1/2),

the auxiliary constant C = (1-kappa) cos(Q) (2 tQ/pi - 1) + (1-kappa)^2 / 2,
and additive energy constants E_kin, E_1, E_int per site, so that the total
grand potential per site is

    Omega/L^2 = Omega_a/L^2 + (E_kin + E_1 + E_int)/L^2.

A fourth constant belonging to the integrated-out sector is independent of mu
and common to all branches, so it is set to zero here; absolute Omega values
therefore carry an overall additive offset, while every observable built from
mu-derivatives or branch comparisons (fillings, crossings, boundaries) is
unaffected.

The antinodal mean field state has three variational parameters (q0, q1,
Delta): a common shift, a flavor imbalance field and the inter-flavor
coherence Delta that opens the gap.  Blocks are

    a_pm(k) = E_pm(k) + q0 +- q1 - mu_a,   b(k) = Delta,

and the grand potential per site (energy constants excluded) is

    Omega_a/L^2 = e_HFG - q0 n0 - q1 n1 - 2 Delta ntilde0
                  + (g_a/2)(n0^2 - n1^2 - 4 ntilde0^2)

with n0, n1, ntilde0 the flavor-summed, flavor-difference and cross
occupations per site.  Stationarity is equivalent to the gap equations
q0 = g_a n0, q1 = -g_a n1, Delta = -2 g_a ntilde0.  The antinodal filling is
nu_a = n0/kappa^2 (the grid holds (kappa*L)^2 one-particle states per L^2
sites).

Given mu, the model is closed by a self-consistency loop on nu_a: a guess for
nu_a fixes (tQ, nu, mu_a) in closed form, minimizing Omega_a at that mu_a
returns a new nu_a, and the damped update repeats until the two agree.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import grids, kernel
from .minimize import MinimizeSpec, minimize
from .ttpv import (COLLAPSE_TOL, OMEGA_TOL, RESIDUAL_TOL, MfSolution,
                   VariationalAnsatz)


class ValidityWarning(UserWarning):
    """Parameters are inside the domain but where the model is least reliable."""


#: Half-width of the warning zone around Q = pi/2 (the linearized diagonal
#: bands acquire extra scattering channels exactly at the zone midpoint).
Q_MIDPOINT_TOL = 1e-6

#: Default nu_a self-consistency threshold and outer iteration cap.
NU_A_TOL = 1e-10
MAX_OUTER = 500


def _window(kappa: float) -> tuple[float, float]:
    """Admissible interval for Q (and for tQ): ((1-k)pi/2, (1+k)pi/2)."""
    return (1.0 - kappa) * np.pi / 2.0, (1.0 + kappa) * np.pi / 2.0


def _coupling_ratio(t: float, t_prime: float, V: float, kappa: float,
                    Q: float) -> float:
    """V(1-kappa) sin(Q) / (2 pi [t + 2t' cos(Q)]), constrained to [0, 1)."""
    return V * (1.0 - kappa) * np.sin(Q) / (
        2.0 * np.pi * (t + 2.0 * t_prime * np.cos(Q)))


@dataclass(frozen=True)
class LuttParams:
    """Model parameters; energies in units of t.

    kappa in (0, 1] is the linear fraction of the zone kept as antinodal;
    Q is the diagonal Fermi-point parameter, restricted to the window
    ((1-kappa)pi/2, (1+kappa)pi/2) with the additional coupling-strength
    bound 0 <= V(1-kappa)sin(Q)/(2pi[t + 2t'cos(Q)]) < 1.  band selects the
    quadratic saddle expansion ('taylor') or the exact lattice band relative
    to the saddle energy ('full').  antinodal_count is the target number of
    grid momenta (the realized count is the nearest even-per-axis square).
    """

    t: float
    t_prime: float
    V: float
    kappa: float
    Q: float
    beta: float
    band: str = "taylor"
    antinodal_count: int = 6400

    def __post_init__(self) -> None:
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if not -self.t / 2 < self.t_prime < self.t / 2:
            raise ValueError(
                f"t' must satisfy -t/2 < t' < t/2, got {self.t_prime}")
        if self.V < 0:
            raise ValueError(f"V must be nonnegative, got {self.V}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        lo, hi = _window(self.kappa)
        if not lo < self.Q < hi:
            raise ValueError(
                f"Q = {self.Q:.6f} outside the admissible window "
                f"({lo:.6f}, {hi:.6f}) for kappa = {self.kappa}")
        ratio = _coupling_ratio(self.t, self.t_prime, self.V, self.kappa,
                                self.Q)
        if not 0.0 <= ratio < 1.0:
            raise ValueError(
                "coupling bound violated: V(1-kappa)sin(Q)/(2pi[t+2t'cosQ]) "
                f"= {ratio:.6f} must lie in [0, 1)")
        if self.band not in ("taylor", "full"):
            raise ValueError(f"unknown band variant {self.band!r}")
        grids.antinodal_grid_from_count(self.antinodal_count, self.kappa)
        if abs(self.Q - np.pi / 2.0) <= Q_MIDPOINT_TOL:
            warnings.warn(
                "Q = pi/2: extra scattering channels neglected by the model "
                "open up at the zone midpoint; treat results here with care",
                ValidityWarning, stacklevel=2)


@dataclass(frozen=True)
class DerivedCouplings:
    """Couplings of the antinodal sector after the diagonal bands are gone.

    g_eff is the screening correction produced by the integrated-out bands
    (nonnegative inside the parameter window), g_a = 2V - g_eff the contact
    coupling that remains, v_F the diagonal-band Fermi velocity.
    """

    g_eff: float
    g_a: float
    v_F: float


def derived_couplings(params: LuttParams) -> DerivedCouplings:
    s, c = np.sin(params.Q), np.cos(params.Q)
    hop = params.t + 2.0 * params.t_prime * c
    g_eff = params.V ** 2 * (1.0 - params.kappa) / (
        s * np.pi * (hop + (params.V / np.pi) * (1.0 - params.kappa) * s))
    v_f = 2.0 * np.sqrt(2.0) * s * hop
    return DerivedCouplings(float(g_eff), float(2.0 * params.V - g_eff),
                            float(v_f))


@dataclass(frozen=True)
class NodalState:
    """Closed-form state of the diagonal (arc) sector at given mu and nu_a."""

    tQ: float
    C: float
    nu: float
    mu: float
    mu_a: float
    in_window: bool


def solve_tQ(params: LuttParams, mu: float, nu_a: float,
             warn: bool = True) -> NodalState:
    """Arc-tip momentum tQ and everything downstream of it, in closed form.

    The defining relation

        mu = sqrt(2) v_F (tQ - Q) + 2 V nu - 4t cos(Q) - 4t' cos^2(Q)
             - 2 V C cos(Q)

    is linear in tQ once nu and C (both affine in tQ) are substituted, so tQ
    follows by a single division.  Returns the nodal state including
    mu_a = mu - 2 V nu - 4t' + g_a nu_a kappa^2; flags (and by default warns
    about) tQ falling outside the admissible window.
    """
    cpl = derived_couplings(params)
    one_m = 1.0 - params.kappa
    s, c = np.sin(params.Q), np.cos(params.Q)
    coef = 4.0 * s * (params.t + 2.0 * params.t_prime * c
                      + (params.V / np.pi) * one_m * s)
    if abs(coef) < 1e-12:
        raise ArithmeticError(
            "degenerate geometry: the linear coefficient of tQ vanishes "
            f"(Q = {params.Q}, kappa = {params.kappa})")
    nu_base = 0.5 - one_m + params.kappa ** 2 * (nu_a - 0.5)
    c_base = -one_m * c + 0.5 * one_m ** 2
    const = (-np.sqrt(2.0) * cpl.v_F * params.Q + 2.0 * params.V * nu_base
             - 4.0 * params.t * c - 4.0 * params.t_prime * c ** 2
             - 2.0 * params.V * c_base * c)
    tq = (mu - const) / coef
    frac = 2.0 * tq / np.pi
    nu = nu_base + one_m * frac
    c_val = c_base + one_m * c * frac
    mu_a = (mu - 2.0 * params.V * nu - 4.0 * params.t_prime
            + cpl.g_a * nu_a * params.kappa ** 2)
    lo, hi = _window(params.kappa)
    in_window = bool(lo < tq < hi)
    if warn and not in_window:
        warnings.warn(
            f"tQ = {tq:.6f} outside the admissible window "
            f"({lo:.6f}, {hi:.6f})", ValidityWarning, stacklevel=2)
    return NodalState(float(tq), float(c_val), float(nu), float(mu),
                      float(mu_a), in_window)


@dataclass(frozen=True)
class EnergyConstants:
    """Per-site additive constants from the non-antinodal sectors.

    kinetic: band energy of the filled outer diagonal fermions plus the arcs;
    one_body: counterterm from normal-ordering the antinodal coupling;
    interaction: remaining quadratic bookkeeping of the decoupling.  The
    mu-independent constant of the integrated-out sector is set to zero.
    """

    kinetic: float
    one_body: float
    interaction: float

    @property
    def total(self) -> float:
        return self.kinetic + self.one_body + self.interaction


def energy_constants(params: LuttParams, mu: float, tQ: float, nu_a: float,
                     nu: float) -> EnergyConstants:
    cpl = derived_couplings(params)
    k = params.kappa
    one_m = 1.0 - k
    s_q, c_q = np.sin(params.Q), np.cos(params.Q)
    frac = 2.0 * tQ / np.pi
    c_val = one_m * c_q * (frac - 1.0) + 0.5 * one_m ** 2
    band_at_tip = (np.sqrt(2.0) * cpl.v_F
                   * (tQ / 2.0 - params.Q + np.pi * one_m / 4.0)
                   - 4.0 * params.t * c_q - 4.0 * params.t_prime * c_q ** 2)
    kinetic = (0.5 * one_m ** 2 * (-4.0 * (params.t + params.t_prime)
                                   + (params.t + 2.0 * params.t_prime)
                                   * one_m ** 2 * np.pi ** 2 / 3.0)
               + one_m * (frac - 1.0 + k) * band_at_tip)
    one_body = ((mu - 2.0 * params.V * nu) * nu_a * k ** 2
                + 0.5 * cpl.g_a * nu_a ** 2 * k ** 4)
    interaction = (-mu * nu + params.V * nu ** 2
                   + params.V * (k * one_m * c_q) ** 2
                   - params.V * c_val ** 2)
    return EnergyConstants(float(kinetic), float(one_body),
                           float(interaction))


# ---------------------------------------------------------------------------
# Antinodal mean field problem at fixed mu_a

@dataclass(frozen=True)
class AntinodalEval:
    """One evaluation of the antinodal grand potential (constants excluded)."""

    omega_per_site: float
    e_hfg: float
    n0: float
    n1: float
    n_tilde0: float
    nu_a: float


def _tables(params: LuttParams):
    return grids.antinodal_tables(params.antinodal_count, params.kappa,
                                  params.t, params.t_prime, params.band)


def evaluate_antinodal(params: LuttParams, mu_a: float, q0: float, q1: float,
                       delta: float) -> AntinodalEval:
    """Grand potential per site, occupations and filling for one ansatz."""
    grid, e_plus, e_minus = _tables(params)
    g_a = derived_couplings(params).g_a
    a_plus = e_plus + (q0 + q1 - mu_a)
    a_minus = e_minus + (q0 - q1 - mu_a)
    spec = kernel.spectrum(a_plus, a_minus, delta)
    occ = kernel.occupation(a_plus, a_minus, delta, params.beta, spec)
    w = grid.weight
    n0 = w * float(np.sum(occ.theta + occ.theta_bar))
    n1 = w * float(np.sum(occ.theta - occ.theta_bar))
    nt0 = w * float(np.sum(np.real(occ.theta_tilde)))
    e_hfg = -w * float(np.sum(kernel.grand_term(spec.e_plus, params.beta)
                              + kernel.grand_term(spec.e_minus, params.beta)))
    omega = (e_hfg - q0 * n0 - q1 * n1 - 2.0 * delta * nt0
             + 0.5 * g_a * (n0 ** 2 - n1 ** 2 - 4.0 * nt0 ** 2))
    return AntinodalEval(omega, e_hfg, n0, n1, nt0,
                         n0 / params.kappa ** 2)


def omega_antinodal(params: LuttParams, mu_a: float,
                    ansatz: VariationalAnsatz) -> float:
    """Antinodal grand potential per site, energy constants excluded."""
    if not ansatz.restricted:
        raise ValueError("the antinodal model has exactly three variational "
                         "parameters; pass a restricted ansatz")
    return evaluate_antinodal(params, mu_a, float(ansatz.q[0]),
                              float(ansatz.q[1]), ansatz.delta).omega_per_site


def antinodal_gap_residuals(params: LuttParams, mu_a: float,
                            ansatz: VariationalAnsatz) -> np.ndarray:
    """Residuals (q0 - g_a n0, q1 + g_a n1, Delta + 2 g_a ntilde0)."""
    g_a = derived_couplings(params).g_a
    ev = evaluate_antinodal(params, mu_a, float(ansatz.q[0]),
                            float(ansatz.q[1]), ansatz.delta)
    return np.array([ansatz.q[0] - g_a * ev.n0,
                     ansatz.q[1] + g_a * ev.n1,
                     ansatz.delta + 2.0 * g_a * ev.n_tilde0])


def _antinodal_closures(params: LuttParams, mu_a: float, branch: str):
    g_a = derived_couplings(params).g_a

    def combined(x: np.ndarray) -> tuple[float, np.ndarray]:
        delta = x[2] if branch == "CDW" else 0.0
        ev = evaluate_antinodal(params, mu_a, x[0], x[1], delta)
        if branch == "N":
            g = np.array([g_a * ev.n0, -g_a * ev.n1])
        else:
            g = np.array([g_a * ev.n0, -g_a * ev.n1, -2.0 * g_a * ev.n_tilde0])
        return ev.omega_per_site, g

    def objective(x: np.ndarray) -> float:
        return combined(x)[0]

    def gap_map(x: np.ndarray) -> np.ndarray:
        return combined(x)[1]

    return objective, gap_map, combined


def default_antinodal_seeds(params: LuttParams, branch: str,
                            nu_a_hint: float = 0.5,
                            n_random: int = 5) -> list[np.ndarray]:
    """Deterministic multistart seeds at the given filling guess."""
    g_a = derived_couplings(params).g_a
    q0 = g_a * nu_a_hint * params.kappa ** 2  # gap-map image of n0
    if branch == "N":
        return [np.array([q0, 0.0])]
    scale = max(abs(g_a) * params.kappa ** 2, 0.1)
    base = [np.array([q0, 0.0, 0.5 * scale])]
    rng = np.random.default_rng(0)
    for _ in range(n_random):
        base.append(np.array([q0, 0.0, rng.uniform(0.05, 1.5) * scale]))
    return base


def solve_antinodal(params: LuttParams, mu_a: float, branch: str,
                    seeds: list[np.ndarray] | None = None,
                    nu_a_hint: float = 0.5,
                    fatol: float = OMEGA_TOL,
                    residual_tol: float = RESIDUAL_TOL,
                    polish: bool = True) -> MfSolution:
    """Converge the three-parameter antinodal state at fixed mu_a.

    branch 'N' pins Delta = 0; branch 'CDW' reports a collapse when the
    coherence parameter dies, meaning no gapped stationary point exists at
    this mu_a.  The returned solution stores nu_a in its ``nu`` field.
    """
    if branch not in ("N", "CDW"):
        raise ValueError(f"unknown branch {branch!r}")
    if seeds is None:
        seeds = default_antinodal_seeds(params, branch, nu_a_hint)
    objective, gap_map, combined = _antinodal_closures(params, mu_a, branch)
    spec = MinimizeSpec(
        seeds=seeds,
        fatol=fatol,
        residual_tol=residual_tol,
        polish=polish,
        collapse_index=2 if branch == "CDW" else None,
        collapse_tol=COLLAPSE_TOL,
    )
    res = minimize(objective, gap_map, spec, combined=combined)
    x = res.x.copy()
    if branch == "CDW" and x.size == 3:
        x[2] = abs(x[2])  # coherence sign is a gauge; canonicalize
    delta = float(x[2]) if branch == "CDW" else 0.0
    ansatz = VariationalAnsatz.from_restricted(float(x[0]), float(x[1]),
                                               delta)
    ev = evaluate_antinodal(params, mu_a, float(x[0]), float(x[1]), delta)
    converged = res.converged
    status = res.status
    if branch == "CDW" and status == "collapsed":
        converged = False
    return MfSolution(
        ansatz=ansatz,
        omega_per_site=ev.omega_per_site,
        nu=ev.nu_a,
        gap=2.0 * abs(delta),
        branch=branch,
        residual_norm=res.residual_norm,
        converged=converged,
        status=status,
        n_iter=res.n_iter,
    )


# ---------------------------------------------------------------------------
# Outer self-consistency on nu_a and the Q = tQ fixed point

@dataclass(frozen=True)
class LuttSolution:
    """Joint state of the antinodal solve and the closed-form sector.

    antinodal.nu holds nu_a; nodal, energy and nu are evaluated from the
    converged nu_a, so all closed-form identities hold among them exactly.
    omega_per_site is the total Omega_a/L^2 + (E_kin + E_1 + E_int)/L^2.
    """

    antinodal: MfSolution
    nodal: NodalState
    energy: EnergyConstants
    omega_per_site: float
    nu: float
    branch: str
    converged: bool
    status: str
    n_outer: int


def _warm_seed(sol: MfSolution, branch: str) -> np.ndarray | None:
    if branch == "CDW":
        if sol.status == "collapsed":
            return None
        return np.array([sol.ansatz.q[0], sol.ansatz.q[1], sol.ansatz.delta])
    return np.array([sol.ansatz.q[0], sol.ansatz.q[1]])


def _secant_candidate(nu_a: float, g: float,
                      prev: tuple[float, float] | None) -> float | None:
    """Secant estimate of the root of g from the last two samples.

    When both samples sit on the same flat of the staircase the slope is
    exactly -1 and this returns nu_a + g, i.e. the sampled image itself.
    """
    if prev is None:
        return None
    dg = g - prev[1]
    if abs(dg) < 1e-15:
        return nu_a + g
    return nu_a - g * (nu_a - prev[0]) / dg


def self_consistent_point(params: LuttParams, mu: float, branch: str,
                          nu_a0: float = 0.5,
                          tol: float = NU_A_TOL,
                          max_outer: int = MAX_OUTER,
                          fatol: float = OMEGA_TOL,
                          residual_tol: float = RESIDUAL_TOL,
                          polish: bool = True) -> LuttSolution:
    """Close the loop mu -> (tQ, mu_a) -> antinodal solve -> nu_a -> mu.

    Root-find on the scalar update g(nu_a) = nu_a' - nu_a.  A secant step
    is taken whenever two samples are available, falling back to a plain
    fixed-point step otherwise; as soon as two samples have opposite signs
    they bracket the root and every subsequent step is kept inside the
    (shrinking) bracket, with the midpoint as a safeguard.  The secant step
    is what makes the near-zero-temperature regime cheap: nu_a'(nu_a) is a
    staircase there (each antinodal level crossing moves the filling by one
    grid quantum), so two samples on the flat around the fixed point give
    slope -1 and the secant lands on the root exactly instead of creeping
    toward it one damped step at a time.

    Inner solves inside the loop are warm-started from the previous ansatz
    and skip the simplex polish (stationarity at the loop tolerance is all
    the update needs); once the loop settles, the result is re-checked
    against a full multistart polished solve so a drifting warm start cannot
    silently track a local minimum.  If the gapped branch collapses along
    the way, the loop keeps moving on the (cheap) gapless state and
    re-probes the gapped one at the settled point, so a transient collapse
    cannot end the search early.
    """
    nu_a = float(nu_a0)
    prev = None  # (nu_a, g(nu_a)) of the previous iteration
    bracket = None  # (lo, hi) with g(lo) > 0 > g(hi)
    warm = None
    inner_branch = branch
    rechecks = 0
    status = "outer-max-iterations"
    sol = None
    n = 0
    # The inner stationarity residual feeds straight into nu_a', so it must
    # be resolved one order below the outer target or the bisection would
    # chase noise roots.
    residual_tol = min(residual_tol, tol / 10.0)
    for n in range(1, max_outer + 1):
        nodal = solve_tQ(params, mu, nu_a, warn=False)
        seeds = None if warm is None else [warm]
        sol = solve_antinodal(params, nodal.mu_a, inner_branch, seeds=seeds,
                              nu_a_hint=nu_a, fatol=fatol,
                              residual_tol=residual_tol, polish=False)
        if inner_branch == "CDW" and sol.status == "collapsed":
            inner_branch = "N"
            warm = np.array([sol.ansatz.q[0], sol.ansatz.q[1]])
            prev, bracket = None, None  # the map changed branch
        step = sol.nu - nu_a
        if abs(step) < tol:
            if rechecks < 3:
                # Verify the settled point against the full seed set of the
                # requested branch (with polish); adopt its polished values
                # when it lands on the same fixed point, keep looping when
                # it finds a different, lower state.
                rechecks += 1
                full = solve_antinodal(params, nodal.mu_a, branch,
                                       nu_a_hint=nu_a, fatol=fatol,
                                       residual_tol=residual_tol,
                                       polish=polish)
                adopt = False
                if branch == "CDW" and inner_branch == "N":
                    if full.status == "collapsed":
                        sol = full  # gapped state confirmed absent here
                    else:
                        adopt = True
                elif abs(full.nu - sol.nu) < tol:
                    sol = full
                elif full.converged and (full.omega_per_site
                                         < sol.omega_per_site - 10.0 * fatol):
                    adopt = True
                if adopt:
                    sol = full
                    inner_branch = branch
                    warm = _warm_seed(full, branch)
                    prev, bracket = None, None
                    step = sol.nu - nu_a
                    if abs(step) >= tol:
                        nu_a = min(max(nu_a + step, 0.0), 1.0)
                        continue
            status = "converged"
            break
        if bracket is not None:
            lo, hi = bracket
            if step > 0.0:
                lo = nu_a
            else:
                hi = nu_a
            if abs(hi - lo) < 1e-14 * max(1.0, abs(lo)):
                # Interval exhausted with a residual update left: the honest
                # resolution limit of this grid/temperature combination.
                status = "outer-stalled"
                break
            bracket = (lo, hi)
            cand = _secant_candidate(nu_a, step, prev)
            prev = (nu_a, step)
            if cand is not None and min(lo, hi) < cand < max(lo, hi):
                nu_a = cand
            else:
                nu_a = 0.5 * (lo + hi)
        elif prev is not None and step * prev[1] < 0.0:
            bracket = (nu_a, prev[0]) if step > 0.0 else (prev[0], nu_a)
            lo, hi = bracket
            cand = _secant_candidate(nu_a, step, prev)
            prev = (nu_a, step)
            if cand is not None and min(lo, hi) < cand < max(lo, hi):
                nu_a = cand
            else:
                nu_a = 0.5 * (lo + hi)
        else:
            cand = _secant_candidate(nu_a, step, prev)
            prev = (nu_a, step)
            if cand is not None and abs(cand - nu_a) <= 10.0 * abs(step):
                nu_a = min(max(cand, 0.0), 1.0)
            else:
                nu_a = min(max(nu_a + step, 0.0), 1.0)
        warm = _warm_seed(sol, inner_branch)
    nu_a_final = sol.nu
    nodal = solve_tQ(params, mu, nu_a_final)
    energy = energy_constants(params, mu, nodal.tQ, nu_a_final, nodal.nu)
    converged = status == "converged" and sol.converged
    if sol.status == "collapsed":
        status = "collapsed"
    elif status == "converged" and not sol.converged:
        status = f"inner-{sol.status}"
    return LuttSolution(
        antinodal=sol,
        nodal=nodal,
        energy=energy,
        omega_per_site=sol.omega_per_site + energy.total,
        nu=nodal.nu,
        branch=branch,
        converged=converged,
        status=status,
        n_outer=n,
    )


@dataclass(frozen=True)
class QFixResult:
    """Outcome of driving Q to the fixed point Q = tQ."""

    Q_star: float
    converged: bool
    status: str
    n_iter: int
    trace: tuple
    solution: LuttSolution | None


def fix_Q(params: LuttParams, mu: float, branch: str = "CDW",
          tol: float = 1e-8, max_iter: int = 200,
          **solve_kwargs) -> QFixResult:
    """Iterate Q <- tQ(Q) until the two agree.

    params.Q provides the starting value.  Each step solves the full
    self-consistent point at the current Q (in the requested branch, by
    default the gapped one) and replaces Q by the resulting tQ.  Leaving the
    admissible window or losing the inner solution terminates with a failure
    status and the visited-Q trace.
    """
    current = params
    trace = [current.Q]
    nu_a0 = solve_kwargs.pop("nu_a0", 0.5)
    sol = None
    for n in range(1, max_iter + 1):
        sol = self_consistent_point(current, mu, branch, nu_a0=nu_a0,
                                    **solve_kwargs)
        if not sol.converged:
            return QFixResult(current.Q, False, f"point-solve: {sol.status}",
                              n, tuple(trace), sol)
        tq = sol.nodal.tQ
        trace.append(tq)
        if abs(tq - current.Q) < tol:
            return QFixResult(tq, True, "converged", n, tuple(trace), sol)
        try:
            current = replace(current, Q=tq)
        except ValueError as err:
            return QFixResult(current.Q, False, f"left-window: {err}", n,
                              tuple(trace), sol)
        nu_a0 = sol.antinodal.nu
    return QFixResult(current.Q, False, "max-iterations", max_iter,
                      tuple(trace), sol)
