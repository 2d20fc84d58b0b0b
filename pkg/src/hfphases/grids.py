"""Momentum grids and band relations.

Two kinds of reciprocal-space grids are used throughout:

* the antiperiodic square-lattice Brillouin zone (``L x L`` sites, momenta
  ``k_j = (2*pi/L)(n_j + 1/2)``), together with its half zone ``k_1 > 0``
  used to organize the two-by-two CDW blocks ``(k, k+Q)`` with ordering
  vector ``Q = (pi, pi)``;
* the rotated "antinodal" grid of momenta around the band saddle points,
  quantized along the diagonals ``k_1 +- k_2`` and cut off at ``kappa*pi``.

All grids are plain arrays with a fixed row-major ordering so that sums are
bit-reproducible between runs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

#: CDW ordering vector (pi, pi).
QVEC = (np.pi, np.pi)


@dataclass(frozen=True)
class MomentumGrid:
    """A finite set of 2D momenta with a per-point weight of 1/L^2."""

    k1: np.ndarray
    k2: np.ndarray
    weight: float
    kind: str  # 'full-BZ' | 'half-BZ' | 'antinodal'
    L: float

    @property
    def count(self) -> int:
        return self.k1.size


def _check_lattice_size(L: int) -> None:
    if not isinstance(L, (int, np.integer)):
        raise ValueError(f"lattice size must be an integer, got {L!r}")
    if L < 2 or L % 2 != 0:
        raise ValueError(f"lattice size must be even and >= 2, got {L}")


def build_bz(L: int) -> MomentumGrid:
    """Full Brillouin zone: L^2 momenta k_j = (2*pi/L)(n_j + 1/2) in (-pi, pi).

    Ordering is row-major in (n_1, n_2).
    """
    _check_lattice_size(L)
    n = np.arange(-L // 2, L // 2)
    k = (2.0 * np.pi / L) * (n + 0.5)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return MomentumGrid(k1.ravel(), k2.ravel(), 1.0 / L**2, "full-BZ", float(L))


def build_half_bz(L: int) -> MomentumGrid:
    """Half zone {k in BZ : k_1 > 0}; L^2/2 points.

    The full zone is recovered as the disjoint union of this grid and its
    shift by Q = (pi, pi) (modulo 2*pi).
    """
    _check_lattice_size(L)
    n1 = np.arange(0, L // 2)  # k1 = (2pi/L)(n1+1/2) > 0
    n2 = np.arange(-L // 2, L // 2)
    kk1 = (2.0 * np.pi / L) * (n1 + 0.5)
    kk2 = (2.0 * np.pi / L) * (n2 + 0.5)
    k1, k2 = np.meshgrid(kk1, kk2, indexing="ij")
    return MomentumGrid(k1.ravel(), k2.ravel(), 1.0 / L**2, "half-BZ", float(L))


def antinodal_axis_count(L: float, kappa: float) -> float:
    """Number of quantized values per rotated axis, kappa*L/sqrt(2)."""
    return kappa * L / np.sqrt(2.0)


def build_antinodal_grid(L: float, kappa: float) -> MomentumGrid:
    """Rotated antinodal grid: k_1 +- k_2 = (2*sqrt(2)*pi/L)(n_pm + 1/2),
    |k_1 +- k_2| <= kappa*pi; exactly (kappa*L)^2/2 points.

    The construction works in the rotated integer indices n_pm, which makes
    the cutoff test exact. kappa*L/sqrt(2) must be a positive even integer,
    otherwise the inclusive cutoff would not produce the stated count.
    """
    if not 0.0 < kappa <= 1.0:
        raise ValueError(f"kappa must be in (0, 1], got {kappa}")
    n_axis = antinodal_axis_count(L, kappa)
    n_int = int(round(n_axis))
    if n_int < 2 or abs(n_axis - n_int) > 1e-9 or n_int % 2 != 0:
        raise ValueError(
            f"kappa*L/sqrt(2) = {n_axis} must be a positive even integer; "
            "choose L (or use antinodal_grid_from_count) accordingly"
        )
    n = np.arange(-n_int // 2, n_int // 2)
    s = (2.0 * np.sqrt(2.0) * np.pi / L) * (n + 0.5)  # s_pm = k1 +- k2
    sp, sm = np.meshgrid(s, s, indexing="ij")
    k1 = 0.5 * (sp + sm)
    k2 = 0.5 * (sp - sm)
    return MomentumGrid(k1.ravel(), k2.ravel(), 1.0 / L**2, "antinodal", float(L))


def antinodal_grid_from_count(count: int, kappa: float) -> MomentumGrid:
    """Antinodal grid with a target total point count.

    The per-axis count is rounded to the nearest even integer and L is derived
    from it, so the actual count is the square of that rounding. The default
    target 6400 corresponds to L = 80*sqrt(2)/kappa.
    """
    if count < 4:
        raise ValueError(f"count must be >= 4, got {count}")
    n_axis = 2 * int(round(np.sqrt(float(count)) / 2.0))
    n_axis = max(n_axis, 2)
    L = np.sqrt(2.0) * n_axis / kappa
    return build_antinodal_grid(L, kappa)


def eps(k1, k2, t: float, t_prime: float):
    """Tight-binding band -2t[cos k1 + cos k2] - 4t' cos k1 cos k2."""
    c1, c2 = np.cos(k1), np.cos(k2)
    return -2.0 * t * (c1 + c2) - 4.0 * t_prime * c1 * c2


#: Saddle points paired with the quadratic forms of band_antinodal: the
#: flavor r = +1 band +t(k1^2-k2^2) - 2t'(k1^2+k2^2) expands eps around
#: (0, pi); r = -1 expands around (pi, 0).
SADDLE_POINT = {+1: (0.0, np.pi), -1: (np.pi, 0.0)}


def band_antinodal(r: int, k1, k2, t: float, t_prime: float,
                   variant: str = "taylor"):
    """Antinodal band for flavor r = +-1, relative to the saddle-point energy.

    variant 'taylor' is the quadratic saddle expansion
    r*t*(k1^2 - k2^2) - 2*t'*(k1^2 + k2^2); variant 'full' evaluates the
    lattice band at the saddle point plus k and subtracts the saddle energy.
    Both vanish at k = 0 and agree to O(|k|^4).
    """
    if r not in (+1, -1):
        raise ValueError(f"flavor r must be +1 or -1, got {r}")
    if variant == "taylor":
        sq1 = np.square(k1)
        sq2 = np.square(k2)
        return r * t * (sq1 - sq2) - 2.0 * t_prime * (sq1 + sq2)
    if variant == "full":
        p1, p2 = SADDLE_POINT[r]
        return eps(k1 + p1, k2 + p2, t, t_prime) - eps(p1, p2, t, t_prime)
    raise ValueError(f"unknown band variant {variant!r}")


def vertex_u(p1, p2):
    """Interaction vertex u(p) = cos p1 + cos p2."""
    return np.cos(p1) + np.cos(p2)


def vertex_basis(k1, k2) -> np.ndarray:
    """Vertex basis functions, stacked as shape (4, ...).

    u1 = cos k1 + cos k2, u2 = cos k1 - cos k2,
    u3 = sin k1 + sin k2, u4 = sin k1 - sin k2.
    They factorize the vertex, u(k - k') = (1/2) sum_j u_j(k) u_j(k'), and all
    flip sign under a shift by Q = (pi, pi).
    """
    c1, c2 = np.cos(k1), np.cos(k2)
    s1, s2 = np.sin(k1), np.sin(k2)
    return np.stack([c1 + c2, c1 - c2, s1 + s2, s1 - s2])


@lru_cache(maxsize=32)
def half_bz_tables(L: int, t: float, t_prime: float):
    """Half-zone grid plus the band/vertex arrays every lattice solve needs.

    Returns (grid, eps_k, eps_kQ, u) with u of shape (4, L^2/2). eps_kQ is the
    band at the Q-shifted partner momentum; the vertex basis at the partner is
    -u by the sign-flip identity, so it is not stored.
    """
    grid = build_half_bz(L)
    eps_k = eps(grid.k1, grid.k2, t, t_prime)
    eps_kq = eps(grid.k1 + np.pi, grid.k2 + np.pi, t, t_prime)
    u = vertex_basis(grid.k1, grid.k2)
    return grid, eps_k, eps_kq, u


@lru_cache(maxsize=32)
def antinodal_tables(count: int, kappa: float, t: float, t_prime: float,
                     variant: str):
    """Antinodal grid plus its two flavor bands, cached per parameter set."""
    grid = antinodal_grid_from_count(count, kappa)
    e_plus = band_antinodal(+1, grid.k1, grid.k2, t, t_prime, variant)
    e_minus = band_antinodal(-1, grid.k1, grid.k2, t, t_prime, variant)
    return grid, e_plus, e_minus
