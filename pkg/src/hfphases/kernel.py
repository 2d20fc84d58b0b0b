"""Shared 2x2-block Hartree-Fock machinery.

Every mean field state used here couples at most two one-particle levels per
momentum, so all thermodynamics reduces to Hermitian blocks

    h = [[a_plus, b], [conj(b), a_minus]]

whose eigenvalues e_pm = a0 +- W (a0 = (a_plus+a_minus)/2,
W = sqrt(a1^2 + |b|^2), a1 = (a_plus-a_minus)/2) and thermal occupations are
available in closed form. Functions are vectorized over arrays of blocks and
numerically stable for beta up to 1e5 and beyond; "zero temperature" always
means a large finite beta, there is no separate T=0 code path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

#: Below this splitting the two block eigenvalues are treated as degenerate
#: and the a1/W, b/W factors (which multiply f(e+) - f(e-) -> 0) are set to 0.
DEGENERATE_W = 1e-14


def _check_beta(beta: float) -> None:
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")


def fermi(x, beta: float):
    """Fermi function 1/(exp(beta*x) + 1), saturating without overflow."""
    _check_beta(beta)
    return expit(-beta * np.asarray(x, dtype=float))


def grand_term(x, beta: float):
    """(1/beta) * log(1 + exp(-beta*x)), computed stably.

    Tends to -x for beta*x << 0 and to 0 for beta*x >> 0; its negative
    x-derivative is the Fermi function.
    """
    _check_beta(beta)
    return np.logaddexp(0.0, -beta * np.asarray(x, dtype=float)) / beta


@dataclass(frozen=True)
class BlockSpectrum:
    a0: np.ndarray
    a1: np.ndarray
    W: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray


@dataclass(frozen=True)
class BlockOccupation:
    """Entries of the 2x2 thermal density matrix f(h) plus the band fillings.

    theta and theta_bar are the diagonal entries (occupations of the two
    coupled levels), theta_tilde the off-diagonal (anomalous CDW) entry;
    f_plus/f_minus are the Fermi factors of the upper/lower band.
    """

    theta: np.ndarray
    theta_bar: np.ndarray
    theta_tilde: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray


def spectrum(a_plus, a_minus, b) -> BlockSpectrum:
    """Eigenvalues of the Hermitian block [[a_plus, b], [conj(b), a_minus]]."""
    a_plus = np.asarray(a_plus, dtype=float)
    a_minus = np.asarray(a_minus, dtype=float)
    a0 = 0.5 * (a_plus + a_minus)
    a1 = 0.5 * (a_plus - a_minus)
    W = np.sqrt(a1 * a1 + np.square(np.abs(b)))
    return BlockSpectrum(a0, a1, W, a0 + W, a0 - W)


def occupation(a_plus, a_minus, b, beta: float,
               spec: BlockSpectrum | None = None) -> BlockOccupation:
    """Thermal density matrix f(h) of a block, elementwise over block arrays.

    The ratio (f(e+) - f(e-))/(2W) is set to zero on degenerate blocks
    (W < DEGENERATE_W); the exact limit of the a1/W and b/W products vanishes
    there, this just avoids the 0/0. A precomputed spectrum may be passed to
    save the eigenvalue work.
    """
    if spec is None:
        spec = spectrum(a_plus, a_minus, b)
    f_plus = fermi(spec.e_plus, beta)
    f_minus = fermi(spec.e_minus, beta)
    degenerate = spec.W < DEGENERATE_W
    w_safe = np.where(degenerate, 1.0, spec.W)
    ratio = np.where(degenerate, 0.0, (f_plus - f_minus) / (2.0 * w_safe))
    half_sum = 0.5 * (f_plus + f_minus)
    return BlockOccupation(
        theta=half_sum + spec.a1 * ratio,
        theta_bar=half_sum - spec.a1 * ratio,
        theta_tilde=np.asarray(b) * ratio,
        f_plus=f_plus,
        f_minus=f_minus,
    )
