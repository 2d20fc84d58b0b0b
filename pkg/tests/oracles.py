"""Independent reference implementations used to validate the package.

Everything here is written directly from the defining expressions, with no
shared code or conventions beyond the model definition itself:

* the lattice grand potential is evaluated from a dense momentum-space
  one-body matrix over the FULL Brillouin zone, with the interaction energy
  summed over explicit two-body matrix elements (Wick contractions of the
  full quartic vertex) and the entropy taken from the eigenvalues of the
  one-particle density matrix;
* the 2x2 block spectra/occupations come from numpy's eigensolver applied to
  the literal matrix;
* the antinodal-model grand potential is likewise evaluated densely from its
  two-flavor dispersion and contact vertex.

These are deliberately slow O(L^6) constructions, usable only at desk scale
(L = 4, a few dozen antinodal points), which is all a correctness oracle
needs.
"""
from __future__ import annotations

import numpy as np
from scipy.special import xlogy


# ---------------------------------------------------------------------------
# Full-zone momentum grid (antiperiodic boundary conditions)

def full_bz(L: int) -> np.ndarray:
    """All L^2 antiperiodic momenta, shape (L^2, 2), n_j in [-L/2, L/2)."""
    ns = np.arange(-L // 2, L // 2)
    k = (2.0 * np.pi / L) * (ns + 0.5)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return np.column_stack([k1.ravel(), k2.ravel()])


def _index_map(L: int) -> dict:
    """Map from integer offsets (n1, n2) to the row index in full_bz."""
    ns = np.arange(-L // 2, L // 2)
    return {(n1, n2): i * L + j
            for i, n1 in enumerate(ns) for j, n2 in enumerate(ns)}


def eps0(k: np.ndarray, t: float, tp: float) -> np.ndarray:
    return (-2.0 * t * (np.cos(k[:, 0]) + np.cos(k[:, 1]))
            - 4.0 * tp * np.cos(k[:, 0]) * np.cos(k[:, 1]))


def u_basis(k: np.ndarray) -> np.ndarray:
    """The five vertex functions (1, cos+cos, cos-cos, sin+sin, sin-sin)."""
    c1, c2 = np.cos(k[:, 0]), np.cos(k[:, 1])
    s1, s2 = np.sin(k[:, 0]), np.sin(k[:, 1])
    return np.stack([np.ones(len(k)), c1 + c2, c1 - c2, s1 + s2, s1 - s2])


def dense_lattice_omega(t: float, tp: float, V: float, mu: float,
                        beta: float, L: int,
                        q: np.ndarray, m: np.ndarray) -> float:
    """Grand potential per site of the trial state defined by (q, m).

    The trial one-body Hamiltonian is diagonal-plus-(k, k+Q) in the full
    zone; its thermal density matrix gamma defines the energy, particle
    number, and entropy. The interaction energy is the Wick double sum over
    the explicit quartic vertex

        v_{k l m n} = V/(2 L^2) * u(k - m) * delta(k + l - m - n mod 2pi)

    for the operator ordering c+_k c+_l c_n c_m, contributing
    sum v (gamma_mk gamma_nl - gamma_ml gamma_nk).
    """
    q = np.asarray(q, dtype=float)
    m = np.asarray(m, dtype=float)
    ks = full_bz(L)
    npts = len(ks)
    idx = _index_map(L)

    def row(kvec):
        n = np.rint(kvec * L / (2.0 * np.pi) - 0.5).astype(int)
        n = (n + L // 2) % L - L // 2
        return idx[(n[0], n[1])]

    u = u_basis(ks)
    h = np.zeros((npts, npts), dtype=complex)
    diag = eps0(ks, t, tp) - mu + q @ u
    h[np.arange(npts), np.arange(npts)] = diag
    # Each directed entry <k|h|k+Q> = m0 + i m.u(k) is assigned once; the
    # loop visit at k+Q supplies the conjugate entry since u(k+Q) = -u(k).
    Q = np.array([np.pi, np.pi])
    for a in range(npts):
        b_idx = row(ks[a] + Q)
        h[a, b_idx] = m[0] + 1j * (m[1:] @ u_basis(ks[a:a + 1])[1:, 0])

    e, U = np.linalg.eigh(h)
    with np.errstate(over="ignore"):
        f = 1.0 / (1.0 + np.exp(beta * e))
    gamma = (U * f) @ U.conj().T

    # one-body part: sum_k (eps - mu) gamma_kk  (the q/m potentials belong to
    # the trial Hamiltonian, not to the physical energy)
    e_one = float(np.real(np.sum((eps0(ks, t, tp) - mu) * np.diag(gamma))))

    # interaction: explicit quartic Wick sum
    e_int = 0.0
    for a in range(npts):
        for b in range(npts):
            for c in range(npts):
                # v_{a b c d}: momentum conservation k + l - m - n = 0
                kd = ks[a] + ks[b] - ks[c]
                d = row(kd)
                du = ks[a] - ks[c]
                v = (V / (2.0 * L * L)) * (np.cos(du[0]) + np.cos(du[1]))
                e_int += v * np.real(gamma[c, a] * gamma[d, b]
                                     - gamma[c, b] * gamma[d, a])

    # entropy from the occupation spectrum of gamma
    occ = np.clip(np.real(np.linalg.eigvalsh(gamma)), 0.0, 1.0)
    entropy = -float(np.sum(xlogy(occ, occ) + xlogy(1.0 - occ, 1.0 - occ)))

    return (e_one + e_int - entropy / beta) / (L * L)


# ---------------------------------------------------------------------------
# 2x2 block reference

def block_reference(a_plus: float, a_minus: float, b: complex, beta: float):
    """Eigen-decomposition reference for one (k, k+Q) block.

    Returns (e_minus, e_plus, theta, theta_bar, theta_tilde) where the
    thetas are the (0,0), (1,1) and (0,1) entries of the Fermi function of
    the block matrix [[a_plus, b], [conj(b), a_minus]].
    """
    hmat = np.array([[a_plus, b], [np.conjugate(b), a_minus]], dtype=complex)
    e, U = np.linalg.eigh(hmat)
    with np.errstate(over="ignore"):
        f = 1.0 / (1.0 + np.exp(beta * e))
    F = (U * f) @ U.conj().T
    return e[0], e[1], F[0, 0].real, F[1, 1].real, F[0, 1]


# ---------------------------------------------------------------------------
# Dense antinodal-model reference

def dense_antinodal_omega(kappa: float, count: int, t: float, tp: float,
                          g_a: float, mu_a: float, beta: float,
                          q0: float, q1: float, delta: float,
                          variant: str = "taylor") -> float:
    """Grand potential per original-lattice site of the two-flavor model.

    The trial Hamiltonian adds q0 + r*q1 - mu_a to flavor r = +/-1 and
    couples the flavors through a uniform (momentum-diagonal) pairing delta.
    The contact interaction (2 g_a / L^2) sum c+_{+k1} c_{+k2} c+_{-k3}
    c_{-k4} delta(k1 - k2 + k3 - k4) is Wick-summed explicitly.
    """
    from hfphases.grids import antinodal_grid_from_count, band_antinodal

    grid = antinodal_grid_from_count(count, kappa)
    npts = grid.count
    L2 = 1.0 / grid.weight  # effective L^2 (sites); weight = 1/L^2
    e_p = band_antinodal(+1, grid.k1, grid.k2, t, tp, variant)
    e_m = band_antinodal(-1, grid.k1, grid.k2, t, tp, variant)

    dim = 2 * npts
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(npts):
        h[i, i] = e_p[i] + q0 + q1 - mu_a
        h[npts + i, npts + i] = e_m[i] + q0 - q1 - mu_a
        h[i, npts + i] = delta
        h[npts + i, i] = np.conjugate(delta)

    e, U = np.linalg.eigh(h)
    with np.errstate(over="ignore"):
        f = 1.0 / (1.0 + np.exp(beta * e))
    gamma = (U * f) @ U.conj().T

    band = np.concatenate([e_p, e_m])
    e_one = float(np.real(np.sum((band - mu_a) * np.diag(gamma))))

    # contact vertex: (2 g_a / L^2) c+_{+,k1} c_{+,k2} c+_{-,k3} c_{-,k4}
    # with k1 - k2 + k3 - k4 = 0; Wick-summed explicitly over the blocks.
    e_int = dense_contact_wick(gamma, npts, grid) * (2.0 * g_a / L2)

    occ = np.clip(np.real(np.linalg.eigvalsh(gamma)), 0.0, 1.0)
    entropy = -float(np.sum(xlogy(occ, occ) + xlogy(1.0 - occ, 1.0 - occ)))
    return (e_one + e_int - entropy / beta) / L2


def dense_contact_wick(gamma: np.ndarray, npts: int, grid) -> float:
    """Explicit Wick sum for the flavor-contact vertex (see caller)."""
    total = 0.0
    k1s, k2s = grid.k1, grid.k2
    for i1 in range(npts):
        for i2 in range(npts):
            for i3 in range(npts):
                t1 = k1s[i1] - k1s[i2] + k1s[i3]
                t2 = k2s[i1] - k2s[i2] + k2s[i3]
                match = np.where((np.abs(k1s - t1) < 1e-9)
                                 & (np.abs(k2s - t2) < 1e-9))[0]
                if len(match) == 0:
                    continue
                i4 = int(match[0])
                a = i1            # c+_{+, k1}
                b = i2            # c_{+, k2}
                c = npts + i3     # c+_{-, k3}
                d = npts + i4     # c_{-, k4}
                # <c+_a c_b c+_c c_d> = gamma_ba*gamma_dc
                #                      + gamma_da*(delta_bc - gamma_bc)
                total += np.real(gamma[b, a] * gamma[d, c]
                                 + gamma[d, a]
                                 * ((1.0 if b == c else 0.0) - gamma[b, c]))
    return total
