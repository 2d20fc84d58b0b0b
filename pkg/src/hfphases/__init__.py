"""Finite-temperature restricted Hartree-Fock phase diagrams for 2D lattice
fermions: the t-t'-V model and its effective antinodal (partially gapped)
description."""

__version__ = "0.1.0"

from .antinodal import (DerivedCouplings, EnergyConstants, LuttParams,
                        LuttSolution, NodalState, QFixResult, ValidityWarning,
                        derived_couplings, energy_constants, fix_Q,
                        omega_antinodal, self_consistent_point,
                        solve_antinodal, solve_tQ)
from .grids import (MomentumGrid, band_antinodal, build_antinodal_grid,
                    build_bz, build_half_bz, eps, vertex_basis, vertex_u)
from .kernel import fermi, grand_term, occupation, spectrum
from .minimize import MinimizeResult, MinimizeSpec, minimize
from .phases import (BisectionResult, BoundarySet, ColumnResult, Crossing,
                     LuttModel, MuScan, PhaseDiagram, PointRecord, TtpvModel,
                     classify, critical_coupling, find_crossings, make_factory,
                     make_model, mixed_closure_temperature, scan_mu, sweep2d)
from .ttpv import (MfSolution, OrderParameters, TtpvParams, VariationalAnsatz,
                   filling, gap_residuals, omega_hf, order_parameters,
                   solve_branch, solve_global, verify_restricted_minimum)

__all__ = [
    "MomentumGrid", "band_antinodal", "build_antinodal_grid", "build_bz",
    "build_half_bz", "eps", "vertex_basis", "vertex_u",
    "fermi", "grand_term", "occupation", "spectrum",
    "MinimizeResult", "MinimizeSpec", "minimize",
    "MfSolution", "OrderParameters", "TtpvParams", "VariationalAnsatz",
    "filling", "gap_residuals", "omega_hf", "order_parameters",
    "solve_branch", "solve_global", "verify_restricted_minimum",
    "DerivedCouplings", "EnergyConstants", "LuttParams", "LuttSolution",
    "NodalState", "QFixResult", "ValidityWarning",
    "derived_couplings", "energy_constants", "fix_Q", "omega_antinodal",
    "self_consistent_point", "solve_antinodal", "solve_tQ",
    "BisectionResult", "BoundarySet", "ColumnResult", "Crossing",
    "LuttModel", "MuScan", "PhaseDiagram", "PointRecord", "TtpvModel",
    "classify", "critical_coupling", "find_crossings", "make_factory",
    "make_model", "mixed_closure_temperature", "scan_mu", "sweep2d",
    "__version__",
]
