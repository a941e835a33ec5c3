"""Birkhoff and resonant normal forms of the circular restricted three-body
problem about the collinear points, with normal-form station-keeping."""
from .chart import (ActionAngleB, ActionAngleR, FlowDivergence, analytic_forward, analytic_inverse,
                    jacobian_nf_rtb, numeric_forward, numeric_nf)
from .config import Units
from .dynamics import PeriodicOrbit, SystemParams, correct_periodic, propagate
from .families import classify, propagate_aa_birkhoff, propagate_aa_resonant, solve_halo_actions
from .kernels import BACKEND
from .nfbuild import NormalFormPackage, reduce
from .polyalg import SparsePoly
from .stakeep import SKConfig, run_stationkeeping

__version__ = "0.1.0"

__all__ = [
    "ActionAngleB", "ActionAngleR", "FlowDivergence", "NormalFormPackage", "PeriodicOrbit",
    "SKConfig", "SparsePoly", "SystemParams", "Units", "BACKEND", "analytic_forward",
    "analytic_inverse", "classify", "correct_periodic", "jacobian_nf_rtb", "numeric_forward",
    "numeric_nf", "propagate", "propagate_aa_birkhoff", "propagate_aa_resonant", "reduce",
    "run_stationkeeping", "solve_halo_actions",
]
