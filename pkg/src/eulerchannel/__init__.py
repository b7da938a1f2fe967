"""Steady incompressible Euler equilibria on curved periodic channels.

A numerical laboratory for computing stable steady states on
reflection-symmetric channels, classifying their streamline topology
(islands vs wrapping orbits), measuring their harmonic content, and
stress-testing the weighted estimates behind the rigidity of such flows.
"""

from .geometry import BoundaryProfile, ChannelGrid, ScalarField, build_grid, eval_profile, physical_coords
from .operators import gradient, laplacian, perp_gradient
from .eigen import EigenResult, smallest_dirichlet_eigenvalue
from .equilibrium import (
    AffineVorticity,
    ConstantVorticity,
    EquilibriumSolution,
    ExponentialVorticity,
    builtin_named_flows,
    continuation_sweep,
    solve_channel_bvp,
    solve_equilibrium,
    stuart_analytic,
    stuart_vortex,
)
from .homology import HarmonicGenerator, gap_projection_consistency, harmonic_generator, homology_projection
from .topology import (
    CriticalPoint,
    FieldInterpolant,
    Orbit,
    TopologyReport,
    centerline_island_test,
    classify_flow,
    find_critical_points,
    symmetry_residual,
    trace_orbit,
)
from .carleman import (
    CarlemanWeight,
    TestFunction,
    build_cutoff,
    carleman_ratio_sweep,
    conjugated_operator,
    divergence_identity_residual,
    upper_half_grid,
)
from .contours import LevelCurve, curve_through_point, extract_level_curves
from .render import render_contours

__version__ = "0.1.0"
