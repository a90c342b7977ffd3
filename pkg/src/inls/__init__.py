"""Coupled Schroedinger systems with an inhomogeneous quadratic interaction:
hypothesis checks, radial ground states, time evolution and the
global-existence / blow-up classifier."""
from .interaction import (PRESETS, InteractionPotential, Monomial, Nonlinearity, SystemSpec, check_hypotheses,
                          scalar_quadratic, three_wave_a, three_wave_b, two_wave)
from .grid import CartesianGrid, Field, RadialGrid, radial_grid, read_snapshot, write_snapshot
from .functionals import FunctionalReport, ThresholdSet, full_report, thresholds_from_groundstate
from .groundstate import GroundStateError, GroundStateOptions, GroundStateResult, certify, solve
from .evolution import EvolutionTrace, EvolveOptions, evolve
from .dichotomy import Classification, build_cutoff, classify

__version__ = "0.1.0"
