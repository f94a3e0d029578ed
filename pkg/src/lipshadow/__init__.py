"""Numerical shadowing, linear cocycles and the Lipschitz-shadowing dichotomy."""
from .cocycle import Cocycle, along_orbit, transition
from .errors import (ContractError, InjectivityError, IsomorphismError, NonInvertibleError,
                     SmallnessError)
from .linear_analysis import gain_estimate, mane_test, ray_subspaces, solve_bounded
from .phase_space import (Orbit, PhaseSpace, Pseudotrajectory, SystemDef, distance, exp_chart,
                          exp_chart_inv, make_system, orbit_of)
from .shadowing import (WPattern, extract_limit, lemma2_pseudotrajectory, lipschitz_estimate,
                        random_pseudotrajectory, replay_lemma2, shadow)

__version__ = "0.1.0"
