"""Mask spuriously correlated observations before behavior cloning.

Initial-state-intervened expert trajectories reveal which observation
coordinates can influence the expert's actions. The rest are masked, so a
cloned policy cannot latch onto them.
"""

from .cloning import (EvalResult, PolicyModel, TrainConfig, compare_arms,
                      evaluate, manual_mask, train)
from .data import Dataset, Trajectory, load_dataset, save_dataset
from .envs import cartpole_spec, generate_dataset, make_spec, reacher_spec
from .graph import (CausalGraph, GraphTemplate, NodeId, d_separated,
                    has_directed_path, intervene_graph, unroll)
from .independence import DEFAULT_GAMMA, dependent, hoeffding_d
from .masking import (DependenceReport, MaskConfig, ObservationMask,
                      check_potential_cause, compute_mask,
                      verify_conservativeness, verify_monotonicity,
                      verify_prop1)
from .scm import InterventionSpec, Scm, fixture, sample

__version__ = "0.1.0"
