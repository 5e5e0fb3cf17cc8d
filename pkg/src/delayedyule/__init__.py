"""Delayed binary branching (Yule-type) processes: simulation and verification.

A toolkit for the one-parameter family of branching populations in which
a particle of generation k lives alpha**(-k) times a unit exponential
before splitting in two.  alpha = 1 is the classical unit-rate binary
branching process; alpha = 1/2 turns the jump counter into a unit-rate
Poisson process, coupled to all other alpha through one shared field of
vertex-indexed exponential lifetimes.

The package computes genealogy gauges and their martingale
normalization, samples the martingale limit two independent ways
(finite-horizon engine runs and the depth-truncated distributional
recursion), solves for the limit's moment generating function via a
delay ODE and via fixed-point iteration of the smoothing map, locates
the critical parameter separating degenerate from nondegenerate limits,
and exposes the jump-rate generator together with its boundedness
dichotomy at alpha = 1/2.  A CLI (`dyule`) wires everything into
reproducible experiments, and `dyule verify` runs the acceptance suite.
"""

__version__ = "0.1.0"

from .core import (
    DEPTH_MAX,
    CapacityError,
    EvolutionarySequence,
    EvolutionarySet,
    Vertex,
    branch,
    enumerate_evolutionary_sets,
    full_frontier,
    gauge,
    generation_profile,
    is_evolutionary,
)
from .engine import (
    RandomField,
    SimConfig,
    Trajectory,
    derive_seed,
    jump_increments,
    lifetime,
    martingale_path,
    sample_final_profiles,
    sample_limit_engine,
    simulate,
)
from .limits import (
    RecursionConfig,
    WeightSample,
    empirical_moment,
    sample_limit_recursive,
    sample_w,
)
from .analytic import (
    MgfGrid,
    beta_critical,
    mean_gauge,
    mgf_fixed_point,
    mgf_half_grid,
    mgf_solve_ode,
    nu_density,
    second_moment_limit,
    smoothing_map_apply,
    w_loglog_moment,
)
from .stats import (
    TestReport,
    chi2_two_sample,
    ks_one_sample,
    ks_two_sample,
    mean_se,
    poisson_gof,
)
from .generator import (
    StateFunction,
    apply_generator,
    bounded_bound_check,
    eigen_identity_error,
    generator_on_gauge,
    norm_witness,
    simulate_sequence,
)

__all__ = [name for name in dir() if not name.startswith("_")]
