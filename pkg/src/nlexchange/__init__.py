"""Nonlocal symmetric and antisymmetric exchange energies, their local limits,
and a harness that checks the convergence between the two."""

from .errors import (
    ConfigError,
    ConvergenceFailure,
    DegenerateProjectionError,
    FitDegenerateError,
    HypothesisViolation,
    InputError,
    NLExchangeError,
    ResolutionError,
)
from .grid import BoxDomain, DiscreteField, build_field
from .kernels import KernelPair, audit_hypotheses, pair_from_spec, prototype_pair
from .local_energy import (
    AnisotropyMatrix,
    DzyaloshinskiiMatrix,
    bulk_dmi_energy,
    dirichlet_energy,
    dmi_energy,
    limit_energy,
)
from .nonlocal_energy import (
    NonlocalEnergyBreakdown,
    PairSummationPlan,
    asym_energy,
    build_plan,
    heisenberg_energy,
    sym_energy,
    total_energy,
)

__version__ = "0.1.0"
