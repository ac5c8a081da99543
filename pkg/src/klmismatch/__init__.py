"""Classification error mismatch, divergences and KL lower bounds.

The mismatch ``delta_q = E_q - E*`` is the extra error incurred by deciding
with a model distribution ``q`` instead of the true ``pr``. This package
measures it, evaluates the KL lower bounds ``B(delta_q)`` and the sharper
bound available when the Bayes error is known to be at most ``t``, builds
the pairs that attain them, and runs seeded simulations that check them.
"""
from ._accel import HAS_NUMBA, backend_name
from .bounds import (
    BoundCurve,
    BoundKind,
    b_function,
    bound_curve,
    local_f_bound,
    nussbaum_bound,
    pinsker_comparison,
    refined_bound,
)
from .core import (
    KL,
    ConditionalDecomposition,
    DecisionMap,
    Generator,
    JointDistribution,
    MismatchReport,
    build_joint,
    decisions,
    decompose,
    f_divergence,
    joint_from_conditionals,
    kl_components,
    kl_divergence,
    mismatch_report,
)
from .errors import *  # noqa: F401,F403
from .simulator import (
    LemmaReport,
    Rejected,
    SimConfig,
    SimulationPoint,
    frontier_oracle,
    lemma_checks,
    run_simulation,
    sample_pair,
)
from .witness import GapReport, WitnessSpec, nussbaum_witness, refined_witness, witness_gap

__version__ = "0.1.0"
