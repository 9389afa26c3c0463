"""Online learning of permutations with XF-Hedge.

XF-Hedge runs multiplicative weights on an extended formulation of the
permutohedron obtained from the comparators of a sorting network, projects
back with cyclic relative-entropy projections and predicts by feeding the
identity permutation through the comparators with per-comparator swap
probabilities.
"""

from .errors import (
    InfeasibleConstraintError,
    NumericalError,
    ProjectionError,
    RootFindingError,
    ValidationError,
    XFHedgeError,
)
from .sorting_networks import (
    Comparator,
    ReflectionSequence,
    SortingNetwork,
    build_bubble,
    build_network,
    build_odd_even_merge,
    to_reflection_order,
    verify_zero_one,
)
from .formulation import (
    AugmentedPoint,
    Constraint,
    ExtendedFormulation,
    build,
    constraints,
    corner_for_object,
    corner_from_decisions,
    decisions_feasible,
    decisions_for,
    infinity_bound,
    map_to_original,
    random_corner,
)
from .bregman import ProjectionReport, divergence, positive_root, project, project_onto_constraint

__version__ = "0.1.0"
from .learner import (
    LearnerState,
    default_tolerance,
    eta_for,
    init,
    mult_update,
    regret_bound,
    sample,
    sample_many,
    step,
)
