"""Identification value of choice experiments under expected-utility subjects."""

from .compiler import (
    AdaptiveTree,
    Chance,
    Decision,
    TargetPartition,
    Terminal,
    compile_adaptive,
    compile_batch,
    compile_game,
    realize_partition,
)
from .errors import (
    CollisionError,
    ConditioningOnNull,
    DegenerateTies,
    EIVError,
    InputError,
    InvalidExperiment,
    LPFailure,
    NullIdentification,
    NumericalError,
    RealizationError,
    SchemaError,
    SizeOverflow,
    UnsupportedDimension,
)
from .geometry import (
    ConeUnion,
    Menu,
    PolyCone,
    argmax_set,
    canonical_utility,
    cone_contains,
    cone_equal,
    cone_is_empty_interior,
    extreme_points,
    lottery,
    minkowski_average,
    mix_menus,
    normal_cone,
)
from .identification import (
    Experiment,
    IdentifiedFamily,
    RandomizedExperiment,
    coarsen,
    disjointify,
    identified_family,
    is_transparent,
    mu_equivalent,
    transparency,
)
from .prior import MeasureEstimate, PriorModel, conditional_measure, measure, sample
from .valuation import IdentificationIndex, ProbVector, compound, eiv, eta, tau, verify_T1

__version__ = "0.1.0"
