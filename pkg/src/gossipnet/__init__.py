"""Neighbor-aware probabilistic gossip over random topologies: simulation and reliability model."""

__version__ = "0.1.0"

from .calibrate import CalibrationRequest, calibrate, solve_parameter
from .engine import (
    ExperimentConfig,
    ExperimentResult,
    exact_reliability_oracle,
    latency,
    message_complexity,
    monte_carlo_reliability,
    run_experiment,
)
from .errors import (
    GossipNetError,
    NumericError,
    ParameterError,
    RangeError,
    SizeError,
    UndefinedValueError,
)
from .gossip import (
    DisseminationGraph,
    DisseminationResult,
    FailureReport,
    Policy,
    PolicyKind,
    build_dissemination_graph,
    classify_failure,
    disseminate,
    forward_set,
)
from .model import ForwardingProfile, ModelCurvePoint, model_curve
from .topology import (
    TABLE_I,
    DegreeDistribution,
    Graph,
    TopologyKind,
    TopologySpec,
    analytic_clustering,
    analytic_degree_distribution,
    empirical_clustering,
    empirical_degree_distribution,
    generate,
    is_connected,
)
