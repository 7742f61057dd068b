"""Privacy-preserving static average consensus: engines, attacks and indistinguishability."""

from .errors import ConvergenceError, GraphError, PreconditionError, StepsizeError
from .graph import (
    WeightedDigraph,
    build_digraph,
    is_strongly_connected,
    is_weight_balanced,
    laplacian,
    load_graph,
    spectrum,
    stepsize_bound,
)
from .protocols import Algorithm, ExecutionTrace, M1Noise, Perturbation, ProtocolSpec, check_admissibility, run

__version__ = "0.1.0"
