"""Complete verifier for piecewise-linear neural networks.

Decides Boolean properties over network outputs on box input domains via
branch-and-bound with interval, dual and LP-relaxation bounding, plus
input-split and ReLU-split branching heuristics.
"""

from plnnverify.network import (
    ActivationLayer,
    And,
    Atom,
    Box,
    CanonicalProblem,
    LinearLayer,
    Network,
    Or,
    canonicalize,
    eval_network,
    maxpool_to_relu,
    validate_counterexample,
)

__all__ = [
    "ActivationLayer",
    "And",
    "Atom",
    "Box",
    "CanonicalProblem",
    "LinearLayer",
    "Network",
    "Or",
    "canonicalize",
    "eval_network",
    "maxpool_to_relu",
    "validate_counterexample",
]
