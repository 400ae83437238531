"""Coordinated exploration for teams of Bernoulli-logistic RL units.

Library layout: core (numerics, RNG streams, Adam), mux (the k-bit
multiplexer environment), policy (sampling), learn (per-episode rules and
the critic), oracle (exact-enumeration ground truth), backend (compiled vs
numpy episode kernels), config/harness/cli (experiment driver), svgplot
(learning-curve rendering).
"""

__version__ = "0.1.0"
