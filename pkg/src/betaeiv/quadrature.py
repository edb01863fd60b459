"""Gauss-Hermite quadrature rules for the weight function exp(-x^2).

Nodes are the roots of the order-Q Hermite polynomial, computed by the
Golub-Welsch eigenvalue construction (with Newton-refined asymptotics at
high orders, as implemented by scipy); a rule of order Q integrates
polynomials up to degree 2Q - 1 exactly. Rules are cached, so construction
cost is paid once per order, never per likelihood evaluation.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite

SQRT_PI = float(np.sqrt(np.pi))


@dataclass(frozen=True)
class HermiteRule:
    """An immutable Q-point Gauss-Hermite rule.

    nodes are strictly increasing and symmetric about zero; weights are
    positive, symmetric, and sum to sqrt(pi).
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def hermite_rule(q: int) -> HermiteRule:
    """Build (and cache) the Gauss-Hermite rule with ``q`` points.

    Parameters
    ----------
    q : int
        Number of quadrature points, between 1 and 200.

    Returns
    -------
    HermiteRule
    """
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool):
        raise ValueError("quadrature order must be an integer")
    if q < 1 or q > 200:
        raise ValueError(f"quadrature order must be in [1, 200], got {q}")
    if q == 1:
        nodes = np.zeros(1)
        weights = np.array([SQRT_PI])
    else:
        nodes, weights = roots_hermite(q)
        # enforce exact +/- symmetry of the rule
        nodes = 0.5 * (nodes - nodes[::-1])
        weights = 0.5 * (weights + weights[::-1])
        if q % 2 == 1:
            nodes[q // 2] = 0.0
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return HermiteRule(order=int(q), nodes=nodes, weights=weights)
