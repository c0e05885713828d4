"""Enumeration of the activation regions a network realizes inside a set.

Depth-first search over neurons in layer order: each neuron splits the
current cell by its pre-activation hyperplane and infeasible branches are
pruned with an LP, so only realizable patterns are visited (worst case still
2^n, hence the neuron cap).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from certnn.network import Pattern, ReluNetwork
from certnn.polytope import Polytope, is_empty, remove_redundant

NEURON_CAP = 20


class TooManyNeurons(Exception):
    pass


@dataclass
class Region:
    pattern: Pattern
    polytope: Polytope


def enumerate_regions(net: ReluNetwork, X_in: Polytope, neuron_cap: int = NEURON_CAP) -> list[Region]:
    """All realizable activation regions of the network intersected with X_in."""
    total = sum(net.hidden_widths)
    if total > neuron_cap:
        raise TooManyNeurons(f"{total} hidden neurons exceed the cap {neuron_cap}")
    regions: list[Region] = []
    widths = net.hidden_widths

    def descend(layer: int, pattern_prefix: list[np.ndarray], rows, rhs):
        if layer == len(widths):
            pattern = tuple(np.asarray(p, dtype=np.int8) for p in pattern_prefix)
            cell = Polytope(np.array(rows), np.array(rhs))
            if not is_empty(cell):
                regions.append(Region(pattern, remove_redundant(cell)))
            return
        # Pre-activations of this layer only depend on the completed layers.
        V, c = net.preactivation_affine(
            tuple(pattern_prefix) + tuple(np.ones(w, dtype=np.int8) for w in widths[layer:]),
            layer + 1,
        )

        def split(j: int, gamma: list[int], rows, rhs):
            if j == widths[layer]:
                descend(layer + 1, pattern_prefix + [np.array(gamma)], rows, rhs)
                return
            for bit, row, r in ((1, -V[j], c[j]), (0, V[j], -c[j])):
                new_rows = rows + [row]
                new_rhs = rhs + [r]
                if is_empty(Polytope(np.array(new_rows), np.array(new_rhs))):
                    continue
                split(j + 1, gamma + [bit], new_rows, new_rhs)

        split(0, [], rows, rhs)

    descend(0, [], list(X_in.F), list(X_in.g))
    return regions
