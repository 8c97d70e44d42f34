"""Regular metric tree descriptors and their growth constants.

A regular tree here is rooted, starts with a single edge, and branches into b
children at every vertex of generation k, all vertices of a generation sitting
at the same distance from the root.  The geometric family places generation k
at t_k = b^{k/(d-1)} - 1, which realizes growth dimension d exactly with
sandwich constants (1/b, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "TreeSpec",
    "DimensionConstants",
    "ReducedHeight",
    "build_geometric_tree",
    "branching_function",
    "dimension_constants",
    "reduced_height",
]


@dataclass(frozen=True)
class TreeSpec:
    """Descriptor of a truncated regular tree.

    generation_radii lists the vertex distances strictly inside the
    truncation height; an empty tuple means a single edge.
    """

    d: float
    b: int
    generation_radii: tuple[float, ...]
    truncation_height: float

    def __post_init__(self):
        if not 1.0 < self.d <= 2.0:
            raise ValueError(f"dimension must lie in (1, 2], got {self.d}")
        if self.b < 2:
            raise ValueError(f"branching number must be >= 2, got {self.b}")
        if self.truncation_height <= 0.0:
            raise ValueError("truncation height must be positive")
        radii = tuple(float(t) for t in self.generation_radii)
        if any(t <= 0.0 for t in radii):
            raise ValueError("generation radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("generation radii must be strictly increasing")
        if radii and radii[-1] >= self.truncation_height:
            raise ValueError("generation radii must lie inside the truncation")
        object.__setattr__(self, "generation_radii", radii)

    def to_config(self) -> dict[str, str]:
        return {
            "tree.d": repr(self.d),
            "tree.b": str(self.b),
            "tree.height": repr(self.truncation_height),
        }

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "TreeSpec":
        return build_geometric_tree(
            float(cfg["tree.d"]), int(cfg["tree.b"]), float(cfg["tree.height"])
        )


@dataclass(frozen=True)
class DimensionConstants:
    c1: float
    c2: float
    e_plus: float = field(init=False)
    e_minus: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.c1 <= self.c2:
            raise ValueError("need 0 < c1 <= c2")
        object.__setattr__(self, "e_plus", self.c1 / self.c2)
        object.__setattr__(self, "e_minus", self.c2 / self.c1)


@dataclass(frozen=True)
class ReducedHeight:
    truncated: float
    idealized: float  # math.inf whenever the series diverges


def _geometric_radius(d: float, b: int, k: int) -> float:
    # (1 + t_k)^{d-1} = b^k exactly by construction
    return float(b) ** (k / (d - 1.0)) - 1.0


def build_geometric_tree(d: float, b: int, truncation_height: float) -> TreeSpec:
    """Geometric tree of dimension d: generation k at b^{k/(d-1)} - 1.

    Radii at or beyond the truncation height are dropped; a height below the
    first radius yields a single-edge tree.
    """
    if not 1.0 < d <= 2.0:
        raise ValueError(f"dimension must lie in (1, 2], got {d}")
    if b < 2:
        raise ValueError(f"branching number must be >= 2, got {b}")
    radii = []
    k = 1
    while True:
        t = _geometric_radius(d, b, k)
        if t >= truncation_height:
            break
        radii.append(t)
        k += 1
    return TreeSpec(d, b, tuple(radii), float(truncation_height))


def branching_function(spec: TreeSpec, t: float) -> int:
    """Number of tree points at distance t from the root: b^#{radii <= t}."""
    if t < 0.0:
        raise ValueError(f"distance must be non-negative, got {t}")
    if t > spec.truncation_height:
        raise ValueError("distance exceeds the truncation height")
    k = sum(1 for r in spec.generation_radii if r <= t)
    return spec.b**k


def dimension_constants(spec: TreeSpec) -> DimensionConstants:
    """Tight sandwich constants for the idealized (untruncated) tree.

    On each generation interval the ratio g(t)/(1+t)^{d-1} is monotone, so
    its extremes sit at the endpoints; the scan covers the stored radii plus
    one analytic continuation interval, which for the geometric family
    already exhibits the limiting values.
    """
    d, b = spec.d, spec.b
    lo = spec.generation_radii
    for k, t in enumerate(lo, start=1):
        if abs(t - _geometric_radius(d, b, k)) > 1e-9 * (1.0 + t):
            raise ValueError("constants require the geometric radius law")
    n = len(lo)
    edges = [0.0, *lo, _geometric_radius(d, b, n + 1), _geometric_radius(d, b, n + 2)]
    c1 = math.inf
    c2 = 0.0
    for k in range(len(edges) - 1):
        g = float(b) ** k
        c2 = max(c2, g / (1.0 + edges[k]) ** (d - 1.0))
        c1 = min(c1, g / (1.0 + edges[k + 1]) ** (d - 1.0))
    # The scan reproduces (1/b, 1) up to round-off in the radius law; snap so
    # the e_plus/e_minus pair stays an exact reciprocal pair.
    if abs(c2 - 1.0) < 1e-9:
        c2 = 1.0
    if abs(c1 - 1.0 / b) < 1e-9:
        c1 = 1.0 / b
    return DimensionConstants(c1=c1, c2=c2)


def reduced_height(spec: TreeSpec) -> ReducedHeight:
    """Integral of 1/g up to the truncation, plus the idealized value.

    The idealized geometric tree has increments (t_{k+1}-t_k)/b^k that grow
    like b^{k(2-d)/(d-1)}, so the untruncated integral diverges for every
    d in (1, 2] and b >= 2.
    """
    edges = [0.0, *spec.generation_radii, spec.truncation_height]
    total = 0.0
    for k in range(len(edges) - 1):
        total += (edges[k + 1] - edges[k]) / float(spec.b) ** k
    return ReducedHeight(truncated=total, idealized=math.inf)
