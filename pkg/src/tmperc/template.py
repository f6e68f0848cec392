"""Finite template graphs fixing the cluster communication topology.

A template is a regular undirected graph on cluster indices 0..k-1 whose
neighborhood always contains the cluster itself: intra-cluster pairs count
as "near" and receive the near edge probability.  With k=1 and a single
self-loop the whole construction degenerates to the classic single-block
random graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


@dataclass(frozen=True)
class TemplateGraph:
    """Cluster topology: ``neighbors[i]`` is the set of clusters near cluster i."""

    k: int
    neighbors: tuple[frozenset[int], ...]

    @property
    def k_p(self) -> int:
        return len(self.neighbors[0])

    @property
    def k_q(self) -> int:
        return self.k - self.k_p

    def near(self, i: int, j: int) -> bool:
        return j in self.neighbors[i]

    def relabeled(self, perm: Mapping[int, int]) -> "TemplateGraph":
        """Apply a cluster relabeling; used to test symmetry of the builders."""
        new = [frozenset()] * self.k
        for i, nbrs in enumerate(self.neighbors):
            new[perm[i]] = frozenset(perm[j] for j in nbrs)
        return TemplateGraph(self.k, tuple(new))


def validate(template: TemplateGraph) -> str | None:
    """Return a description of the first violated invariant, or None if valid.

    Checks, in order: index bounds, symmetry, regularity, self-membership.
    """
    k = template.k
    if k < 1:
        return f"bounds: cluster count {k} < 1"
    if len(template.neighbors) != k:
        return f"bounds: {len(template.neighbors)} neighborhoods for {k} clusters"
    for i, nbrs in enumerate(template.neighbors):
        for j in nbrs:
            if not 0 <= j < k:
                return f"bounds: cluster {j} in neighborhood of {i} outside [0, {k})"
    for i in range(k):
        for j in template.neighbors[i]:
            if i not in template.neighbors[j]:
                return f"symmetry: {j} in neighborhood of {i} but {i} not in neighborhood of {j}"
    degree = len(template.neighbors[0])
    for i in range(k):
        if len(template.neighbors[i]) != degree:
            return (
                f"regularity: |neighborhood({i})| = {len(template.neighbors[i])}"
                f" != |neighborhood(0)| = {degree}"
            )
    for i in range(k):
        if i not in template.neighbors[i]:
            return f"self-membership: {i} not in its own neighborhood"
    return None


def _checked(template: TemplateGraph) -> TemplateGraph:
    report = validate(template)
    if report is not None:
        raise ValueError(f"invalid template: {report}")
    return template


def make_single() -> TemplateGraph:
    """One cluster with a self-loop; k_p=1, k_q=0."""
    return TemplateGraph(1, (frozenset({0}),))


def make_ring(k: int, reach: int) -> TemplateGraph:
    """Ring of k clusters, each near the `reach` closest on either side (k_p = 2*reach+1)."""
    if reach < 0:
        raise ValueError(f"reach must be non-negative, got {reach}")
    if k <= 2 * reach:
        raise ValueError(f"ring needs k >= 2*reach+1, got k={k}, reach={reach}")
    neighbors = tuple(
        frozenset((i + a) % k for a in range(-reach, reach + 1)) for i in range(k)
    )
    return _checked(TemplateGraph(k, neighbors))


def make_cube3() -> TemplateGraph:
    """Eight clusters at the corners of a cube; near = self plus one bit flipped (k_p=4)."""
    neighbors = tuple(
        frozenset({i, i ^ 1, i ^ 2, i ^ 4}) for i in range(8)
    )
    return _checked(TemplateGraph(8, neighbors))


def make_planted(k: int) -> TemplateGraph:
    """k isolated clusters (near = own cluster only); k_p=1, k_q=k-1."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    return TemplateGraph(k, tuple(frozenset({i}) for i in range(k)))


def from_neighbors(neighbors: Mapping[int, Iterable[int]]) -> TemplateGraph:
    """Build a template from an explicit neighbor map and validate it.

    Invalid input is rejected, never repaired.
    """
    k = len(neighbors)
    if sorted(neighbors) != list(range(k)):
        raise ValueError("neighbor map keys must be exactly 0..k-1")
    template = TemplateGraph(k, tuple(frozenset(neighbors[i]) for i in range(k)))
    return _checked(template)
