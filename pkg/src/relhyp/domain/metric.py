from __future__ import annotations

from collections.abc import Callable, Iterable, Iterator
from itertools import combinations, product
from typing import Generic, TypeVar

import networkx as nx

from relhyp.domain.cayley import Window
from relhyp.domain.group import GroupElement, GroupSpec

T = TypeVar("T")
Metric = Callable[[T, T], int]


class FiniteMetricSpace(Generic[T]):
    """A finite point set with a metric; `tag` names the metric for compatibility checks."""

    tag = "abstract"

    def __init__(self, points: Iterable[T], d: Metric[T]):
        self.points: list[T] = list(dict.fromkeys(points))
        self._members = set(self.points)
        self.d = d

    @classmethod
    def is_metric(cls, d: Metric[T], points: Iterable[T]) -> bool:
        """Positivity, symmetry and the triangle inequality on every pair/triple."""
        pts = list(points)
        return all(
            d(x, y) >= 0 and (x == y) == (d(x, y) == 0) and d(x, y) == d(y, x)
            and all(d(x, y) <= d(x, z) + d(z, y) for z in pts)
            for x, y in product(pts, repeat=2)
        )

    def __iter__(self) -> Iterator[T]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, p: T) -> bool:
        return p in self._members

    def pairs(self) -> Iterator[tuple[T, T]]:
        return combinations(self.points, 2)

    def set_distance(self, a: Iterable[T], b: Iterable[T]) -> int:
        return min(self.d(u, v) for u, v in product(a, b))

    def within(self, a: Iterable[T], b: Iterable[T], r: int) -> bool:
        """Whether some point of `a` is within r of some point of `b`."""
        return not self.neighbourhood(a, r).isdisjoint(b)

    def distances(self, source: T, targets: Iterable[T]) -> dict[T, int]:
        return {t: self.d(source, t) for t in targets}

    def diameter(self, a: Iterable[T], center: T | None = None) -> int:
        """Exact diameter of `a`, sweeping sources outward-in from `center`.

        Without a center, a double sweep picks the midpoint of a long pair.

        Once every unswept point lies within i of the center, pairs among them
        are at most 2i apart, so the sweep stops when the best eccentricity
        found reaches 2i.
        """
        pts = list(dict.fromkeys(a))
        if len(pts) < 2:
            return 0
        best = 0
        if center is None:
            first = self.distances(pts[0], pts)
            u = max(pts, key=first.__getitem__)
            from_u = self.distances(u, pts)
            v = max(pts, key=from_u.__getitem__)
            from_v = self.distances(v, pts)
            center = min(pts, key=lambda p: max(from_u[p], from_v[p]))
            best = from_u[v]
        levels = self.distances(center, pts)
        for u in sorted(pts, key=lambda p: -levels[p]):
            if best >= 2 * levels[u]:
                break
            best = max(best, max(self.distances(u, pts).values()))
        return best

    def ball(self, center: T, radius: int) -> list[T]:
        return [p for p in self.points if self.d(center, p) <= radius]

    def neighbourhood(self, a: Iterable[T], radius: int) -> set[T]:
        """Points within `radius` of some point of `a`."""
        return {p for c in a for p in self.ball(c, radius)}

    def restricted(self, points: Iterable[T]) -> FiniteMetricSpace[T]:
        return FiniteMetricSpace(points, self.d)


class WordMetricSpace(FiniteMetricSpace[GroupElement]):
    """Elements of G with d_X(g, h) = |g⁻¹h|_X."""

    tag = "d_X"

    def __init__(self, spec: GroupSpec, points: Iterable[GroupElement]):
        self.spec = spec
        self._balls: dict[int, list[GroupElement]] = {}
        super().__init__(points, lambda g, h: spec.length_x(spec.difference(g, h)))

    def ball(self, center: GroupElement, radius: int) -> list[GroupElement]:
        if radius not in self._balls:
            self._balls[radius] = self.spec.x_ball(radius)
        return [p for p in (self.spec.multiply(center, b) for b in self._balls[radius]) if p in self._members]

    def restricted(self, points: Iterable[GroupElement]) -> WordMetricSpace:
        return WordMetricSpace(self.spec, points)


class GraphMetricSpace(FiniteMetricSpace[GroupElement]):
    """Window vertices with the window-scale relative metric."""

    tag = "d_rel"

    def __init__(self, window: Window, points: Iterable[GroupElement] | None = None):
        self.window = window
        super().__init__(window.vertices if points is None else points, window.d_rel)

    def ball(self, center: GroupElement, radius: int) -> list[GroupElement]:
        return [p for p in self.window.distances_from(center, cutoff=radius) if p in self._members]

    def neighbourhood(self, a: Iterable[GroupElement], radius: int) -> set[GroupElement]:
        sources = set(a)
        if not sources:
            return set()
        reached: set[GroupElement] = set()
        for depth, layer in enumerate(nx.bfs_layers(self.window.graph, list(sources))):
            if depth > radius:
                break
            reached.update(p for p in layer if p in self._members)
        return reached

    def distances(self, source: GroupElement, targets: Iterable[GroupElement]) -> dict[GroupElement, int]:
        return self.window.distances_to(source, targets)

    def restricted(self, points: Iterable[GroupElement]) -> GraphMetricSpace:
        return GraphMetricSpace(self.window, points)
