from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx

from relhyp.domain.errors import CapExceeded, MixedSpecs, OutOfRange, WindowTooLarge
from relhyp.domain.group import IDENTITY, CyclicFactor, GroupElement, GroupSpec
from relhyp.domain.word import HLetter, Letter, Word

logger = logging.getLogger(__name__)

DEFAULT_MAX_VERTICES = 100_000
DEFAULT_GEODESIC_CAP = 1_000


def edge_label(spec: GroupSpec, d: GroupElement) -> Letter:
    """The single letter of X ∪ H naming d, preferring H_λ (smallest λ)."""
    lam = spec.peripheral_of(d)
    if lam is not None:
        return spec.h_letter(lam, d)
    for x in spec.x_letters:
        if spec.letter_element(x) == d:
            return x
    raise OutOfRange(f"{spec.format_element(d)} is not a letter of X ∪ H")


def letter_peripheral(spec: GroupSpec, letter: Letter) -> int | None:
    if isinstance(letter, HLetter):
        return letter.peripheral
    return spec.peripheral_of(spec.letter_element(letter))


@dataclass(frozen=True, slots=True)
class Path:
    """A combinatorial path in Γ(G, X ∪ H): vertices v_0..v_k and edge labels."""

    vertices: tuple[GroupElement, ...]
    labels: tuple[Letter, ...]
    spec: GroupSpec = field(compare=False, repr=False)

    @property
    def start(self) -> GroupElement:
        return self.vertices[0]

    @property
    def end(self) -> GroupElement:
        return self.vertices[-1]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def label(self) -> Word:
        return Word(self.labels)

    @property
    def is_closed(self) -> bool:
        return self.start == self.end

    @classmethod
    def trivial(cls, spec: GroupSpec, at: GroupElement = IDENTITY) -> Path:
        return cls((at,), (), spec)

    @classmethod
    def from_vertices(cls, spec: GroupSpec, vertices: Iterable[GroupElement]) -> Path:
        vs = tuple(vertices)
        labels = tuple(edge_label(spec, spec.difference(u, v)) for u, v in zip(vs, vs[1:]))
        return cls(vs, labels, spec)

    @classmethod
    def from_word(cls, spec: GroupSpec, word: Word | str, start: GroupElement = IDENTITY, merge: bool = True) -> Path:
        """Trace a word from `start`.

        Letters whose element lies in some H_λ become H_λ-letters; with `merge`,
        consecutive same-λ letters collapse into one edge unless their product is trivial.
        """
        if isinstance(word, str):
            word = spec.parse_word(word)
        steps: list[tuple[int | None, GroupElement]] = []
        for letter in word:
            g = spec.letter_element(letter)
            if not g:
                continue
            lam = spec.peripheral_of(g)
            if merge and lam is not None and steps and steps[-1][0] == lam:
                merged = spec.multiply(steps[-1][1], g)
                if merged:
                    steps[-1] = (lam, merged)
                    continue
            steps.append((lam, g))
        vertices = [start]
        for _, g in steps:
            vertices.append(spec.multiply(vertices[-1], g))
        return cls.from_vertices(spec, vertices)

    def reversed(self) -> Path:
        return Path(
            tuple(reversed(self.vertices)),
            tuple(self.spec.invert_letter(x) for x in reversed(self.labels)),
            self.spec,
        )

    def rotated(self, k: int) -> Path:
        if not self.is_closed:
            raise OutOfRange("only closed paths can be rotated")
        n = len(self.labels)
        if n == 0:
            return self
        k %= n
        ring = self.vertices[:-1]
        vs = ring[k:] + ring[:k]
        return Path(vs + (vs[0],), self.labels[k:] + self.labels[:k], self.spec)

    def translated(self, g: GroupElement) -> Path:
        return Path(tuple(self.spec.multiply(g, v) for v in self.vertices), self.labels, self.spec)

    def format(self) -> str:
        return self.spec.format_word(self.label)


@dataclass(frozen=True, slots=True)
class Component:
    """A maximal run of H_λ-edges of a path (indices into path.labels)."""

    path: Path
    edges: tuple[int, ...]
    peripheral: int

    @property
    def start_vertex(self) -> GroupElement:
        return self.path.vertices[self.edges[0]]

    @property
    def end_vertex(self) -> GroupElement:
        return self.path.vertices[self.edges[-1] + 1]

    def __len__(self) -> int:
        return len(self.edges)


def components(path: Path, cyclic: bool = False) -> list[Component]:
    """Maximal H_λ-subpaths of `path`, in order; closed paths may be read cyclically."""
    runs: list[tuple[list[int], int]] = []
    for i, letter in enumerate(path.labels):
        lam = letter_peripheral(path.spec, letter)
        if lam is None:
            continue
        if runs and runs[-1][1] == lam and runs[-1][0][-1] == i - 1:
            runs[-1][0].append(i)
        else:
            runs.append(([i], lam))
    if cyclic and path.is_closed and len(runs) > 1:
        first, last = runs[0], runs[-1]
        if first[1] == last[1] and first[0][0] == 0 and last[0][-1] == len(path.labels) - 1:
            runs[0] = (last[0] + first[0], first[1])
            runs.pop()
    return [Component(path, tuple(edges), lam) for edges, lam in runs]


def are_connected(c1: Component, c2: Component) -> bool:
    """Same λ and both lie in one left coset gH_λ."""
    spec = c1.path.spec
    if not spec.same_group(c2.path.spec):
        raise MixedSpecs("components belong to different groups")
    if c1.peripheral != c2.peripheral:
        return False
    lam = c1.peripheral
    return spec.coset_id(c1.start_vertex, lam) == spec.coset_id(c2.start_vertex, lam)


def is_isolated(c: Component, siblings: Iterable[Component]) -> bool:
    return not any(other != c and are_connected(c, other) for other in siblings)


@dataclass
class Window:
    """A finite window {g : |g|_rel ≤ n, |g|_X ≤ ρ_X} of Γ(G, X ∪ H)."""

    spec: GroupSpec
    n: int
    rho_x: int
    vertices: list[GroupElement]
    lengths: dict[GroupElement, tuple[int, int]]
    graph: nx.Graph
    _depth: dict[GroupElement, int] | None = field(default=None, repr=False)

    def __contains__(self, g: GroupElement) -> bool:
        return g in self.lengths

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self) -> Iterator[GroupElement]:
        return iter(self.vertices)

    def length_x(self, g: GroupElement) -> int:
        return self.lengths[g][0]

    def length_rel(self, g: GroupElement) -> int:
        return self.lengths[g][1]

    @property
    def max_rel_length(self) -> int:
        return max((rel for _, rel in self.lengths.values()), default=0)

    @cached_property
    def is_convex(self) -> bool:
        """Whether some geodesic of Γ(G, X ∪ H) between window vertices stays in the window.

        Holds for free products whose peripherals are whole factors and whose
        other factors are free or free abelian: geodesics run through prefixes
        of the endpoints' normal forms.
        """
        spec = self.spec
        if spec.family not in ("free", "free_product"):
            return False
        if any(p.coordinates is not None for p in spec.peripherals):
            return False
        whole = {p.factor for p in spec.peripherals}
        return all(i in whole or not isinstance(f, CyclicFactor) for i, f in enumerate(spec.factors))

    def distances_from(self, g: GroupElement, cutoff: int | None = None) -> dict[GroupElement, int]:
        """Window distances from g, up to `cutoff`; only the map from 1 is kept."""
        if g == IDENTITY and cutoff is None:
            if self._depth is None:
                self._depth = nx.single_source_shortest_path_length(self.graph, IDENTITY)
            return self._depth
        return nx.single_source_shortest_path_length(self.graph, g, cutoff=cutoff)

    def distances_to(self, g: GroupElement, targets: Iterable[GroupElement]) -> dict[GroupElement, int]:
        """Window distances from g to each target, stopping once all are reached."""
        if self.is_convex:
            return {t: self.spec.length_rel(self.spec.difference(g, t)) for t in targets}
        pending = set(targets)
        found: dict[GroupElement, int] = {}
        for depth, layer in enumerate(nx.bfs_layers(self.graph, g)):
            for v in layer:
                if v in pending:
                    found[v] = depth
                    pending.discard(v)
            if not pending:
                break
        if pending:
            raise OutOfRange("vertices are disconnected inside the window")
        return found

    def d_rel(self, g: GroupElement, h: GroupElement) -> int:
        """Window-scale relative distance; an upper bound on d_{X∪H}."""
        self._require(g, h)
        if self.is_convex:
            return self.spec.length_rel(self.spec.difference(g, h))
        try:
            return nx.shortest_path_length(self.graph, g, h)
        except nx.NetworkXNoPath as e:
            raise OutOfRange("vertices are disconnected inside the window") from e

    def d_x(self, g: GroupElement, h: GroupElement) -> int:
        return self.spec.length_x(self.spec.difference(g, h))

    def ball(self, center: GroupElement, radius: int) -> list[GroupElement]:
        self._require(center)
        dist = self.distances_from(center, cutoff=radius)
        return sorted(dist, key=self.spec.shortlex_key)

    def _require(self, *points: GroupElement) -> None:
        for p in points:
            if p not in self.lengths:
                raise OutOfRange(f"{self.spec.format_element(p)} is outside the window")

    def dump(self) -> str:
        index = {v: i for i, v in enumerate(self.vertices)}
        lines = [f"# window n={self.n} rho_x={self.rho_x} vertices={len(self.vertices)}"]
        for v in self.vertices:
            x, rel = self.lengths[v]
            lines.append(f"v {self.spec.format_element(v)} {x} {rel}")
        edges = sorted((min(index[u], index[v]), max(index[u], index[v])) for u, v in self.graph.edges)
        for i, j in edges:
            u, v = self.vertices[i], self.vertices[j]
            label = self.spec.format_letter(edge_label(self.spec, self.spec.difference(u, v)))
            lines.append(f"e {i} {j} {label}")
        return "\n".join(lines) + "\n"


def build_window(spec: GroupSpec, n: int, rho_x: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> Window:
    if n < 0 or rho_x < 0:
        raise OutOfRange(f"window radii must be non-negative, got n={n}, rho_x={rho_x}")
    steps = spec.x_elements()
    x_length = spec.x_lengths(rho_x, limit=max_vertices)

    lengths: dict[GroupElement, tuple[int, int]] = {}
    for g in sorted(x_length, key=spec.shortlex_key):
        rel = spec.length_rel(g)
        if rel <= n:
            lengths[g] = (x_length[g], rel)
    vertices = list(lengths)

    graph = nx.Graph()
    graph.add_nodes_from(vertices)
    for u in vertices:
        for s in steps:
            v = spec.multiply(u, s)
            if v in lengths:
                graph.add_edge(u, v)
    for lam in range(len(spec.peripherals)):
        cosets: dict[object, list[GroupElement]] = defaultdict(list)
        for v in vertices:
            cosets[spec.coset_id(v, lam)].append(v)
        for members in cosets.values():
            for i, u in enumerate(members):
                for v in members[i + 1 :]:
                    graph.add_edge(u, v)
    logger.info(
        "window n=%d rho_x=%d: %d vertices, %d edges", n, rho_x, graph.number_of_nodes(), graph.number_of_edges()
    )
    return Window(spec, n, rho_x, vertices, lengths, graph)


@dataclass
class GeodesicSearch:
    paths: list[Path]
    distance: int
    capped: bool = False
    truncated: bool = False


def rel_geodesics(
    window: Window, g: GroupElement, h: GroupElement, cap: int = DEFAULT_GEODESIC_CAP, strict: bool = True
) -> GeodesicSearch:
    """All window geodesics from g to h, up to `cap`.

    `truncated` is set when the group's relative distance is shorter than the
    in-window distance; `capped` when more than `cap` geodesics exist and
    `strict` is off.
    """
    window._require(g, h)
    spec = window.spec
    if g == h:
        return GeodesicSearch([Path.trivial(spec, g)], 0)
    distance = window.d_rel(g, h)
    paths: list[Path] = []
    capped = False
    for vs in nx.all_shortest_paths(window.graph, g, h):
        if len(paths) == cap:
            if strict:
                raise CapExceeded(f"more than {cap} geodesics between window vertices")
            capped = True
            break
        paths.append(Path.from_vertices(spec, vs))
    paths.sort(key=lambda p: [spec.shortlex_key(v) for v in p.vertices])
    true_distance = spec.length_rel(spec.difference(g, h), bound=distance)
    truncated = true_distance < distance
    if truncated:
        logger.warning("window distance %d exceeds relative distance %d", distance, true_distance)
    return GeodesicSearch(paths, distance, capped, truncated)


class GeodesicFan:
    """Every window geodesic out of one source, from a single breadth-first search."""

    def __init__(self, window: Window, source: GroupElement, cutoff: int | None = None):
        window._require(source)
        self.window = window
        self.source = source
        self._pred, self._dist = nx.predecessor(window.graph, source, cutoff=cutoff, return_seen=True)
        self._paths: dict[GroupElement, list[Path]] = {}

    def distance(self, h: GroupElement) -> int | None:
        return self._dist.get(h)

    def reached(self) -> list[GroupElement]:
        return list(self._dist)

    def paths(self, h: GroupElement, cap: int = DEFAULT_GEODESIC_CAP) -> list[Path]:
        """Up to `cap` geodesics from the source to h, in ShortLex order of vertex sequences."""
        if h not in self._paths:
            spec = self.window.spec
            found: list[list[GroupElement]] = []
            stack = [[h]] if h in self._dist else []
            while stack and len(found) < cap:
                tail = stack.pop()
                if tail[-1] == self.source:
                    found.append(tail[::-1])
                    continue
                stack.extend(tail + [u] for u in self._pred[tail[-1]])
            paths = [Path.from_vertices(spec, vs) for vs in found]
            paths.sort(key=lambda p: [spec.shortlex_key(v) for v in p.vertices])
            self._paths[h] = paths
        return self._paths[h]
