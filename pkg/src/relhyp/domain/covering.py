from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from pydantic import BaseModel, Field

from relhyp.domain.cayley import DEFAULT_MAX_VERTICES, Window, build_window
from relhyp.domain.constants import ConstantsReport, estimate_bcp_eps
from relhyp.domain.errors import (
    EmptyCovering,
    IncompatibleScales,
    MetricMismatch,
    NotSeparated,
    SeparationFailed,
    UnsupportedPeripheral,
    WindowTooSmall,
)
from relhyp.domain.group import IDENTITY, CyclicFactor, FreeAbelianFactor, FreeFactor, GroupElement, GroupSpec
from relhyp.domain.metric import FiniteMetricSpace, GraphMetricSpace, WordMetricSpace

logger = logging.getLogger(__name__)

DEFAULT_ASSEMBLY_C = 8


@dataclass(frozen=True)
class Cell:
    elements: frozenset[GroupElement]
    label: str = ""
    center: GroupElement | None = None
    annulus: int | None = None

    def __len__(self) -> int:
        return len(self.elements)


@dataclass
class Covering:
    """Cells over a finite domain; `scale` is the r the cover is meant to witness."""

    cells: list[Cell]
    space: FiniteMetricSpace
    scale: int
    notes: list[str] = field(default_factory=list)

    @property
    def metric(self) -> str:
        return self.space.tag

    @property
    def domain(self) -> list[GroupElement]:
        return self.space.points

    def uncovered(self) -> list[GroupElement]:
        covered = set().union(*(c.elements for c in self.cells)) if self.cells else set()
        return [g for g in self.domain if g not in covered]

    def restricted(self, points: Iterable[GroupElement]) -> Covering:
        keep = set(points)
        cells = [Cell(c.elements & keep, c.label, c.center, c.annulus) for c in self.cells]
        return Covering([c for c in cells if c.elements], self.space.restricted(p for p in self.domain if p in keep),
                        self.scale, list(self.notes))


class CoverReport(BaseModel):
    metric: str
    scale: int
    domain_size: int
    cells: int
    covered: bool
    mesh: int
    multiplicity: int
    center_radius: int | None = None
    mesh_bound: int | None = None
    center_bound: int | None = None
    multiplicity_bound: int | None = None
    mu: int | None = None
    notes: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.covered
            and (self.mesh_bound is None or self.mesh <= self.mesh_bound)
            and (self.center_bound is None or self.center_radius is None or self.center_radius <= self.center_bound)
            and (self.multiplicity_bound is None or self.multiplicity <= self.multiplicity_bound)
        )


def measure_cover(cov: Covering, r: int | None = None, **bounds) -> CoverReport:
    """Exact mesh and r-multiplicity of a covering.

    The r-ball around a meets a cell exactly when a lies in the cell's
    r-neighbourhood, so multiplicity counts neighbourhoods per point.
    """
    if not cov.cells:
        raise EmptyCovering("covering has no cells")
    r = cov.scale if r is None else r
    space = cov.space
    meets: dict[GroupElement, int] = defaultdict(int)
    for c in cov.cells:
        for a in space.neighbourhood(c.elements, r):
            meets[a] += 1
    multiplicity = max(meets.values(), default=0)
    mesh = max(space.diameter(c.elements, center=c.center) for c in cov.cells)
    centered = [c for c in cov.cells if c.center is not None]
    center_radius = max(
        (max(space.distances(c.center, c.elements).values()) for c in centered if c.elements), default=None
    )
    return CoverReport(
        metric=cov.metric,
        scale=r,
        domain_size=len(space),
        cells=len(cov.cells),
        covered=not cov.uncovered(),
        mesh=mesh,
        multiplicity=multiplicity,
        center_radius=center_radius,
        notes=list(cov.notes),
        **bounds,
    )


# ---------------------------------------------------------------------- relative graph covering


def _geodesic_tree(window: Window) -> tuple[dict[GroupElement, GroupElement], dict[GroupElement, int]]:
    """Parents along the ShortLex-least vertex sequence of a geodesic from 1, and depths."""
    spec = window.spec
    dist = window.distances_from(IDENTITY)
    layers: dict[int, list[GroupElement]] = defaultdict(list)
    for v, d in dist.items():
        layers[d].append(v)
    rank = {IDENTITY: 0}
    parent: dict[GroupElement, GroupElement] = {}
    for depth in range(1, max(layers, default=0) + 1):
        chosen = {}
        for v in layers[depth]:
            preds = [u for u in window.graph.neighbors(v) if dist.get(u) == depth - 1]
            chosen[v] = min(preds, key=rank.__getitem__)
        ordered = sorted(layers[depth], key=lambda v: (rank[chosen[v]], spec.shortlex_key(v)))
        for i, v in enumerate(ordered):
            rank[v] = i
            parent[v] = chosen[v]
    return parent, dist


def _ancestor(v: GroupElement, depth: int, target: int, parent: dict[GroupElement, GroupElement]) -> GroupElement:
    while depth > target:
        v = parent[v]
        depth -= 1
    return v


def cover_graph_annuli(
    window: Window, r: int, constants: ConstantsReport | None = None
) -> tuple[Covering, CoverReport]:
    """Annuli of width 2r around 1, cut into cells by projection to the previous sphere."""
    if r < 1:
        raise WindowTooSmall(f"scale must be at least 1, got {r}")
    spec = window.spec
    space = GraphMetricSpace(window)
    parent, dist = _geodesic_tree(window)
    radius = max(dist.values(), default=0)
    notes: list[str] = []
    a0 = frozenset(v for v in window.vertices if dist[v] <= 2 * r)
    cells = [Cell(a0, "A0", IDENTITY, 0)]
    if radius < 2 * r:
        notes.append(f"window radius {radius} < 2r = {2 * r}: only A0")
        logger.warning(notes[-1])
    groups: dict[tuple[int, GroupElement], set[GroupElement]] = defaultdict(set)
    for v in window.vertices:
        d = dist[v]
        for k in range(max(1, d // (2 * r) - 1), d // (2 * r) + 1):
            if 2 * k * r <= d <= 2 * (k + 1) * r:
                x = _ancestor(v, d, 2 * (k - 1) * r, parent)
                groups[(k, x)].add(v)
    for (k, x) in sorted(groups, key=lambda key: (key[0], spec.shortlex_key(key[1]))):
        cells.append(Cell(frozenset(groups[(k, x)]), f"U_{k}({spec.format_element(x)})", x, k))

    mu = constants.mu if constants is not None else None
    if constants is not None and r < constants.sigma:
        notes.append(f"r = {r} < sigma = {constants.sigma}: multiplicity bound not guaranteed")
    cov = Covering(cells, space, r, notes)
    report = measure_cover(
        cov,
        r,
        mesh_bound=8 * r,
        center_bound=4 * r,
        multiplicity_bound=None if mu is None else 3 * mu,
        mu=mu,
    )
    logger.info("graph cover r=%d: %d cells, multiplicity %d", r, len(cells), report.multiplicity)
    return cov, report


# ---------------------------------------------------------------------- peripheral coverings


def peripheral_elements(spec: GroupSpec, lam: int, radius: int) -> list[GroupElement]:
    """Elements of H_λ with |h|_X ≤ radius."""
    p = spec.peripheral(lam)
    factor = spec.factors[p.factor]
    out = [IDENTITY]
    if isinstance(factor, CyclicFactor):
        out += [spec.normalize_syllables(((p.factor, e),)) for e in factor.elements()]
    elif spec.family == "one_relator":
        raise UnsupportedPeripheral(f"peripheral {lam} is infinite in a one-relator group")
    elif isinstance(factor, FreeAbelianFactor):
        coords = p.coordinates if p.coordinates is not None else list(range(factor.rank))
        for values in _lattice(len(coords), radius):
            if any(values):
                v = [0] * factor.rank
                for c, a in zip(coords, values):
                    v[c] = a
                out.append(GroupElement(((p.factor, tuple(v)),)))
    elif isinstance(factor, FreeFactor):
        words: list[tuple[int, ...]] = [()]
        frontier: list[tuple[int, ...]] = [()]
        letters = [s * (i + 1) for i in range(len(factor.generators)) for s in (1, -1)]
        for _ in range(radius):
            frontier = [w + (x,) for w in frontier for x in letters if not w or w[-1] != -x]
            words += frontier
        out += [GroupElement(((p.factor, w),)) for w in words if w]
    else:
        raise UnsupportedPeripheral(f"no covering pattern for peripheral {lam}")
    return [g for g in out if spec.length_x(g) <= radius]


def _lattice(dim: int, radius: int) -> Iterable[tuple[int, ...]]:
    if dim == 0:
        yield ()
        return
    for a in range(-radius, radius + 1):
        for rest in _lattice(dim - 1, radius - abs(a)):
            yield (a,) + rest


def _brick(values: Sequence[int], r: int) -> tuple[int, ...]:
    side = 4 * r + 1
    index = [0] * len(values)
    for t in range(len(values) - 1, -1, -1):
        offset = (sum(index[t + 1 :]) % 2) * 2 * r
        index[t] = math.floor((values[t] + 2 * r + offset) / side)
    return tuple(index)


def _staggered(values: Sequence[int], r: int) -> tuple[int, ...]:
    """Cube of the first of m+1 shifted lattices holding the point at least r inside.

    Shifts are 2r+1 apart on a side of (m+1)(2r+1), so each coordinate rules
    out at most one lattice, and same-lattice cubes are more than 2r apart.
    """
    step = 2 * r + 1
    side = (len(values) + 1) * step
    for j in range(len(values) + 1):
        shifted = [v - j * step for v in values]
        if all(r <= s % side < side - r for s in shifted):
            return (j, *(s // side for s in shifted))
    raise UnsupportedPeripheral(f"no staggered cube holds {tuple(values)}")


def peripheral_cover(spec: GroupSpec, lam: int, r: int, radius: int) -> Covering:
    """d_X-covering of H_λ ∩ B_X(radius) at scale r by the factor's standard pattern."""
    p = spec.peripheral(lam)
    factor = spec.factors[p.factor]
    elements = peripheral_elements(spec, lam, radius)
    space = WordMetricSpace(spec, elements)
    if isinstance(factor, CyclicFactor):
        return Covering([Cell(frozenset(elements), f"H{lam}")], space, r)
    groups: dict[tuple, set[GroupElement]] = defaultdict(set)
    if isinstance(factor, FreeAbelianFactor):
        coords = p.coordinates if p.coordinates is not None else list(range(factor.rank))
        for g in elements:
            v = g.syllables[0][1] if g.syllables else (0,) * factor.rank
            values = [v[c] for c in coords]  # type: ignore[index]
            groups[_brick(values, r) if len(values) <= 2 else _staggered(values, r)].add(g)
    else:
        for g in elements:
            w = g.syllables[0][1] if g.syllables else ()
            k = len(w) // (2 * r)  # type: ignore[arg-type]
            level = max(0, 2 * k * r - r)
            groups[(k, w[:level] if k else ())].add(g)  # type: ignore[index]
    cells = [Cell(frozenset(groups[key]), f"H{lam}{list(key)}") for key in sorted(groups, key=repr)]
    return Covering(cells, space, r)


def translated(cov: Covering, g: GroupElement, spec: GroupSpec, right: bool = False) -> list[Cell]:
    """Cells g·C (or C·g with `right`)."""
    def move(h: GroupElement) -> GroupElement:
        return spec.multiply(h, g) if right else spec.multiply(g, h)

    return [Cell(frozenset(move(h) for h in c.elements), c.label, c.center, c.annulus) for c in cov.cells]


# ---------------------------------------------------------------------- union combinators


def finite_union_cover(cov1: Covering, cov2: Covering, r: int) -> Covering:
    """Union covering: cells of cov2 within r of a cov1 cell are absorbed into it."""
    if cov1.metric != cov2.metric:
        raise MetricMismatch(f"cannot unite a {cov1.metric} covering with a {cov2.metric} covering")
    if not cov2.cells:
        return cov1
    space = cov1.space.restricted(list(cov1.domain) + list(cov2.domain))
    covered = set().union(*(c.elements for c in cov1.cells)) if cov1.cells else set()
    merged = [set(c.elements) for c in cov1.cells]
    extra: list[set[GroupElement]] = []
    for c in cov2.cells:
        rest = c.elements - covered
        if not rest:
            continue
        for i, first in enumerate(cov1.cells):
            if space.within(first.elements, rest, r):
                merged[i] |= rest
                break
        else:
            extra.append(set(rest))
    cells = [Cell(frozenset(m), c.label, c.center, c.annulus) for m, c in zip(merged, cov1.cells)]
    cells += [Cell(frozenset(e), "extra") for e in extra]
    return Covering(cells, space, min(cov1.scale, cov2.scale), cov1.notes + cov2.notes)


def separated_check(space: FiniteMetricSpace, sets: Sequence[Iterable[GroupElement]], s: int) -> None:
    """Raise NotSeparated naming a pair at distance < s from different sets."""
    lists = [list(a) for a in sets]
    if s < 1:
        return
    owner = {g: i for i, a in enumerate(lists) for g in a}
    for i, a in enumerate(lists):
        for b in sorted(space.neighbourhood(a, s - 1), key=repr):
            j = owner.get(b, i)
            if j > i:
                near = next(g for g in a if space.d(g, b) < s)
                raise NotSeparated(f"sets {i} and {j} are closer than {s}", witness=(near, b))


def separated_union_cover(
    pieces: Sequence[tuple[Iterable[GroupElement], Covering]],
    ys: tuple[Iterable[GroupElement], Covering] | None,
    s: int,
) -> Covering:
    """Union of pieces whose parts outside Y_s are s-separated, at scale ⌊(s−1)/2⌋."""
    out_scale = max(0, (s - 1) // 2)
    y_set = set(ys[0]) if ys is not None else set()
    remainders = [[g for g in dict.fromkeys(points) if g not in y_set] for points, _ in pieces]
    if not pieces:
        if ys is None:
            raise EmptyCovering("nothing to cover")
        return Covering(ys[1].cells, ys[1].space, out_scale, list(ys[1].notes))
    space = pieces[0][1].space.restricted([g for rest in remainders for g in rest])
    separated_check(space, remainders, s)
    cells: list[Cell] = []
    for rest, (_, cov) in zip(remainders, pieces):
        keep = set(rest)
        cells += [Cell(c.elements & keep, c.label, c.center, c.annulus) for c in cov.cells if c.elements & keep]
    union = Covering(cells, space, out_scale)
    if ys is None:
        return union
    y_cov = Covering(ys[1].cells, ys[1].space, out_scale, list(ys[1].notes))
    return finite_union_cover(y_cov, union, out_scale)


# ---------------------------------------------------------------------- relative balls


@dataclass
class SeparationParams:
    s: int
    eps: float
    L: float  # noqa: N815
    threshold: float
    t_s: list[GroupElement]
    y_s: set[GroupElement]
    reps: dict[int, list[GroupElement]]


def separation_params(
    window: Window, n: int, s: int, constants: ConstantsReport, previous: Iterable[GroupElement]
) -> SeparationParams:
    spec = window.spec
    eps = constants.eps.get(s)
    if eps is None:
        eps = float(estimate_bcp_eps(window, s).value)
    threshold = max(eps, 2 * constants.L_hat * (s + 1))
    t_s = spec.x_ball(math.floor(threshold))
    prev = list(previous)
    members = {g for g in window.vertices if window.length_rel(g) <= n}
    y_s = {h for h in (spec.multiply(g, t) for g in prev for t in t_s) if h in members}
    reps: dict[int, list[GroupElement]] = {}
    for lam in range(len(spec.peripherals)):
        seen: dict[object, GroupElement] = {}
        for g in sorted(prev, key=spec.shortlex_key):
            seen.setdefault(spec.coset_id(g, lam), g)
        reps[lam] = list(seen.values())
    return SeparationParams(s, eps, constants.L_hat, threshold, t_s, y_s, reps)


def rel_ball(window: Window, n: int) -> list[GroupElement]:
    return [g for g in window.vertices if window.length_rel(g) <= n]


def cover_rel_ball(
    window: Window, n: int, s: int, constants: ConstantsReport, strict: bool = True
) -> tuple[Covering, CoverReport]:
    """d_X-covering of B(n) ∩ window built by the coset recursion."""
    cov = _cover_rel_ball(window, min(n, window.max_rel_length), s, constants, strict)
    report = measure_cover(cov, cov.scale)
    logger.info("rel ball n=%d s=%d: %d cells, multiplicity %d", n, s, len(cov.cells), report.multiplicity)
    return cov, report


def _cover_rel_ball(window: Window, n: int, s: int, constants: ConstantsReport, strict: bool) -> Covering:
    spec = window.spec
    ball = rel_ball(window, n)
    space = WordMetricSpace(spec, ball)
    if n == 0:
        return Covering([Cell(frozenset([IDENTITY]), "1")], space, s)
    if n == 1:
        cov = Covering([Cell(frozenset([IDENTITY]), "1")], WordMetricSpace(spec, [IDENTITY]), s)
        for lam in range(len(spec.peripherals)):
            part = peripheral_cover(spec, lam, s, window.rho_x).restricted(ball)
            cov = finite_union_cover(cov, part, s)
        x_cell = [g for g in spec.x_elements() if g in window]
        x_cov = Covering([Cell(frozenset(x_cell), "X")], WordMetricSpace(spec, x_cell), s)
        return _fill(finite_union_cover(cov, x_cov, s), space)

    prev = _cover_rel_ball(window, n - 1, s, constants, strict)
    params = separation_params(window, n, s, constants, prev.domain)
    members = set(ball)
    y_cells = []
    for c in prev.cells:
        thick = frozenset(h for h in (spec.multiply(g, t) for g in c.elements for t in params.t_s) if h in members)
        y_cells.append(Cell(thick, c.label, c.center, c.annulus))
    y_cov = Covering(y_cells, WordMetricSpace(spec, params.y_s), s, list(prev.notes))

    cov: Covering | None = None
    for lam, reps in params.reps.items():
        pieces = []
        for g in reps:
            radius = window.rho_x + spec.length_x(g)
            base = peripheral_cover(spec, lam, s, radius)
            cells = [Cell(c.elements & members, f"{spec.format_element(g)}.{c.label}")
                     for c in translated(base, g, spec)]
            cells = [c for c in cells if c.elements]
            points = set().union(*(c.elements for c in cells)) if cells else set()
            if points:
                pieces.append((points, Covering(cells, WordMetricSpace(spec, points), s)))
        try:
            part = separated_union_cover(pieces, (params.y_s, y_cov), s)
        except NotSeparated as e:
            if strict:
                raise SeparationFailed(f"cosets of H{lam} are not {s}-separated outside Y_s", witness=e.witness) from e
            logger.warning("separation failed for H%d at s=%d; falling back to a plain union", lam, s)
            part = y_cov
            for _, piece in pieces:
                part = finite_union_cover(part, piece, s)
            part.notes.append(f"separation failed for H{lam}")
        cov = part if cov is None else finite_union_cover(cov, part, part.scale)
    if cov is None:
        cov = y_cov
    for x in spec.x_elements():
        moved = [Cell(frozenset(h for h in (spec.multiply(g, x) for g in c.elements) if h in members), c.label)
                 for c in prev.cells]
        moved = [c for c in moved if c.elements]
        points = set().union(*(c.elements for c in moved)) if moved else set()
        cov = finite_union_cover(cov, Covering(moved, WordMetricSpace(spec, points), s), cov.scale)
    return _fill(cov, space)


def _fill(cov: Covering, space: WordMetricSpace) -> Covering:
    out = Covering(cov.cells, space, cov.scale, cov.notes)
    leftovers = out.uncovered()
    if leftovers:
        logger.warning("%d elements left uncovered; adding singleton cells", len(leftovers))
        out.cells = out.cells + [Cell(frozenset([g]), "singleton") for g in leftovers]
        out.notes.append(f"{len(leftovers)} singleton cells")
    return out


# ---------------------------------------------------------------------- assembly


@dataclass
class QuasiStabilizer:
    R: int  # noqa: N815
    elements: list[GroupElement]
    matches_ball: bool


def quasi_stabilizer(window: Window, R: int) -> QuasiStabilizer:  # noqa: N803
    """W_R(1) = {g : d(1, g) ≤ R}, compared with B(R) ∩ window."""
    dist = window.distances_from(IDENTITY)
    elements = [g for g in window.vertices if dist.get(g, R + 1) <= R]
    return QuasiStabilizer(R, elements, set(elements) == set(rel_ball(window, R)))


def assemble_group_cover(
    window: Window,
    r: int,
    graph_cover: Covering,
    ball_cover: Covering,
    graph_report: CoverReport | None = None,
    ball_report: CoverReport | None = None,
) -> tuple[Covering, CoverReport]:
    """Refine each coarse relative cell by a relative-ball covering translated to the cell's base."""
    spec = window.spec
    R = graph_cover.scale  # noqa: N806
    if R < r:
        raise IncompatibleScales(f"graph cover scale {R} is below r = {r}")
    if ball_cover.scale < 2 * r:
        raise IncompatibleScales(f"ball cover scale {ball_cover.scale} is below 2r = {2 * r}")
    space = WordMetricSpace(spec, window.vertices)
    cells: list[Cell] = []
    for u in graph_cover.cells:
        base = _base(u, spec)
        for c in translated(ball_cover, base, spec):
            part = c.elements & u.elements
            if part:
                cells.append(Cell(part, f"{u.label}/{c.label}", base))
    cov = _fill(Covering(cells, space, r), space)
    m1 = (graph_report or measure_cover(graph_cover, R)).multiplicity
    n1 = (ball_report or measure_cover(ball_cover, ball_cover.scale)).multiplicity
    report = measure_cover(cov, r, multiplicity_bound=m1 * n1)
    return cov, report


def _base(cell: Cell, spec: GroupSpec) -> GroupElement:
    return cell.center if cell.center is not None else min(cell.elements, key=spec.shortlex_key)


def assemble(
    window: Window,
    r: int,
    R: int,  # noqa: N803
    constants: ConstantsReport,
    c: int = DEFAULT_ASSEMBLY_C,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> tuple[Covering, CoverReport]:
    """Graph cover at scale R, relative-ball cover at scale 2r+1, then assemble.

    The ball cover lives on the smallest window holding every cell translated
    back by its base, capped at relative radius cR; the caller's window is
    reused when it already holds them.
    """
    spec = window.spec
    graph_cover, graph_report = cover_graph_annuli(window, R, constants)
    shifted = {spec.difference(_base(u, spec), g) for u in graph_cover.cells for g in u.elements}
    n = min(c * R, max(spec.length_rel(h) for h in shifted))
    if all(h in window for h in shifted) and n <= window.n:
        wide = window
    else:
        rho_x = max(spec.length_x(h) for h in shifted)
        logger.info("building a ball window n=%d rho_x=%d for assembly", n, rho_x)
        wide = build_window(spec, n, rho_x, max_vertices=max_vertices)
    s = 4 * r + 3
    ball_cover, ball_report = cover_rel_ball(wide, n, s, constants, strict=False)
    return assemble_group_cover(window, r, graph_cover, ball_cover, graph_report, ball_report)
