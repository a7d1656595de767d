from __future__ import annotations

import logging
import math
from collections import defaultdict
from collections.abc import Iterator
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
from pydantic import BaseModel, Field

from relhyp.domain.cayley import (
    DEFAULT_GEODESIC_CAP,
    Component,
    GeodesicFan,
    Path,
    Window,
    are_connected,
    build_window,
    components,
    is_isolated,
)
from relhyp.domain.errors import CapExceeded, NotOnSides, WindowTooLarge
from relhyp.domain.group import IDENTITY, GroupElement

logger = logging.getLogger(__name__)

DEFAULT_MAX_TRIANGLES = 2_000_000
DEFAULT_MAX_CYCLES = 5_000_000
DEFAULT_MAX_MU = 200_000
DEFAULT_CONTROL_GAP = 2


@dataclass(frozen=True)
class GeodesicTriangle:
    """Δ(x, y, z) with chosen geodesic sides [x,y], [y,z], [x,z]."""

    xy: Path
    yz: Path
    xz: Path

    @property
    def x(self) -> GroupElement:
        return self.xy.start

    @property
    def y(self) -> GroupElement:
        return self.xy.end

    @property
    def z(self) -> GroupElement:
        return self.xz.end

    def gromov(self, corner: str) -> Fraction:
        """Distance from a corner to the internal points on its two legs."""
        a, b, c = len(self.xy), len(self.yz), len(self.xz)
        opposite = {"x": (a, c, b), "y": (a, b, c), "z": (c, b, a)}[corner]
        return Fraction(opposite[0] + opposite[1] - opposite[2], 2)

    def legs(self, corner: str) -> tuple[Path, Path]:
        if corner == "x":
            return self.xy, self.xz
        if corner == "y":
            return self.xy.reversed(), self.yz
        return self.xz.reversed(), self.yz.reversed()

    def internal_points(self) -> dict[str, GroupElement | None]:
        """Points a ∈ [y,z], b ∈ [x,z], c ∈ [x,y]; None when they fall mid-edge."""
        out: dict[str, GroupElement | None] = {}
        for name, path, t in (("a", self.yz, self.gromov("y")), ("b", self.xz, self.gromov("x")),
                              ("c", self.xy, self.gromov("x"))):
            out[name] = path.vertices[int(t)] if t.denominator == 1 else None
        return out

    def check_uv(self, u: GroupElement, v: GroupElement, d_rel) -> bool:
        """u ∈ [x,y], v ∈ [x,z] at equal distance from x with d(u,y)+d(v,z) ≥ d(y,z)."""
        if u not in self.xy.vertices or v not in self.xz.vertices:
            raise NotOnSides("u must lie on [x,y] and v on [x,z]")
        i, j = self.xy.vertices.index(u), self.xz.vertices.index(v)
        if i != j:
            return False
        return d_rel(u, self.y) + d_rel(v, self.z) >= len(self.yz)


def conjugate_pairs(tri: GeodesicTriangle) -> list[tuple[GroupElement, GroupElement]]:
    """All conjugate vertex pairs on the three leg pairs, corners excluded."""
    pairs: list[tuple[GroupElement, GroupElement]] = []
    for corner in ("x", "y", "z"):
        left, right = tri.legs(corner)
        for t in range(1, math.floor(tri.gromov(corner)) + 1):
            pairs.append((left.vertices[t], right.vertices[t]))
    return pairs


@dataclass
class Estimate:
    value: Fraction
    instances: int = 0
    witnesses: list[str] = field(default_factory=list)


def _fan(window: Window, g: GroupElement, fans: dict[GroupElement, GeodesicFan]) -> GeodesicFan:
    if g not in fans:
        fans[g] = GeodesicFan(window, g)
    return fans[g]


def enumerate_triangles(
    window: Window, side_cap: int, geodesic_cap: int = DEFAULT_GEODESIC_CAP, max_triangles: int = DEFAULT_MAX_TRIANGLES
) -> Iterator[GeodesicTriangle]:
    """Triangles with x = 1 and every side ≤ side_cap, over all geodesic side choices."""
    count = 0
    origin = GeodesicFan(window, IDENTITY, cutoff=side_cap)
    corners = sorted(origin.reached(), key=window.spec.shortlex_key)
    for y in corners:
        fan = GeodesicFan(window, y, cutoff=side_cap)
        for z in corners:
            if fan.distance(z) is None:
                continue
            for xy in origin.paths(y, geodesic_cap):
                for xz in origin.paths(z, geodesic_cap):
                    for yz in fan.paths(z, geodesic_cap):
                        count += 1
                        if count > max_triangles:
                            raise CapExceeded(f"more than {max_triangles} triangles")
                        yield GeodesicTriangle(xy, yz, xz)


def estimate_thinness(window: Window, side_cap: int, max_triangles: int = DEFAULT_MAX_TRIANGLES) -> Estimate:
    best = Fraction(0)
    result = Estimate(best)
    spec = window.spec
    for tri in enumerate_triangles(window, side_cap, max_triangles=max_triangles):
        result.instances += 1
        for u, v in conjugate_pairs(tri):
            d = window.d_rel(u, v)
            if d > best:
                best = Fraction(d)
                result.witnesses = [
                    f"x=1 y={spec.format_element(tri.y)} z={spec.format_element(tri.z)} "
                    f"u={spec.format_element(u)} v={spec.format_element(v)}"
                ]
    result.value = best
    logger.info("thinness: %s over %d triangles", best, result.instances)
    return result


def coset_incidence(window: Window, radius: int) -> nx.Graph:
    """Vertices within `radius` of 1 joined through one node per H-coset and per bare X-edge.

    A Γ-edge becomes two incidence edges, so incidence lengths are twice Γ-lengths.
    """
    spec = window.spec
    near = window.distances_from(IDENTITY, cutoff=radius)
    incidence = nx.Graph()
    incidence.add_nodes_from(near)
    cosets: dict[tuple[str, int, object], list[GroupElement]] = defaultdict(list)
    for v in near:
        for lam in range(len(spec.peripherals)):
            cosets[("H", lam, spec.coset_id(v, lam))].append(v)
    for key, members in cosets.items():
        if len(members) > 1:
            incidence.add_edges_from((key, v) for v in members)
    for u, v in window.graph.edges(near):
        if u in near and v in near and spec.peripheral_of(spec.difference(u, v)) is None:
            key = ("X", *sorted((u, v), key=spec.shortlex_key))
            incidence.add_edges_from([(u, key), (key, v)])
    return incidence


def enumerate_cycles(window: Window, cycle_len_cap: int, max_cycles: int = DEFAULT_MAX_CYCLES) -> Iterator[Path]:
    """Simple cycles through 1 of length 3..cap that enter each H-coset at most once.

    A run of edges inside one coset can be cut to a single edge of the coset
    clique without changing the components, so these cycles carry the
    largest isolated-component ratios.
    """
    incidence = coset_incidence(window, cycle_len_cap // 2)
    count = 0
    for cycle in nx.simple_cycles(incidence, length_bound=2 * cycle_len_cap):
        count += 1
        if count > max_cycles:
            raise CapExceeded(f"cycle enumeration exceeded {max_cycles} cycles")
        if IDENTITY not in cycle:
            continue
        vs = [v for v in cycle if isinstance(v, GroupElement)]
        if len(vs) < 3:
            continue
        k = vs.index(IDENTITY)
        vs = vs[k:] + vs[:k]
        if window.spec.shortlex_key(vs[-1]) < window.spec.shortlex_key(vs[1]):
            vs = [vs[0], *reversed(vs[1:])]
        yield Path.from_vertices(window.spec, vs + [IDENTITY])


def isolated_ratio(window: Window, cycle: Path) -> Fraction:
    """Largest per-λ sum of d_X over isolated components, divided by l(q)."""
    comps = components(cycle, cyclic=True)
    sums: dict[int, int] = {}
    for c in comps:
        if is_isolated(c, comps):
            sums[c.peripheral] = sums.get(c.peripheral, 0) + window.d_x(c.start_vertex, c.end_vertex)
    return Fraction(max(sums.values(), default=0), len(cycle))


def estimate_omega_L(  # noqa: N802
    window: Window, cycle_len_cap: int, max_cycles: int = DEFAULT_MAX_CYCLES
) -> Estimate:
    result = Estimate(Fraction(0))
    for cycle in enumerate_cycles(window, cycle_len_cap, max_cycles):
        result.instances += 1
        ratio = isolated_ratio(window, cycle)
        if ratio > result.value:
            result.value = ratio
            result.witnesses = [cycle.format()]
        elif ratio == result.value and ratio > 0 and len(result.witnesses) < 5:
            result.witnesses.append(cycle.format())
    logger.info("omega L: %s over %d cycles", result.value, result.instances)
    return result


def geodesic_pairs(window: Window, s: int, cap: int = DEFAULT_GEODESIC_CAP) -> Iterator[tuple[Path, Path]]:
    """Pairs (p1, p2) of window geodesics, p1 from 1, with endpoint X-gaps ≤ s."""
    spec = window.spec
    near = spec.x_ball(s)
    fans: dict[GroupElement, GeodesicFan] = {}
    starts = [g for g in near if g in window]
    origin = _fan(window, IDENTITY, fans)
    for v in window.vertices:
        ends = [h for h in (spec.multiply(v, b) for b in near) if h in window]
        for p1 in origin.paths(v, cap):
            for g in starts:
                for h in ends:
                    for p2 in _fan(window, g, fans).paths(h, cap):
                        yield p1, p2


def estimate_bcp_eps(window: Window, s: int, cap: int = DEFAULT_GEODESIC_CAP) -> Estimate:
    """Smallest ε such that long components of p1 always meet a connected component of p2."""
    worst = -1
    result = Estimate(Fraction(0))
    spec = window.spec
    for p1, p2 in geodesic_pairs(window, s, cap):
        result.instances += 1
        others = components(p2)
        for c in components(p1):
            if any(are_connected(c, o) for o in others):
                continue
            d = window.d_x(c.start_vertex, c.end_vertex)
            if d > worst:
                worst = d
                result.witnesses = [f"p1={p1.format()} p2={spec.format_element(p2.start)}:{p2.format()}"]
    result.value = Fraction(worst + 1)
    logger.info("bcp eps(%d): %s over %d pairs", s, result.value, result.instances)
    return result


class LemmaReport(BaseModel):
    check: str
    parameters: dict[str, float]
    instances: int = 0
    violations: list[str] = Field(default_factory=list)
    max_observed: float | None = None
    note: str | None = None

    @property
    def passed(self) -> bool:
        return not self.violations


def _last_component(path: Path) -> Component | None:
    comps = components(path)
    if comps and comps[-1].edges[-1] == len(path) - 1:
        return comps[-1]
    return None


def check_lemma_lc(window: Window, s: int, L: float, eps: float, cap: int = DEFAULT_GEODESIC_CAP) -> LemmaReport:  # noqa: N803
    """Geodesics ending in long same-λ components with close endpoints end in connected components."""
    threshold = max(eps, 2 * L * (s + 1))
    report = LemmaReport(check="connected-components", parameters={"s": s, "L": L, "eps": eps, "threshold": threshold})
    spec = window.spec
    for p1, p2 in geodesic_pairs(window, s, cap):
        e1, e2 = _last_component(p1), _last_component(p2)
        if e1 is None or e2 is None or e1.peripheral != e2.peripheral:
            continue
        if min(window.d_x(e.start_vertex, e.end_vertex) for e in (e1, e2)) < threshold:
            continue
        report.instances += 1
        if not are_connected(e1, e2):
            report.violations.append(f"p1={p1.format()} p2={spec.format_element(p2.start)}:{p2.format()}")
    if report.instances == 0:
        report.note = "no instances"
    return report


def check_lemma_xi(
    window: Window,
    L: float,  # noqa: N803
    xi: float,
    side_cap: int | None = None,
    geodesic_cap: int = DEFAULT_GEODESIC_CAP,
) -> LemmaReport:
    """Vertices u ∈ [x,y], v ∈ [x,z] far enough from the short side are X-close.

    Only the length of [y,z] matters, so one cutoff search per corner y
    replaces the side enumeration.
    """
    sigma, rho = 5 * xi, 6 * L * xi * xi
    cap = window.max_rel_length if side_cap is None else side_cap
    report = LemmaReport(check="conjugate-points", parameters={"L": L, "xi": xi, "sigma": sigma, "rho": rho})
    spec = window.spec
    worst = 0
    origin = GeodesicFan(window, IDENTITY, cutoff=cap)
    corners = sorted(origin.reached(), key=spec.shortlex_key)
    for y in corners:
        from_y = window.distances_from(y, cutoff=cap)
        for z in corners:
            d_yz = from_y.get(z)
            if d_yz is None:
                continue
            for xy in origin.paths(y, geodesic_cap):
                for xz in origin.paths(z, geodesic_cap):
                    last = min(len(xy), len(xz), math.floor((len(xy) + len(xz) - d_yz - sigma) / 2))
                    for t in range(0, last + 1):
                        u, v = xy.vertices[t], xz.vertices[t]
                        report.instances += 1
                        d = window.d_x(u, v)
                        worst = max(worst, d)
                        if d > rho:
                            report.violations.append(
                                f"y={spec.format_element(y)} z={spec.format_element(z)} t={t} d_X={d}"
                            )
    report.max_observed = worst
    if report.instances == 0:
        report.note = "no instances"
    return report


def clamp(l_hat: Fraction, xi_hat: Fraction) -> tuple[Fraction, Fraction]:
    """(L, ξ) with L > 0 and 6Lξ ≥ 1."""
    L = l_hat if l_hat > 0 else Fraction(1, 6)  # noqa: N806
    xi = max(xi_hat, 1 / (6 * L))
    return L, xi


def count_x_ball(window: Window, radius: int, max_count: int = DEFAULT_MAX_MU) -> int | None:
    try:
        return len(window.spec.x_lengths(radius, limit=max_count))
    except WindowTooLarge:
        logger.warning("X-ball of radius %d has more than %d elements", radius, max_count)
        return None


class ConstantsReport(BaseModel):
    n: int
    rho_x: int
    xi_hat: float
    L_hat: float  # noqa: N815
    eps: dict[int, float]
    L: float
    xi: float
    sigma: float
    rho: float
    mu: int | None
    caps: dict[str, int]
    witnesses: dict[str, list[str]] = Field(default_factory=dict)
    control_rho_x: int | None = None
    control_L_hat: float | None = None  # noqa: N815
    divergence_threshold: float | None = None
    diverging: bool = False
    verdict: str | None = None


def _control_window(window: Window, gap: int | None) -> Window | None:
    if gap is None or window.rho_x - gap < 1:
        return None
    return build_window(window.spec, window.n, window.rho_x - gap, max_vertices=max(len(window), 1))


def estimate_constants(
    window: Window,
    side_cap: int | None = None,
    cycle_len_cap: int = 4,
    scales: tuple[int, ...] = (0, 1, 2),
    control: Window | None = None,
    max_cycles: int = DEFAULT_MAX_CYCLES,
    control_gap: int | None = DEFAULT_CONTROL_GAP,
) -> ConstantsReport:
    """Estimate ξ̂, L̂, ε̂(s) on a window and derive σ, ρ, μ by the clamp rule.

    `control` is a smaller window of the same group, by default the window with
    ρ_X lowered by `control_gap`. When the isolated-component ratio grows from
    the control to `window`, the report is marked diverging: an isolated
    component of X-length m on a 4-cycle contributes m/2, so the control's
    ratio L fails as a bound once m > 2L.
    """
    side = window.max_rel_length if side_cap is None else side_cap
    thin = estimate_thinness(window, side)
    omega = estimate_omega_L(window, cycle_len_cap, max_cycles)
    eps = {s: estimate_bcp_eps(window, s) for s in scales}
    L, xi = clamp(omega.value, thin.value)  # noqa: N806
    if L != omega.value or xi != thin.value:
        logger.info("clamped L %s -> %s, xi %s -> %s", omega.value, L, thin.value, xi)
    rho = 6 * L * xi * xi
    report = ConstantsReport(
        n=window.n,
        rho_x=window.rho_x,
        xi_hat=float(thin.value),
        L_hat=float(omega.value),
        eps={s: float(e.value) for s, e in eps.items()},
        L=float(L),
        xi=float(xi),
        sigma=float(5 * xi),
        rho=float(rho),
        mu=count_x_ball(window, math.floor(rho)),
        caps={"side_cap": side, "cycle_len_cap": cycle_len_cap, "max_cycles": max_cycles},
        witnesses={"xi": thin.witnesses, "L": omega.witnesses},
    )
    if control is None:
        control = _control_window(window, control_gap)
    if control is None:
        return report
    smaller = estimate_omega_L(control, cycle_len_cap, max_cycles)
    report.control_rho_x = control.rho_x
    report.control_L_hat = float(smaller.value)
    report.divergence_threshold = float(2 * smaller.value)
    if omega.value > smaller.value > 0:
        report.diverging = True
        report.verdict = (
            f"not relatively hyperbolic at window scale: isolated-component ratio grew from "
            f"{float(smaller.value)} (rho_x={control.rho_x}) to {float(omega.value)} (rho_x={window.rho_x}); "
            f"isolated components of X-length m > 2L = {float(2 * smaller.value)} break the candidate bound "
            f"L={float(smaller.value)}"
        )
        logger.warning(report.verdict)
    return report
