from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence

from pydantic import BaseModel, Field

from relhyp.domain.errors import NotTrivialInG, UnsupportedFamily
from relhyp.domain.group import CyclicFactor, FreeAbelianFactor, GroupSpec
from relhyp.domain.word import HLetter, Letter, Word, XGen

logger = logging.getLogger(__name__)

DEFAULT_CAP_K = 3

State = tuple[Letter, ...]


class RelPresentation:
    """⟨X, H_λ | R⟩ over the free product F = (∗ H_λ) ∗ F(X)."""

    def __init__(self, spec: GroupSpec, relators: Iterable[Word | str] = (), link_generators: bool = False):
        self.spec = spec
        self.link_generators = link_generators
        self.relators: list[State] = []
        for r in relators:
            self.add_relator(r)
        if link_generators:
            for x in spec.x_letters:
                if x.power != 1:
                    continue
                g = spec.letter_element(x)
                lam = spec.peripheral_of(g)
                if lam is not None:
                    self.relators.append((x.inverse(), spec.h_letter(lam, g)))
        self._starred = self._symmetrize()
        self._coords = self._abelian_coordinates()

    @classmethod
    def from_spec(cls, spec: GroupSpec, link_generators: bool = False) -> RelPresentation:
        if spec.family == "one_relator":
            return cls(spec, [spec.relator or ""], link_generators)
        if spec.family == "free_abelian":
            names = spec.factors[0].generators
            commutators = [f"{a} {b} {a}^-1 {b}^-1" for i, a in enumerate(names) for b in names[i + 1 :]]
            return cls(spec, commutators, link_generators=True)
        if spec.family in ("free", "free_product"):
            return cls(spec, [], link_generators)
        raise UnsupportedFamily(f"no relative presentation for family {spec.family!r}")

    def relative_letters(self, w: Word | str) -> State:
        """Letters of w over X ∪ H; X-letters lying in some H_λ become H-letters unless generators are linked."""
        if isinstance(w, str):
            w = self.spec.parse_word(w)
        out: list[Letter] = []
        for letter in w:
            self.spec.letter_syllable(letter)
            if isinstance(letter, XGen) and not self.link_generators:
                g = self.spec.letter_element(letter)
                lam = self.spec.peripheral_of(g)
                if lam is not None:
                    out.append(self.spec.h_letter(lam, g))
                    continue
            out.append(letter)
        return tuple(out)

    def add_relator(self, r: Word | str) -> None:
        letters = self.relative_letters(r)
        if not self.spec.is_identity(Word(letters)):
            raise NotTrivialInG(f"relator {self.spec.format_word(Word(letters))} is not trivial in G")
        letters = self.reduce(letters)
        if not letters:
            raise ValueError("relators must be non-trivial in F")
        self.relators.append(letters)

    def reduce(self, letters: Iterable[Letter]) -> State:
        """Free-product normal form in F: X-letters freely reduced, same-λ H-letters multiplied."""
        stack: list[Letter] = []
        for letter in letters:
            if isinstance(letter, HLetter):
                factor = self.spec.factor_of(letter.peripheral)
                if factor.is_identity(letter.element):
                    continue
                top = stack[-1] if stack else None
                if isinstance(top, HLetter) and top.peripheral == letter.peripheral:
                    product = factor.multiply(top.element, letter.element)
                    if factor.is_identity(product):
                        stack.pop()
                    else:
                        stack[-1] = HLetter(letter.peripheral, product)
                    continue
            elif stack and stack[-1] == letter.inverse():
                stack.pop()
                continue
            stack.append(letter)
        return tuple(stack)

    def _symmetrize(self) -> list[State]:
        forms: dict[State, None] = {}
        for r in self.relators:
            for word in (r, self.reduce(self.spec.invert_letter(x) for x in reversed(r))):
                for i in range(len(word)):
                    forms.setdefault(word[i:] + word[:i], None)
        return list(forms)

    def _abelian_coordinates(self) -> dict[object, int]:
        coords: dict[object, int] = {}
        for x in self.spec.x_letters:
            coords.setdefault(("x", x.symbol), len(coords))
        for lam in range(len(self.spec.peripherals)):
            factor = self.spec.factor_of(lam)
            if isinstance(factor, CyclicFactor):
                continue
            for i in range(len(factor.generators)):
                coords[("h", lam, i)] = len(coords)
        return coords

    def exponent_sums(self, letters: Iterable[Letter]) -> tuple[int, ...]:
        v = [0] * len(self._coords)
        for letter in letters:
            if isinstance(letter, XGen):
                v[self._coords[("x", letter.symbol)]] += letter.power
                continue
            factor = self.spec.factor_of(letter.peripheral)
            if isinstance(factor, CyclicFactor):
                continue
            if isinstance(factor, FreeAbelianFactor):
                for i, a in enumerate(letter.element):  # type: ignore[arg-type]
                    v[self._coords[("h", letter.peripheral, i)]] += a
            else:
                for x in letter.element:  # type: ignore[union-attr]
                    v[self._coords[("h", letter.peripheral, abs(x) - 1)]] += 1 if x > 0 else -1
        return tuple(v)

    def lower_bound(self, letters: State) -> float:
        """Relator applications still needed, from exponent sums; inf when none can help."""
        v = self.exponent_sums(letters)
        if not any(v):
            return 0
        step = max((max(abs(a) for a in self.exponent_sums(r)) for r in self.relators), default=0)
        if step == 0:
            return math.inf
        return math.ceil(max(abs(a) for a in v) / step)

    @property
    def starred(self) -> list[State]:
        return self._starred


def fp_normal_form(pres: RelPresentation, w: Word | str) -> Word:
    return Word(pres.reduce(pres.relative_letters(w)))


def is_trivial_in_f(pres: RelPresentation, w: Word | str) -> bool:
    return not fp_normal_form(pres, w).letters


class AreaReport(BaseModel):
    word: str
    length: int
    area: int | None
    cap_k: int
    cap_len: int
    states: int


def search_area(
    pres: RelPresentation, w: Word | str, cap_k: int = DEFAULT_CAP_K, cap_len: int | None = None
) -> AreaReport:
    """Breadth-first search over F-normal forms, splicing one relator per level.

    Each level is expanded shortest state first.
    """
    spec = pres.spec
    letters = pres.relative_letters(w)
    text = spec.format_word(Word(letters))
    if not spec.is_identity(Word(letters)):
        raise NotTrivialInG(f"{text} is not trivial in G")
    if cap_len is None:
        cap_len = 2 * len(letters) + max((len(r) for r in pres.relators), default=0)
    start = pres.reduce(letters)
    report = AreaReport(word=text, length=len(letters), area=None, cap_k=cap_k, cap_len=cap_len, states=1)
    if not start:
        report.area = 0
        return report
    seen = {start}
    level = [start]
    for depth in range(1, cap_k + 1):
        nxt: list[State] = []
        for state in level:
            for i in range(len(state) + 1):
                for r in pres.starred:
                    candidate = pres.reduce(state[:i] + r + state[i:])
                    if not candidate:
                        report.area = depth
                        report.states = len(seen)
                        return report
                    if len(candidate) > cap_len or candidate in seen:
                        continue
                    if depth + pres.lower_bound(candidate) > cap_k:
                        continue
                    seen.add(candidate)
                    nxt.append(candidate)
        level = sorted(nxt, key=len)
        logger.debug("area search depth %d: %d states", depth, len(level))
        if not level:
            break
    report.states = len(seen)
    logger.info("area of %s unknown within cap_k=%d cap_len=%d", text, cap_k, cap_len)
    return report


def rel_area(pres: RelPresentation, w: Word | str, cap_k: int = DEFAULT_CAP_K, cap_len: int | None = None) -> int | None:
    """Minimal number of conjugated relators whose product is w in F, or None when beyond the caps."""
    return search_area(pres, w, cap_k, cap_len).area


class LinearBoundReport(BaseModel):
    L: float  # noqa: N815
    samples: list[AreaReport] = Field(default_factory=list)
    rejected: list[str] = Field(default_factory=list)
    max_ratio: float = 0.0
    violations: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_linear_bound(
    pres: RelPresentation, samples: Sequence[Word | str], L: float, cap_k: int = DEFAULT_CAP_K  # noqa: N803
) -> LinearBoundReport:
    report = LinearBoundReport(L=L)
    for w in samples:
        try:
            result = search_area(pres, w, cap_k)
        except NotTrivialInG as e:
            report.rejected.append(str(e))
            continue
        report.samples.append(result)
        if result.area is None or result.length == 0:
            continue
        report.max_ratio = max(report.max_ratio, result.area / result.length)
        if result.area > L * result.length:
            report.violations.append(f"{result.word}: area {result.area} > {L} * {result.length}")
    return report
