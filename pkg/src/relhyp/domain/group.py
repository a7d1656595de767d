from __future__ import annotations

import itertools
import logging
from collections import deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import Annotated, Literal

from pydantic import BaseModel, Field, PrivateAttr, model_validator

from relhyp.domain.errors import (
    BoundExceeded,
    InvalidLetter,
    UnknownGenerator,
    UnknownPeripheral,
    UnsupportedFamily,
    WindowTooLarge,
)
from relhyp.domain.word import HLetter, Letter, Payload, RawToken, Word, XGen, tokenize

logger = logging.getLogger(__name__)

Syllable = tuple[int, Payload]


class FreeAbelianFactor(BaseModel):
    """Z^m with one generator per coordinate; elements are exponent vectors."""

    kind: Literal["free_abelian"] = "free_abelian"
    generators: list[str]

    @property
    def rank(self) -> int:
        return len(self.generators)

    def identity(self) -> tuple[int, ...]:
        return (0,) * self.rank

    def is_identity(self, p: Payload) -> bool:
        return not any(p)  # type: ignore[arg-type]

    def multiply(self, p: Payload, q: Payload) -> tuple[int, ...]:
        return tuple(a + b for a, b in zip(p, q))  # type: ignore[arg-type]

    def inverse(self, p: Payload) -> tuple[int, ...]:
        return tuple(-a for a in p)  # type: ignore[union-attr]

    def generator(self, index: int, power: int) -> tuple[int, ...]:
        v = [0] * self.rank
        v[index] = power
        return tuple(v)

    def x_length(self, p: Payload) -> int:
        return sum(abs(a) for a in p)  # type: ignore[union-attr]

    def expand(self, p: Payload) -> list[tuple[int, int]]:
        out: list[tuple[int, int]] = []
        for i, a in enumerate(p):  # type: ignore[arg-type]
            out.extend([(i, 1 if a > 0 else -1)] * abs(a))
        return out

    def coerce(self, raw: int | tuple, coordinates: list[int] | None) -> tuple[int, ...]:
        if isinstance(raw, int):
            raw = (raw,)
        values = tuple(int(a) for a in raw)
        if len(values) == self.rank:
            return values
        if coordinates is not None and len(values) == len(coordinates):
            v = [0] * self.rank
            for c, a in zip(coordinates, values):
                v[c] = a
            return tuple(v)
        raise InvalidLetter(f"vector {values} does not fit a rank-{self.rank} factor")

    def format(self, p: Payload) -> str:
        return "(" + ",".join(str(a) for a in p) + ")"  # type: ignore[union-attr]


class CyclicFactor(BaseModel):
    """Z/k generated by a single generator; elements are residues."""

    kind: Literal["cyclic"] = "cyclic"
    generator: str
    order: int = Field(ge=2)

    @property
    def generators(self) -> list[str]:
        return [self.generator]

    def identity(self) -> int:
        return 0

    def is_identity(self, p: Payload) -> bool:
        return p == 0

    def multiply(self, p: Payload, q: Payload) -> int:
        return (p + q) % self.order  # type: ignore[operator]

    def inverse(self, p: Payload) -> int:
        return (-p) % self.order  # type: ignore[operator]

    def generator_element(self, power: int) -> int:
        return power % self.order

    def x_length(self, p: Payload) -> int:
        return min(p, self.order - p)  # type: ignore[operator,type-var]

    def expand(self, p: Payload) -> list[tuple[int, int]]:
        r = int(p)  # type: ignore[arg-type]
        if r <= self.order - r:
            return [(0, 1)] * r
        return [(0, -1)] * (self.order - r)

    def elements(self) -> list[int]:
        return list(range(1, self.order))

    def format(self, p: Payload) -> str:
        return str(p)


class FreeFactor(BaseModel):
    """Free group; elements are freely reduced words of signed 1-based indices."""

    kind: Literal["free"] = "free"
    generators: list[str]

    def identity(self) -> tuple[int, ...]:
        return ()

    def is_identity(self, p: Payload) -> bool:
        return p == ()

    def multiply(self, p: Payload, q: Payload) -> tuple[int, ...]:
        out = list(p)  # type: ignore[arg-type]
        for x in q:  # type: ignore[union-attr]
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def inverse(self, p: Payload) -> tuple[int, ...]:
        return tuple(-x for x in reversed(p))  # type: ignore[arg-type]

    def x_length(self, p: Payload) -> int:
        return len(p)  # type: ignore[arg-type]

    def expand(self, p: Payload) -> list[tuple[int, int]]:
        return [(abs(x) - 1, 1 if x > 0 else -1) for x in p]  # type: ignore[union-attr]

    def format(self, p: Payload) -> str:
        parts = []
        for x in p:  # type: ignore[union-attr]
            name = self.generators[abs(x) - 1]
            parts.append(name if x > 0 else f"{name}^-1")
        return "[" + " ".join(parts) + "]"


Factor = Annotated[FreeAbelianFactor | CyclicFactor | FreeFactor, Field(discriminator="kind")]


class Peripheral(BaseModel):
    """A peripheral subgroup H_λ: a whole factor, or coordinates of a Z^m factor."""

    factor: int
    coordinates: list[int] | None = None
    name: str | None = None


@dataclass(frozen=True, slots=True)
class GroupElement:
    """Canonical form of an element: free-product syllables (factor index, payload)."""

    syllables: tuple[Syllable, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.syllables)


@dataclass(frozen=True, slots=True)
class CosetId:
    peripheral: int
    representative: GroupElement


IDENTITY = GroupElement()


class GroupSpec(BaseModel):
    """A concrete group with a finite symmetric X and peripheral family {H_λ}."""

    family: Literal["free", "free_abelian", "free_product", "one_relator"]
    factors: list[Factor]
    generators: list[str] | None = None
    peripherals: list[Peripheral] = Field(default_factory=list)
    relator: str | None = None
    name: str | None = None

    _gen_index: dict[str, tuple[int, int]] = PrivateAttr(default_factory=dict)
    _x_letters: list[XGen] = PrivateAttr(default_factory=list)
    _x_rank: dict[tuple[str, int], int] = PrivateAttr(default_factory=dict)
    _relator_syllables: tuple[Syllable, ...] = PrivateAttr(default=())
    _symmetrized: list[tuple[Syllable, ...]] = PrivateAttr(default_factory=list)
    _canonical_cache: dict[tuple[Syllable, ...], GroupElement] = PrivateAttr(default_factory=dict)
    _finite_peripherals: dict[int, frozenset[GroupElement]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_family(self) -> GroupSpec:
        if not self.factors:
            raise ValueError("at least one factor is required")
        kinds = [f.kind for f in self.factors]
        if self.family == "free" and (kinds != ["free"] or self.peripherals):
            raise ValueError("family 'free' takes exactly one free factor and no peripherals")
        if self.family == "free_abelian" and kinds != ["free_abelian"]:
            raise ValueError("family 'free_abelian' takes exactly one free_abelian factor")
        if (self.family == "one_relator") != (self.relator is not None):
            raise ValueError("a relator is required for, and only for, family 'one_relator'")
        names = [g for f in self.factors for g in f.generators]
        if len(set(names)) != len(names):
            raise ValueError(f"generator names must be unique: {names}")
        if self.generators is not None and sorted(self.generators) != sorted(names):
            raise ValueError(f"generators {self.generators} must list exactly the factor generators {names}")
        for lam, p in enumerate(self.peripherals):
            if not 0 <= p.factor < len(self.factors):
                raise ValueError(f"peripheral {lam} references missing factor {p.factor}")
            factor = self.factors[p.factor]
            if p.coordinates is not None:
                if not isinstance(factor, FreeAbelianFactor):
                    raise ValueError(f"peripheral {lam}: coordinates only apply to free_abelian factors")
                if not p.coordinates or any(not 0 <= c < factor.rank for c in p.coordinates):
                    raise ValueError(f"peripheral {lam}: bad coordinates {p.coordinates}")
        return self

    def model_post_init(self, __context) -> None:
        for fi, factor in enumerate(self.factors):
            for gi, g in enumerate(factor.generators):
                self._gen_index[g] = (fi, gi)
        order = self.generators or [g for f in self.factors for g in f.generators]
        for g in order:
            for power in (1, -1):
                self._x_rank[(g, power)] = len(self._x_letters)
                self._x_letters.append(XGen(g, power))
        if self.relator is not None:
            self._init_relator()
        for lam, p in enumerate(self.peripherals):
            if not 0 <= p.factor < len(self.factors):
                continue
            factor = self.factors[p.factor]
            if isinstance(factor, CyclicFactor):
                self._finite_peripherals[lam] = frozenset(
                    self.normalize_syllables(((p.factor, e),)) for e in factor.elements()
                )

    # ------------------------------------------------------------------ constructors

    @classmethod
    def free(cls, generators: Iterable[str] = ("a", "b")) -> GroupSpec:
        return cls(family="free", factors=[FreeFactor(generators=list(generators))])

    @classmethod
    def free_abelian(
        cls, generators: Iterable[str] = ("a", "b"), peripherals: Iterable[Iterable[int]] = ((0,), (1,))
    ) -> GroupSpec:
        return cls(
            family="free_abelian",
            factors=[FreeAbelianFactor(generators=list(generators))],
            peripherals=[Peripheral(factor=0, coordinates=list(c)) for c in peripherals],
        )

    @classmethod
    def free_product(cls, factors: list, peripheral_factors: Iterable[int] | None = None) -> GroupSpec:
        indices = range(len(factors)) if peripheral_factors is None else peripheral_factors
        return cls(family="free_product", factors=factors, peripherals=[Peripheral(factor=i) for i in indices])

    # ------------------------------------------------------------------ letters and words

    @property
    def x_letters(self) -> list[XGen]:
        return list(self._x_letters)

    def factor_of(self, lam: int) -> FreeAbelianFactor | CyclicFactor | FreeFactor:
        return self.factors[self.peripheral(lam).factor]

    def peripheral(self, lam: int) -> Peripheral:
        if not 0 <= lam < len(self.peripherals):
            raise UnknownPeripheral(f"no peripheral with index {lam} (have {len(self.peripherals)})")
        return self.peripherals[lam]

    def _x_syllable(self, letter: XGen) -> Syllable | None:
        if letter.symbol not in self._gen_index:
            raise UnknownGenerator(f"unknown generator {letter.symbol!r}")
        if letter.power not in (1, -1):
            raise InvalidLetter(f"X-letter power must be +1 or -1, got {letter.power}")
        fi, gi = self._gen_index[letter.symbol]
        factor = self.factors[fi]
        if isinstance(factor, FreeAbelianFactor):
            return (fi, factor.generator(gi, letter.power))
        if isinstance(factor, CyclicFactor):
            return (fi, factor.generator_element(letter.power))
        return (fi, ((gi + 1) * letter.power,))

    def _h_syllable(self, letter: HLetter) -> Syllable:
        p = self.peripheral(letter.peripheral)
        factor = self.factors[p.factor]
        element = letter.element
        if isinstance(factor, FreeAbelianFactor):
            if not isinstance(element, tuple) or len(element) != factor.rank:
                raise InvalidLetter(f"H-letter {letter} needs a length-{factor.rank} vector")
            if p.coordinates is not None and any(a for i, a in enumerate(element) if i not in p.coordinates):
                raise InvalidLetter(f"H-letter {letter} leaves the coordinates {p.coordinates}")
        elif isinstance(factor, CyclicFactor):
            if not isinstance(element, int) or not 0 <= element < factor.order:
                raise InvalidLetter(f"H-letter {letter} needs a residue mod {factor.order}")
        elif not isinstance(element, tuple) or factor.multiply((), element) != element:
            raise InvalidLetter(f"H-letter {letter} needs a freely reduced word")
        if factor.is_identity(element):
            raise InvalidLetter(f"H-letter {letter} carries the identity")
        return (p.factor, element)

    def letter_syllable(self, letter: Letter) -> Syllable | None:
        if isinstance(letter, XGen):
            syllable = self._x_syllable(letter)
        else:
            syllable = self._h_syllable(letter)
        if syllable is not None and self.factors[syllable[0]].is_identity(syllable[1]):
            return None
        return syllable

    def invert_letter(self, letter: Letter) -> Letter:
        if isinstance(letter, XGen):
            return letter.inverse()
        factor = self.factor_of(letter.peripheral)
        return HLetter(letter.peripheral, factor.inverse(letter.element))

    def invert_word(self, w: Word) -> Word:
        return Word(tuple(self.invert_letter(x) for x in reversed(w.letters)))

    def h_letter(self, lam: int, element: GroupElement) -> HLetter:
        """The H_λ-letter naming a (single-syllable) peripheral element."""
        if not element.syllables:
            raise InvalidLetter("the identity is not an H-letter")
        if len(element.syllables) != 1:
            element = GroupElement(self._peripheral_syllables(lam, element))
        return HLetter(lam, element.syllables[0][1])

    def _peripheral_syllables(self, lam: int, element: GroupElement) -> tuple[Syllable, ...]:
        # One-relator canonical forms may spell a peripheral element through other factors.
        factor_index = self.peripheral(lam).factor
        for e in self.factors[factor_index].elements():  # type: ignore[union-attr]
            if self.normalize_syllables(((factor_index, e),)) == element:
                return ((factor_index, e),)
        raise InvalidLetter(f"element is not in peripheral {lam}")

    def parse_word(self, text: str) -> Word:
        """Resolve the inline word syntax against this group."""
        letters: list[Letter] = []
        for token in tokenize(text):
            letters.extend(self._resolve(token))
        return Word(tuple(letters))

    def _resolve(self, token: RawToken) -> list[Letter]:
        if token.kind == "x":
            if token.name not in self._gen_index:
                raise UnknownGenerator(f"unknown generator {token.name!r}")
            sign = 1 if token.power > 0 else -1
            return [XGen(token.name, sign)] * abs(token.power)
        p = self.peripheral(token.peripheral)
        factor = self.factors[p.factor]
        raw = token.payload
        element: Payload
        if isinstance(factor, FreeAbelianFactor):
            element = factor.coerce(raw, p.coordinates)  # type: ignore[arg-type]
        elif isinstance(factor, CyclicFactor):
            if not isinstance(raw, int):
                raise InvalidLetter(f"peripheral {token.peripheral} expects an integer residue")
            element = raw % factor.order
        else:
            if not isinstance(raw, tuple) or any(not isinstance(x, tuple) for x in raw):
                raise InvalidLetter(f"peripheral {token.peripheral} expects a bracketed word")
            element = ()
            for name, power in raw:  # type: ignore[misc]
                if name not in factor.generators:
                    raise UnknownGenerator(f"{name!r} is not a generator of peripheral {token.peripheral}")
                index = factor.generators.index(name) + 1
                step = (index if power > 0 else -index,)
                for _ in range(abs(power)):
                    element = factor.multiply(element, step)
        if token.inverted:
            element = factor.inverse(element)
        return [HLetter(token.peripheral, element)]

    def format_letter(self, letter: Letter) -> str:
        if isinstance(letter, XGen):
            return str(letter)
        return f"{letter.peripheral}:{self.factor_of(letter.peripheral).format(letter.element)}"

    def format_word(self, w: Word) -> str:
        return " ".join(self.format_letter(x) for x in w.letters) or "1"

    # ------------------------------------------------------------------ free product arithmetic

    def _mul(self, a: tuple[Syllable, ...], b: Iterable[Syllable]) -> tuple[Syllable, ...]:
        out = list(a)
        for f, p in b:
            if out and out[-1][0] == f:
                factor = self.factors[f]
                q = factor.multiply(out[-1][1], p)
                if factor.is_identity(q):
                    out.pop()
                else:
                    out[-1] = (f, q)
            else:
                out.append((f, p))
        return tuple(out)

    def _inv(self, a: tuple[Syllable, ...]) -> tuple[Syllable, ...]:
        return tuple((f, self.factors[f].inverse(p)) for f, p in reversed(a))

    def normalize_syllables(self, syllables: Iterable[Syllable]) -> GroupElement:
        reduced = self._mul((), syllables)
        if self.family == "one_relator":
            return self._canonical_one_relator(reduced)
        return GroupElement(reduced)

    # ------------------------------------------------------------------ group_model operations

    def normal_form(self, w: Word | str) -> GroupElement:
        """Canonical element for a word; equal outputs iff equal elements."""
        if isinstance(w, str):
            w = self.parse_word(w)
        syllables = [s for s in (self.letter_syllable(x) for x in w.letters) if s is not None]
        return self.normalize_syllables(syllables)

    def is_identity(self, w: Word | str) -> bool:
        if isinstance(w, str):
            w = self.parse_word(w)
        if self.family == "one_relator":
            syllables = [s for s in (self.letter_syllable(x) for x in w.letters) if s is not None]
            return not self._dehn_reduce(self._mul((), syllables), cyclic=True)
        return not self.normal_form(w).syllables

    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        return self.normalize_syllables(self._mul(g.syllables, h.syllables))

    def inverse(self, g: GroupElement) -> GroupElement:
        return self.normalize_syllables(self._inv(g.syllables))

    def difference(self, g: GroupElement, h: GroupElement) -> GroupElement:
        """g⁻¹h, the label of a geodesic from g to h read as one element."""
        return self.normalize_syllables(self._mul(self._inv(g.syllables), h.syllables))

    def letter_element(self, letter: Letter) -> GroupElement:
        syllable = self.letter_syllable(letter)
        return self.normalize_syllables(() if syllable is None else (syllable,))

    def x_elements(self) -> list[GroupElement]:
        """Distinct non-identity elements named by X, in X order."""
        seen: dict[GroupElement, None] = {}
        for x in self._x_letters:
            g = self.letter_element(x)
            if g.syllables:
                seen.setdefault(g, None)
        return list(seen)

    def in_peripheral(self, g: GroupElement, lam: int) -> bool:
        if not g.syllables:
            return True
        p = self.peripheral(lam)
        if self.family == "one_relator":
            if lam not in self._finite_peripherals:
                raise UnsupportedFamily(f"membership in infinite peripheral {lam} is not decidable here")
            return g in self._finite_peripherals[lam]
        if len(g.syllables) != 1 or g.syllables[0][0] != p.factor:
            return False
        if p.coordinates is None:
            return True
        return not any(a for i, a in enumerate(g.syllables[0][1]) if i not in p.coordinates)  # type: ignore[arg-type]

    def peripheral_of(self, g: GroupElement) -> int | None:
        """Smallest λ with g ∈ H_λ \\ {1}, or None."""
        if not g.syllables:
            return None
        for lam in range(len(self.peripherals)):
            if self.in_peripheral(g, lam):
                return lam
        return None

    def coset_id(self, g: GroupElement, lam: int) -> CosetId:
        p = self.peripheral(lam)
        if self.family == "one_relator":
            if lam not in self._finite_peripherals:
                raise UnsupportedFamily(f"coset test for infinite peripheral {lam} is not decidable here")
            candidates = [g] + [self.multiply(g, h) for h in self._finite_peripherals[lam]]
            return CosetId(lam, min(candidates, key=self.shortlex_key))
        syllables = g.syllables
        if syllables and syllables[-1][0] == p.factor:
            factor = self.factors[p.factor]
            if p.coordinates is None:
                syllables = syllables[:-1]
            else:
                v = tuple(0 if i in p.coordinates else a for i, a in enumerate(syllables[-1][1]))  # type: ignore[arg-type]
                syllables = syllables[:-1] if factor.is_identity(v) else syllables[:-1] + ((p.factor, v),)
        return CosetId(lam, GroupElement(syllables))

    def expand(self, g: GroupElement) -> list[XGen]:
        """The canonical (ShortLex-least geodesic) X-word spelling g."""
        out: list[XGen] = []
        for f, p in g.syllables:
            factor = self.factors[f]
            for gi, sign in factor.expand(p):
                out.append(XGen(factor.generators[gi], sign))
        return out

    def word_of(self, g: GroupElement) -> Word:
        return Word(tuple(self.expand(g)))

    def shortlex_key(self, g: GroupElement) -> tuple[int, tuple[int, ...]]:
        letters = self.expand(g)
        return (len(letters), tuple(self._x_rank[(x.symbol, x.power)] for x in letters))

    def format_element(self, g: GroupElement) -> str:
        parts: list[str] = []
        for symbol, run in itertools.groupby(self.expand(g), key=lambda x: (x.symbol, x.power)):
            k = len(list(run)) * symbol[1]
            parts.append(symbol[0] if k == 1 else f"{symbol[0]}^{k}")
        return " ".join(parts) or "1"

    def length_x(self, g: GroupElement) -> int:
        return sum(self.factors[f].x_length(p) for f, p in g.syllables)

    def length_rel(self, g: GroupElement, bound: int | None = None) -> int:
        if self.family == "one_relator":
            return self._search_rel_length(g, self.length_x(g) if bound is None else bound)
        return sum(self._syllable_rel_length(f, p) for f, p in g.syllables)

    def has_exact_rel_length(self) -> bool:
        return self.family != "one_relator"

    def _syllable_rel_length(self, f: int, p: Payload) -> int:
        factor = self.factors[f]
        covering = [q for q in self.peripherals if q.factor == f]
        if not covering:
            return factor.x_length(p)
        if any(q.coordinates is None for q in covering):
            return 1
        # Z^m with coordinate peripherals: choose which peripherals absorb coordinates.
        best = factor.x_length(p)
        for size in range(1, len(covering) + 1):
            for chosen in itertools.combinations(covering, size):
                absorbed = {c for q in chosen for c in q.coordinates or ()}
                rest = sum(abs(a) for i, a in enumerate(p) if i not in absorbed)  # type: ignore[arg-type]
                best = min(best, size + rest)
        return best

    def _search_rel_length(self, g: GroupElement, bound: int) -> int:
        if not g.syllables:
            return 0
        steps = self.x_elements()
        for lam, elements in sorted(self._finite_peripherals.items()):
            steps.extend(e for e in elements if e not in steps)
        if len(self._finite_peripherals) != len(self.peripherals):
            raise UnsupportedFamily("relative length needs finite peripherals for this family")
        seen = {IDENTITY}
        frontier = [IDENTITY]
        for depth in range(1, bound + 1):
            nxt = []
            for u in frontier:
                for s in steps:
                    v = self.multiply(u, s)
                    if v == g:
                        return depth
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            frontier = nxt
        raise BoundExceeded(f"relative length of {self.format_element(g)} exceeds {bound}")

    def x_lengths(self, radius: int, limit: int | None = None) -> dict[GroupElement, int]:
        """|g|_X for every g in the X-ball of the given radius, by breadth-first search."""
        steps = self.x_elements()
        seen = {IDENTITY: 0}
        frontier = deque([IDENTITY])
        while frontier:
            u = frontier.popleft()
            if seen[u] == radius:
                continue
            for s in steps:
                v = self.multiply(u, s)
                if v not in seen:
                    seen[v] = seen[u] + 1
                    if limit is not None and len(seen) > limit:
                        raise WindowTooLarge(f"X-ball of radius {radius} exceeds {limit} elements")
                    frontier.append(v)
        return seen

    def x_ball(self, radius: int, limit: int | None = None) -> list[GroupElement]:
        """All elements with |g|_X ≤ radius, in ShortLex order."""
        return sorted(self.x_lengths(radius, limit), key=self.shortlex_key)

    def same_group(self, other: GroupSpec) -> bool:
        return self is other or self.model_dump() == other.model_dump()

    # ------------------------------------------------------------------ one-relator quotients

    def relator_syllables(self) -> tuple[Syllable, ...]:
        return self._relator_syllables

    def _init_relator(self) -> None:
        w = self.parse_word(self.relator or "")
        syllables = self._mul((), [s for s in (self.letter_syllable(x) for x in w.letters) if s is not None])
        syllables = self._cyclic_reduce(syllables)
        if not syllables:
            raise ValueError("the relator must be non-trivial in the free product")
        self._relator_syllables = syllables
        forms: dict[tuple[Syllable, ...], None] = {}
        for r in (syllables, self._inv(syllables)):
            for i in range(len(r)):
                forms.setdefault(r[i:] + r[:i], None)
        self._symmetrized = list(forms)
        from relhyp.domain.cancellation import max_piece_fraction_of

        fraction, _ = max_piece_fraction_of(self, [syllables])
        if fraction * 6 >= 1:
            logger.warning("relator %s is not C'(1/6) over the free product; Dehn reduction may be incomplete",
                           self.relator)

    def _cyclic_reduce(self, syllables: tuple[Syllable, ...]) -> tuple[Syllable, ...]:
        while len(syllables) > 1 and syllables[0][0] == syllables[-1][0]:
            syllables = self._mul(syllables[-1:], syllables[:-1])
        return syllables

    def _dehn_reduce(self, w: tuple[Syllable, ...], cyclic: bool) -> tuple[Syllable, ...]:
        changed = True
        while changed and w:
            changed = False
            if cyclic:
                w = self._cyclic_reduce(w)
            for r in self._symmetrized:
                n = len(r)
                for k in range(n, n // 2, -1):
                    spliced = self._splice(w, r, k, cyclic)
                    if spliced is not None:
                        w = spliced
                        changed = True
                        break
                if changed:
                    break
        return w

    def _splice(
        self, w: tuple[Syllable, ...], r: tuple[Syllable, ...], k: int, cyclic: bool
    ) -> tuple[Syllable, ...] | None:
        """Replace an occurrence of r[:k] (end syllables matched up to factor) by r[k:]⁻¹."""
        m = len(w)
        if k > m:
            return None
        starts = range(m) if cyclic else range(m - k + 1)
        u, v_inv = r[:k], self._inv(r[k:])
        for i in starts:
            rotated = w[i:] + w[:i] if cyclic else w
            j = 0 if cyclic else i
            window = rotated[j : j + k]
            if len(window) < k or window[0][0] != u[0][0] or window[-1][0] != u[-1][0]:
                continue
            if k > 2 and window[1:-1] != u[1:-1]:
                continue
            head = self._mul(rotated[:j], [window[0]])
            head = self._mul(head, self._inv(u[:1]))
            middle = self._mul(head, v_inv)
            if k > 1:
                tail_fix = self._mul(self._inv(u[-1:]), [window[-1]])
                middle = self._mul(middle, tail_fix)
            candidate = self._mul(middle, rotated[j + k :])
            if len(candidate) < m:
                return candidate
        return None

    def _canonical_one_relator(self, syllables: tuple[Syllable, ...]) -> GroupElement:
        cached = self._canonical_cache.get(syllables)
        if cached is not None:
            return cached
        reduced = self._dehn_reduce(syllables, cyclic=False)
        bound = sum(self.factors[f].x_length(p) for f, p in reduced)
        target_inv = self._inv(reduced)
        result = GroupElement(reduced)
        for u in self._geodesic_x_words(bound):
            if not self._dehn_reduce(self._mul(u, target_inv), cyclic=True):
                result = GroupElement(u)
                break
        self._canonical_cache[syllables] = result
        return result

    def _geodesic_x_words(self, bound: int) -> Iterator[tuple[Syllable, ...]]:
        """Free-product geodesic X-words in ShortLex order, as syllable tuples."""
        letters = [self._x_syllable(x) for x in self._x_letters]

        def extend(prefix: tuple[Syllable, ...], length: int, remaining: int) -> Iterator[tuple[Syllable, ...]]:
            if remaining == 0:
                yield prefix
                return
            for s in letters:
                if s is None or self.factors[s[0]].is_identity(s[1]):
                    continue
                nxt = self._mul(prefix, [s])
                if sum(self.factors[f].x_length(p) for f, p in nxt) == length + 1:
                    yield from extend(nxt, length + 1, remaining - 1)

        for total in range(bound + 1):
            yield from extend((), 0, total)
