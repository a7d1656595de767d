from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction

from pydantic import BaseModel, Field

from relhyp.domain.errors import OutOfRange
from relhyp.domain.group import FreeAbelianFactor, FreeFactor, GroupElement, GroupSpec, Syllable
from relhyp.domain.word import Word

logger = logging.getLogger(__name__)

Relator = tuple[Syllable, ...]


@dataclass(frozen=True)
class Piece:
    length: int
    syllables: Relator
    first: Relator
    second: Relator


def symmetrized(spec: GroupSpec, relators: Sequence[Relator]) -> list[Relator]:
    """Syllable-boundary cyclic permutations of every relator and its inverse."""
    forms: dict[Relator, None] = {}
    for r in relators:
        inverse = tuple((f, spec.factors[f].inverse(p)) for f, p in reversed(r))
        for word in (r, inverse):
            for i in range(len(word)):
                forms.setdefault(word[i:] + word[:i], None)
    return list(forms)


def piece_length(r1: Relator, r2: Relator) -> int:
    """Common exact syllable prefix, plus one when the next syllables share a factor."""
    p = 0
    limit = min(len(r1), len(r2))
    while p < limit and r1[p] == r2[p]:
        p += 1
    if p < limit and r1[p][0] == r2[p][0]:
        p += 1
    return p


def max_piece_fraction_of(spec: GroupSpec, relators: Sequence[Relator]) -> tuple[Fraction, Piece | None]:
    forms = symmetrized(spec, relators)
    by_factor: dict[int, list[Relator]] = defaultdict(list)
    for r in forms:
        by_factor[r[0][0]].append(r)
    best, witness = Fraction(0), None
    for bucket in by_factor.values():
        for r1, r2 in itertools.combinations(bucket, 2):
            p = piece_length(r1, r2)
            fraction = Fraction(p, min(len(r1), len(r2)))
            if fraction > best:
                best, witness = fraction, Piece(p, r1[:p], r1, r2)
    return best, witness


class RelatorFamily(BaseModel):
    """Relators w_i⁻¹ a_1^i ⋯ a_n^i over F(X) ∗ ⟨a_1⟩ ∗ ⋯ ∗ ⟨a_n⟩."""

    n: int = Field(ge=1)
    i_max: int = Field(ge=1)
    alphabet_size: int = Field(default=1, ge=1)

    def spec(self) -> GroupSpec:
        base = ["x"] if self.alphabet_size == 1 else [f"x{k + 1}" for k in range(self.alphabet_size)]
        factors = [FreeFactor(generators=base)] + [FreeAbelianFactor(generators=[f"a{j + 1}"]) for j in range(self.n)]
        return GroupSpec(family="free_product", factors=factors, name=f"sc-family-n{self.n}")

    def base_words(self) -> Iterator[tuple[int, ...]]:
        """Non-empty reduced words over X in ShortLex order (x < x⁻¹ < y < ...)."""
        letters = [s * (k + 1) for k in range(self.alphabet_size) for s in (1, -1)]
        for length in itertools.count(1):
            for w in itertools.product(letters, repeat=length):
                if all(a != -b for a, b in zip(w, w[1:])):
                    yield w

    def relator_syllables(self, i: int) -> Relator:
        if not 1 <= i <= self.i_max:
            raise OutOfRange(f"relator index {i} outside 1..{self.i_max}")
        w = next(itertools.islice(self.base_words(), i - 1, None))
        inverse = tuple(-x for x in reversed(w))
        return ((0, inverse),) + tuple((j + 1, (i,)) for j in range(self.n))

    def relators(self) -> list[Relator]:
        return [self.relator_syllables(i) for i in range(1, self.i_max + 1)]


def relator(family: RelatorFamily, i: int, spec: GroupSpec | None = None) -> Word:
    spec = spec or family.spec()
    return spec.word_of(GroupElement(family.relator_syllables(i)))


def max_piece_fraction(family: RelatorFamily) -> Fraction:
    fraction, _ = max_piece_fraction_of(family.spec(), family.relators())
    return fraction


class PieceReport(BaseModel):
    n: int
    i_max: int
    alphabet_size: int
    lam: str
    fraction: str
    fraction_value: float
    satisfied: bool
    piece: str | None = None
    relators: list[str] = Field(default_factory=list)


def check_Cprime(family: RelatorFamily, lam: Fraction) -> PieceReport:  # noqa: N802
    """C′(λ): every piece is shorter than λ times its relators."""
    spec = family.spec()
    fraction, witness = max_piece_fraction_of(spec, family.relators())
    report = PieceReport(
        n=family.n,
        i_max=family.i_max,
        alphabet_size=family.alphabet_size,
        lam=str(lam),
        fraction=str(fraction),
        fraction_value=float(fraction),
        satisfied=fraction < lam,
    )
    if not report.satisfied and witness is not None:
        report.piece = spec.format_element(GroupElement(witness.syllables))
        report.relators = [spec.format_element(GroupElement(witness.first)),
                           spec.format_element(GroupElement(witness.second))]
    logger.info("C'(%s) n=%d i_max=%d: max piece fraction %s", lam, family.n, family.i_max, fraction)
    return report
