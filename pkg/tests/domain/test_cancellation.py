from fractions import Fraction

import pytest

from relhyp.domain.cancellation import (
    RelatorFamily,
    check_Cprime,
    max_piece_fraction,
    max_piece_fraction_of,
    piece_length,
    relator,
    symmetrized,
)
from relhyp.domain.errors import OutOfRange
from relhyp.domain.word import XGen


class TestRelatorFamily:
    """Test the relator family w_i^-1 a_1^i ... a_n^i."""

    def test_base_words_shortlex(self):
        """Test the first reduced words over one letter."""
        family = RelatorFamily(n=2, i_max=5)

        words = [w for _, w in zip(range(5), family.base_words())]

        assert words == [(1,), (-1,), (1, 1), (-1, -1), (1, 1, 1)]

    def test_first_relator(self):
        """Test r_1 = x^-1 a1 a2 a3."""
        family = RelatorFamily(n=3, i_max=5)

        w = relator(family, 1)

        assert w.letters == (XGen("x", -1), XGen("a1"), XGen("a2"), XGen("a3"))

    def test_exponents_follow_index(self):
        """Test that r_i carries a_j^i in every slot."""
        family = RelatorFamily(n=4, i_max=6)

        syllables = family.relator_syllables(3)

        assert syllables[0] == (0, (-1, -1))
        assert all(payload == (3,) for _, payload in syllables[1:])
        assert len(syllables) == 5

    @pytest.mark.parametrize("i", [0, 13])
    def test_out_of_range(self, i):
        """Test that indices outside 1..i_max are rejected."""
        with pytest.raises(OutOfRange):
            RelatorFamily(n=2, i_max=12).relator_syllables(i)

    def test_larger_alphabet(self):
        """Test that base words range over every free generator."""
        family = RelatorFamily(n=2, i_max=4, alphabet_size=2)

        assert [w for _, w in zip(range(4), family.base_words())] == [(1,), (-1,), (2,), (-2,)]
        assert family.spec().factors[0].generators == ["x1", "x2"]


class TestPieces:
    """Test piece lengths over the free product."""

    def test_piece_length(self):
        """Test exact prefix plus a same-factor syllable."""
        r1 = ((0, (1,)), (1, (2,)), (2, (2,)))
        r2 = ((0, (1,)), (1, (3,)), (2, (2,)))

        assert piece_length(r1, r2) == 2
        assert piece_length(r1, r1[:1] + ((2, (1,)),)) == 1

    def test_symmetrized_closed_under_inverse(self, zz):
        """Test that the symmetrized set contains the inverse's rotations."""
        r = ((0, (1,)), (1, (1,)))

        forms = symmetrized(zz, [r])

        assert ((1, (-1,)), (0, (-1,))) in forms
        assert len(forms) == 4

    def test_triangle_relator(self, triangle):
        """Test that (ab)^7 has piece fraction 1/7."""
        fraction, _ = max_piece_fraction_of(triangle, [triangle.relator_syllables()])

        assert fraction == Fraction(1, 7)

    @pytest.mark.parametrize("n,i_max", [(2, 6), (3, 12), (1, 4)])
    def test_fraction_invariant_under_symmetrization(self, n, i_max):
        """Test that symmetrizing the relators first leaves the piece fraction unchanged."""
        family = RelatorFamily(n=n, i_max=i_max)
        spec, relators = family.spec(), family.relators()

        before, _ = max_piece_fraction_of(spec, relators)
        after, _ = max_piece_fraction_of(spec, symmetrized(spec, relators))

        assert after == before
        assert set(symmetrized(spec, symmetrized(spec, relators))) == set(symmetrized(spec, relators))




class TestSmallCancellation:
    """Test the C'(lambda) check on the family."""

    def test_large_family_satisfies(self):
        """Test n = 60: fraction 1/61 < 1/6."""
        family = RelatorFamily(n=60, i_max=12)

        assert max_piece_fraction(family) == Fraction(1, 61)
        assert check_Cprime(family, Fraction(1, 6)).satisfied

    def test_single_generator_fails(self):
        """Test n = 1: the shared base letter gives a whole-relator piece."""
        report = check_Cprime(RelatorFamily(n=1, i_max=5), Fraction(1, 6))

        assert not report.satisfied
        assert report.fraction == "1"
        assert report.piece is not None
        assert len(report.relators) == 2

    def test_lambda_one(self):
        """Test that lambda = 1 accepts proper pieces."""
        assert check_Cprime(RelatorFamily(n=3, i_max=5), Fraction(1)).satisfied

    def test_monotone_in_lambda(self):
        """Test that a larger lambda never turns a pass into a failure."""
        family = RelatorFamily(n=6, i_max=8)
        lams = [Fraction(1, 10), Fraction(1, 8), Fraction(1, 6), Fraction(1, 4), Fraction(1, 2)]

        results = [check_Cprime(family, lam).satisfied for lam in lams]

        assert results == sorted(results)
