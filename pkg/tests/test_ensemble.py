from fractions import Fraction

import numpy as np
import pytest

from expforge.ensemble import (
    Codebook,
    CodeEnsembleSpec,
    ConditionalLaw,
    codebook_arrays,
    codeword_arrays,
    conditional_law,
    digits,
    encode,
    enumerate_codebooks,
    message_vector,
    sample_codebook,
)
from expforge.fqlinalg import FqMatrix, FqVector
from expforge.oracle import empirical_conditional_law


def test_spec_validation():
    s = CodeEnsembleSpec(3, 2, 2)
    assert s.M == 4 and s.n_codebooks == 2**9
    with pytest.raises(ValueError):
        CodeEnsembleSpec(2, 3, 2)
    with pytest.raises(ValueError):
        CodeEnsembleSpec(2, 1, 6)


def test_message_digits_are_little_endian():
    assert digits(5, 2, 3) == (1, 0, 1)
    assert message_vector(7, CodeEnsembleSpec(3, 2, 3)) == FqVector(3, (1, 2))


def test_encode_is_affine():
    spec = CodeEnsembleSpec(3, 2, 3)
    book = Codebook(spec, FqMatrix(3, ((1, 0, 2), (0, 1, 1))), FqVector(3, (1, 1, 1)))
    assert encode(book, 0) == FqVector(3, (1, 1, 1))
    assert encode(book, 1) == FqVector(3, (2, 1, 0))
    assert np.array_equal(book.codewords()[1], [2, 1, 0])


def test_codebook_json_round_trip(rng):
    spec = CodeEnsembleSpec(4, 2, 5)
    book = sample_codebook(spec, rng)
    assert Codebook.from_json(book.to_json()) == book


def test_enumeration_covers_every_codebook_once():
    spec = CodeEnsembleSpec(2, 1, 3)
    books = list(enumerate_codebooks(spec))
    assert len(books) == spec.n_codebooks
    assert len({(b.G, b.v) for b in books}) == spec.n_codebooks


def test_vectorised_codewords_match_encode():
    spec = CodeEnsembleSpec(3, 2, 2)
    G, v = codebook_arrays(spec, 100, 110)
    words = codeword_arrays(spec, G, v)
    for i, book in enumerate(list(enumerate_codebooks(spec))[100:110]):
        assert np.array_equal(words[i], book.codewords())


def test_single_conditioning_is_uniform():
    spec = CodeEnsembleSpec(2, 1, 3)
    law = conditional_law(spec, 1, [(0, FqVector(3, (2, 1)))])
    assert law.kind == ConditionalLaw.UNIFORM
    assert law.probability(FqVector(3, (0, 0))) == Fraction(1, 9)


def test_affine_combination_pins_the_codeword():
    # u_2 = 2 u_1 - u_0 in F_3, coefficients summing to one
    spec = CodeEnsembleSpec(2, 1, 3)
    x0, x1 = FqVector(3, (0, 1)), FqVector(3, (1, 1))
    law = conditional_law(spec, 2, [(0, x0), (1, x1)])
    assert law.kind == ConditionalLaw.POINT_MASS
    assert law.mass_point == FqVector(3, (2, 1))
    assert law.probability(FqVector(3, (2, 1))) == 1
    assert empirical_conditional_law(spec, 2, [(0, x0), (1, x1)]) == {FqVector(3, (2, 1)): Fraction(1)}


def test_conditional_law_rejects_bad_input():
    spec = CodeEnsembleSpec(2, 1, 3)
    x = FqVector(3, (0, 0))
    with pytest.raises(ValueError):
        conditional_law(spec, 0, [(0, x)])
    with pytest.raises(IndexError):
        conditional_law(spec, 5, [(0, x)])
    with pytest.raises(ValueError):
        conditional_law(spec, 0, [])
    # with K=2, u_2 = 2 u_1 - u_0, so x_0 and x_1 force x_2
    spec = CodeEnsembleSpec(2, 2, 3)
    x1 = FqVector(3, (1, 1))
    law = conditional_law(spec, 2, [(0, x), (1, x1)])
    assert law.mass_point == FqVector(3, (2, 2))
    with pytest.raises(ValueError, match="realisable"):
        conditional_law(spec, 3, [(0, x), (1, x1), (2, FqVector(3, (1, 0)))])
