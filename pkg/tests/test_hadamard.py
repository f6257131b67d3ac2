import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from readi_lab import hadamard
from readi_lab.hadamard import GroupingScheme, InvalidRankError

powers = st.integers(min_value=0, max_value=7).map(lambda k: 2 ** k)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 64, 256])
def test_sylvester_matches_scipy(n):
    np.testing.assert_array_equal(hadamard.sylvester(n), scipy.linalg.hadamard(n))


@pytest.mark.parametrize("n", [0, 3, 6, 12, -4, 2.0, "8"])
def test_invalid_rank_rejected(n):
    with pytest.raises(InvalidRankError):
        hadamard.sylvester(n)


@given(powers)
def test_orthogonality(n):
    h = hadamard.sylvester(n)
    np.testing.assert_array_equal(h @ h.T, n * np.eye(n, dtype=h.dtype))
    assert set(np.unique(h)) <= {-1, 1}


@given(powers, st.integers(min_value=0, max_value=3).map(lambda k: 2 ** k))
def test_kronecker_structure(s, q):
    np.testing.assert_array_equal(
        hadamard.sylvester(s * q), np.kron(hadamard.sylvester(s), hadamard.sylvester(q)))


def test_inverse_is_exact():
    h = hadamard.sylvester(16)
    scale, m = hadamard.inverse_scale(h)
    assert scale.denominator == 16 and scale.numerator == 1
    np.testing.assert_array_equal(m, h.T)
    np.testing.assert_allclose(hadamard.inverse(h) @ h, np.eye(16), atol=0)


def test_check_hadamard_rejects_non_hadamard():
    h = hadamard.sylvester(4).copy()
    h[0, 0] = -h[0, 0]
    with pytest.raises(ValueError):
        hadamard.check_hadamard(h)


@given(powers, powers, st.data())
def test_index_split_join_roundtrip(s, q, data):
    i = data.draw(st.integers(1, s * q))
    l, v = hadamard.index_split(i, q)
    assert 1 <= l <= s and 1 <= v <= q
    assert i == v + q * (l - 1)
    assert hadamard.index_join(l, v, q) == i


def test_kron_entry_exhaustive_small():
    for s, q in [(2, 2), (2, 4), (4, 2), (4, 4), (8, 2)]:
        h = hadamard.sylvester(s * q)
        for i in range(1, s * q + 1):
            for e in range(1, s * q + 1):
                # rows of H index events, columns transmit elements
                assert hadamard.kron_entry(s, q, i, e) == h[e - 1, i - 1]


def test_kron_entry_range_checked():
    with pytest.raises(ValueError):
        hadamard.kron_entry(2, 4, 0, 1)
    with pytest.raises(ValueError):
        hadamard.kron_entry(2, 4, 1, 9)


def test_grouping_scheme():
    g = GroupingScheme(64, 8, 8)
    assert list(g.events(2)) == list(range(9, 17))
    assert GroupingScheme.from_groups(32, 4) == GroupingScheme(32, 4, 8)
    with pytest.raises(ValueError):
        GroupingScheme(64, 4, 8)
    with pytest.raises(InvalidRankError):
        GroupingScheme(48, 3, 16)
    with pytest.raises(ValueError):
        g.events(9)


@pytest.mark.parametrize("n, q", [(16, 4), (32, 8), (128, 16)])
def test_uforces_encoding_decodes_to_single_elements(n, q):
    w, elements = hadamard.uforces_encoding(n, q)
    assert w.shape == (q, n)
    assert len(elements) == q - 1 and len(set(elements)) == q - 1
    decoded = hadamard.inverse(hadamard.sylvester(q)) @ w
    # row 1 is the aggregate of the non-designated elements, rows 2..Q single elements
    others = np.setdiff1d(np.arange(n), elements)
    np.testing.assert_allclose(decoded[0, others], 1)
    np.testing.assert_allclose(decoded[0, elements], 0, atol=1e-12)
    for r, el in enumerate(elements, start=1):
        expect = np.zeros(n)
        expect[el] = 1
        np.testing.assert_allclose(decoded[r], expect, atol=1e-12)
