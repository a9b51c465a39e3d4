import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussprice.covparam import (
    CovCoords,
    CovMultiindex,
    SymMatrix,
    flatten,
    index_pairs,
    omega_pack,
    omega_unpack,
    pair_index,
    parallel_weight,
    sigma_alpha,
    validate_pd,
)
from gaussprice.errors import DimensionMismatch, InvalidParameter, NotPositiveDefinite, NotSymmetric


def test_index_pairs_row_major():
    assert index_pairs(3) == ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
    assert pair_index(3, 1, 2) == 4
    assert pair_index(3, 2, 1) == 4
    with pytest.raises(InvalidParameter):
        pair_index(3, 0, 3)


def test_omega_pack_examples():
    A = CovCoords.from_mapping(2, {(0, 0): 1.0, (0, 1): 0.5, (1, 1): 1.0})
    np.testing.assert_array_equal(omega_pack(A).data, [[1.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(omega_pack(CovCoords(1, (3.5,))).data, [[3.5]])
    np.testing.assert_array_equal(omega_pack(CovCoords(3, np.zeros(6))).data, np.zeros((3, 3)))


def test_omega_unpack_examples():
    assert omega_unpack(SymMatrix(np.eye(2))).values.tolist() == [1.0, 0.0, 1.0]
    A = omega_unpack(SymMatrix.from_rows([[2, 3], [3, 5]]))
    assert (A[(0, 0)], A[(0, 1)], A[(1, 1)]) == (2.0, 3.0, 5.0)


def test_round_trip_random_4x4(rng):
    B = rng.standard_normal((4, 4))
    S = SymMatrix(B + B.T)
    assert omega_pack(omega_unpack(S)) == S


@given(st.lists(st.floats(-1e6, 1e6), min_size=6, max_size=6))
def test_unpack_pack_identity(values):
    A = CovCoords(3, values)
    assert omega_unpack(omega_pack(A)) == A


def test_flatten_examples():
    assert flatten(CovMultiindex.unit(2, 0, 1, 4)) == (4, 4)
    assert flatten(CovMultiindex.unit(2, 0, 0)) == (2, 0)
    beta = CovMultiindex.unit(3, 0, 1) + CovMultiindex.unit(3, 1, 2)
    assert flatten(beta) == (1, 2, 1)


def test_parallel_weight_examples():
    assert parallel_weight(CovMultiindex.unit(2, 0, 1)) == 0
    assert parallel_weight(CovMultiindex.unit(2, 0, 0, 3) + CovMultiindex.unit(2, 0, 1)) == 3
    beta = CovMultiindex.from_mapping(2, {(0, 0): 1, (1, 1): 1, (0, 1): 1})
    assert parallel_weight(beta) == 2


multiindex3 = st.lists(st.integers(0, 5), min_size=6, max_size=6).map(lambda c: CovMultiindex(3, tuple(c)))


@given(multiindex3, multiindex3)
def test_flatten_total_order_and_additivity(b1, b2):
    assert sum(flatten(b1)) == 2 * b1.order
    assert flatten(b1 + b2) == tuple(x + y for x, y in zip(flatten(b1), flatten(b2)))


def test_validate_pd_examples():
    assert validate_pd(SymMatrix(np.eye(3))).sigma_min == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(NotPositiveDefinite):
        validate_pd(SymMatrix.from_rows([[1, 1], [1, 1]]))
    assert validate_pd(sigma_alpha(0.5)).sigma_min == pytest.approx(0.5, abs=1e-12)


def test_validate_pd_factor_reproduces_matrix(rng):
    B = rng.standard_normal((4, 4))
    S = SymMatrix(B @ B.T + 0.1 * np.eye(4))
    C = validate_pd(S)
    assert np.all(np.diag(C.chol) > 0)
    np.testing.assert_allclose(C.chol @ C.chol.T, S.data, rtol=1e-12, atol=1e-12 * np.abs(S.data).max())
    assert 0 < C.sigma_min <= np.linalg.eigvalsh(S.data)[0] * (1 + 1e-9)


@pytest.mark.parametrize("alpha", [-0.999, -0.5, 0.0, 0.9, 1 - 1e-6])
def test_sigma_alpha_inside(alpha):
    validate_pd(sigma_alpha(alpha))


@pytest.mark.parametrize("alpha", [-1.0, 1.0, 1 - 1e-12, 1.2])
def test_sigma_alpha_boundary_rejected(alpha):
    with pytest.raises(NotPositiveDefinite):
        validate_pd(sigma_alpha(alpha))


def test_validate_pd_rejects_bad_tol():
    with pytest.raises(InvalidParameter):
        validate_pd(SymMatrix(np.eye(2)), tol=0.0)


def test_symmetry_is_exact():
    with pytest.raises(NotSymmetric):
        SymMatrix.from_rows([[1.0, 0.5], [0.5 + 1e-16 * 4, 1.0]])
    with pytest.raises(DimensionMismatch):
        SymMatrix(np.ones((2, 3)))


def test_json_round_trips():
    S = SymMatrix.from_rows([[2.0, 0.1], [0.1, 3.0]])
    assert SymMatrix.from_json(S.to_json()) == S
    A = omega_unpack(S)
    obj = A.to_json()
    assert obj["entries"][1] == {"i": 1, "j": 2, "v": 0.1}
    assert CovCoords.from_json(obj) == A
    with pytest.raises(NotSymmetric):
        SymMatrix.from_json({"n": 2, "rows": [[1, 0.2], [0.3, 1]]})


def test_multiindex_contract():
    with pytest.raises(InvalidParameter):
        CovMultiindex.from_mapping(2, {(1, 0): 1})
    with pytest.raises(InvalidParameter):
        CovMultiindex(2, (0, -1, 0))
    with pytest.raises(DimensionMismatch):
        CovMultiindex(2, (0, 1))
    beta = CovMultiindex.unit(3, 0, 2, 2) + CovMultiindex.unit(3, 1, 1)
    assert beta.order == 3
    assert beta.directions() == [(0, 2), (0, 2), (1, 1)]
