import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from pdolearn.compression import build_mask, full_mask, CompressionParams
from pdolearn.fields import FOURIER_MULTIPLIER, SCHRODINGER_POWER, OperatorSpec, apply_operator, basis_for
from pdolearn.galerkin import (
    BlockMatrix,
    assemble_matrix,
    block_norm_compression,
    compression_error,
    fit_decay_exponent,
    read_triplets,
    scale_envelope,
    truncation_error,
    weighted_opnorm,
)
from pdolearn.wavelets import PRIMAL_TEST, diag_weight, index_count, level_of

SCHRO = OperatorSpec(SCHRODINGER_POWER, order=-2.0)


def test_identity_operator_gives_primal_gram():
    # order 0 multiplier is the identity, so the matrix is the Gram matrix of the primal basis
    b = basis_for(4)
    A = assemble_matrix(OperatorSpec(FOURIER_MULTIPLIER, order=0.0), 4, b).data
    psi = b.basis_functions(4, PRIMAL_TEST)
    np.testing.assert_allclose(A, psi @ psi.T / b.G, atol=1e-10)
    assert np.linalg.eigvalsh(A).min() > 0


def test_entries_equal_sampled_inner_products():
    b = basis_for(4)
    A = assemble_matrix(SCHRO, 4, b)
    # independent route: sample the primal functions, apply the operator, integrate by grid mean
    psi = b.basis_functions(4, PRIMAL_TEST)
    applied = apply_operator(SCHRO, psi)
    oracle = psi @ applied.T / b.G
    np.testing.assert_allclose(A.data, oracle, atol=1e-10)


def test_self_adjoint_operator_gives_symmetric_matrix():
    b = basis_for(5)
    A = assemble_matrix(SCHRO, 5, b).data
    assert np.max(np.abs(A - A.T)) < 1e-12 * np.max(np.abs(A))


def test_coarse_matrix_is_a_leading_block():
    b = basis_for(5)
    big = assemble_matrix(SCHRO, 5, b)
    small = assemble_matrix(SCHRO, 3, b)
    np.testing.assert_allclose(big.truncated(3).data, small.data, atol=1e-13)


def test_assembly_resolution_guard():
    with pytest.raises(ValueError):
        assemble_matrix(SCHRO, 5, basis_for(4))


def test_block_matrix_accessors():
    M = BlockMatrix(2, np.arange(64.0).reshape(8, 8))
    assert M.block(2, 1).shape == (4, 2)
    np.testing.assert_array_equal(M.block(0, 0), [[0, 1], [8, 9]])
    np.testing.assert_array_equal(M.T.data, M.data.T)
    padded = M.padded(3)
    assert padded.shape == (16, 16) and padded.data[8:, :].sum() == 0
    sparse = BlockMatrix(2, sp.csc_matrix(M.data))
    assert sparse.is_sparse and sparse.nnz == 63
    np.testing.assert_array_equal(sparse.padded(3).toarray(), padded.data)
    with pytest.raises(ValueError):
        BlockMatrix(2, np.zeros((6, 6)))
    with pytest.raises(ValueError):
        M.padded(1)


def test_triplet_roundtrip_is_exact(tmp_path, rng):
    dense = rng.standard_normal((16, 16)) * (rng.random((16, 16)) < 0.3)
    M = BlockMatrix(3, sp.csc_matrix(dense))
    path = tmp_path / "m.txt"
    M.save_triplets(path, {"kind": "test"})
    back, header = BlockMatrix.load_triplets(path)
    assert np.array_equal(back.toarray(), dense)
    assert header["kind"] == "test" and int(header["nnz"]) == M.nnz
    _, rows, cols, _ = read_triplets(path)
    # column-major ordering
    assert np.all(np.diff(cols * 16 + rows) > 0)


def test_dense_dump_roundtrip(tmp_path, rng):
    M = BlockMatrix(2, rng.standard_normal((8, 8)))
    M.save_dense(tmp_path / "m.bin")
    assert np.array_equal(BlockMatrix.load_dense(tmp_path / "m.bin", 2).data, M.data)
    with pytest.raises(ValueError):
        BlockMatrix.load_dense(tmp_path / "m.bin", 3)


@given(seed=st.integers(0, 10_000), tl=st.floats(-1, 1), tr=st.floats(-1, 1))
def test_weighted_norm_matches_svd(seed, tl, tr):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((16, 16))
    W = diag_weight(-tl, 3)[:, None] * M * diag_weight(-tr, 3)[None, :]
    expected = np.linalg.norm(W, 2)
    res = weighted_opnorm(M, tl, tr, rtol=1e-12, return_info=True)
    assert res.converged
    assert res.value == pytest.approx(expected, rel=1e-5)
    assert weighted_opnorm(sp.csc_matrix(M), tl, tr, rtol=1e-12) == pytest.approx(expected, rel=1e-5)


def test_weighted_norm_of_zero():
    assert weighted_opnorm(np.zeros((8, 8)), 0, 0) == 0


def test_block_norm_matrix(rng):
    M = rng.standard_normal((16, 16))
    N = block_norm_compression(M)
    assert N.shape == (4, 4)
    assert N[3, 2] == pytest.approx(np.linalg.norm(M[8:16, 4:8], 2))
    assert N[0, 0] == pytest.approx(np.linalg.norm(M[:2, :2], 2))


def test_truncation_error_decreases_with_level():
    b = basis_for(7)
    A_ref = assemble_matrix(SCHRO, 7, b)
    errs = [truncation_error(SCHRO, J, 7, 0.0, 0.0, b, A_ref) for J in (3, 4, 5, 6)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    assert truncation_error(SCHRO, 7, 7, 0.0, 0.0, b, A_ref) == 0.0
    with pytest.raises(ValueError):
        truncation_error(SCHRO, 5, 4, 0, 0, b)


def test_compression_error_of_full_and_partial_masks():
    b = basis_for(5)
    A = assemble_matrix(SCHRO, 5, b)
    assert compression_error(A, full_mask(5), 0, 0) == 0.0
    mask = build_mask(CompressionParams(J=5))
    dropped = A.toarray()
    dropped[mask.dense_indicator()] = 0
    assert compression_error(A, mask, 0, 0) == pytest.approx(np.linalg.norm(dropped, 2), rel=1e-6)
    with pytest.raises(ValueError):
        compression_error(A, full_mask(4), 0, 0)


def test_decay_exponent_recovers_planted_rate():
    J, r, sigma = 6, -1.0, 2.5
    lev = level_of(J).astype(float)
    gap = np.abs(lev[:, None] - lev[None, :])
    M = 2.0 ** ((lev[:, None] + lev[None, :]) * r / 2 - sigma * gap)
    assert fit_decay_exponent(M, r) == pytest.approx(sigma, abs=1e-10)
    env = scale_envelope(M, r)
    assert env.size == J - 1
    np.testing.assert_allclose(env, 2.0 ** (-sigma * np.arange(1, J)))


def test_decay_exponent_needs_two_gaps():
    with pytest.raises(ValueError):
        fit_decay_exponent(np.eye(index_count(1)), 0.0)
