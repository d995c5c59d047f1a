"""Reference Galerkin matrices over Lambda_J and weighted operator norms."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fields import OperatorSpec, apply_operator
from .wavelets import PRIMAL_TEST, CoefVector, DUAL_TEST, diag_weight, index_count, level_offset, level_size


class BlockMatrix:
    """Square matrix over Lambda_J, dense or column-compressed sparse."""

    def __init__(self, J, data):
        self.J = int(J)
        n = index_count(self.J)
        if sp.issparse(data):
            data = sp.csc_matrix(data)
            data.sum_duplicates()
            data.sort_indices()
        else:
            data = np.asarray(data, dtype=float)
        if data.shape != (n, n):
            raise ValueError(f"shape {data.shape} does not match |Lambda_{J}| = {n}")
        self.data = data

    @property
    def is_sparse(self):
        return sp.issparse(self.data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def nnz(self):
        return self.data.nnz if self.is_sparse else int(np.count_nonzero(self.data))

    def toarray(self):
        return self.data.toarray() if self.is_sparse else self.data.copy()

    def block(self, j, jp):
        rows = slice(level_offset(j), level_offset(j) + level_size(j))
        cols = slice(level_offset(jp), level_offset(jp) + level_size(jp))
        sub = self.data[rows, cols]
        return sub.toarray() if sp.issparse(sub) else sub

    @property
    def T(self):
        return BlockMatrix(self.J, self.data.T)

    def matvec(self, x):
        return self.data @ np.asarray(x, dtype=float)

    def __sub__(self, other):
        if other.J != self.J:
            raise ValueError("level mismatch")
        if self.is_sparse and other.is_sparse:
            return BlockMatrix(self.J, self.data - other.data)
        return BlockMatrix(self.J, self.toarray() - other.toarray())

    def padded(self, Jref):
        """Zero-pad into Lambda_Jref (coarse indices are a prefix)."""
        if Jref < self.J:
            raise ValueError("cannot pad to a coarser level")
        n = index_count(Jref)
        m = index_count(self.J)
        if self.is_sparse:
            coo = self.data.tocoo()
            return BlockMatrix(Jref, sp.csc_matrix((coo.data, (coo.row, coo.col)), shape=(n, n)))
        out = np.zeros((n, n))
        out[:m, :m] = self.data
        return BlockMatrix(Jref, out)

    def truncated(self, J):
        m = index_count(J)
        return BlockMatrix(J, self.data[:m, :m])

    # -- persistence --------------------------------------------------
    def save_triplets(self, path, header=None):
        coo = sp.coo_matrix(self.data)
        order = np.lexsort((coo.row, coo.col))
        lines = [f"# J={self.J}", f"# size={self.shape[0]}", f"# nnz={order.size}"]
        for k, v in sorted((header or {}).items()):
            lines.append(f"# {k}={v}")
        for i in order:
            lines.append(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load_triplets(cls, path):
        header, rows, cols, vals = read_triplets(path)
        J = int(header["J"])
        n = index_count(J)
        return cls(J, sp.csc_matrix((vals, (rows, cols)), shape=(n, n))), header

    def save_dense(self, path):
        self.toarray().astype("<f8").tofile(path)

    @classmethod
    def load_dense(cls, path, J):
        raw = np.fromfile(path, dtype="<f8")
        n = index_count(J)
        if raw.size != n * n:
            raise ValueError(f"dense dump holds {raw.size} values, expected {n * n}")
        return cls(J, raw.reshape(n, n))


def read_triplets(path):
    header, rows, cols, vals = {}, [], [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            header[k.strip()] = v.strip()
            continue
        a, b, c = line.split()
        rows.append(int(a))
        cols.append(int(b))
        vals.append(float(c))
    return header, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)


def assemble_matrix(op: OperatorSpec, J, basis, chunk=256):
    """Dense A with entries <A psi_col, psi_row>, row/col over Lambda_J."""
    if J > basis.Jmax - 3:
        raise ValueError(f"level {J} exceeds Jmax - 3 = {basis.Jmax - 3}")
    n = index_count(J)
    out = np.empty((n, n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        unit = np.zeros((stop - start, n))
        unit[np.arange(stop - start), np.arange(start, stop)] = 1.0
        psi = basis.synthesis(CoefVector(unit, DUAL_TEST))
        applied = apply_operator(op, psi)
        out[:, start:stop] = basis.analysis(applied, PRIMAL_TEST, J).data.T
    return BlockMatrix(J, out)


@dataclass(frozen=True)
class NormResult:
    value: float
    converged: bool
    iterations: int


def _as_operator(M):
    if isinstance(M, BlockMatrix):
        return M.data
    return M


def weighted_opnorm(M, t_left, t_right, *, rtol=1e-8, max_iter=10_000, seed=0, return_info=False):
    """Spectral norm of diag(2^{-j t_left}) M diag(2^{-j t_right}) by power iteration."""
    data = _as_operator(M)
    n = data.shape[0]
    J = int(np.log2(n)) - 1
    left = diag_weight(-t_left, J)
    right = diag_weight(-t_right, J)
    if sp.issparse(data):
        W = sp.diags(left) @ data @ sp.diags(right)
        W = sp.csr_matrix(W)
    else:
        W = left[:, None] * np.asarray(data) * right[None, :]
    x = np.random.default_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    prev = 0.0
    value = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        y = W @ x
        z = W.T @ y
        value_sq = float(np.linalg.norm(z))
        if value_sq == 0.0:
            value = float(np.linalg.norm(y))
            res = NormResult(value, True, it)
            return res if return_info else res.value
        x = z / value_sq
        value = np.sqrt(value_sq)
        if abs(value - prev) <= rtol * value:
            res = NormResult(float(value), True, it)
            return res if return_info else res.value
        prev = value
    res = NormResult(float(value), False, it)
    return res if return_info else res.value


def block_norm_compression(M):
    """Matrix of blockwise spectral norms ||M_{j,j'}|| over levels 0..J."""
    B = M if isinstance(M, BlockMatrix) else BlockMatrix(int(np.log2(np.shape(M)[0])) - 1, M)
    L = B.J + 1
    out = np.zeros((L, L))
    for j in range(L):
        for jp in range(L):
            blk = B.block(j, jp)
            out[j, jp] = np.linalg.norm(blk, 2) if blk.size else 0.0
    return out


def truncation_error(op, J, Jref, t, tp, basis, A_ref=None):
    """Weighted norm of A_Jref minus the zero-padded A_J (the discarded frame)."""
    if Jref < J:
        raise ValueError("Jref must be >= J")
    if Jref == J:
        return 0.0
    if A_ref is None:
        A_ref = assemble_matrix(op, Jref, basis)
    diff = A_ref.toarray()
    m = index_count(J)
    diff[:m, :m] = 0.0
    return weighted_opnorm(diff, tp, t)


def compression_error(A_J: BlockMatrix, mask, t, tp):
    """Weighted norm of the entries of A_J dropped by ``mask``."""
    if mask.J != A_J.J:
        raise ValueError("mask level does not match matrix level")
    dense = A_J.toarray()
    dense[mask.dense_indicator()] = 0.0
    return weighted_opnorm(dense, tp, t)


def scale_envelope(M, r, lo=1):
    """Largest normalized block entry max|M_jj'| 2^{-(j+j')r/2} for each scale gap |j-j'| >= 1."""
    B = M if isinstance(M, BlockMatrix) else BlockMatrix(int(np.log2(np.shape(M)[0])) - 1, M)
    L = B.J + 1
    env = np.zeros(L - lo - 1)
    for j in range(lo, L):
        for jp in range(lo, L):
            gap = abs(j - jp)
            if gap == 0:
                continue
            val = np.abs(B.block(j, jp)).max() * 2.0 ** (-(j + jp) * r / 2)
            env[gap - 1] = max(env[gap - 1], val)
    return env


def fit_decay_exponent(M, r, lo=1):
    """Scale-separation decay rate: minus the log2 slope of the envelope against the gap."""
    env = scale_envelope(M, r, lo)
    if env.size < 2 or (env <= 0).any():
        raise ValueError("need at least two nonzero scale gaps")
    gaps = np.arange(1, env.size + 1)
    return float(-np.polyfit(gaps, np.log2(env), 1)[0])
