"""Learning-oriented compression support over Lambda_J x Lambda_J.

A pair of indices (row at level j, column at level j') is kept when the
periodic gap between their supports is at most the block threshold
``tau(j, j')`` and two scale-slope inequalities hold.  Blocks are visited
level pair by level pair; blocks excluded by the slope inequalities are
skipped outright and the distance test only scans a window of candidate
locations around each column, so construction never touches all pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .wavelets import build_filter_bank, family_regularity, index_count, level_of, level_offset, level_size, support_arrays

REGIONS = ("D1", "D2", "D3", "D4", "D5", "D6")
SLACK = 1e-12


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class CompressionParams:
    J: int
    t: float = 0.0
    tp: float = 0.0
    r: float = -2.0
    sigma: float = 10.0
    dt: int = 4
    a: float = 2.0
    n: int = 1
    d: int = 2

    def with_level(self, J):
        return replace(self, J=int(J))

    @property
    def s_eff(self):
        """sigma - n/2, the effective scale-decay rate used by the slopes."""
        return self.sigma - self.n / 2.0


def _leq(lhs, rhs):
    return lhs <= rhs + SLACK * max(1.0, abs(rhs))


def _geq(lhs, rhs):
    return lhs >= rhs - SLACK * max(1.0, abs(rhs))


def _lt(lhs, rhs):
    return not _geq(lhs, rhs)


def tau_exponent(j, jp, p: CompressionParams, shift=0.0):
    denom = 2 * p.dt + p.r
    if denom <= 0:
        raise ParameterError("2*dt + r must be positive")
    num = p.J * (p.t + p.tp - p.r) - j * p.tp - jp * p.t - (j + jp) * p.dt
    return (num + shift) / denom


def tau(j, jp, p: CompressionParams, shift=0.0):
    """Block distance threshold; ``shift`` adds to the exponent numerator."""
    return p.a * max(2.0 ** -min(j, jp), 2.0 ** tau_exponent(j, jp, p, shift))


def slope_bounds(j, jp, p: CompressionParams, shift=0.0):
    """Right-hand sides of the two scale-slope inequalities (row j, column jp)."""
    c1 = p.s_eff + p.tp - p.r / 2
    c2 = p.s_eff + p.t - p.r / 2
    if c1 <= 0 or c2 <= 0:
        raise ParameterError("sigma - n/2 + t - r/2 must be positive")
    e = p.t + p.tp - p.r
    row_bound = (e * p.J + (p.s_eff - (p.t - p.r / 2)) * jp + shift) / c1
    col_bound = (e * p.J + (p.s_eff - (p.tp - p.r / 2)) * j + shift) / c2
    return row_bound, col_bound


def slopes_hold(j, jp, p, shift=0.0):
    row_bound, col_bound = slope_bounds(j, jp, p, shift)
    return _leq(j, row_bound) and _leq(jp, col_bound)


def region_predicates(j, jp, p: CompressionParams):
    """Raw membership of (j, jp) in each of D1..D6 (before tie-breaking).

    D1/D2 use strict inequalities so that they coincide with the blocks the
    slope conditions discard.
    """
    e = p.t + p.tp - p.r
    row_bound, col_bound = slope_bounds(j, jp, p)
    lower3 = (e * p.J + (p.dt + p.r - p.t) * jp) / (p.dt + p.tp)
    lower4 = (e * p.J + (p.dt + p.r - p.tp) * j) / (p.dt + p.t)
    E = p.J * e - j * p.tp - jp * p.t - (j + jp) * p.dt
    return {
        "D1": j > jp and _lt(row_bound, j),
        "D2": jp > j and _lt(col_bound, jp),
        "D3": j > jp and _leq(j, row_bound) and _geq(j, lower3),
        "D4": jp > j and _leq(jp, col_bound) and _geq(jp, lower4),
        "D5": E < 0 and _leq(j, lower3) and _leq(jp, lower4),
        "D6": E >= 0,
    }


def classify_region(j, jp, p: CompressionParams):
    """First region (in D1..D6 order) whose defining inequalities hold."""
    preds = region_predicates(j, jp, p)
    for name in REGIONS:
        if preds[name]:
            return name
    raise AssertionError(f"({j},{jp}) falls in no region")


def admissible_sigma_window(p: CompressionParams, r1=None):
    """Lower and upper limits for sigma from the wavelet family and orders."""
    gamma, gamma_dual = family_regularity(p.d, p.dt)
    n, t, tp, r = p.n, p.t, p.tp, p.r
    lower = {
        "n/2+max(t,t')-r/2": n / 2 + max(t, tp) - r / 2,
        "3n/2-t+r/2": 1.5 * n - t + r / 2,
    }
    if r1 is not None:
        lower["n(t'+max(t',r1)-r)/(min(t',r1)+t-r)"] = n * (tp + max(tp, r1) - r) / (min(tp, r1) + t - r)
    upper = {
        "gamma-r/2": gamma - r / 2,
        "gamma_dual+r/2": gamma_dual + r / 2,
        "dt+n/2+r/2": p.dt + n / 2 + r / 2,
    }
    return lower, upper


def check_sigma(p: CompressionParams, r1=None):
    """Warn (never raise) when sigma is outside the admissible window."""
    lower, upper = admissible_sigma_window(p, r1)
    problems = []
    name, value = max(lower.items(), key=lambda kv: kv[1])
    if not p.sigma > value:
        problems.append(f"sigma={p.sigma} <= {name}={value:.4g}")
    name, value = min(upper.items(), key=lambda kv: kv[1])
    if not p.sigma < value:
        problems.append(f"sigma={p.sigma} >= {name}={value:.4g}")
    for msg in problems:
        warnings.warn(msg, stacklevel=2)
    return problems


class SupportMask:
    """Column-wise sorted row-index lists over Lambda_J."""

    def __init__(self, J, indptr, indices, params=None, evaluations=0):
        self.J = int(J)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.params = params
        self.evaluations = int(evaluations)
        n = index_count(self.J)
        if self.indptr.shape != (n + 1,):
            raise ValueError("indptr length must be |Lambda_J| + 1")

    @property
    def size(self):
        return index_count(self.J)

    @property
    def nnz(self):
        return int(self.indices.size)

    def column(self, col):
        return self.indices[self.indptr[col] : self.indptr[col + 1]]

    def columns(self):
        for c in range(self.size):
            yield c, self.column(c)

    def to_sparse(self, values=None):
        vals = np.ones(self.nnz) if values is None else values
        n = self.size
        return sp.csc_matrix((vals, self.indices, self.indptr), shape=(n, n))

    def dense_indicator(self):
        return self.to_sparse().toarray().astype(bool)

    def pairs(self):
        cols = np.repeat(np.arange(self.size), np.diff(self.indptr))
        return self.indices.copy(), cols

    def contains(self, row, col):
        c = self.column(col)
        i = np.searchsorted(c, row)
        return bool(i < c.size and c[i] == row)

    def restrict(self, J):
        """Pairs whose row and column both lie in Lambda_J."""
        m = index_count(J)
        sub = self.to_sparse()[:m, :m]
        sub = sp.csc_matrix(sub)
        sub.sort_indices()
        return SupportMask(J, sub.indptr, sub.indices, self.params)

    def columns_of(self, J):
        """Same rows, but only the columns in Lambda_J (rows keep this mask's range)."""
        m = index_count(J)
        return self.indptr[: m + 1], self.indices[: self.indptr[m]]

    def __eq__(self, other):
        return (
            isinstance(other, SupportMask)
            and self.J == other.J
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    # -- persistence --------------------------------------------------
    def save(self, path):
        lines = [f"# J={self.J}", f"# nnz={self.nnz}"]
        if self.params is not None:
            for k, v in asdict(self.params).items():
                lines.append(f"# {k}={v}")
        for c, rows in self.columns():
            lines.append(f"{c}:" + ",".join(str(int(r)) for r in rows))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        header = {}
        cols = {}
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k.strip()] = v.strip()
                continue
            c, _, rest = line.partition(":")
            cols[int(c)] = [int(x) for x in rest.split(",")] if rest else []
        J = int(header["J"])
        n = index_count(J)
        indptr = [0]
        indices = []
        for c in range(n):
            rows = sorted(cols.get(c, []))
            if len(set(rows)) != len(rows):
                raise ValueError(f"duplicate rows in column {c}")
            indices.extend(rows)
            indptr.append(len(indices))
        params = None
        fields_ = CompressionParams.__dataclass_fields__
        if all(k in header for k in fields_):
            params = CompressionParams(
                **{k: (int(float(header[k])) if f.type in ("int", int) else float(header[k])) for k, f in fields_.items()}
            )
        return cls(J, indptr, indices, params)


def _block_pairs(j, jp, thr, centers, halves):
    """Rows at level j within distance thr of each column at level jp.

    Returns (rows, cols) flat index arrays and the number of candidates
    examined.  Candidates come from a contiguous periodic window of
    locations around each column center.
    """
    nj, njp = level_size(j), level_size(jp)
    oj, ojp = level_offset(j), level_offset(jp)
    rc, rh = centers[oj : oj + nj], halves[oj : oj + nj]
    cc, ch = centers[ojp : ojp + njp], halves[ojp : ojp + njp]
    reach = thr + rh.max() + ch.max()
    if reach >= 0.5:
        # window covers the circle: test the full block
        width = nj
    else:
        width = min(nj, 2 * int(math.ceil(reach * nj)) + 3)
    if width >= nj:
        cand = np.broadcast_to(np.arange(nj), (njp, nj))
    else:
        # row location whose center is nearest to each column center
        shift = rc[0] * nj
        base = np.rint(cc * nj - shift).astype(np.int64)
        offs = np.arange(width) - width // 2
        cand = (base[:, None] + offs[None, :]) % nj
    gap = np.abs(rc[cand] - cc[:, None]) % 1.0
    gap = np.minimum(gap, 1.0 - gap) - rh[cand] - ch[:, None]
    keep = gap <= thr + SLACK
    colloc, which = np.nonzero(keep)
    rows = oj + cand[colloc, which]
    cols = ojp + colloc
    return rows, cols, cand.size


def _build(p: CompressionParams, shift=0.0, tau_shift=0.0):
    J = p.J
    bank = build_filter_bank(p.d, p.dt)
    centers, halves = support_arrays(bank, J)
    all_rows, all_cols = [], []
    evaluations = 0
    for j in range(J + 1):
        for jp in range(J + 1):
            if not slopes_hold(j, jp, p, shift):
                continue
            thr = tau(j, jp, p, tau_shift)
            rows, cols, n_eval = _block_pairs(j, jp, thr, centers, halves)
            evaluations += n_eval
            all_rows.append(rows)
            all_cols.append(cols)
    n = index_count(J)
    rows = np.concatenate(all_rows) if all_rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(all_cols) if all_cols else np.zeros(0, dtype=np.int64)
    mat = sp.csc_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    mat.sort_indices()
    return SupportMask(J, mat.indptr, mat.indices, p, evaluations)


def build_mask(p: CompressionParams):
    return _build(p)


def log_shift(J, eps):
    if not 0 < eps:
        raise ParameterError("eps must be positive")
    return math.log2(J / eps) if J > 0 else 0.0


def build_mask_new(p: CompressionParams, eps=0.25):
    """Enlarged support: slope bounds and threshold exponent relaxed by log2(J/eps)."""
    if not 0 < eps <= 1 and not math.isclose(eps, p.J):
        raise ParameterError("eps must lie in (0, 1]")
    s = log_shift(p.J, eps)
    return _build(p, shift=s, tau_shift=s)


def full_mask(J):
    n = index_count(J)
    return SupportMask(J, np.arange(n + 1) * n, np.tile(np.arange(n), n))


def empty_mask(J):
    n = index_count(J)
    return SupportMask(J, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))


@dataclass
class SparsityStats:
    J: int
    globalNnz: int
    perBlockNnz: np.ndarray
    maxRowNnz: int
    maxColNnz: int
    perBlockMaxRow: np.ndarray
    perBlockMaxCol: np.ndarray


def sparsity_stats(mask: SupportMask):
    J = mask.J
    L = J + 1
    mat = mask.to_sparse()
    rows_nnz = np.diff(mat.tocsr().indptr)
    cols_nnz = np.diff(mat.indptr)
    per = np.zeros((L, L), dtype=np.int64)
    pmr = np.zeros((L, L), dtype=np.int64)
    pmc = np.zeros((L, L), dtype=np.int64)
    for j in range(L):
        for jp in range(L):
            blk = mat[level_offset(j) : level_offset(j) + level_size(j), level_offset(jp) : level_offset(jp) + level_size(jp)]
            per[j, jp] = blk.nnz
            if blk.nnz:
                pmr[j, jp] = np.diff(sp.csr_matrix(blk).indptr).max()
                pmc[j, jp] = np.diff(sp.csc_matrix(blk).indptr).max()
    return SparsityStats(
        J,
        mask.nnz,
        per,
        int(rows_nnz.max()) if rows_nnz.size else 0,
        int(cols_nnz.max()) if cols_nnz.size else 0,
        pmr,
        pmc,
    )


def region_nnz(mask: SupportMask, p: CompressionParams):
    stats = sparsity_stats(mask)
    out = dict.fromkeys(REGIONS, 0)
    for j in range(mask.J + 1):
        for jp in range(mask.J + 1):
            out[classify_region(j, jp, p)] += int(stats.perBlockNnz[j, jp])
    return out


def check_inclusion(small: SupportMask, big: SupportMask):
    """True iff every pair of ``small`` is a pair of ``big`` (canonical prefixes)."""
    if small.J > big.J:
        raise ValueError("small mask must not be finer than big mask")
    n = index_count(big.J)
    rows, cols = small.pairs()
    keys_small = cols * n + rows
    brow, bcol = big.pairs()
    keys_big = bcol * n + brow
    return bool(np.isin(keys_small, keys_big, assume_unique=True).all())


def region_table(mask: SupportMask, p: CompressionParams):
    """Per-region (nnz, max row count, max column count), plus an "all" row."""
    lev = level_of(mask.J)
    L = mask.J + 1
    tags = np.array([[REGIONS.index(classify_region(j, jp, p)) for jp in range(L)] for j in range(L)])
    rows, cols = mask.pairs()
    n = index_count(mask.J)
    which = tags[lev[rows], lev[cols]] if rows.size else np.zeros(0, dtype=int)
    out = []
    for i, name in enumerate(REGIONS):
        sel = which == i
        r_cnt = np.bincount(rows[sel], minlength=n)
        c_cnt = np.bincount(cols[sel], minlength=n)
        out.append((name, int(sel.sum()), int(r_cnt.max()), int(c_cnt.max())))
    r_all = np.bincount(rows, minlength=n)
    c_all = np.bincount(cols, minlength=n)
    out.append(("all", int(rows.size), int(r_all.max()), int(c_all.max())))
    return out
