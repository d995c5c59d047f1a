"""Nested-support regression estimator for the Galerkin matrix.

Pipeline: choose the levels (J, J_reg) from the sample size, build the
target support at J and the enlarged regression support at J_reg, fit
every column by least squares on its regression support, then keep only
the target entries, reading below-diagonal-in-scale entries from the
reflected column.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .compression import CompressionParams, SupportMask, build_mask, build_mask_new, check_inclusion, check_sigma
from .galerkin import BlockMatrix, assemble_matrix, read_triplets, weighted_opnorm
from .wavelets import index_count, level_of


class UnderdeterminedError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


class MaskInvariantError(RuntimeError):
    pass


AUTO_J = "auto-J"
FIXED_J = "fixed-J"
STANDARD = "standard"
SOLVER_GRADE = "solver-grade"


@dataclass(frozen=True)
class EstimatorConfig:
    t: float = 1.0
    tp: float = 1.0
    r: float = -2.0
    r1: float = 1.5
    r2: float = 1.5
    sigma: float = 2.25
    dt: int = 4
    a: float = 2.0
    d: int = 2
    n: int = 1
    jitter: float = 1e-10
    mode: str = AUTO_J
    J: int | None = None
    support: str = STANDARD
    eps: float = 0.25

    def __post_init__(self):
        if self.mode not in (AUTO_J, FIXED_J):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.support not in (STANDARD, SOLVER_GRADE):
            raise ValueError(f"unknown support {self.support!r}")
        if self.mode == FIXED_J and (self.J is None or self.J < 0):
            raise ValueError("fixed-J mode needs a level J >= 0")
        if not 0 <= self.jitter < 1e-6:
            raise ValueError("jitter must lie in [0, 1e-6)")
        if not min(self.t, self.tp) > self.r / 2:
            raise ValueError("t and t' must exceed r/2")

    def swapped(self):
        return replace(self, t=self.tp, tp=self.t)

    def compression(self, J, t=None, tp=None):
        return CompressionParams(
            J=int(J),
            t=self.t if t is None else t,
            tp=self.tp if tp is None else tp,
            r=self.r,
            sigma=self.sigma,
            dt=self.dt,
            a=self.a,
            n=self.n,
            d=self.d,
        )


def rho(cfg: EstimatorConfig, n=None):
    """Rate exponent: the learning error scales like N^(-1/(2+rho))."""
    n = cfg.n if n is None else n
    t, tp, r, r1, r2, s, dt = cfg.t, cfg.tp, cfg.r, cfg.r1, cfg.r2, cfg.sigma, cfg.dt
    terms = (
        (-t - r2 + n / 2) / (s - n / 2 + t - r / 2),
        (-tp - r2 + n / 2) / (s - n / 2 + tp - r / 2),
        (-t - tp + r1 - r2 + n) / (t + tp + 2 * dt),
        (-t - tp + r1 - r2) / (t + tp - r),
        0.0,
    )
    return 2.0 * max(terms)


@dataclass(frozen=True)
class LevelChoice:
    J: int
    J_reg: int
    t_reg: float
    tp_reg: float
    rho: float
    eps1: float


def _ceil(x):
    # guard against 2.0000000000000004-style round-up
    return int(math.ceil(x - 1e-12))


def select_parameters(N, cfg: EstimatorConfig, n=None, Jmax=None):
    n = cfg.n if n is None else n
    if N < 2:
        raise ValueError("need N >= 2")
    e = cfg.t + cfg.tp - cfg.r
    p = rho(cfg, n)
    if cfg.mode == AUTO_J:
        J = max(1, _ceil(math.log2(N) / ((2 + p) * e)))
    else:
        J = int(cfg.J)
    eps1 = n * e / (cfg.sigma - n / 2 + cfg.t - cfg.r / 2)
    ratio = (e + eps1) / (min(cfg.tp, cfg.r1) + cfg.t - cfg.r)
    J_reg = max(_ceil(ratio * J), J)
    if Jmax is not None and J_reg > Jmax - 3:
        raise ResolutionError(
            f"regression level {J_reg} exceeds Jmax - 3 = {Jmax - 3}; enlarge the grid or reduce N"
        )
    return LevelChoice(J, J_reg, cfg.tp, max(cfg.tp, cfg.r1), p, eps1)


@dataclass
class RegressionResult:
    """Raw columnwise fit: sparse matrix over Lambda_Jreg x Lambda_J."""

    coef: sp.csc_matrix
    jittered: np.ndarray
    condition: np.ndarray
    cache_hits: int


def _support_key(rows):
    return hashlib.sha1(np.ascontiguousarray(rows, dtype=np.int64).tobytes()).hexdigest()


def columnwise_regression(U, F, regression_mask: SupportMask, J, jitter=1e-10):
    """Least squares of each column F[:, col] on U[:, Omega_col] for col in Lambda_J."""
    U = np.asarray(U, dtype=float)
    F = np.asarray(F, dtype=float)
    if not (np.isfinite(U).all() and np.isfinite(F).all()):
        raise ValueError("data contain non-finite values")
    m = index_count(J)
    n_reg = index_count(regression_mask.J)
    if U.shape[1] < n_reg or F.shape[1] < m:
        raise ValueError("data do not cover the regression levels")
    N = U.shape[0]
    sizes = np.diff(regression_mask.indptr[: m + 1])
    if sizes.size and N < sizes.max():
        worst = int(np.argmax(sizes))
        raise UnderdeterminedError(
            f"N={N} < |Omega| = {int(sizes.max())} at column {worst}; increase N"
        )
    Ureg = U[:, :n_reg]
    gram = Ureg.T @ Ureg
    cross = Ureg.T @ F[:, :m]
    cache = {}
    hits = 0
    indptr = regression_mask.indptr[: m + 1].copy()
    indices = regression_mask.indices[: indptr[-1]].copy()
    values = np.zeros(indices.size)
    jittered = np.zeros(m, dtype=bool)
    condition = np.zeros(m)
    for col in range(m):
        rows = indices[indptr[col] : indptr[col + 1]]
        if rows.size == 0:
            continue
        key = _support_key(rows)
        if key in cache:
            hits += 1
        else:
            cache[key] = _factor(gram[np.ix_(rows, rows)], jitter)
        factor, cond, flagged = cache[key]
        values[indptr[col] : indptr[col + 1]] = sla.cho_solve(factor, cross[rows, col])
        jittered[col] = flagged
        condition[col] = cond
    coef = sp.csc_matrix((values, indices, indptr), shape=(n_reg, m))
    return RegressionResult(coef, jittered, condition, hits)


def _factor(gram, jitter):
    eig = np.linalg.eigvalsh(gram)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    try:
        return sla.cho_factor(gram, lower=True), cond, False
    except np.linalg.LinAlgError:
        pass
    ridge = jitter * np.trace(gram) / gram.shape[0]
    if ridge <= 0:
        ridge = jitter if jitter > 0 else 1e-12
    bumped = gram + ridge * np.eye(gram.shape[0])
    try:
        return sla.cho_factor(bumped, lower=True), cond, True
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Gram matrix singular even after jitter") from exc


def restrict_symmetrize(raw, target: SupportMask):
    """Keep target entries: j <= j' from (row, col), j > j' from the reflected (col, row)."""
    coef = raw.coef if isinstance(raw, RegressionResult) else sp.csc_matrix(raw)
    J = target.J
    lev = level_of(J)
    rows, cols = target.pairs()
    upper = lev[rows] <= lev[cols]
    src_r = np.where(upper, rows, cols)
    src_c = np.where(upper, cols, rows)
    values = _lookup(coef, src_r, src_c)
    missing = np.isnan(values)
    if missing.any():
        i = int(np.argmax(missing))
        raise MaskInvariantError(
            f"reflected entry ({src_r[i]},{src_c[i]}) absent from the regression support"
        )
    n = index_count(J)
    return BlockMatrix(J, sp.csc_matrix((values, (rows, cols)), shape=(n, n)))


def _lookup(coef: sp.csc_matrix, rows, cols):
    out = np.full(rows.size, np.nan)
    for i, (r, c) in enumerate(zip(rows, cols)):
        if c >= coef.shape[1]:
            continue
        lo, hi = coef.indptr[c], coef.indptr[c + 1]
        seg = coef.indices[lo:hi]
        k = np.searchsorted(seg, r)
        if k < seg.size and seg[k] == r:
            out[i] = coef.data[lo + k]
    return out


@dataclass
class LearnedOperator:
    A: BlockMatrix
    target: SupportMask
    regression: SupportMask
    config: EstimatorConfig
    levels: LevelChoice
    diagnostics: dict = field(default_factory=dict)

    @property
    def J(self):
        return self.A.J

    def matvec(self, x):
        return self.A.matvec(x)

    def predict(self, U):
        """Noise-free responses U_J @ A for coefficient rows U."""
        U = np.asarray(U, dtype=float)
        m = index_count(self.J)
        return U[:, :m] @ self.A.data

    def save(self, path):
        header = {f"config.{k}": v for k, v in asdict(self.config).items()}
        header.update({f"levels.{k}": v for k, v in asdict(self.levels).items()})
        self.A.save_triplets(path, header)

    @classmethod
    def load(cls, path):
        header, rows, cols, vals = read_triplets(path)
        J = int(header["J"])
        n = index_count(J)
        cfg = _section(header, "config", EstimatorConfig)
        levels = _section(header, "levels", LevelChoice)
        A = BlockMatrix(J, sp.csc_matrix((vals, (rows, cols)), shape=(n, n)))
        masks = _masks_for(cfg, levels)
        return cls(A, masks[0], masks[1], cfg, levels)


def _section(header, prefix, cls):
    known = cls.__dataclass_fields__
    raw = {k.split(".", 1)[1]: v for k, v in header.items() if k.startswith(prefix + ".")}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ValueError(f"operator file has unknown {prefix} field(s): {', '.join(unknown)}")
    try:
        return cls(**{k: _parse_field(known[k].type, v) for k, v in raw.items()})
    except TypeError as exc:
        raise ValueError(f"operator file header is incomplete: {exc}") from None


def _parse_field(kind, text):
    if text == "None":
        return None
    kind = str(kind)
    if "int" in kind and "float" not in kind:
        return int(float(text))
    if "float" in kind:
        return float(text)
    return text


def _masks_for(cfg: EstimatorConfig, levels: LevelChoice):
    target_p = cfg.compression(levels.J)
    reg_p = cfg.compression(levels.J_reg, levels.t_reg, levels.tp_reg)
    if cfg.support == SOLVER_GRADE:
        return build_mask_new(target_p, cfg.eps), build_mask_new(reg_p, cfg.eps)
    return build_mask(target_p), build_mask(reg_p)


def estimate(data, cfg: EstimatorConfig, Jmax=None):
    """Learn the Galerkin matrix from a Dataset (or a (U, F) pair)."""
    U, F = (data.U, data.F) if hasattr(data, "U") else data
    if cfg.t > cfg.tp:
        learned = estimate((U, F), cfg.swapped(), Jmax)
        learned.A = learned.A.T
        learned.config = cfg
        learned.diagnostics["adjoint"] = True
        return learned
    N = U.shape[0]
    levels = select_parameters(N, cfg, Jmax=Jmax)
    available = int(np.log2(U.shape[1])) - 1
    if available < levels.J_reg:
        raise ResolutionError(f"data cover level {available}, regression needs {levels.J_reg}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        target, regression = _masks_for(cfg, levels)
    if not check_inclusion(target, regression):
        raise MaskInvariantError("target support is not contained in the regression support")
    raw = columnwise_regression(U, F, regression, levels.J, cfg.jitter)
    A = restrict_symmetrize(raw, target)
    diagnostics = {
        "jittered_columns": int(raw.jittered.sum()),
        "max_condition": float(raw.condition.max()) if raw.condition.size else 0.0,
        "cache_hits": raw.cache_hits,
        "adjoint": False,
    }
    return LearnedOperator(A, target, regression, cfg, levels, diagnostics)


@dataclass(frozen=True)
class ErrorReport:
    total: float
    truncation: float
    compression: float
    estimation: float

    def as_rows(self):
        return [(k, getattr(self, k)) for k in ("total", "truncation", "compression", "estimation")]


def error_report(learned: LearnedOperator, truth, Jref, basis=None, A_ref=None):
    """Split the weighted error of the learned matrix against A at level Jref.

    ``truth`` is an OperatorSpec (assembled at Jref with ``basis``) unless
    ``A_ref`` is given directly.
    """
    J = learned.J
    if Jref < J + 2:
        raise ValueError("Jref must be at least J + 2")
    if A_ref is None:
        A_ref = assemble_matrix(truth, Jref, basis)
    t, tp = learned.config.t, learned.config.tp
    ref = A_ref.toarray()
    m = index_count(J)
    A_J = ref[:m, :m]
    kept = np.where(learned.target.dense_indicator(), A_J, 0.0)
    if learned.diagnostics.get("adjoint"):
        kept = np.where(learned.target.dense_indicator().T, A_J, 0.0)
    Ahat = learned.A.toarray()
    padded = np.zeros_like(ref)
    padded[:m, :m] = Ahat
    trunc = ref.copy()
    trunc[:m, :m] = 0.0
    return ErrorReport(
        total=weighted_opnorm(padded - ref, tp, t),
        truncation=weighted_opnorm(trunc, tp, t),
        compression=weighted_opnorm(A_J - kept, tp, t),
        estimation=weighted_opnorm(Ahat - kept, tp, t),
    )


def check_config(cfg: EstimatorConfig, J=4):
    """Sigma-window warnings for the configuration (returns the messages)."""
    return check_sigma(cfg.compression(J), cfg.r1)
