"""Galerkin solves with a learned (or exact) wavelet matrix."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .galerkin import BlockMatrix
from .wavelets import DUAL_TEST, PRIMAL_TEST, CoefVector, diag_weight, index_count, sobolev_norm

ELLIPTIC_FLOOR = 1e-8
DENSE_BELOW = 512


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Ellipticity:
    lambdaMin: float
    lambdaMax: float
    elliptic: bool


def _matrix(M):
    if hasattr(M, "A") and isinstance(M.A, BlockMatrix):
        return M.A
    if isinstance(M, BlockMatrix):
        return M
    arr = np.asarray(M, dtype=float)
    return BlockMatrix(int(np.log2(arr.shape[0])) - 1, arr)


def ellipticity_check(M, r):
    """Extreme eigenvalues of D^{-r/2} sym(M) D^{-r/2}."""
    B = _matrix(M)
    dense = B.toarray()
    w = diag_weight(-r / 2.0, B.J)
    sym = 0.5 * (dense + dense.T)
    pre = w[:, None] * sym * w[None, :]
    try:
        eig = np.linalg.eigvalsh(pre)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("eigenvalue computation failed") from exc
    lo, hi = float(eig[0]), float(eig[-1])
    return Ellipticity(lo, hi, lo >= ELLIPTIC_FLOOR)


@dataclass
class Solution:
    coefs: CoefVector
    samples: np.ndarray
    ellipticity: Ellipticity


def galerkin_solve(M, f, J, basis, r=None, check=True):
    """Solve M u = <f, psi> on Lambda_J; u is returned as an expansion in psi.

    ``f`` holds grid samples (last axis), so a batch of right-hand sides can
    be solved at once.  ``r`` enables the ellipticity check.
    """
    B = _matrix(M)
    if J != B.J:
        B = B.truncated(J)
    rhs = basis.analysis(np.asarray(f, dtype=float), PRIMAL_TEST, J).data
    ell = None
    if check and r is not None:
        ell = ellipticity_check(B, r)
        if not ell.elliptic:
            warnings.warn(
                f"matrix is not elliptic on level {J} (lambdaMin={ell.lambdaMin:.3g}); solving anyway",
                stacklevel=2,
            )
    n = index_count(J)
    # rows of A index test functions; columns index the unknown coefficients
    system = B.data.T
    if B.is_sparse and n >= DENSE_BELOW:
        lu = _sparse_factor(sp.csc_matrix(system))
        sol = np.atleast_2d(rhs)
        sol = np.stack([lu.solve(row) for row in sol])
        sol = sol.reshape(rhs.shape)
    else:
        dense = system.toarray() if sp.issparse(system) else np.asarray(system)
        try:
            sol = np.linalg.solve(dense, rhs.T).T if rhs.ndim > 1 else np.linalg.solve(dense, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("Galerkin system is singular") from exc
    if not np.isfinite(sol).all():
        raise SingularSystemError("Galerkin solve produced non-finite values")
    coefs = CoefVector(sol, DUAL_TEST)
    return Solution(coefs, basis.synthesis(coefs), ell)


def _sparse_factor(mat):
    try:
        lu = spla.splu(mat)
    except RuntimeError as exc:
        raise SingularSystemError("sparse factorization failed") from exc
    return lu


def solve_error(u_hat: CoefVector, u_exact, s, basis, Jref=None):
    """H^s distance between the expansion u_hat and samples of the exact solution."""
    Jref = basis.Jmax if Jref is None else Jref
    if Jref < u_hat.J:
        raise ValueError("reference level below the solution level")
    exact = basis.analysis(np.asarray(u_exact, dtype=float), DUAL_TEST, Jref).data
    diff = exact.copy()
    diff[..., : u_hat.data.shape[-1]] -= u_hat.data
    return sobolev_norm(CoefVector(diff, DUAL_TEST), s)


@dataclass(frozen=True)
class LevelBalance:
    J: int
    bias: float
    variance: float


def select_solver_level(N, t, tp, r, rho_value, Jmax, eps=0.25, delta=0.1, kappa=1.0):
    """Integer scan for the level balancing compression bias against sampling variance.

    Bias ``eps 2^{-J e}`` falls with J and variance
    ``sqrt(log(1/delta)/N) (J/eps)^kappa 2^{rho J e / 2}`` grows; the level
    where the two are closest on a log scale wins (ties go to the coarser one).
    """
    e = t + tp - r
    hi = max(1, Jmax - 3)
    best = None
    for J in range(1, hi + 1):
        bias = eps * 2.0 ** (-J * e)
        var = math.sqrt(math.log(1.0 / delta) / N) * (J / eps) ** kappa * 2.0 ** (rho_value * J * e / 2.0)
        gap = abs(math.log(bias) - math.log(var))
        if best is None or gap < best[0]:
            best = (gap, LevelBalance(J, bias, var))
    return best[1]


PRESETS = ("manufactured", "smooth")


def manufactured_solution(G, t, delta=0.05, scale=0.02, seed=7):
    """Field with Fourier amplitudes |xi|^{-(2t+1+delta)/2}: just inside H^t, not smoother.

    Phases are drawn from a fixed generator so the preset is reproducible.
    """
    xi = np.arange(G // 2 + 1)
    amp = np.zeros(xi.size)
    amp[1:] = xi[1:] ** (-(2 * t + 1 + delta) / 2)
    phase = np.exp(2j * np.pi * np.random.default_rng(seed).random(xi.size))
    c = amp * phase
    if G % 2 == 0:
        c[-1] = c[-1].real
    return np.fft.irfft(c, n=G) * G * scale


def smooth_solution(G):
    x = np.arange(G) / G
    return np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x)


def preset_solution(name, G, t=1.0):
    if name == "manufactured":
        return manufactured_solution(G, t)
    if name == "smooth":
        return smooth_solution(G)
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
