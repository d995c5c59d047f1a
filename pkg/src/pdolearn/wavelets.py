"""Periodized biorthogonal B-spline wavelets on the unit circle.

Coefficients live in a canonical flat layout over the index set
``Lambda_J``: level 0 holds the two scaling functions of resolution 1,
level ``j >= 1`` holds ``2**j`` wavelets, so level ``j`` starts at flat
offset ``2**j`` (offset 0 for level 0) and ``|Lambda_J| = 2**(J+1)``.

Grid functions are identified with their samples on ``gridSize``
equispaced points and paired by the discrete inner product
``<f, g> = mean(f * g)``.  The finest-level scaling coefficients of a
sample vector ``x`` are ``x / sqrt(gridSize)``, which makes every
transform below an exact linear map on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

PRIMAL_TEST = "primal-test"
DUAL_TEST = "dual-test"
FLAVORS = (PRIMAL_TEST, DUAL_TEST)

SUPPORTED_ORDERS = ((2, 2), (2, 4), (3, 5))


class UnsupportedOrderError(ValueError):
    pass


class FlavorError(ValueError):
    pass


def _poly_mul(a, b):
    return np.convolve(a, b)


def _laurent_power(base, power):
    out = np.array([1.0])
    for _ in range(power):
        out = _poly_mul(out, base)
    return out


@dataclass(frozen=True)
class FilterBank:
    """Four periodizable filters of a CDF(d, dt) pair.

    Each filter is stored as ``(taps, first_index)``; tap ``m`` sits at
    integer position ``first_index + m``.  ``h``/``g`` generate the primal
    scaling function and wavelet, ``h_dual``/``g_dual`` their duals.
    """

    d: int
    dt: int
    h: np.ndarray
    h_start: int
    h_dual: np.ndarray
    h_dual_start: int
    g: np.ndarray
    g_start: int
    g_dual: np.ndarray
    g_dual_start: int

    def taps(self, name):
        return getattr(self, name), getattr(self, name + "_start")

    @property
    def primal_support(self):
        """Support of the primal scaling function and wavelet (reference scale)."""
        phi = (self.h_start, self.h_start + len(self.h) - 1)
        lo = (phi[0] + self.g_start) / 2.0
        hi = (phi[1] + self.g_start + len(self.g) - 1) / 2.0
        return phi, (lo, hi)

    def to_text(self):
        lines = [f"d={self.d}", f"dt={self.dt}"]
        for name in ("h", "h_dual", "g", "g_dual"):
            taps, start = self.taps(name)
            lines.append(f"{name}.start={start}")
            lines.append(f"{name}.taps=" + ",".join(f"{v:.17g}" for v in taps))
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text):
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
        args = {"d": int(kv["d"]), "dt": int(kv["dt"])}
        for name in ("h", "h_dual", "g", "g_dual"):
            args[name] = np.array([float(v) for v in kv[f"{name}.taps"].split(",")])
            args[name + "_start"] = int(kv[f"{name}.start"])
        return cls(**args)

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def build_filter_bank(d, dt):
    """CDF biorthogonal B-spline filters with primal order d and dual order dt.

    The primal lowpass is the B-spline mask ``sqrt(2) ((1+z)/2)**d``.  The
    dual lowpass is ``sqrt(2) ((1+z)/2)**dt * P(sin^2)`` where ``P`` is the
    Daubechies polynomial of degree ``(d+dt)/2 - 1``, which solves the
    biorthogonality identity.  Highpass filters follow by alternating flip.
    """
    if (d, dt) not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(
            f"CDF({d},{dt}) not implemented; choose one of {SUPPORTED_ORDERS}"
        )
    ell = (d + dt) // 2
    half = np.array([0.5, 0.5])
    h = np.sqrt(2.0) * _laurent_power(half, d)
    h_start = -(d // 2)
    # sin^2(xi/2) as a Laurent polynomial in z: (-z^-1 + 2 - z) / 4, start -1
    sin2 = np.array([-0.25, 0.5, -0.25])
    poly = np.zeros(1)
    poly_start = 0
    for k in range(ell):
        term = comb(ell - 1 + k, k) * _laurent_power(sin2, k)
        poly, poly_start = _laurent_add(poly, poly_start, term, -k)
    h_dual = np.sqrt(2.0) * _poly_mul(_laurent_power(half, dt), poly)
    h_dual_start = -(dt // 2) + poly_start
    h_dual, h_dual_start = _trim(h_dual, h_dual_start)

    g, g_start = _alternating_flip(h_dual, h_dual_start)
    g_dual, g_dual_start = _alternating_flip(h, h_start)
    return FilterBank(d, dt, h, h_start, h_dual, h_dual_start, g, g_start, g_dual, g_dual_start)


def _laurent_add(a, a_start, b, b_start):
    start = min(a_start, b_start)
    stop = max(a_start + len(a), b_start + len(b))
    out = np.zeros(stop - start)
    out[a_start - start : a_start - start + len(a)] += a
    out[b_start - start : b_start - start + len(b)] += b
    return out, start


def _trim(taps, start, tol=1e-15):
    nz = np.nonzero(np.abs(taps) > tol)[0]
    return taps[nz[0] : nz[-1] + 1].copy(), start + int(nz[0])


def _alternating_flip(taps, start):
    # out[n] = (-1)^n taps[1 - n]
    idx = start + np.arange(len(taps))
    n = 1 - idx
    order = np.argsort(n)
    n = n[order]
    vals = taps[order] * np.where(n % 2 == 0, 1.0, -1.0)
    return vals, int(n[0])


def refinable_sobolev_exponent(taps, start, order):
    """Sobolev regularity of the refinable function with the given lowpass mask.

    Factor the mask as ``((1+z)/2)**order * q(z)``; the exponent is
    ``order - log4(rho(T))`` where ``T`` is the transition operator of
    ``|q|^2`` on trigonometric polynomials of matching degree.
    """
    m = np.asarray(taps, dtype=float) / np.sqrt(2.0)
    q = m.copy()
    for _ in range(order):
        q, rem = _deflate(q)
        if abs(rem) > 1e-10:
            raise ValueError("mask does not carry the requested zero order")
    auto = np.convolve(q, q[::-1])  # |q|^2 coefficients, centered
    deg = (len(auto) - 1) // 2
    size = 2 * deg + 1
    T = np.zeros((size, size))
    for a in range(-deg, deg + 1):
        for b in range(-deg, deg + 1):
            idx = 2 * a - b
            if -deg <= idx <= deg:
                T[a + deg, b + deg] = 2.0 * auto[idx + deg]
    rho = max(abs(np.linalg.eigvals(T)))
    return order - np.log(rho) / np.log(4.0)


def _deflate(coeffs):
    # divide by (1+z)/2; coefficients in ascending powers
    quot, rem = np.polydiv(np.asarray(coeffs, dtype=float)[::-1], [0.5, 0.5])
    return quot[::-1], float(np.max(np.abs(rem))) if rem.size else 0.0


# Regularity of each family's primal (gamma) and dual (gamma_dual) generators,
# evaluated once with refinable_sobolev_exponent and recorded as metadata.
FAMILY_REGULARITY = {}


def family_regularity(d, dt):
    key = (d, dt)
    if key not in FAMILY_REGULARITY:
        bank = build_filter_bank(d, dt)
        gamma = refinable_sobolev_exponent(bank.h, bank.h_start, d)
        gamma_dual = refinable_sobolev_exponent(bank.h_dual, bank.h_dual_start, dt)
        FAMILY_REGULARITY[key] = (float(gamma), float(gamma_dual))
    return FAMILY_REGULARITY[key]


@dataclass(frozen=True)
class WaveletParams:
    d: int = 2
    dt: int = 4
    Jmax: int = 9
    j0: int = 0
    gridSize: int = field(default=0)

    def __post_init__(self):
        if self.d < 1 or self.dt < self.d or (self.d + self.dt) % 2:
            raise UnsupportedOrderError(f"inadmissible CDF orders ({self.d},{self.dt})")
        if self.j0 != 0:
            raise ValueError("only j0 = 0 is implemented")
        if self.Jmax < 1:
            raise ValueError("Jmax must be >= 1")
        if self.gridSize == 0:
            object.__setattr__(self, "gridSize", 2 ** (self.Jmax + 1))
        if self.gridSize != 2 ** (self.Jmax + 1):
            raise ValueError("gridSize must equal 2**(Jmax+1)")


def level_size(j):
    return 2 if j == 0 else 2**j


def level_offset(j):
    return 0 if j == 0 else 2**j


def index_count(J):
    return 2 ** (J + 1)


def level_of(J):
    """Level label of every flat index in Lambda_J."""
    out = np.zeros(index_count(J), dtype=np.int64)
    for j in range(1, J + 1):
        out[2**j : 2 ** (j + 1)] = j
    return out


def location_of(J):
    out = np.arange(index_count(J), dtype=np.int64)
    out[2:] -= 2 ** level_of(J)[2:]
    return out


def flat_index(j, k):
    if j < 0 or not 0 <= k < level_size(j):
        raise IndexError(f"invalid wavelet index ({j},{k})")
    return level_offset(j) + k


def diag_weight(s, J):
    """Entries 2**(s*j) over Lambda_J in canonical order."""
    return np.exp2(s * level_of(J).astype(float))


@dataclass
class CoefVector:
    """Wavelet coefficients over Lambda_J in canonical order.

    ``data`` may be one vector or a 2-D batch with one row per function.
    """

    data: np.ndarray
    flavor: str

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise FlavorError(f"unknown flavor {self.flavor!r}")
        self.data = np.asarray(self.data, dtype=float)
        n = self.data.shape[-1]
        if n < 2 or n & (n - 1):
            raise ValueError("coefficient length must be 2**(J+1)")

    @property
    def J(self):
        return int(np.log2(self.data.shape[-1])) - 1

    @property
    def perLevel(self):
        return [self.level(j) for j in range(self.J + 1)]

    def level(self, j):
        o = level_offset(j)
        return self.data[..., o : o + level_size(j)]

    def truncate(self, J):
        return CoefVector(self.data[..., : index_count(J)].copy(), self.flavor)


class WaveletBasis:
    """Transforms and geometry for one (d, dt) family on a fixed grid."""

    def __init__(self, params: WaveletParams | None = None, **kwargs):
        self.params = params if params is not None else WaveletParams(**kwargs)
        self.bank = build_filter_bank(self.params.d, self.params.dt)
        self.G = self.params.gridSize
        self.L = self.params.Jmax + 1
        # Analysis with (h, g) yields <f, psi>; with (h_dual, g_dual) <u, psi_dual>.
        self._analysis_taps = {
            PRIMAL_TEST: (self.bank.taps("h"), self.bank.taps("g")),
            DUAL_TEST: (self.bank.taps("h_dual"), self.bank.taps("g_dual")),
        }
        # Synthesis from primal-test coefficients uses the dual generators.
        self._synthesis_taps = {
            PRIMAL_TEST: (self.bank.taps("h_dual"), self.bank.taps("g_dual")),
            DUAL_TEST: (self.bank.taps("h"), self.bank.taps("g")),
        }

    @property
    def Jmax(self):
        return self.params.Jmax

    # -- filter steps -------------------------------------------------
    @staticmethod
    def _down(c, taps, start):
        # out[k] = sum_n f[n] c[(n + 2k) mod M]
        M = c.shape[-1]
        acc = np.zeros(c.shape[:-1] + (M // 2,))
        for m, v in enumerate(taps):
            acc += v * np.roll(c, -(start + m), axis=-1)[..., ::2]
        return acc

    @staticmethod
    def _up(c, taps, start):
        # out[n] = sum_k f[n - 2k] c[k]
        M = 2 * c.shape[-1]
        up = np.zeros(c.shape[:-1] + (M,))
        up[..., ::2] = c
        acc = np.zeros_like(up)
        for m, v in enumerate(taps):
            acc += v * np.roll(up, start + m, axis=-1)
        return acc

    def _check_level(self, J):
        if not 0 <= J <= self.Jmax:
            raise ValueError(f"level {J} outside [0, {self.Jmax}]")

    def analysis(self, samples, flavor=DUAL_TEST, J=None):
        """Coefficients over Lambda_J of grid samples (last axis is the grid)."""
        if flavor not in FLAVORS:
            raise FlavorError(f"unknown flavor {flavor!r}")
        x = np.asarray(samples, dtype=float)
        if x.shape[-1] != self.G:
            raise ValueError(f"expected {self.G} samples, got {x.shape[-1]}")
        J = self.Jmax if J is None else J
        self._check_level(J)
        (lo, lo_s), (hi, hi_s) = self._analysis_taps[flavor]
        c = x / np.sqrt(self.G)
        details = []
        for _ in range(self.L - 1):
            details.append(self._down(c, hi, hi_s))
            c = self._down(c, lo, lo_s)
        parts = [c] + details[::-1]
        return CoefVector(np.concatenate(parts, axis=-1)[..., : index_count(J)], flavor)

    def synthesis(self, coefs: CoefVector, flavor=None):
        """Grid samples of the expansion matching the coefficient flavor."""
        if flavor is not None and flavor != coefs.flavor:
            raise FlavorError(f"coefficients are {coefs.flavor}, not {flavor}")
        if coefs.J > self.Jmax:
            raise ValueError("coefficients finer than the grid")
        (lo, lo_s), (hi, hi_s) = self._synthesis_taps[coefs.flavor]
        data = coefs.data
        c = data[..., :2]
        for j in range(1, self.L):
            if j <= coefs.J:
                d = data[..., 2**j : 2 ** (j + 1)]
                c = self._up(c, lo, lo_s) + self._up(d, hi, hi_s)
            else:
                c = self._up(c, lo, lo_s)
        return c * np.sqrt(self.G)

    def basis_functions(self, J, flavor=PRIMAL_TEST):
        """Grid samples of every primal (or dual) generator in Lambda_J, one per row.

        ``flavor=PRIMAL_TEST`` gives psi_lambda, ``DUAL_TEST`` gives the duals.
        """
        eye = np.eye(index_count(J))
        coef_flavor = DUAL_TEST if flavor == PRIMAL_TEST else PRIMAL_TEST
        return self.synthesis(CoefVector(eye, coef_flavor))

    # -- geometry -----------------------------------------------------
    def support_interval(self, j, k):
        return support_interval(self.bank, j, k)

    def support_arrays(self, J):
        return support_arrays(self.bank, J)

    # -- norms --------------------------------------------------------
    def regularity(self):
        return family_regularity(self.params.d, self.params.dt)


@dataclass(frozen=True)
class SupportInterval:
    center: float
    halfWidth: float

    def distance(self, other):
        return support_distance(self.center, self.halfWidth, other.center, other.halfWidth)


def _reference_supports(bank):
    (p0, p1), (w0, w1) = bank.primal_support
    return (p0, p1), (w0, w1)


def support_interval(bank, j, k):
    """Periodic arc covering the primal generator at index (j, k)."""
    (p0, p1), (w0, w1) = _reference_supports(bank)
    if j == 0:
        lo, hi, scale = p0 + k, p1 + k, 0.5
    else:
        lo, hi, scale = w0 + k, w1 + k, 2.0**-j
    center = (0.5 * (lo + hi) * scale) % 1.0
    return SupportInterval(center, 0.5 * (hi - lo) * scale)


def support_arrays(bank, J):
    """Centers and half-widths of all supports in Lambda_J (canonical order)."""
    (p0, p1), (w0, w1) = _reference_supports(bank)
    lev = level_of(J)
    loc = location_of(J).astype(float)
    scale = np.where(lev == 0, 0.5, np.exp2(-lev.astype(float)))
    lo = np.where(lev == 0, p0, w0) + loc
    hi = np.where(lev == 0, p1, w1) + loc
    return (0.5 * (lo + hi) * scale) % 1.0, 0.5 * (hi - lo) * scale


def support_distance(c1, h1, c2, h2):
    gap = np.abs(np.asarray(c1) - np.asarray(c2)) % 1.0
    gap = np.minimum(gap, 1.0 - gap)
    return np.maximum(0.0, gap - np.asarray(h1) - np.asarray(h2))


def sobolev_norm(coefs, s):
    """sqrt(sum 2**(2 j s) c**2); batched over leading axes."""
    data = coefs.data if isinstance(coefs, CoefVector) else np.asarray(coefs, dtype=float)
    J = int(np.log2(data.shape[-1])) - 1
    w = diag_weight(s, J)
    return np.sqrt(np.sum((w * data) ** 2, axis=-1))


def spectral_sobolev_norm(samples, s, kappa=1.0):
    """Fourier-side H^s norm of grid samples: sum (kappa + |2 pi xi|^2)^s |u_xi|^2."""
    x = np.asarray(samples, dtype=float)
    G = x.shape[-1]
    coeffs = np.fft.rfft(x, axis=-1) / G
    xi = np.arange(coeffs.shape[-1])
    weight = np.full(xi.shape, 2.0)
    weight[0] = 1.0
    if G % 2 == 0:
        weight[-1] = 1.0
    sym = (kappa + (2 * np.pi * xi) ** 2) ** s
    return np.sqrt(np.sum(weight * sym * np.abs(coeffs) ** 2, axis=-1))
