"""Ground-truth operators, Matérn random fields and datasets ``F = U A + W``."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .wavelets import DUAL_TEST, PRIMAL_TEST, WaveletBasis, WaveletParams, index_count

FOURIER_MULTIPLIER = "FourierMultiplier"
SCHRODINGER_POWER = "SchrodingerPower"

INPUT_STREAM = 0
NOISE_STREAM = 1


class ResolutionError(ValueError):
    pass


def frequencies(G):
    return np.fft.fftfreq(G, d=1.0 / G)


@dataclass(frozen=True)
class OperatorSpec:
    kind: str = SCHRODINGER_POWER
    order: float = -2.0
    kappa: float = 1.0
    potential: str = "1+0.5*cos"

    def __post_init__(self):
        if self.kind not in (FOURIER_MULTIPLIER, SCHRODINGER_POWER):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == FOURIER_MULTIPLIER and not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def exponent(self):
        return self.order / 2.0

    def potential_samples(self, G):
        x = np.arange(G) / G
        return potential_from_name(self.potential, x)


def potential_from_name(name, x):
    """Named potentials: "c" for a constant, "c+b*cos" for c + b cos(2 pi x)."""
    name = name.replace(" ", "")
    if "+" in name and name.endswith("*cos"):
        base, amp = name[: -len("*cos")].split("+")
        return float(base) + float(amp) * np.cos(2 * np.pi * x)
    return np.full_like(x, float(name))


@lru_cache(maxsize=8)
def _schrodinger_factor(G, potential, exponent):
    x = np.arange(G) / G
    V = potential_from_name(potential, x)
    if V.min() <= 0:
        raise ValueError("potential must be positive")
    xi = frequencies(G)
    # spectral -Laplacian as a dense symmetric matrix
    lap = np.fft.ifft(((2 * np.pi * xi) ** 2)[:, None] * np.fft.fft(np.eye(G), axis=0), axis=0).real
    H = 0.5 * (lap + lap.T) + np.diag(V)
    try:
        vals, vecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("eigendecomposition of the grid operator failed") from exc
    if vals[0] <= 0:
        raise ValueError("grid Schrodinger operator is not positive definite")
    mat = (vecs * vals**exponent) @ vecs.T
    mat = 0.5 * (mat + mat.T)
    mat.setflags(write=False)
    return mat, float(vals[0])


def grid_operator(op: OperatorSpec, G):
    """Dense symmetric G x G matrix of the operator acting on grid samples."""
    if op.kind == SCHRODINGER_POWER:
        return _schrodinger_factor(G, op.potential, op.exponent)[0]
    return apply_operator(op, np.eye(G))


def apply_operator(op: OperatorSpec, samples):
    """Apply the operator along the last axis of ``samples``."""
    x = np.asarray(samples, dtype=float)
    G = x.shape[-1]
    if op.kind == FOURIER_MULTIPLIER:
        xi = np.arange(G // 2 + 1)
        symbol = (op.kappa + (2 * np.pi * xi) ** 2) ** (op.order / 2.0)
        return np.fft.irfft(symbol * np.fft.rfft(x, axis=-1), n=G, axis=-1)
    mat = _schrodinger_factor(G, op.potential, op.exponent)[0]
    return x @ mat


@dataclass(frozen=True)
class GRFSpec:
    order: float = 1.5
    shift: float = 1.0

    def __post_init__(self):
        if not self.shift > 0:
            raise ValueError("shift must be positive")

    def spectrum(self, G):
        xi = np.arange(G // 2 + 1)
        return (self.shift + (2 * np.pi * xi) ** 2) ** (-self.order)


def row_rng(seed, stream, i):
    """Generator for row ``i`` of a stream: SeedSequence entropy [seed, stream, i]."""
    return np.random.default_rng([int(seed), int(stream), int(i)])


def sample_grf(spec: GRFSpec, seed, G, count=None, stream=INPUT_STREAM, start=0):
    """Real Matérn draws on a G-point grid.

    Fourier coefficients are independent complex Gaussians with variance
    ``(shift + |2 pi xi|^2)^(-order)``; the real and imaginary parts share it
    equally, and the mean and Nyquist modes are real.  Returns one field when
    ``count`` is None, else ``count`` rows drawn from rows ``start..``.
    """
    var = spec.spectrum(G)
    nmodes = var.size
    rows = []
    for i in range(start, start + (1 if count is None else count)):
        z = row_rng(seed, stream, i).standard_normal((2, nmodes))
        c = np.sqrt(var / 2.0) * (z[0] + 1j * z[1])
        c[0] = np.sqrt(var[0]) * z[0, 0]
        if G % 2 == 0:
            c[-1] = np.sqrt(var[-1]) * z[0, -1]
        rows.append(np.fft.irfft(c, n=G) * G)
    out = np.array(rows)
    return out[0] if count is None else out


@dataclass
class Dataset:
    U: np.ndarray
    F: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.U = np.ascontiguousarray(self.U, dtype=np.float64)
        self.F = np.ascontiguousarray(self.F, dtype=np.float64)
        if self.U.shape != self.F.shape:
            raise ValueError("U and F must have the same shape")
        n = self.U.shape[1]
        if n < 2 or n & (n - 1):
            raise ValueError("column count must be 2**(J+1)")

    @property
    def N(self):
        return self.U.shape[0]

    @property
    def J(self):
        return int(np.log2(self.U.shape[1])) - 1

    def save(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        header = {"N": self.N, "J": self.J, "columns": self.U.shape[1]}
        header.update({k: v for k, v in self.meta.items() if k not in header})
        lines = [f"{k}={json.dumps(v, sort_keys=True)}" for k, v in sorted(header.items())]
        (d / "header.txt").write_text("\n".join(lines) + "\n")
        self.U.astype("<f8").tofile(d / "U.bin")
        self.F.astype("<f8").tofile(d / "F.bin")

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        header = {}
        for line in (d / "header.txt").read_text().splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                header[k] = json.loads(v)
        N, cols = int(header["N"]), int(header["columns"])
        if cols != index_count(int(header["J"])):
            raise ValueError("header column count inconsistent with J")
        mats = []
        for name in ("U.bin", "F.bin"):
            raw = np.fromfile(d / name, dtype="<f8")
            if raw.size != N * cols:
                raise ValueError(f"{name} holds {raw.size} values, header expects {N * cols}")
            mats.append(raw.reshape(N, cols))
        meta = {k: v for k, v in header.items() if k not in ("N", "J", "columns")}
        return cls(mats[0], mats[1], meta)


def check_data_assumptions(op: OperatorSpec, input_spec: GRFSpec, noise_spec, n=1):
    issues = []
    if input_spec.order <= n / 2 + max(0.0, op.order):
        issues.append(f"input order {input_spec.order} <= n/2 + max(0, r)")
    if noise_spec is not None and noise_spec.order <= n / 2:
        issues.append(f"noise order {noise_spec.order} <= n/2")
    for msg in issues:
        warnings.warn(msg, stacklevel=3)
    return issues


def generate_dataset(N, op: OperatorSpec, input_spec: GRFSpec, noise_spec, J, seed, basis: WaveletBasis, bandlimit=False):
    """Sample ``N`` pairs ``f_i = A u_i + w_i`` and analyze them up to level ``J``.

    With ``bandlimit`` the inputs are first projected onto the span of the
    level-``J`` primal functions, so ``U`` captures each input exactly.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    if J > basis.Jmax - 3:
        raise ResolutionError(f"level {J} exceeds Jmax - 3 = {basis.Jmax - 3}; enlarge the grid")
    check_data_assumptions(op, input_spec, noise_spec)
    G = basis.G
    u = sample_grf(input_spec, seed, G, count=N, stream=INPUT_STREAM)
    if bandlimit:
        u = basis.synthesis(basis.analysis(u, DUAL_TEST, J))
    f = apply_operator(op, u)
    if noise_spec is not None:
        f = f + sample_grf(noise_spec, seed, G, count=N, stream=NOISE_STREAM)
    U = basis.analysis(u, DUAL_TEST, J).data
    F = basis.analysis(f, PRIMAL_TEST, J).data
    meta = {
        "seed": int(seed),
        "operator": asdict(op),
        "input": asdict(input_spec),
        "noise": None if noise_spec is None else asdict(noise_spec),
        "wavelet": asdict(basis.params),
        "bandlimit": bool(bandlimit),
    }
    return Dataset(U, F, meta)


def basis_for(J_needed, d=2, dt=4):
    """Basis whose grid satisfies the quadrature guard for level ``J_needed``."""
    return WaveletBasis(WaveletParams(d=d, dt=dt, Jmax=J_needed + 3))
