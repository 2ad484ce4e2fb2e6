"""Dense operator algebra on truncated tensor-product Hilbert spaces.

Operators are plain complex ``numpy`` arrays of shape ``(dim, dim)``.
Tensor factors are ordered as in a :class:`SpaceLayout`, and the Kronecker
convention is the usual row-major one: the first factor is the slowest index.

Vectorization is column stacking, so that ``vec(A X B) = (B.T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
TRUNCATION_EPS = 1e-6


class TruncationWarning(UserWarning):
    """Population in the top Fock state of a truncated mode exceeds the threshold."""


@dataclass(frozen=True)
class Factor:
    label: str
    dim: int


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered tensor factors of a composite Hilbert space."""

    factors: tuple[Factor, ...] = field(default_factory=tuple)

    def __post_init__(self):
        labels = [f.label for f in self.factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in layout: {labels}")
        for f in self.factors:
            if int(f.dim) < 1:
                raise ValueError(f"factor {f.label!r} has non-positive dimension {f.dim}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, int]]) -> "SpaceLayout":
        return cls(tuple(Factor(label, int(dim)) for label, dim in pairs))

    @property
    def labels(self) -> list[str]:
        return [f.label for f in self.factors]

    @property
    def dims(self) -> list[int]:
        return [f.dim for f in self.factors]

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown factor label {label!r}; layout has {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.factors[self.index(label)].dim

    def restrict(self, keep: Sequence[str]) -> "SpaceLayout":
        keep = set(keep)
        return SpaceLayout(tuple(f for f in self.factors if f.label in keep))


@dataclass(frozen=True)
class DensityMatrix:
    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.total_dim, self.layout.total_dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match layout dimension {self.layout.total_dim}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def is_physical(self, herm_tol: float = HERMITIAN_TOL, trace_tol: float = TRACE_TOL) -> bool:
        return is_hermitian(self.matrix, herm_tol) and abs(self.trace - 1.0) <= trace_tol


def as_operator(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0])), initial=0.0) <= tol)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(as_operator(a), as_operator(b))


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op: np.ndarray, factor_label: str, layout: SpaceLayout) -> np.ndarray:
    """Return ``op`` acting on one factor, tensored with identities elsewhere."""
    op = as_operator(op)
    idx = layout.index(factor_label)
    if op.shape[0] != layout.factors[idx].dim:
        raise ValueError(
            f"operator dimension {op.shape[0]} does not match factor "
            f"{factor_label!r} of dimension {layout.factors[idx].dim}"
        )
    left = int(np.prod(layout.dims[:idx], dtype=np.int64))
    right = int(np.prod(layout.dims[idx + 1:], dtype=np.int64))
    out = op
    if left > 1:
        out = np.kron(np.eye(left), out)
    if right > 1:
        out = np.kron(out, np.eye(right))
    return out.astype(complex, copy=False)


def annihilation(n_max: int) -> np.ndarray:
    """Truncated bosonic annihilation operator on Fock states ``|0>..|n_max-1>``."""
    if int(n_max) < 2:
        raise ValueError(f"Fock truncation n_max must be >= 2, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max)), k=1).astype(complex)


def creation(n_max: int) -> np.ndarray:
    return dagger(annihilation(n_max))


def number(n_max: int) -> np.ndarray:
    if int(n_max) < 2:
        raise ValueError(f"Fock truncation n_max must be >= 2, got {n_max}")
    return np.diag(np.arange(n_max)).astype(complex)


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    m = as_operator(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("expm: matrix has non-finite entries")
    return scipy.linalg.expm(m)


def partial_trace(rho: DensityMatrix, keep_labels: Sequence[str]) -> DensityMatrix:
    layout = rho.layout
    for label in keep_labels:
        layout.index(label)
    dims = layout.dims
    n = len(dims)
    keep = [i for i, f in enumerate(layout.factors) if f.label in set(keep_labels)]
    drop = [i for i in range(n) if i not in keep]
    t = rho.matrix.reshape(dims + dims)
    # contract each dropped bra index with its ket index, highest axis first
    for i in sorted(drop, reverse=True):
        k = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + k)
    new_layout = layout.restrict(keep_labels)
    d = new_layout.total_dim
    return DensityMatrix(new_layout, t.reshape(d, d))


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def devectorize(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    d = int(round(np.sqrt(v.size))) if dim is None else int(dim)
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized {d}x{d} operator")
    return v.reshape(d, d, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X``."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> X B``."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X B``."""
    return np.kron(b.T, a)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + dagger(diff))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def thermal_populations(omega: float, temperature: float, n_max: int) -> np.ndarray:
    """Geometric occupation distribution truncated to ``n_max`` levels and renormalized."""
    n = np.arange(n_max)
    if temperature <= 0:
        p = (n == 0).astype(float)
    else:
        if omega <= 0:
            raise ValueError("thermal state requires a positive mode frequency")
        p = np.exp(-omega * n / temperature)
    return p / p.sum()


def bose(omega: float, temperature: float) -> float:
    if temperature <= 0:
        return 0.0
    if omega <= 0:
        raise ValueError("Bose occupation requires a positive frequency")
    return float(1.0 / np.expm1(omega / temperature))


# standard single-qubit operators; index 0 is the sigma_z = +1 (excited) state
_STANDARD = {
    "identity": np.eye(2),
    "pauli_x": np.array([[0, 1], [1, 0]]),
    "pauli_y": np.array([[0, -1j], [1j, 0]]),
    "pauli_z": np.array([[1, 0], [0, -1]]),
    "sigma_plus": np.array([[0, 1], [0, 0]]),
    "sigma_minus": np.array([[0, 0], [1, 0]]),
    "projector_0": np.array([[1, 0], [0, 0]]),
    "projector_1": np.array([[0, 0], [0, 1]]),
}


def standard_operator(name: str, dim: int = 2) -> np.ndarray:
    """Look up a named operator. ``identity`` works for any dimension, the rest are qubit operators."""
    if name == "identity":
        return np.eye(dim, dtype=complex)
    if name not in _STANDARD:
        raise KeyError(f"unknown operator name {name!r}; known: {sorted(_STANDARD)}")
    if dim != 2:
        raise ValueError(f"operator {name!r} is only defined for a qubit (dim=2), got dim={dim}")
    return _STANDARD[name].astype(complex)


STANDARD_OPERATOR_NAMES = tuple(sorted(_STANDARD))
