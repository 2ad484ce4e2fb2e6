"""System plus damped pseudomodes: Hamiltonian, Liouvillian, free-bath correlators.

The total Hilbert space is ``S (x) B0 (x) B1 (x) ...`` with one truncated Fock
factor per pseudomode.  The Hamiltonian is

    H(t) = H_S(t) + sum_k Omega_k b_k^dag b_k + sum_{k != l} M_kl b_k^dag b_l
           + sum_j A_j (x) F_j,     F_j = sum_k (g_jk b_k + conj(g_jk) b_k^dag)

and each mode decays through L = b_k at rate gamma_k (n_k + 1), plus
L = b_k^dag at rate gamma_k n_k when the bath starts thermal with
occupation n_k.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .operator_algebra import (
    HERMITIAN_TOL,
    TRUNCATION_EPS,
    Factor,
    SpaceLayout,
    TruncationWarning,
    annihilation,
    as_operator,
    bose,
    dagger,
    expm,
    is_hermitian,
    kron_all,
    spost,
    spre,
    sprepost,
    thermal_populations,
    vectorize,
    devectorize,
)


@dataclass(frozen=True)
class SystemModel:
    """Open system: piecewise-constant H_S(t), Hermitian coupling operators, initial state."""

    dim: int
    h_schedule: tuple[tuple[float, np.ndarray], ...]
    couplings: tuple[np.ndarray, ...] = ()
    rho0: np.ndarray | None = None

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise ValueError("system dimension must be >= 1")
        sched = []
        for t_start, h in self.h_schedule:
            h = as_operator(h)
            if h.shape != (d, d):
                raise ValueError(f"H_S block at t={t_start} has shape {h.shape}, expected {(d, d)}")
            if not is_hermitian(h, HERMITIAN_TOL):
                raise ValueError(f"H_S block at t={t_start} is not Hermitian")
            sched.append((float(t_start), h))
        if not sched:
            sched = [(0.0, np.zeros((d, d), dtype=complex))]
        starts = [s for s, _ in sched]
        if starts[0] != 0.0 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("H_S schedule must start at t=0 with strictly increasing start times")
        coups = []
        for j, a in enumerate(self.couplings):
            a = as_operator(a)
            if a.shape != (d, d):
                raise ValueError(f"coupling operator {j} has shape {a.shape}, expected {(d, d)}")
            if not is_hermitian(a, HERMITIAN_TOL):
                raise ValueError(f"coupling operator {j} is not Hermitian")
            coups.append(a)
        if len(coups) > d * d:
            raise ValueError(f"at most d_S^2 = {d * d} coupling channels allowed, got {len(coups)}")
        rho = np.zeros((d, d), dtype=complex) if self.rho0 is None else as_operator(self.rho0)
        if self.rho0 is None:
            rho[0, 0] = 1.0
        if rho.shape != (d, d):
            raise ValueError(f"initial system state has shape {rho.shape}, expected {(d, d)}")
        if not is_hermitian(rho, HERMITIAN_TOL) or abs(np.trace(rho) - 1) > 1e-9:
            raise ValueError("initial system state must be Hermitian with unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValueError("initial system state must be positive semidefinite")
        object.__setattr__(self, "h_schedule", tuple(sched))
        object.__setattr__(self, "couplings", tuple(coups))
        object.__setattr__(self, "rho0", rho)

    @property
    def n_channels(self) -> int:
        return len(self.couplings)

    @property
    def segment_starts(self) -> list[float]:
        return [s for s, _ in self.h_schedule]

    def segment_index(self, t: float) -> int:
        starts = self.segment_starts
        return int(np.searchsorted(starts, t, side="right") - 1)

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.h_schedule[self.segment_index(max(t, 0.0))][1]

    def split_interval(self, t_from: float, t_to: float) -> list[tuple[int, float, float]]:
        """Pieces ``(segment, start, end)`` of ``[t_from, t_to]`` with constant H_S."""
        pieces = []
        t = t_from
        starts = self.segment_starts + [np.inf]
        while t < t_to:
            k = self.segment_index(t)
            end = min(starts[k + 1], t_to)
            pieces.append((k, t, end))
            t = end
        return pieces


@dataclass(frozen=True)
class Mode:
    omega: float
    gamma: float
    n_max: int = 4

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"mode decay rate must be >= 0 (complete positivity), got {self.gamma}")
        if int(self.n_max) < 2:
            raise ValueError(f"mode truncation n_max must be >= 2, got {self.n_max}")


@dataclass(frozen=True)
class PseudomodeParams:
    """Pseudomodes, their couplings per channel and optional mode-mode hopping."""

    modes: tuple[Mode, ...] = ()
    couplings: Mapping[int, Sequence[complex]] = field(default_factory=dict)
    mode_mode: np.ndarray | None = None

    def __post_init__(self):
        k = len(self.modes)
        coups = {}
        for j, g in dict(self.couplings).items():
            g = np.asarray(g, dtype=complex).ravel()
            if g.size != k:
                raise ValueError(f"channel {j} lists {g.size} couplings for {k} modes")
            coups[int(j)] = g
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", coups)
        if self.mode_mode is not None:
            mm = as_operator(self.mode_mode)
            if mm.shape != (k, k) or not is_hermitian(mm):
                raise ValueError("mode_mode coupling must be a Hermitian (modes x modes) matrix")
            object.__setattr__(self, "mode_mode", mm)

    def coupling(self, j: int) -> np.ndarray:
        return self.couplings.get(j, np.zeros(len(self.modes), dtype=complex))


@dataclass(frozen=True)
class GKLSModel:
    """System coupled to damped pseudomodes; ``temperature == 0`` means vacuum pseudomodes."""

    system: SystemModel
    bath: PseudomodeParams
    temperature: float = 0.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        extra = [j for j in self.bath.couplings if j >= self.system.n_channels or j < 0]
        if extra:
            raise ValueError(f"bath couplings given for channels {extra} without system operators")

    @cached_property
    def bath_layout(self) -> SpaceLayout:
        return SpaceLayout.from_pairs([(f"B{k}", m.n_max) for k, m in enumerate(self.bath.modes)])

    @cached_property
    def layout(self) -> SpaceLayout:
        return SpaceLayout(((Factor("S", self.system.dim)),) + self.bath_layout.factors)

    @property
    def bath_dim(self) -> int:
        return self.bath_layout.total_dim

    @property
    def mode_labels(self) -> list[str]:
        return self.bath_layout.labels

    @cached_property
    def occupations(self) -> np.ndarray:
        return np.array([bose(m.omega, self.temperature) for m in self.bath.modes])

    @cached_property
    def annihilators(self) -> list[np.ndarray]:
        """b_k on the bath space."""
        dims = [m.n_max for m in self.bath.modes]
        out = []
        for k, m in enumerate(self.bath.modes):
            ops = [np.eye(d) for d in dims]
            ops[k] = annihilation(m.n_max)
            out.append(kron_all(ops))
        return out

    @cached_property
    def bath_hamiltonian(self) -> np.ndarray:
        h = np.zeros((self.bath_dim, self.bath_dim), dtype=complex)
        b = self.annihilators
        for k, m in enumerate(self.bath.modes):
            h += m.omega * dagger(b[k]) @ b[k]
        if self.bath.mode_mode is not None:
            mm = self.bath.mode_mode
            for k in range(len(b)):
                for l in range(len(b)):
                    if mm[k, l] != 0:
                        h += mm[k, l] * dagger(b[k]) @ b[l]
        return h

    def coupling_operator(self, j: int) -> np.ndarray:
        """F_j on the bath space."""
        f = np.zeros((self.bath_dim, self.bath_dim), dtype=complex)
        for g, b in zip(self.bath.coupling(j), self.annihilators):
            f += g * b + np.conj(g) * dagger(b)
        return f

    @cached_property
    def lindblad_channels(self) -> list[tuple[float, np.ndarray]]:
        """(rate, L) pairs on the bath space."""
        out = []
        for m, n, b in zip(self.bath.modes, self.occupations, self.annihilators):
            if m.gamma > 0:
                out.append((m.gamma * (n + 1), b))
                if n > 0:
                    out.append((m.gamma * n, dagger(b)))
        return out

    @cached_property
    def bath_rho0(self) -> np.ndarray:
        if not self.bath.modes:
            return np.ones((1, 1), dtype=complex)
        blocks = [np.diag(thermal_populations(m.omega, self.temperature, m.n_max)).astype(complex)
                  for m in self.bath.modes]
        return kron_all(blocks)

    @cached_property
    def rho0(self) -> np.ndarray:
        return np.kron(self.system.rho0, self.bath_rho0)

    def embed_system(self, op: np.ndarray) -> np.ndarray:
        return np.kron(as_operator(op), np.eye(self.bath_dim))

    def embed_bath(self, op: np.ndarray) -> np.ndarray:
        return np.kron(np.eye(self.system.dim), op)

    def lindblad_channels_full(self) -> list[tuple[float, np.ndarray]]:
        return [(r, self.embed_bath(l)) for r, l in self.lindblad_channels]

    def top_fock_populations(self, x: np.ndarray, include_system: bool = True) -> dict[str, float]:
        """|sum of diagonal entries| in the top Fock level of each mode."""
        dims = ([self.system.dim] if include_system else []) + [m.n_max for m in self.bath.modes]
        diag = np.abs(np.diagonal(x)).reshape(dims)
        off = 1 if include_system else 0
        out = {}
        for k, m in enumerate(self.bath.modes):
            out[f"B{k}"] = float(np.take(diag, m.n_max - 1, axis=k + off).sum())
        return out


def check_truncation(model: GKLSModel, x: np.ndarray, include_system: bool = True,
                     eps: float = TRUNCATION_EPS, context: str = "") -> dict[str, float]:
    pops = model.top_fock_populations(x, include_system)
    bad = {k: v for k, v in pops.items() if v > eps}
    if bad:
        warnings.warn(
            f"top Fock population above {eps:g} in modes {bad}{' (' + context + ')' if context else ''}",
            TruncationWarning, stacklevel=3,
        )
    return pops


def build_hamiltonian(m: GKLSModel, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("time must be >= 0")
    h = np.kron(m.system.hamiltonian(t), np.eye(m.bath_dim))
    h = h + m.embed_bath(m.bath_hamiltonian)
    for j, a in enumerate(m.system.couplings):
        h = h + np.kron(a, m.coupling_operator(j))
    return h


def _liouvillian(h: np.ndarray, channels) -> np.ndarray:
    eye = np.eye(h.shape[0])
    lv = -1j * (spre(h) - spost(h))
    for rate, l in channels:
        ldl = dagger(l) @ l
        lv = lv + rate * (sprepost(l, dagger(l)) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye))
    return lv


def build_liouvillian(m: GKLSModel, t: float) -> np.ndarray:
    """Column-stacked superoperator of the full GKLS generator at time ``t``."""
    return _liouvillian(build_hamiltonian(m, t), m.lindblad_channels_full())


def build_free_bath_generator(m: GKLSModel) -> np.ndarray:
    return _liouvillian(m.bath_hamiltonian, m.lindblad_channels)


class FreeBath:
    """Free evolution of the pseudomodes alone, with cached propagators."""

    def __init__(self, model: GKLSModel):
        self.model = model
        self.generator = build_free_bath_generator(model)
        self.dim = model.bath_dim
        self._cache: dict[float, np.ndarray] = {}

    def propagator(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("time must be >= 0")
        if t not in self._cache:
            self._cache[t] = expm(self.generator * t)
        return self._cache[t]

    def evolve(self, x: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return x
        return devectorize(self.propagator(t) @ vectorize(x), self.dim)

    def nested(self, ops: Sequence[np.ndarray], times: Sequence[float]) -> complex:
        """Tr{F_n e^{L(t_n - t_{n-1})}[... F_1 e^{L t_1}[rho_B]]} with left insertions."""
        x = self.model.bath_rho0
        prev = 0.0
        for op, t in zip(ops[:-1], times[:-1]):
            x = op @ self.evolve(x, t - prev)
            prev = t
        x = self.evolve(x, times[-1] - prev)
        check_truncation(self.model, x, include_system=False, context="free bath correlator")
        return complex(np.trace(ops[-1] @ x))


def free_bath_one_time(m: GKLSModel, j: int, t: float) -> complex:
    """Tr{F_j e^{L_B t}[rho_B(0)]}."""
    fb = FreeBath(m)
    return complex(np.trace(m.coupling_operator(j) @ fb.evolve(m.bath_rho0, t)))


def free_bath_two_time(m: GKLSModel, j: int, jp: int, t: float, s: float,
                       free_bath: FreeBath | None = None) -> complex:
    """C_{j j'}(t + s, s) = Tr{F_j e^{L_B t}[F_j' e^{L_B s}[rho_B(0)]]}."""
    if t < 0 or s < 0:
        raise ValueError("t and s must be >= 0")
    fb = free_bath or FreeBath(m)
    return fb.nested([m.coupling_operator(jp), m.coupling_operator(j)], [s, t + s])


def wick_four_point_check(m: GKLSModel, j: int, times: Sequence[float],
                          free_bath: FreeBath | None = None) -> tuple[complex, complex]:
    """Nested four-point correlator of F_j and its Wick pairing from two-point functions.

    ``times`` are ``(t1, t2, t3, t4)`` with ``t1 <= t2 <= t3 <= t4``.
    """
    t1, t2, t3, t4 = (float(x) for x in times)
    if not (0 <= t1 <= t2 <= t3 <= t4):
        raise ValueError("times must satisfy 0 <= t1 <= t2 <= t3 <= t4")
    fb = free_bath or FreeBath(m)
    f = m.coupling_operator(j)
    lhs = fb.nested([f, f, f, f], [t1, t2, t3, t4])

    def c(ta, tb):
        return fb.nested([f, f], [tb, ta])

    rhs = c(t4, t3) * c(t2, t1) + c(t4, t2) * c(t3, t1) + c(t4, t1) * c(t3, t2)
    return lhs, rhs
