"""Brute-force unitary evolution of an open system plus a finite set of bosonic modes.

The global Hamiltonian is

    H(t) = H_inner(t) + sum_m w_m b_m^dag b_m + sum_m (Q_m (x) b_m^dag + Q_m^dag (x) b_m)

where the "inner" part is the open system (physical bath) or the system plus
pseudomodes (dilation).  Two evaluators are provided:

* ``dense``: bath basis of occupation vectors with per-mode cap ``n_max`` and a
  total excitation budget; exact diagonalization per piece of the H_S schedule.
* ``factorized``: used when all inner operators commute (pure dephasing); the
  bath then evolves as a product of single-mode unitaries conditioned on the
  inner eigenstate, and the multi-time value is a sum over eigen-index paths.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sps

from ..operator_algebra import (
    TRUNCATION_EPS,
    SpaceLayout,
    TruncationWarning,
    annihilation,
    as_operator,
    dagger,
    is_hermitian,
    thermal_populations,
)
from ..propagation import MultiTimeRequest
from .discretize import DiscretizedBath

DIM_CAP = 2**14


class ResourceError(RuntimeError):
    """Requested oracle exceeds the configured dimension cap."""


@dataclass(frozen=True)
class UnitaryConfig:
    """Inner space coupled to explicit bosonic modes.

    ``h_schedule`` holds ``(t_start, H_inner)`` blocks; ``mode_ops[m]`` is the
    inner operator Q_m multiplying b_m^dag.  ``system_dim`` is the dimension of
    the leading system factor of the inner space used to embed request
    operators (``None`` means requests act on the full inner space).
    """

    h_schedule: tuple[tuple[float, np.ndarray], ...]
    rho0: np.ndarray
    mode_omegas: np.ndarray
    mode_ops: tuple[np.ndarray, ...]
    n_max: int = 4
    temperature: float = 0.0
    budget: int | None = 1
    system_dim: int | None = None
    dim_cap: int = DIM_CAP
    labels: tuple[str, ...] = ("S",)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sched = tuple((float(t), as_operator(h)) for t, h in self.h_schedule)
        d = sched[0][1].shape[0]
        for t, h in sched:
            if h.shape != (d, d) or not is_hermitian(h):
                raise ValueError(f"inner Hamiltonian block at t={t} must be Hermitian {d}x{d}")
        if sched[0][0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        ops = tuple(as_operator(q) for q in self.mode_ops)
        w = np.asarray(self.mode_omegas, dtype=float)
        if len(ops) != w.size:
            raise ValueError("need one inner coupling operator per mode")
        if any(q.shape != (d, d) for q in ops):
            raise ValueError("mode coupling operators must act on the inner space")
        if self.system_dim is not None and d % self.system_dim:
            raise ValueError("system dimension must divide the inner dimension")
        if self.temperature > 0 and np.any(w <= 0):
            raise ValueError("thermal baths need positive mode frequencies")
        object.__setattr__(self, "h_schedule", sched)
        object.__setattr__(self, "rho0", as_operator(self.rho0))
        object.__setattr__(self, "mode_ops", ops)
        object.__setattr__(self, "mode_omegas", w)

    @property
    def inner_dim(self) -> int:
        return self.h_schedule[0][1].shape[0]

    @property
    def n_modes(self) -> int:
        return self.mode_omegas.size

    def embed(self, op: np.ndarray) -> np.ndarray:
        op = as_operator(op)
        if self.system_dim is None:
            return op
        return np.kron(op, np.eye(self.inner_dim // self.system_dim))

    @cached_property
    def bath_basis(self) -> "FockBasis":
        return FockBasis(self.n_modes, self.n_max, self.budget)

    @property
    def total_dim(self) -> int:
        return self.inner_dim * self.bath_basis.size

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout.from_pairs([("inner", self.inner_dim), ("E", self.bath_basis.size)])

    def segment_index(self, t: float) -> int:
        starts = [s for s, _ in self.h_schedule]
        return int(np.searchsorted(starts, t, side="right") - 1)

    def split_interval(self, t_from: float, t_to: float):
        starts = [s for s, _ in self.h_schedule] + [np.inf]
        t = t_from
        while t < t_to:
            k = self.segment_index(t)
            end = min(starts[k + 1], t_to)
            yield k, t, end
            t = end

    @cached_property
    def commuting(self) -> bool:
        return _common_eigenbasis(self) is not None


def unitary_config(system, baths: dict, temperature: float = 0.0, budget: int | None = 1,
                   dim_cap: int = DIM_CAP) -> UnitaryConfig:
    """Physical configuration: channel ``j`` couples A_j to its own discretized bath.

    ``baths`` maps channel index to :class:`DiscretizedBath`.
    """
    omegas, ops, nmax = [], [], set()
    for j, bath in sorted(baths.items()):
        if j >= system.n_channels:
            raise ValueError(f"no system coupling operator for channel {j}")
        a = system.couplings[j]
        for w, g in zip(bath.omegas, bath.couplings):
            omegas.append(w)
            ops.append(g * a)
        nmax.add(bath.n_max)
    if len(nmax) > 1:
        raise ValueError("all discretized baths must share one Fock truncation")
    order = np.argsort(omegas, kind="stable")
    return UnitaryConfig(
        h_schedule=system.h_schedule,
        rho0=system.rho0,
        mode_omegas=np.asarray(omegas)[order],
        mode_ops=tuple(ops[i] for i in order),
        n_max=nmax.pop() if nmax else 2,
        temperature=temperature,
        budget=budget,
        system_dim=system.dim,
        dim_cap=dim_cap,
        meta={"kind": "physical", "modes": len(omegas)},
    )


class FockBasis:
    """Occupation vectors with ``n_m < n_max`` and ``sum n_m <= budget``."""

    def __init__(self, n_modes: int, n_max: int, budget: int | None):
        self.n_modes = n_modes
        self.n_max = n_max
        cap = (n_max - 1) * n_modes
        self.budget = cap if budget is None else min(int(budget), cap)
        states = []
        for total in range(self.budget + 1):
            states.extend(_compositions(n_modes, total, n_max - 1))
        self.states = np.array(states, dtype=np.int64).reshape(len(states), n_modes)
        self.index = {tuple(s): i for i, s in enumerate(self.states)}

    @property
    def size(self) -> int:
        return len(self.states)

    def lowering(self, m: int) -> sps.csr_matrix:
        rows, cols, vals = [], [], []
        for i, s in enumerate(self.states):
            if s[m] > 0:
                t = s.copy()
                t[m] -= 1
                rows.append(self.index[tuple(t)])
                cols.append(i)
                vals.append(np.sqrt(s[m]))
        return sps.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size), dtype=complex)

    def leaky(self) -> np.ndarray:
        """(state, mode) mask where raising mode m leaves the truncated space."""
        at_budget = self.states.sum(axis=1) >= self.budget
        at_cap = self.states >= self.n_max - 1
        return at_cap | at_budget[:, None]


def _compositions(n: int, total: int, cap: int):
    """Length-n occupation tuples with entries <= cap summing to ``total``.

    Enumerates the occupied positions first so the cost scales with the number
    of states rather than with cap ** n.
    """
    if total == 0:
        yield (0,) * n
        return
    for k in range(1, min(n, total) + 1):
        for pos in itertools.combinations(range(n), k):
            for occ in _positive_parts(total, k, cap):
                s = [0] * n
                for p, o in zip(pos, occ):
                    s[p] = o
                yield tuple(s)


def _positive_parts(total: int, k: int, cap: int):
    if k == 1:
        if 1 <= total <= cap:
            yield (total,)
        return
    for first in range(1, min(cap, total - k + 1) + 1):
        for rest in _positive_parts(total - first, k - 1, cap):
            yield (first,) + rest


def _initial_bath_state(cfg: UnitaryConfig, basis: FockBasis) -> np.ndarray:
    """Diagonal of the (projected, renormalized) product thermal or vacuum state."""
    if cfg.temperature <= 0:
        p = np.zeros(basis.size)
        p[basis.index[(0,) * cfg.n_modes]] = 1.0
        return p
    logp = np.zeros(basis.size)
    for m, w in enumerate(cfg.mode_omegas):
        pm = thermal_populations(w, cfg.temperature, cfg.n_max)
        logp += np.log(pm[basis.states[:, m]])
    p = np.exp(logp)
    return p / p.sum()


# ---------------------------------------------------------------------------
# dense evaluator


class DenseUnitary:
    def __init__(self, cfg: UnitaryConfig):
        self.cfg = cfg
        self.basis = cfg.bath_basis
        if cfg.total_dim > cfg.dim_cap:
            raise ResourceError(
                f"oracle dimension {cfg.total_dim} exceeds cap {cfg.dim_cap} "
                f"({cfg.inner_dim} inner x {self.basis.size} bath states)"
            )
        self.dim_e = self.basis.size
        lowers = [self.basis.lowering(m) for m in range(cfg.n_modes)]
        diag_e = self.basis.states @ cfg.mode_omegas
        coupling = sps.csr_matrix((cfg.total_dim, cfg.total_dim), dtype=complex)
        for q, b in zip(cfg.mode_ops, lowers):
            coupling = coupling + sps.kron(sps.csr_matrix(q), b.T.conj()) + sps.kron(sps.csr_matrix(dagger(q)), b)
        self._static = coupling.toarray() + np.diag(np.kron(np.ones(cfg.inner_dim), diag_e))
        self._eig: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def hamiltonian(self, segment: int) -> np.ndarray:
        h_inner = self.cfg.h_schedule[segment][1]
        return self._static + np.kron(h_inner, np.eye(self.dim_e))

    def eig(self, segment: int):
        if segment not in self._eig:
            h = self.hamiltonian(segment)
            self._eig[segment] = np.linalg.eigh(0.5 * (h + dagger(h)))
        return self._eig[segment]

    def interval_unitary(self, segment: int, dt: float) -> np.ndarray:
        e, v = self.eig(segment)
        return (v * np.exp(-1j * e * dt)) @ dagger(v)

    def evolve(self, k: np.ndarray, t_from: float, t_to: float) -> np.ndarray:
        for seg, a, b in self.cfg.split_interval(t_from, t_to):
            e, v = self.eig(seg)
            k = v @ (np.exp(-1j * e * (b - a))[:, None] * (dagger(v) @ k))
        return k

    def initial_factors(self) -> np.ndarray:
        """Columns sqrt(p_i) |psi_i> of the initial global state."""
        evals, evecs = np.linalg.eigh(0.5 * (self.cfg.rho0 + dagger(self.cfg.rho0)))
        keep = evals > 1e-14
        inner = evecs[:, keep] * np.sqrt(evals[keep])
        pb = _initial_bath_state(self.cfg, self.basis)
        cols = []
        for i in np.nonzero(pb > 1e-14)[0]:
            e = np.zeros(self.dim_e)
            e[i] = np.sqrt(pb[i])
            cols.append(np.kron(inner, e[:, None]))
        return np.hstack(cols)

    def apply_inner(self, op: np.ndarray, k: np.ndarray) -> np.ndarray:
        d = self.cfg.inner_dim
        r = k.shape[1]
        return np.einsum("ab,ber->aer", op, k.reshape(d, self.dim_e, r)).reshape(d * self.dim_e, r)

    def reduced(self, k: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
        """Tr_E of K W^dag."""
        d = self.cfg.inner_dim
        r = k.shape[1]
        kk = k.reshape(d, self.dim_e, r)
        ww = kk if w is None else w.reshape(d, self.dim_e, r)
        return np.einsum("aer,ber->ab", kk, ww.conj())

    def leakage_rate(self, k: np.ndarray) -> float:
        """sum over states at the truncation edge of |(Q_m (x) b_m^dag) psi|^2."""
        d = self.cfg.inner_dim
        kk = k.reshape(d, self.dim_e, -1)
        mask = self.basis.leaky()
        rows = np.nonzero(mask.any(axis=1))[0]
        total = 0.0
        for m, q in enumerate(self.cfg.mode_ops):
            sel = rows[mask[rows, m]]
            if sel.size == 0:
                continue
            amp = np.einsum("ab,ber->aer", q, kk[:, sel, :])
            occ = self.basis.states[sel, m] + 1
            total += float(np.sum(occ[None, :, None] * np.abs(amp) ** 2))
        return total


def _nested_dense(dense: DenseUnitary, times, left_inner, right_inner):
    k = dense.initial_factors()
    w = k.copy()
    prev = 0.0
    leak = 0.0
    for t, o, op in zip(times, left_inner, right_inner):
        k = dense.evolve(k, prev, t)
        w = dense.evolve(w, prev, t)
        leak = max(leak, dense.leakage_rate(k), dense.leakage_rate(w))
        k = dense.apply_inner(o, k)
        w = dense.apply_inner(dagger(op), w)
        prev = t
    value = complex(np.vdot(w.ravel(order="F"), k.ravel(order="F")))
    horizon = max(times[-1], 1e-300)
    return value, leak * horizon**2


# ---------------------------------------------------------------------------
# factorized evaluator (commuting inner operators)


def _common_eigenbasis(cfg: UnitaryConfig):
    mats = [h for _, h in cfg.h_schedule]
    for q in cfg.mode_ops:
        mats.append(0.5 * (q + dagger(q)))
        mats.append(0.5j * (dagger(q) - q))
    scale = max(float(np.max(np.abs(x))) for x in mats) or 1.0
    rng = np.random.default_rng(12345)
    combo = sum(rng.normal() * x for x in mats)
    _, v = np.linalg.eigh(0.5 * (combo + dagger(combo)))
    tol = 1e-9 * scale
    for x in mats:
        y = dagger(v) @ x @ v
        if np.max(np.abs(y - np.diag(np.diag(y)))) > tol:
            return None
    return v


class FactorizedUnitary:
    """Conditional per-mode evolution for mutually commuting inner operators."""

    def __init__(self, cfg: UnitaryConfig):
        v = _common_eigenbasis(cfg)
        if v is None:
            raise ValueError("inner operators do not commute; use the dense evaluator")
        self.cfg = cfg
        self.v = v
        self.energies = [np.real(np.diag(dagger(v) @ h @ v)) for _, h in cfg.h_schedule]
        # q[m, a]: eigenvalue of Q_m on inner eigenstate a
        self.q = np.array([np.diag(dagger(v) @ q @ v) for q in cfg.mode_ops]).reshape(cfg.n_modes, cfg.inner_dim)
        n = cfg.n_max
        self.b = annihilation(n)
        self.num = np.diag(np.arange(n)).astype(complex)
        self._u: dict[tuple[int, float], np.ndarray] = {}
        pops = np.array([thermal_populations(w, cfg.temperature, n) if cfg.temperature > 0
                         else np.eye(n)[0] for w in cfg.mode_omegas]).reshape(cfg.n_modes, n)
        self.rho_modes = np.zeros((cfg.n_modes, n, n), dtype=complex)
        idx = np.arange(n)
        self.rho_modes[:, idx, idx] = pops

    def mode_unitaries(self, a: int, dt: float) -> np.ndarray:
        key = (a, float(dt))
        if key not in self._u:
            q = self.q[:, a]
            h = (self.cfg.mode_omegas[:, None, None] * self.num[None]
                 + q[:, None, None] * dagger(self.b)[None] + np.conj(q)[:, None, None] * self.b[None])
            e, vec = np.linalg.eigh(h)
            self._u[key] = np.einsum("mij,mj,mkj->mik", vec, np.exp(-1j * e * dt), vec.conj())
        return self._u[key]

    def evaluate(self, times, left_inner, right_inner):
        v, vd = self.v, dagger(self.v)
        rho = vd @ self.cfg.rho0 @ v
        terms: dict[tuple[int, int], list] = {}
        for a in range(self.cfg.inner_dim):
            for b in range(self.cfg.inner_dim):
                if abs(rho[a, b]) > 1e-15:
                    terms[(a, b)] = [(complex(rho[a, b]), self.rho_modes)]
        prev = 0.0
        for t, o, op in zip(times, left_inner, right_inner):
            terms = self._evolve(terms, prev, t)
            terms = self._insert(terms, vd @ o @ v, vd @ op @ v)
            prev = t
        value = 0j
        top = 0.0
        for (a, b), lst in terms.items():
            if a != b:
                continue
            for c, mats in lst:
                tr = np.trace(mats, axis1=1, axis2=2)
                value += c * np.prod(tr)
                top = max(top, float(np.max(np.abs(mats[:, -1, -1]))))
        return complex(value), top

    def _evolve(self, terms, t_from, t_to):
        for seg, s0, s1 in self.cfg.split_interval(t_from, t_to):
            dt = s1 - s0
            e = self.energies[seg]
            new = {}
            for (a, b), lst in terms.items():
                ua = self.mode_unitaries(a, dt)
                ub = self.mode_unitaries(b, dt)
                phase = np.exp(-1j * (e[a] - e[b]) * dt)
                new[(a, b)] = [(c * phase, ua @ mats @ np.conj(np.swapaxes(ub, 1, 2))) for c, mats in lst]
            terms = new
        return terms

    @staticmethod
    def _insert(terms, o, op):
        new: dict[tuple[int, int], list] = {}
        for (a, b), lst in terms.items():
            for a2 in np.nonzero(np.abs(o[:, a]) > 1e-15)[0]:
                for b2 in np.nonzero(np.abs(op[b, :]) > 1e-15)[0]:
                    f = o[a2, a] * op[b, b2]
                    new.setdefault((int(a2), int(b2)), []).extend((c * f, mats) for c, mats in lst)
        return new


@dataclass(frozen=True)
class UnitaryResult:
    value: complex
    truncation: float
    method: str

    def __complex__(self):
        return complex(self.value)


def nested_expectation(cfg: UnitaryConfig, times: Sequence[float], left_inner: Sequence[np.ndarray],
                       right_inner: Sequence[np.ndarray], method: str = "auto",
                       eps: float = TRUNCATION_EPS, evaluator: DenseUnitary | None = None) -> UnitaryResult:
    """Nested Schrodinger-picture sandwich with inner-space insertions.

    ``evaluator`` lets repeated dense requests on one configuration share the
    diagonalized Hamiltonians.
    """
    times = [float(t) for t in times]
    if times[0] < 0 or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be non-negative and non-decreasing")
    if method == "auto":
        method = "factorized" if cfg.commuting else "dense"
    if method == "factorized":
        value, trunc = FactorizedUnitary(cfg).evaluate(times, left_inner, right_inner)
    elif method == "dense":
        if evaluator is None or evaluator.cfg is not cfg:
            evaluator = DenseUnitary(cfg)
        value, trunc = _nested_dense(evaluator, times, left_inner, right_inner)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    if trunc > eps:
        warnings.warn(f"unitary oracle truncation indicator {trunc:.3e} exceeds {eps:g} ({method})",
                      TruncationWarning, stacklevel=2)
    return UnitaryResult(value, trunc, method)


def multitime_unitary(cfg: UnitaryConfig, req: MultiTimeRequest, method: str = "auto") -> UnitaryResult:
    """Multi-time expectation value of system operators in the unitary configuration."""
    if cfg.system_dim is not None and req.dim != cfg.system_dim:
        raise ValueError(f"request operators are {req.dim}-dimensional, system is {cfg.system_dim}")
    left = [cfg.embed(o) for o in req.left_ops]
    right = [cfg.embed(o) for o in req.right_ops]
    return nested_expectation(cfg, req.times, left, right, method)


def reduced_states(cfg: UnitaryConfig, times: Sequence[float]) -> np.ndarray:
    """Inner-space reduced states Tr_E rho(t) at non-decreasing ``times``."""
    dense = DenseUnitary(cfg)
    k = dense.initial_factors()
    prev = 0.0
    out = []
    for t in times:
        k = dense.evolve(k, prev, t)
        prev = t
        out.append(dense.reduced(k))
    return np.array(out)
