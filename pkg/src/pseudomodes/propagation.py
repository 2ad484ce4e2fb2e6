"""Propagators of the GKLS configuration and nested multi-time expectation values.

A multi-time request with times ``t_1 <= ... <= t_n`` and system operators
``O_k`` (left) and ``O'_k`` (right) evaluates

    Tr{ O_n L(t_n, t_{n-1})[ ... O_1 L(t_1, 0)[rho(0)] O'_1 ... ] O'_n }

where ``L(t, t')`` is the time-ordered GKLS propagator and every ``O_k``
acts as ``O_k (x) 1_B``.
"""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gkls_model import GKLSModel, build_liouvillian, check_truncation
from .operator_algebra import (
    TRACE_TOL,
    DensityMatrix,
    as_operator,
    dagger,
    devectorize,
    expm,
    sprepost,
    vectorize,
)


class NumericalFault(RuntimeError):
    pass


@dataclass(frozen=True)
class MultiTimeRequest:
    times: tuple[float, ...]
    left_ops: tuple[np.ndarray, ...]
    right_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        left = tuple(as_operator(o) for o in self.left_ops)
        right = tuple(as_operator(o) for o in self.right_ops)
        if not times:
            raise ValueError("a multi-time request needs at least one time")
        if not (len(times) == len(left) == len(right)):
            raise ValueError("times, left_ops and right_ops must have equal lengths")
        if times[0] < 0 or any(b < a for a, b in zip(times, times[1:])):
            raise ValueError(f"times must be non-negative and non-decreasing, got {times}")
        dims = {o.shape[0] for o in left + right}
        if len(dims) != 1:
            raise ValueError("all request operators must have the same dimension")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "left_ops", left)
        object.__setattr__(self, "right_ops", right)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.left_ops[0].shape[0]

    @classmethod
    def correlation(cls, times, ops) -> "MultiTimeRequest":
        """Left operators only: <O_n(t_n) ... O_1(t_1)>."""
        eye = np.eye(as_operator(ops[0]).shape[0])
        return cls(tuple(times), tuple(ops), tuple(eye for _ in ops))

    def adjoint(self) -> "MultiTimeRequest":
        """Request whose value is the complex conjugate of this one."""
        return MultiTimeRequest(self.times, tuple(dagger(o) for o in self.right_ops),
                                tuple(dagger(o) for o in self.left_ops))


class PropagatorCache:
    """Interval propagators exp(L_seg * dt) keyed by (segment, duration).

    Shared between requests on one model; inserts are guarded so concurrent
    readers see either no entry or a complete one.
    """

    def __init__(self, model: GKLSModel):
        self.model = model
        self.dim = model.layout.total_dim
        self._generators: dict[int, np.ndarray] = {}
        self._store: dict[tuple[int, float], np.ndarray] = {}
        self._lock = threading.Lock()

    def generator(self, segment: int) -> np.ndarray:
        gen = self._generators.get(segment)
        if gen is None:
            t_start = self.model.system.h_schedule[segment][0]
            gen = build_liouvillian(self.model, t_start)
            with self._lock:
                gen = self._generators.setdefault(segment, gen)
        return gen

    def segment_propagator(self, segment: int, duration: float) -> np.ndarray:
        key = (segment, float(duration))
        sup = self._store.get(key)
        if sup is None:
            sup = expm(self.generator(segment) * duration)
            with self._lock:
                sup = self._store.setdefault(key, sup)
        return sup

    def __len__(self):
        return len(self._store)

    def superoperator(self, t_from: float, t_to: float) -> np.ndarray:
        """Lambda(t_to, t_from) as a (dim^2 x dim^2) matrix."""
        _check_interval(t_from, t_to)
        out = np.eye(self.dim**2, dtype=complex)
        for seg, a, b in self.model.system.split_interval(t_from, t_to):
            out = self.segment_propagator(seg, b - a) @ out
        return out

    def apply(self, x: np.ndarray, t_from: float, t_to: float) -> np.ndarray:
        _check_interval(t_from, t_to)
        v = vectorize(x)
        for seg, a, b in self.model.system.split_interval(t_from, t_to):
            v = self.segment_propagator(seg, b - a) @ v
        return devectorize(v, self.dim)


def _check_interval(t_from, t_to):
    if not (0 <= t_from <= t_to):
        raise ValueError(f"propagation requires 0 <= t_from <= t_to, got {t_from}, {t_to}")


def _cache_for(m: GKLSModel, cache: PropagatorCache | None) -> PropagatorCache:
    if cache is None:
        return PropagatorCache(m)
    if cache.model is not m:
        raise ValueError("propagator cache belongs to a different model")
    return cache


def propagate(m: GKLSModel, rho: DensityMatrix, t_from: float, t_to: float,
              cache: PropagatorCache | None = None) -> DensityMatrix:
    cache = _cache_for(m, cache)
    if rho.layout != m.layout:
        raise ValueError("density matrix layout does not match the model layout")
    out = cache.apply(rho.matrix, t_from, t_to)
    check_truncation(m, out, context=f"propagate to t={t_to}")
    return DensityMatrix(m.layout, out)


def initial_state(m: GKLSModel) -> DensityMatrix:
    return DensityMatrix(m.layout, m.rho0)


def _validate(m: GKLSModel, req: MultiTimeRequest):
    if req.dim != m.system.dim:
        raise ValueError(f"request operators are {req.dim}x{req.dim}, system dimension is {m.system.dim}")


def multitime_gkls(m: GKLSModel, req: MultiTimeRequest, cache: PropagatorCache | None = None,
                   check: bool = True) -> complex:
    """Nested sandwich evaluation: propagate, insert O_k on the left and O'_k on the right, repeat."""
    _validate(m, req)
    cache = _cache_for(m, cache)
    x = m.rho0
    prev = 0.0
    for t, o, op in zip(req.times, req.left_ops, req.right_ops):
        x = cache.apply(x, prev, t)
        x = m.embed_system(o) @ x @ m.embed_system(op)
        prev = t
    if check:
        check_truncation(m, x, context="multi-time request")
    return complex(np.trace(x))


def multitime_chain(m: GKLSModel, req: MultiTimeRequest, cache: PropagatorCache | None = None) -> complex:
    """Same value as :func:`multitime_gkls` from the explicit superoperator chain.

    vec(1)^dag S_n Lambda_n ... S_1 Lambda_1 vec(rho0), with S_k = O'_k^T (x) O_k,
    contracted from the left (dual direction).
    """
    _validate(m, req)
    cache = _cache_for(m, cache)
    d = m.layout.total_dim
    row = vectorize(np.eye(d)).conj()
    bounds = (0.0,) + req.times
    for k in range(req.n - 1, -1, -1):
        s = sprepost(m.embed_system(req.left_ops[k]), m.embed_system(req.right_ops[k]))
        row = row @ s @ cache.superoperator(bounds[k], bounds[k + 1])
    return complex(row @ vectorize(m.rho0))


def two_time_correlator(m: GKLSModel, x: np.ndarray, y: np.ndarray, t: float, tau: float,
                        cache: PropagatorCache | None = None) -> complex:
    """<X(t + tau) Y(t)>."""
    if t < 0 or tau < 0:
        raise ValueError("t and tau must be >= 0")
    eye = np.eye(m.system.dim)
    req = MultiTimeRequest((t, t + tau), (y, x), (eye, eye))
    return multitime_gkls(m, req, cache)


def measurement_sequence_probability(m: GKLSModel, times: Sequence[float], kraus: Sequence[np.ndarray],
                                     cache: PropagatorCache | None = None) -> float:
    """Joint probability of Kraus outcomes ``kraus[k]`` at ``times[k]``."""
    req = MultiTimeRequest(tuple(times), tuple(kraus), tuple(dagger(as_operator(k)) for k in kraus))
    val = multitime_gkls(m, req, cache)
    if val.real < -1e-10 or abs(val.imag) > 1e-9:
        raise NumericalFault(f"sequence probability {val} is not a non-negative real number")
    return max(val.real, 0.0)


def dipole_correlation(m: GKLSModel, dipole_down: np.ndarray, t_ss: float, tau_grid,
                       cache: PropagatorCache | None = None) -> np.ndarray:
    """<d^dag(t_ss + tau) d(t_ss)> on a uniform tau grid starting at 0, by stepwise regression."""
    tau = np.asarray(tau_grid, dtype=float)
    if tau.size == 0 or tau[0] != 0:
        raise ValueError("tau grid must start at 0")
    if tau.size > 1:
        steps = np.diff(tau)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("tau grid must be uniform")
    cache = _cache_for(m, cache)
    d = m.embed_system(dipole_down)
    ddag = dagger(d)
    x = d @ cache.apply(m.rho0, 0.0, t_ss)
    out = np.empty(tau.size, dtype=complex)
    out[0] = np.trace(ddag @ x)
    for k in range(1, tau.size):
        x = cache.apply(x, t_ss + tau[k - 1], t_ss + tau[k])
        out[k] = np.trace(ddag @ x)
    return out


def spectrum_from_correlation(corr: np.ndarray, tau_grid, freq_grid) -> np.ndarray:
    """S(w) = 2 Re int_0^T C(tau) exp(-i w tau) dtau with trapezoidal weights."""
    tau = np.asarray(tau_grid, dtype=float)
    w = np.full(tau.size, tau[1] - tau[0] if tau.size > 1 else 0.0)
    w[0] *= 0.5
    w[-1] *= 0.5
    phase = np.exp(-1j * np.outer(np.asarray(freq_grid, dtype=float), tau))
    return 2.0 * np.real(phase @ (w * corr))


def emission_spectrum(m: GKLSModel, dipole_down: np.ndarray, t_ss: float, tau_grid, freq_grid,
                      cache: PropagatorCache | None = None) -> np.ndarray:
    corr = dipole_correlation(m, dipole_down, t_ss, tau_grid, cache)
    return spectrum_from_correlation(corr, tau_grid, freq_grid)


def state_trajectory(m: GKLSModel, times: Sequence[float], cache: PropagatorCache | None = None):
    """Reduced system states at each of the non-decreasing ``times``."""
    cache = _cache_for(m, cache)
    x = m.rho0
    prev = 0.0
    out = []
    d = m.system.dim
    nb = m.bath_dim
    for t in times:
        x = cache.apply(x, prev, t)
        prev = t
        if abs(np.trace(x) - 1) > TRACE_TOL:
            warnings.warn(f"trace drifted to {np.trace(x)} at t={t}", RuntimeWarning, stacklevel=2)
        out.append(np.trace(x.reshape(d, nb, d, nb), axis1=1, axis2=3))
    check_truncation(m, x, context=f"trajectory to t={prev}")
    return np.array(out)
