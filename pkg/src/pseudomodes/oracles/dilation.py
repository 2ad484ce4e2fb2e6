"""Unitary dilation of the damped pseudomodes by a flat continuum.

Each Lindblad channel ``(rate, L)`` of the pseudomode bath is replaced by M
bosonic modes on ``[-W, W]`` coupled through

    V = sum_m i sqrt(rate dw / 2 pi) (L b_m^dag - L^dag b_m),

which is Hermitian and reproduces the GKLS dynamics of S (x) B in the limit
W, M -> infinity as long as the simulated horizon stays below 2 pi / dw.
"""
from __future__ import annotations

import time
import warnings
from typing import Sequence

import numpy as np

from ..gkls_model import GKLSModel, build_hamiltonian, free_bath_two_time, FreeBath
from ..operator_algebra import trace_distance
from ..propagation import PropagatorCache
from .discretize import flat_window
from .unitary import DIM_CAP, DenseUnitary, UnitaryConfig, nested_expectation, reduced_states


class DilationWarning(UserWarning):
    pass


def _dilation_modes(channels, halfwidth: float, M: int):
    omegas, ops = [], []
    for rate, l_op in channels:
        grid = flat_window(rate, halfwidth, M)
        for w, g in zip(grid.omegas, grid.couplings):
            omegas.append(w)
            ops.append(1j * g * l_op)
    return np.array(omegas), tuple(ops)


def _check_window(channels, halfwidth, M, horizon):
    rates = [r for r, _ in channels]
    if rates and halfwidth < 10 * max(rates):
        warnings.warn(f"dilation half-width {halfwidth} is below 10x the largest rate {max(rates)}",
                      DilationWarning, stacklevel=3)
    dw = 2 * halfwidth / M
    if horizon is not None and horizon >= 2 * np.pi / dw:
        warnings.warn(f"horizon {horizon} reaches the recurrence time {2 * np.pi / dw:.3f} of the "
                      "discretized continuum", DilationWarning, stacklevel=3)


def build_dilation(m: GKLSModel, halfwidth: float, M: int, n_max_tilde: int = 2, budget: int | None = 1,
                   dim_cap: int = DIM_CAP, horizon: float | None = None) -> UnitaryConfig:
    """S (x) B (x) E~ configuration whose reduced S (x) B dynamics approximates ``m``.

    ``budget`` caps the total excitation number in E~ (``None`` keeps the full
    per-mode product space, feasible only for a handful of modes).
    """
    channels = m.lindblad_channels_full()
    _check_window(channels, halfwidth, M, horizon)
    omegas, ops = _dilation_modes(channels, halfwidth, M)
    sched = tuple((t, build_hamiltonian(m, t)) for t in m.system.segment_starts)
    return UnitaryConfig(
        h_schedule=sched, rho0=m.rho0, mode_omegas=omegas, mode_ops=ops, n_max=n_max_tilde,
        budget=budget, system_dim=m.system.dim, dim_cap=dim_cap,
        labels=tuple(m.layout.labels),
        meta={"kind": "dilation", "halfwidth": halfwidth, "M": M, "channels": len(channels)},
    )


def build_bath_dilation(m: GKLSModel, halfwidth: float, M: int, n_max_tilde: int = 2,
                        budget: int | None = 1, dim_cap: int = DIM_CAP,
                        horizon: float | None = None) -> UnitaryConfig:
    """B (x) E~ only: the free pseudomodes and their dilation continuum."""
    channels = m.lindblad_channels
    _check_window(channels, halfwidth, M, horizon)
    omegas, ops = _dilation_modes(channels, halfwidth, M)
    return UnitaryConfig(
        h_schedule=((0.0, m.bath_hamiltonian),), rho0=m.bath_rho0, mode_omegas=omegas, mode_ops=ops,
        n_max=n_max_tilde, budget=budget, system_dim=None, dim_cap=dim_cap,
        labels=tuple(m.mode_labels),
        meta={"kind": "bath_dilation", "halfwidth": halfwidth, "M": M, "channels": len(channels)},
    )


def _params(halfwidth, M, n_max_tilde, budget):
    dw = 2 * halfwidth / M
    return {"halfwidth": halfwidth, "M": M, "delta_omega": dw, "recurrence_time": 2 * np.pi / dw,
            "n_max_tilde": n_max_tilde, "budget": budget}


def verify_lemma1(m: GKLSModel, halfwidth: float, M: int, times: Sequence[float],
                  n_max_tilde: int = 2, budget: int | None = 1) -> dict:
    """Max trace distance between Tr_E~ of the dilation and the GKLS S (x) B state."""
    t0 = time.perf_counter()
    times = np.asarray(times, dtype=float)
    cfg = build_dilation(m, halfwidth, M, n_max_tilde, budget, horizon=float(times.max()))
    dil = reduced_states(cfg, times)
    cache = PropagatorCache(m)
    dists = []
    x = m.rho0
    prev = 0.0
    for t, rho_x in zip(times, dil):
        x = cache.apply(x, prev, t)
        prev = t
        dists.append(trace_distance(rho_x, x))
    return {
        **_params(halfwidth, M, n_max_tilde, budget),
        "times": times.tolist(),
        "trace_distance": dists,
        "max_trace_distance": float(max(dists)),
        "oracle_dim": cfg.total_dim,
        "runtime_s": time.perf_counter() - t0,
    }


def verify_lemma2(m: GKLSModel, halfwidth: float, M: int, pairs: Sequence[tuple[float, float]],
                  channels: tuple[int, int] = (0, 0), n_max_tilde: int = 2,
                  budget: int | None = 1) -> dict:
    """Sup-norm distance of C^X(t + s, s) on B (x) E~ from the pseudomode C^L(t + s, s).

    ``pairs`` lists ``(t, s)``.
    """
    t0 = time.perf_counter()
    j, jp = channels
    horizon = max(t + s for t, s in pairs)
    cfg = build_bath_dilation(m, halfwidth, M, n_max_tilde, budget, horizon=horizon)
    dense = DenseUnitary(cfg)
    f, fp = m.coupling_operator(j), m.coupling_operator(jp)
    eye = np.eye(m.bath_dim)
    fb = FreeBath(m)
    cx, cl, trunc = [], [], 0.0
    for t, s in pairs:
        r = nested_expectation(cfg, (s, t + s), (fp, f), (eye, eye), method="dense", evaluator=dense)
        cx.append(r.value)
        trunc = max(trunc, r.truncation)
        cl.append(free_bath_two_time(m, j, jp, t, s, free_bath=fb))
    diff = np.abs(np.array(cx) - np.array(cl))
    return {
        **_params(halfwidth, M, n_max_tilde, budget),
        "channels": [j, jp],
        "pairs": [list(p) for p in pairs],
        "c_dilation": [[z.real, z.imag] for z in cx],
        "c_pseudomode": [[z.real, z.imag] for z in cl],
        "sup_difference": float(diff.max()),
        "truncation": trunc,
        "oracle_dim": cfg.total_dim,
        "runtime_s": time.perf_counter() - t0,
    }


def refinement_ladder(verify, m: GKLSModel, ladder: Sequence[tuple[float, int]], metric: str, **kwargs) -> dict:
    """Run ``verify`` over ``(halfwidth, M)`` levels and check the metric never increases."""
    levels = [verify(m, w, M, **kwargs) for w, M in ladder]
    values = [lv[metric] for lv in levels]
    return {
        "metric": metric,
        "values": values,
        "monotone": all(b <= a for a, b in zip(values, values[1:])),
        "levels": levels,
    }

