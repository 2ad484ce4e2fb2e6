"""Complex-exponential fits of sampled correlation functions.

A correlation function is approximated by ``sum_k d_k exp(z_k t)``.  Exponents
come from the matrix pencil of the Hankel matrix of samples, amplitudes from a
linear least-squares solve.  Fits with real positive weights map one-to-one
onto damped pseudomodes: ``d exp(z t) = g^2 exp(-i Omega t - gamma t / 2)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bath_models import CorrelationSeries

MERGE_TOL = 1e-9
NOISE_REL = 1e-10
RANK_REL_TOL = 1e-12


class FitError(ValueError):
    pass


class ComplexWeightError(ValueError):
    """Pseudomode synthesis was asked for a term with complex or negative weight."""


@dataclass(frozen=True)
class ExpTerm:
    amplitude: complex
    exponent: complex


@dataclass(frozen=True)
class ExponentialSum:
    terms: tuple[ExpTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple(ExpTerm(complex(t.amplitude), complex(t.exponent)) for t in self.terms)
        for t in terms:
            if t.exponent.real > 0:
                raise ValueError(f"unstable exponent {t.exponent} (Re z > 0)")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_arrays(cls, amplitudes, exponents) -> "ExponentialSum":
        return cls(tuple(ExpTerm(d, z) for d, z in zip(amplitudes, exponents)))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([t.amplitude for t in self.terms], dtype=complex)

    @property
    def exponents(self) -> np.ndarray:
        return np.array([t.exponent for t in self.terms], dtype=complex)

    def __len__(self):
        return len(self.terms)

    def __call__(self, t):
        return evaluate(self, t)

    def to_dict(self) -> dict:
        return {"terms": [{"amplitude": [t.amplitude.real, t.amplitude.imag],
                           "exponent": [t.exponent.real, t.exponent.imag]} for t in self.terms]}


@dataclass(frozen=True)
class FitReport:
    model_order: int
    max_residual: float
    rms_residual: float
    grid_span: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def evaluate(es: ExponentialSum, t):
    """sum_k d_k exp(z_k t); accepts scalar or array ``t``."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise ValueError("exponential sums are evaluated at t >= 0 only")
    if not es.terms:
        out = np.zeros(tt.shape, dtype=complex)
    else:
        out = np.exp(np.multiply.outer(tt, es.exponents)) @ es.amplitudes
    return complex(out) if tt.ndim == 0 else out


def matrix_pencil_fit(series: CorrelationSeries, order: int) -> tuple[ExponentialSum, FitReport]:
    """Fit ``order`` complex exponentials to a uniformly sampled series."""
    t = series.grid
    y = series.values
    n = t.size
    if order < 1:
        raise FitError("model order must be >= 1")
    if n < 2 * order + 1:
        raise FitError(f"need at least {2 * order + 1} samples for order {order}, got {n}")
    if not series.is_uniform:
        raise FitError("matrix pencil fit requires a uniformly spaced grid")
    dt = t[1] - t[0]

    # pencil parameter between n/3 and n/2 keeps both Hankel blocks well conditioned
    L = max(order, n // 2)
    L = min(L, n - order - 1)
    hankel = scipy.linalg.hankel(y[: n - L], y[n - L - 1:])
    _, s, vh = np.linalg.svd(hankel, full_matrices=False)
    if s[0] == 0 or s[order - 1] <= RANK_REL_TOL * s[0]:
        raise FitError(
            f"rank-deficient pencil: singular value {order} is {s[order - 1]:.3e} "
            f"relative to {s[0]:.3e}; reduce the model order"
        )
    v = vh[:order].T
    v1, v2 = v[:-1], v[1:]
    poles = np.linalg.eigvals(np.linalg.pinv(v1) @ v2)
    z = np.log(poles.astype(complex)) / dt

    freq_scale = 1.0 / dt
    for k, zk in enumerate(z):
        if zk.real > 0:
            if zk.real < NOISE_REL * freq_scale:
                z[k] = complex(-zk.real, zk.imag)
            else:
                raise FitError(f"fitted exponent {zk} is unstable (Re z > 0 beyond noise level)")

    vander = np.exp(np.outer(t, z))
    d, *_ = np.linalg.lstsq(vander, y, rcond=None)
    resid = np.abs(vander @ d - y)
    order_idx = np.lexsort((z.imag, -z.real))
    es = ExponentialSum.from_arrays(d[order_idx], z[order_idx])
    report = FitReport(order, float(resid.max()), float(np.sqrt(np.mean(resid**2))),
                       float(t[-1] - t[0]))
    return es, report


def merge_degenerate(es: ExponentialSum, tol: float = MERGE_TOL) -> ExponentialSum:
    """Sum amplitudes of terms whose exponents agree within ``tol``."""
    merged: list[list] = []
    for term in es.terms:
        for m in merged:
            if abs(m[1] - term.exponent) < tol:
                m[0] += term.amplitude
                break
        else:
            merged.append([term.amplitude, term.exponent])
    return ExponentialSum.from_arrays([m[0] for m in merged], [m[1] for m in merged])


def to_pseudomodes(es: ExponentialSum, channel: int = 0, n_max: int = 4, n_channels: int | None = None):
    """One damped mode per term: Omega = -Im z, gamma = -2 Re z, g = sqrt(Re d).

    Only real positive weights are realized; complex or negative weights need
    coupled mode pairs, which are not constructed here.
    """
    from .gkls_model import Mode, PseudomodeParams

    es = merge_degenerate(es)
    modes = []
    gs = []
    for term in es.terms:
        d, z = term.amplitude, term.exponent
        if abs(d.imag) > 1e-10 * abs(d) or d.real <= 0:
            raise ComplexWeightError(
                f"term d={d}, z={z} has a complex or non-positive weight; mode-pair "
                "realizations of such terms are not implemented"
            )
        if z.real >= 0:
            raise ComplexWeightError(f"term exponent {z} is not strictly damped")
        modes.append(Mode(omega=-z.imag, gamma=-2 * z.real, n_max=n_max))
        gs.append(complex(np.sqrt(d.real)))
    n_ch = channel + 1 if n_channels is None else n_channels
    couplings = {j: [0j] * len(modes) for j in range(n_ch)}
    couplings[channel] = gs
    return PseudomodeParams(tuple(modes), couplings)
