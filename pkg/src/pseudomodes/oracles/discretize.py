"""Finite sets of bosonic modes standing in for a continuum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..bath_models import SpectralDensity, correlation_analytic
from ..operator_algebra import bose

MASS_FRACTION = 1 - 1e-3


class WindowError(ValueError):
    """The discretization window misses too much spectral weight."""


@dataclass(frozen=True)
class DiscretizedBath:
    omegas: np.ndarray
    couplings: np.ndarray
    n_max: int = 4
    source: str = "spectral_density"
    temperature: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        g = np.asarray(self.couplings, dtype=float)
        if w.shape != g.shape or w.ndim != 1:
            raise ValueError("mode frequencies and couplings must be 1-D arrays of equal length")
        if np.any(g < 0):
            raise ValueError("discretized couplings must be non-negative")
        if np.any(np.diff(w) <= 0):
            raise ValueError("mode frequencies must be strictly increasing")
        if int(self.n_max) < 2:
            raise ValueError("mode truncation must be >= 2")
        if self.temperature > 0 and np.any(w <= 0):
            raise ValueError("thermal discretized baths need strictly positive mode frequencies")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "couplings", g)

    @property
    def size(self) -> int:
        return self.omegas.size

    @property
    def delta_omega(self) -> float:
        return float(self.omegas[1] - self.omegas[0]) if self.size > 1 else float("nan")

    @property
    def recurrence_time(self) -> float:
        return 2 * np.pi / self.delta_omega

    def occupations(self) -> np.ndarray:
        return np.array([bose(w, self.temperature) for w in self.omegas])

    def correlation(self, t) -> np.ndarray:
        """sum_m g_m^2 [(n_m + 1) exp(-i w_m t) + n_m exp(i w_m t)]."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        n = self.occupations()
        ph = np.exp(-1j * np.outer(tt, self.omegas))
        g2 = self.couplings**2
        out = ph @ (g2 * (n + 1)) + np.conj(ph) @ (g2 * n)
        return out if np.ndim(t) else complex(out[0])


def _midpoints(lo: float, hi: float, m: int) -> tuple[np.ndarray, float]:
    dw = (hi - lo) / m
    return lo + dw * (np.arange(m) + 0.5), dw


def discretize_spectral_density(sd: SpectralDensity, window: tuple[float, float], M: int,
                                n_max: int = 4, min_mass_fraction: float = MASS_FRACTION) -> DiscretizedBath:
    """Midpoint modes on ``window`` with g_m = sqrt(J(w_m) dw)."""
    if M < 2:
        raise ValueError(f"need at least 2 modes, got M={M}")
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError("window must satisfy lo < hi")
    total = sd.total_weight()
    if total > 0:
        inside, _ = integrate.quad(sd, lo, hi, limit=1000, points=_peaks(sd, lo, hi))
        if inside < min_mass_fraction * total:
            raise WindowError(
                f"window [{lo}, {hi}] holds {inside / total:.6f} of the spectral weight, "
                f"below the required {min_mass_fraction}"
            )
    w, dw = _midpoints(lo, hi, M)
    g = np.sqrt(np.asarray(sd(w), dtype=float) * dw)
    return DiscretizedBath(w, g, n_max, "spectral_density", sd.temperature)


def _peaks(sd, lo, hi):
    if sd.kind == "lorentzian" and lo < sd.params["center"] < hi:
        return [sd.params["center"]]
    return None


def flat_window(gamma: float, halfwidth: float, M: int, n_max: int = 2) -> DiscretizedBath:
    """Flat continuum on [-W, W] with g_m = sqrt(gamma dw / 2 pi)."""
    if M < 2:
        raise ValueError(f"need at least 2 modes, got M={M}")
    if gamma < 0 or halfwidth <= 0:
        raise ValueError("need gamma >= 0 and halfwidth > 0")
    w, dw = _midpoints(-halfwidth, halfwidth, M)
    g = np.full(M, np.sqrt(gamma * dw / (2 * np.pi)))
    return DiscretizedBath(w, g, n_max, "flat_window")


def correlation_error(bath: DiscretizedBath, sd: SpectralDensity, t_grid) -> float:
    """Sup-norm distance between the discrete and continuum correlation functions."""
    t = np.asarray(t_grid, dtype=float)
    exact = np.array([correlation_analytic(sd, x) for x in t])
    return float(np.max(np.abs(bath.correlation(t) - exact)))


def weighted_correlation_error(bath: DiscretizedBath, correlation, horizon: float,
                               n_points: int | None = None) -> float:
    """int_0^T (T - tau) |C_disc(tau) - C(tau)| dtau by the trapezoidal rule.

    Bounds how much the second-order influence phase can move when the exact
    correlation function is replaced by the discrete one.
    """
    if horizon <= 0:
        return 0.0
    wmax = float(np.max(np.abs(bath.omegas))) if bath.size else 1.0
    n = n_points or int(max(2001, 40 * wmax * horizon))
    tau = np.linspace(0.0, horizon, n)
    exact = np.array([correlation(x) for x in tau])
    diff = np.abs(bath.correlation(tau) - exact)
    return float(np.trapezoid((horizon - tau) * diff, tau))
