"""Correlation functions of Gaussian bosonic baths with linear coupling.

For a spectral density J(w) and temperature T the bath correlation function is

    C(t) = int dw J(w) [coth(w / 2T) cos(wt) - i sin(wt)]      (T > 0)
    C(t) = int dw J(w) exp(-i w t)                              (T = 0)

Only zero-mean Gaussian initial states (vacuum, thermal) are supported, so
the single-time mean of the coupling operator is identically zero and the
correlation function is stationary, C(t + s, s) = C(t).
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

KINDS = ("lorentzian", "ohmic_exp_cutoff", "debye", "tabulated")

QUAD_REL_TOL = 1e-8


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: float = float("nan")):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class SpectralDensity:
    """A spectral density J(w) plus the bath temperature.

    Parameters per kind:

    * ``lorentzian``: ``amplitude`` (lambda), ``center`` (Omega), ``width`` (gamma).
      J(w) = lambda^2 (gamma/2) / (pi ((w - Omega)^2 + gamma^2/4)) on the whole
      real line, so that C(t) = lambda^2 exp(-i Omega t - gamma t / 2) at T = 0.
    * ``ohmic_exp_cutoff``: ``coupling`` (alpha), ``cutoff`` (w_c), ``exponent`` (s).
      J(w) = alpha w_c^(1-s) w^s exp(-w / w_c) for w > 0.
    * ``debye``: ``reorganization`` (lambda_R), ``cutoff`` (w_D).
      J(w) = (2 lambda_R / pi) w w_D / (w^2 + w_D^2) for w > 0.
    * ``tabulated``: ``frequencies`` and ``values`` arrays, linearly interpolated,
      zero outside the grid.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    temperature: float = 0.0
    frequencies: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spectral density kind {self.kind!r}; expected one of {KINDS}")
        if not (self.temperature >= 0 and math.isfinite(self.temperature)):
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")
        p = dict(self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "lorentzian":
            _require(p, ("amplitude", "center", "width"), self.kind)
            if p["amplitude"] < 0 or p["width"] <= 0:
                raise ValueError("lorentzian requires amplitude >= 0 and width > 0")
            if self.temperature > 0:
                raise ValueError(
                    "lorentzian spectral density extends to negative frequencies and is "
                    "supported at T = 0 only"
                )
        elif self.kind == "ohmic_exp_cutoff":
            p.setdefault("exponent", 1.0)
            _require(p, ("coupling", "cutoff", "exponent"), self.kind)
            if p["coupling"] < 0 or p["cutoff"] <= 0 or p["exponent"] <= 0:
                raise ValueError("ohmic_exp_cutoff requires coupling >= 0, cutoff > 0, exponent > 0")
        elif self.kind == "debye":
            _require(p, ("reorganization", "cutoff"), self.kind)
            if p["reorganization"] < 0 or p["cutoff"] <= 0:
                raise ValueError("debye requires reorganization >= 0 and cutoff > 0")
        else:
            if self.frequencies is None or self.values is None:
                raise ValueError("tabulated spectral density needs frequencies and values")
            w = np.asarray(self.frequencies, dtype=float)
            j = np.asarray(self.values, dtype=float)
            if w.ndim != 1 or w.shape != j.shape or w.size < 2:
                raise ValueError("tabulated grid and values must be 1-D arrays of equal length >= 2")
            if np.any(np.diff(w) <= 0):
                raise ValueError("tabulated frequency grid must be strictly increasing")
            if np.any(j < 0):
                raise ValueError("tabulated spectral density values must be non-negative")
            if self.temperature > 0 and w[0] < 0:
                raise ValueError("negative-frequency tabulated support is supported at T = 0 only")
            object.__setattr__(self, "frequencies", tuple(w))
            object.__setattr__(self, "values", tuple(j))

    @classmethod
    def lorentzian(cls, amplitude: float, center: float, width: float) -> "SpectralDensity":
        return cls("lorentzian", {"amplitude": amplitude, "center": center, "width": width})

    @classmethod
    def ohmic(cls, coupling: float, cutoff: float, exponent: float = 1.0,
              temperature: float = 0.0) -> "SpectralDensity":
        return cls("ohmic_exp_cutoff",
                   {"coupling": coupling, "cutoff": cutoff, "exponent": exponent}, temperature)

    @classmethod
    def debye(cls, reorganization: float, cutoff: float, temperature: float = 0.0) -> "SpectralDensity":
        return cls("debye", {"reorganization": reorganization, "cutoff": cutoff}, temperature)

    @classmethod
    def tabulated(cls, frequencies, values, temperature: float = 0.0) -> "SpectralDensity":
        return cls("tabulated", {}, temperature, tuple(np.asarray(frequencies, float)),
                   tuple(np.asarray(values, float)))

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "lorentzian":
            return (-np.inf, np.inf)
        if self.kind == "tabulated":
            return (self.frequencies[0], self.frequencies[-1])
        return (0.0, np.inf)

    def __call__(self, omega):
        out = self._evaluate(np.asarray(omega, dtype=float))
        return float(out) if np.ndim(omega) == 0 else out

    def _evaluate(self, w: np.ndarray):
        p = self.params
        if self.kind == "lorentzian":
            lam, om, g = p["amplitude"], p["center"], p["width"]
            return lam**2 * (g / 2) / (np.pi * ((w - om) ** 2 + g**2 / 4))
        if self.kind == "ohmic_exp_cutoff":
            a, wc, s = p["coupling"], p["cutoff"], p["exponent"]
            wp = np.clip(w, 0.0, None)
            return np.where(w > 0, a * wc ** (1 - s) * wp**s * np.exp(-wp / wc), 0.0)
        if self.kind == "debye":
            lr, wd = p["reorganization"], p["cutoff"]
            return np.where(w > 0, (2 * lr / np.pi) * w * wd / (w**2 + wd**2), 0.0)
        grid = np.asarray(self.frequencies)
        return np.interp(w, grid, np.asarray(self.values), left=0.0, right=0.0)

    def total_weight(self) -> float:
        """int J(w) dw over the support (C(0) at T = 0)."""
        if self.kind == "lorentzian":
            return self.params["amplitude"] ** 2
        if self.kind == "tabulated":
            return float(np.trapezoid(self.values, self.frequencies))
        val, err = integrate.quad(self, 0.0, np.inf, epsrel=QUAD_REL_TOL, limit=500)
        return val


def _require(p, keys, kind):
    missing = [k for k in keys if k not in p]
    if missing:
        raise ValueError(f"{kind} spectral density is missing parameters {missing}")


def _coth_weight(sd: SpectralDensity):
    T = sd.temperature

    def f(w):
        x = w / (2 * T)
        if x > 350:
            return sd(w)
        if x < 1e-8:
            return 2 * T * sd(w) / w if w > 0 else 0.0
        return sd(w) / math.tanh(x)

    return f


def _fourier_half_line(f, a: float, t: float, kind: str, scale: float = 1.0):
    """int_a^inf f(w) cos(wt) dw or sin(wt) dw (QUADPACK QAWF)."""
    val, err = integrate.quad(f, a, np.inf, weight=kind, wvar=t, limlst=200, limit=500,
                              epsabs=max(1e-3 * QUAD_REL_TOL * scale, 1e-300))
    return val, err


def _check(val, err, what, scale=1.0):
    if not np.isfinite(val) or err > QUAD_REL_TOL * max(abs(val), scale):
        raise QuadratureError(f"quadrature for {what} did not converge", err)


def _tabulated_fourier(sd: SpectralDensity, t: float, weights=None) -> complex:
    """Exact int of a piecewise-linear function times exp(-i w t)."""
    w = np.asarray(sd.frequencies)
    j = np.asarray(sd.values) if weights is None else weights
    h = np.diff(w)
    if t == 0:
        return complex(np.sum(0.5 * h * (j[:-1] + j[1:])))
    slope = np.diff(j) / h
    e0 = np.exp(-1j * w[:-1] * t)
    e1 = np.exp(-1j * w[1:] * t)
    # int_{w0}^{w1} (j0 + m (w - w0)) e^{-iwt} dw
    term = (1j / t) * (j[1:] * e1 - j[:-1] * e0) + (slope / t**2) * (e1 - e0)
    return complex(np.sum(term))


def correlation_analytic(sd: SpectralDensity, t: float, method: str = "auto") -> complex:
    """Bath correlation function C(t) for t >= 0; negative t returns conj(C(-t)).

    ``method="quadrature"`` forces numerical integration even where a closed
    form exists (used to cross-check the closed forms).
    """
    t = float(t)
    if t < 0:
        return complex(np.conj(correlation_analytic(sd, -t, method)))
    p = sd.params
    if sd.kind == "lorentzian":
        lam, om, g = p["amplitude"], p["center"], p["width"]
        if method != "quadrature":
            return complex(lam**2 * np.exp(-1j * om * t - g * t / 2))
        # split the real line at the center and fold the left half
        left = lambda u: sd(om - u)  # noqa: E731
        right = lambda u: sd(om + u)  # noqa: E731
        if t == 0:
            v1, e1 = integrate.quad(right, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
            v2, e2 = integrate.quad(left, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
            return complex(v1 + v2)
        # int J(om+u) e^{-i(om+u)t} du + int J(om-u) e^{-i(om-u)t} du, u >= 0
        sym = lambda u: sd(om + u) + sd(om - u)  # noqa: E731
        anti = lambda u: sd(om + u) - sd(om - u)  # noqa: E731
        scale = lam**2
        c, ec = _fourier_half_line(sym, 0.0, t, "cos", scale)
        s, es = _fourier_half_line(anti, 0.0, t, "sin", scale)
        _check(c, ec, "lorentzian cosine transform", scale)
        _check(s, es, "lorentzian sine transform", scale)
        return complex(np.exp(-1j * om * t) * (c - 1j * s))
    if sd.kind == "tabulated":
        if sd.temperature > 0:
            w = np.asarray(sd.frequencies)
            j = np.asarray(sd.values)
            weighted = np.where(w > 0, j / np.tanh(np.maximum(w, 1e-300) / (2 * sd.temperature)), 0.0)
            if w[0] == 0:
                if j[0] > 0:
                    raise ValueError("J(0) > 0 makes the thermal correlation diverge")
                # J coth(w/2T) -> 2T J'(0) as w -> 0
                weighted[0] = 2 * sd.temperature * (j[1] - j[0]) / (w[1] - w[0])
            # thermal weights (n+1) e^{-iwt} + n e^{iwt} = coth cos - i sin
            re = _tabulated_fourier(sd, t, weighted).real
            im = _tabulated_fourier(sd, t).imag
            return complex(re, im)
        return _tabulated_fourier(sd, t)

    # ohmic / debye on [0, inf)
    T = sd.temperature
    re_f = _coth_weight(sd) if T > 0 else sd
    if t == 0:
        if sd.kind == "debye":
            raise QuadratureError("debye correlation function diverges at t = 0", float("inf"))
        v, e = integrate.quad(re_f, 0.0, np.inf, epsabs=0, epsrel=QUAD_REL_TOL, limit=500)
        _check(v, e, f"{sd.kind} C(0)")
        return complex(v)
    scale = _scale(sd)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        c, ec = _fourier_half_line(re_f, 0.0, t, "cos", scale)
        s, es = _fourier_half_line(sd, 0.0, t, "sin", scale)
    _check(c, ec, f"{sd.kind} cosine transform", scale)
    _check(s, es, f"{sd.kind} sine transform", scale)
    return complex(c - 1j * s)


def _scale(sd: SpectralDensity) -> float:
    """Magnitude used to set absolute quadrature tolerances."""
    p = sd.params
    if sd.kind == "ohmic_exp_cutoff":
        return max(p["coupling"] * p["cutoff"] ** 2, 1e-300)
    return max(p["reorganization"] * p["cutoff"], 1e-300)


def mean_field(sd: SpectralDensity, t: float) -> complex:
    """Single-time mean of the bath coupling operator; zero for zero-mean Gaussian states."""
    return 0j


@dataclass(frozen=True)
class CorrelationSeries:
    grid: np.ndarray
    values: np.ndarray
    channel: tuple[int, int] = (0, 0)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if g.ndim != 1 or g.size == 0:
            raise ValueError("correlation grid must be a non-empty 1-D array")
        if g.shape != v.shape:
            raise ValueError("correlation grid and values must have the same length")
        if g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise ValueError("correlation grid must start at 0 and be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("correlation values must be finite")
        if self.channel[0] == self.channel[1] and v[0].real < -1e-12:
            raise ValueError("diagonal correlation must have non-negative real part at t = 0")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.grid)
        return d.size == 0 or bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re", "im"])
            for t, c in zip(self.grid, self.values):
                w.writerow([repr(float(t)), repr(float(c.real)), repr(float(c.imag))])

    @classmethod
    def from_csv(cls, path, channel=(0, 0)) -> "CorrelationSeries":
        rows = _read_numeric_csv(path, 3)
        arr = np.asarray(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], channel)


def correlation(sd: SpectralDensity, t: float, s: float = 0.0) -> complex:
    """Two-argument form C(t + s, s); equals C(t) for the stationary models here."""
    if s < 0:
        raise ValueError("s must be non-negative")
    return correlation_analytic(sd, t)


def sample_correlation(sd: SpectralDensity, grid: Sequence[float], channel=(0, 0)) -> CorrelationSeries:
    g = np.asarray(grid, dtype=float)
    if g.size == 0:
        raise ValueError("cannot sample a correlation function on an empty grid")
    if np.any(g < 0):
        raise ValueError("correlation grid must be non-negative")
    vals = np.array([correlation_analytic(sd, t) for t in g])
    return CorrelationSeries(g, vals, channel)


def _read_numeric_csv(path, ncols: int) -> list[list[float]]:
    rows = []
    with open(Path(path), newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(x) for x in row[:ncols]]
            except ValueError:
                if not rows:
                    continue  # header line
                raise
            if len(vals) != ncols:
                raise ValueError(f"{path}: expected {ncols} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    return rows


def load_tabulated(path, temperature: float = 0.0) -> SpectralDensity:
    """Read a two-column CSV (frequency, J) into a tabulated spectral density."""
    arr = np.asarray(_read_numeric_csv(path, 2))
    return SpectralDensity.tabulated(arr[:, 0], arr[:, 1], temperature)
