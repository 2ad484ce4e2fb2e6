import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reference import lorentzian_correlation

from pseudomodes.bath_models import (
    CorrelationSeries,
    SpectralDensity,
    correlation,
    correlation_analytic,
    load_tabulated,
    mean_field,
    sample_correlation,
)


def lorentzian_table(lam, omega, gamma):
    """Dense core around the peak plus geometric tails out to 1e7 widths."""
    tail = np.geomspace(1.0, 1e7, 8000)
    core = np.linspace(-1, 1, 4001)[1:-1]
    u = gamma * np.concatenate([-tail[::-1], core, tail])
    return omega + u, SpectralDensity.lorentzian(lam, omega, gamma)(omega + u)


# construction


@pytest.mark.parametrize("kind, params", [
    ("lorentzian", {"amplitude": -1, "center": 0, "width": 1}),
    ("lorentzian", {"amplitude": 1, "center": 0, "width": 0}),
    ("ohmic_exp_cutoff", {"coupling": 0.1, "cutoff": -1}),
    ("debye", {"reorganization": -0.1, "cutoff": 1}),
    ("lorentzian", {"amplitude": 1, "center": 0}),
    ("unknown", {}),
])
def test_invalid_parameters(kind, params):
    with pytest.raises(ValueError):
        SpectralDensity(kind, params)


def test_negative_temperature_rejected():
    with pytest.raises(ValueError):
        SpectralDensity.ohmic(0.1, 1.0, temperature=-1)


def test_lorentzian_requires_zero_temperature():
    with pytest.raises(ValueError):
        SpectralDensity("lorentzian", {"amplitude": 1, "center": 1, "width": 1}, temperature=0.5)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        SpectralDensity.tabulated([0, 2, 1], [1, 1, 1])
    with pytest.raises(ValueError):
        SpectralDensity.tabulated([0, 1, 2], [1, -1, 1])
    with pytest.raises(ValueError):
        SpectralDensity.tabulated([-1, 1, 2], [1, 1, 1], temperature=0.3)


# correlation values


def test_lorentzian_total_weight():
    sd = SpectralDensity.lorentzian(0.7, 1.3, 0.4)
    assert correlation_analytic(sd, 0.0) == pytest.approx(0.49, abs=1e-15)


def test_lorentzian_closed_form_example():
    sd = SpectralDensity.lorentzian(1.0, 2.0, 0.5)
    for t in (0.3, 1.0, 4.0):
        assert abs(correlation_analytic(sd, t) - np.exp(-2j * t - 0.25 * t)) < 1e-14


def test_lorentzian_quadrature_agrees_with_closed_form():
    lam, om, g = 1.0, 2.0, 0.5
    sd = SpectralDensity.lorentzian(lam, om, g)
    for t in np.linspace(0, 20 / g, 9):
        num = correlation_analytic(sd, t, method="quadrature")
        assert abs(num - lorentzian_correlation(lam, om, g, t)) < 1e-8


def test_ohmic_zero_time_weight():
    alpha, wc = 0.05, 3.0
    sd = SpectralDensity.ohmic(alpha, wc)
    assert correlation_analytic(sd, 0.0).real == pytest.approx(alpha * wc**2, rel=1e-8)


def test_ohmic_closed_form_at_zero_temperature():
    # int a w e^{-w/wc} e^{-iwt} dw = a wc^2 / (1 + i wc t)^2
    alpha, wc = 0.05, 3.0
    sd = SpectralDensity.ohmic(alpha, wc)
    for t in (0.2, 1.0, 5.0):
        ref = alpha * wc**2 / (1 + 1j * wc * t) ** 2
        assert abs(correlation_analytic(sd, t) - ref) <= 1e-8 * alpha * wc**2


def test_debye_at_zero_time_is_divergent():
    with pytest.raises(RuntimeError):
        correlation_analytic(SpectralDensity.debye(0.1, 1.0), 0.0)


def test_debye_imaginary_part_closed_form():
    # Im C(t) = -(2 lr/pi) int w wd sin(wt) / (w^2 + wd^2) = -lr wd e^{-wd t}
    lr, wd = 0.2, 1.5
    sd = SpectralDensity.debye(lr, wd, temperature=0.7)
    for t in (0.5, 2.0):
        assert correlation_analytic(sd, t).imag == pytest.approx(-lr * wd * np.exp(-wd * t), rel=1e-7)


def test_zero_temperature_limit():
    cold = SpectralDensity.ohmic(0.1, 2.0, temperature=1e-8)
    vac = SpectralDensity.ohmic(0.1, 2.0)
    for t in (0.0, 0.5, 2.0, 6.0):
        assert abs(correlation_analytic(cold, t) - correlation_analytic(vac, t)) < 1e-5


def test_thermal_real_part_grows_with_temperature():
    vals = [correlation_analytic(SpectralDensity.ohmic(0.1, 2.0, temperature=T), 0.0).real
            for T in (0.0, 0.5, 2.0)]
    assert vals[0] < vals[1] < vals[2]


def test_tabulated_matches_lorentzian():
    w, j = lorentzian_table(1.0, 2.0, 0.5)
    tab = SpectralDensity.tabulated(w, j)
    for t in (0.0, 0.5, 1.0, 3.0, 10.0):
        assert abs(correlation_analytic(tab, t) - lorentzian_correlation(1.0, 2.0, 0.5, t)) < 1e-6


def test_tabulated_positive_thermal_vs_quadrature():
    # on a positive grid the tabulated transform is exact for the interpolant
    w = np.linspace(0.0, 80.0, 40001)
    ohm = SpectralDensity.ohmic(0.1, 2.0, temperature=0.8)
    tab = SpectralDensity.tabulated(w, ohm(w), temperature=0.8)
    for t in (0.0, 1.0, 3.0):
        assert abs(correlation_analytic(tab, t) - correlation_analytic(ohm, t)) < 1e-4


def test_tabulated_zero_outside_grid():
    tab = SpectralDensity.tabulated([1.0, 2.0], [1.0, 1.0])
    assert tab(0.5) == 0.0 and tab(2.5) == 0.0 and tab(1.5) == 1.0


def test_load_tabulated_csv(tmp_path):
    p = tmp_path / "j.csv"
    p.write_text("omega,J\n0.0,0.0\n1.0,2.0\n2.0,0.0\n")
    sd = load_tabulated(p)
    assert sd.frequencies == (0.0, 1.0, 2.0)
    assert correlation_analytic(sd, 0.0).real == pytest.approx(2.0)


# API properties


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.1, 2.0), st.floats(-3.0, 3.0), st.floats(0.05, 3.0))
def test_conjugation_symmetry(t, lam, om, g):
    sd = SpectralDensity.lorentzian(lam, om, g)
    assert correlation_analytic(sd, -t) == np.conj(correlation_analytic(sd, t))


def test_conjugation_symmetry_quadrature():
    sd = SpectralDensity.ohmic(0.1, 2.0, temperature=0.5)
    assert correlation_analytic(sd, -1.3) == np.conj(correlation_analytic(sd, 1.3))


@pytest.mark.parametrize("t", [0.0, 1.3])
def test_mean_field_is_zero(t):
    for sd in (SpectralDensity.lorentzian(1, 1, 1), SpectralDensity.ohmic(0.1, 1.0, temperature=0.4)):
        assert mean_field(sd, t) == 0


def test_two_argument_form_is_stationary():
    sd = SpectralDensity.lorentzian(1.0, 0.5, 0.3)
    assert correlation(sd, 1.2, 3.4) == correlation_analytic(sd, 1.2)
    with pytest.raises(ValueError):
        correlation(sd, 1.0, -0.1)


def test_sample_correlation_example():
    lam, om, g = 0.8, 1.5, 0.6
    series = sample_correlation(SpectralDensity.lorentzian(lam, om, g), [0.0, 1.0])
    assert np.allclose(series.values, [lam**2, lam**2 * np.exp(-1j * om - g / 2)], atol=1e-15)


def test_sample_correlation_empty_grid():
    with pytest.raises(ValueError):
        sample_correlation(SpectralDensity.lorentzian(1, 1, 1), [])


def test_series_validation_and_csv_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        CorrelationSeries(np.array([0.5, 1.0]), np.array([1, 1]))
    with pytest.raises(ValueError):
        CorrelationSeries(np.array([0.0, 1.0]), np.array([-1.0, 1.0]))
    with pytest.raises(ValueError):
        CorrelationSeries(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    s = sample_correlation(SpectralDensity.lorentzian(1, 1, 1), np.linspace(0, 2, 5))
    s.to_csv(tmp_path / "c.csv")
    back = CorrelationSeries.from_csv(tmp_path / "c.csv")
    assert np.array_equal(back.grid, s.grid) and np.array_equal(back.values, s.values)
