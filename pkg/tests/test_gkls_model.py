import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from models import dephasing_model, jc_model, single_mode_bath, two_mode_model
from reference import SX, SZ, destroy, lindblad_ode, random_hermitian

from pseudomodes.gkls_model import (
    FreeBath,
    GKLSModel,
    Mode,
    PseudomodeParams,
    SystemModel,
    TruncationWarning,
    build_free_bath_generator,
    build_hamiltonian,
    build_liouvillian,
    check_truncation,
    free_bath_one_time,
    free_bath_two_time,
    wick_four_point_check,
)
from pseudomodes.operator_algebra import devectorize, vectorize


def random_model(seed, n_max=3, gamma=(0.4, 0.9)):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, 2)
    a = random_hermitian(rng, 2)
    modes = tuple(Mode(float(rng.uniform(-1, 2)), g, n_max) for g in gamma)
    coups = {0: list(rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes)))}
    return GKLSModel(SystemModel(2, ((0.0, h),), (a,)), PseudomodeParams(modes, coups))


# construction


def test_validation():
    with pytest.raises(ValueError):
        Mode(1.0, -0.1)
    with pytest.raises(ValueError):
        Mode(1.0, 0.1, n_max=1)
    with pytest.raises(ValueError):
        SystemModel(2, ((0.0, np.array([[0, 1], [0, 0]])),))
    with pytest.raises(ValueError):
        SystemModel(2, ((0.0, SZ),), (np.array([[0, 1], [0, 0]]),))
    with pytest.raises(ValueError):
        SystemModel(2, ((0.5, SZ),))
    with pytest.raises(ValueError):
        SystemModel(1, (), (np.eye(1), np.eye(1)))  # more than d^2 channels
    with pytest.raises(ValueError):
        PseudomodeParams((Mode(1, 1),), {0: [0.1, 0.2]})
    with pytest.raises(ValueError):
        GKLSModel(SystemModel(2, (), (SZ,)), PseudomodeParams((Mode(1, 1),), {1: [0.1]}))


def test_layout():
    m = two_mode_model(np.random.default_rng(0))
    assert m.layout.labels == ["S", "B0", "B1"]
    assert m.layout.total_dim == 2 * 3 * 3


def test_hamiltonian_examples():
    bare = GKLSModel(SystemModel(2, ((0.0, SZ),)), PseudomodeParams())
    assert np.array_equal(build_hamiltonian(bare, 0.0), SZ)
    dec = GKLSModel(SystemModel(2, ((0.0, SZ),), (SX,)), PseudomodeParams((Mode(1.3, 0.2, 3),), {0: [0.0]}))
    ref = np.kron(SZ, np.eye(3)) + np.kron(np.eye(2), 1.3 * destroy(3).conj().T @ destroy(3))
    assert np.allclose(build_hamiltonian(dec, 0.0), ref, atol=1e-15)
    with pytest.raises(ValueError):
        build_hamiltonian(dec, -1.0)


def test_hamiltonian_matches_hand_built_jc():
    m = jc_model(g=0.3, n_max=3)
    b = destroy(3)
    sp = np.array([[0, 1], [0, 0]])
    ref = (np.kron(0.5 * SZ, np.eye(3)) + np.kron(np.eye(2), b.conj().T @ b)
           + 0.3 * (np.kron(sp, b) + np.kron(sp.T, b.conj().T)))
    assert np.allclose(build_hamiltonian(m, 0.0), ref, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_hamiltonian_hermitian(seed):
    h = build_hamiltonian(random_model(seed), 0.0)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_schedule_selects_segment():
    m = two_mode_model(np.random.default_rng(1))
    h0, h1 = m.system.h_schedule[0][1], m.system.h_schedule[1][1]
    assert np.array_equal(m.system.hamiltonian(0.69), h0)
    assert np.array_equal(m.system.hamiltonian(0.7), h1)
    assert m.system.split_interval(0.2, 1.5) == [(0, 0.2, 0.7), (1, 0.7, 1.5)]


# Liouvillian


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_trace_preservation(seed):
    lv = build_liouvillian(random_model(seed), 0.0)
    assert np.max(np.abs(vectorize(np.eye(18)).conj() @ lv)) < 1e-10


def test_thermal_trace_preservation():
    m = single_mode_bath(temperature=0.7, n_max=5)
    lv = build_free_bath_generator(m)
    assert np.max(np.abs(vectorize(np.eye(5)).conj() @ lv)) < 1e-10
    assert len(m.lindblad_channels) == 2


def test_unitary_limit():
    m = random_model(3, gamma=(0.0, 0.0))
    h = build_hamiltonian(m, 0.0)
    rho = np.zeros((18, 18), complex)
    rho[0, 0] = 1
    t = 1.7
    u = linalg.expm(-1j * h * t)
    got = devectorize(linalg.expm(build_liouvillian(m, 0.0) * t) @ vectorize(rho))
    assert np.max(np.abs(got - u @ rho @ u.conj().T)) < 1e-10


def test_vacuum_dark_state():
    m = single_mode_bath(n_max=4)
    vac = np.zeros((4, 4), complex)
    vac[0, 0] = 1
    assert np.max(np.abs(build_free_bath_generator(m) @ vectorize(vac))) < 1e-15


def test_liouvillian_matches_ode():
    m = random_model(11, n_max=2)
    ts = [0.0, 0.8, 2.0]
    ref = lindblad_ode(build_hamiltonian(m, 0.0), m.lindblad_channels_full(), m.rho0, ts)
    lv = build_liouvillian(m, 0.0)
    for t, r in zip(ts, ref):
        got = devectorize(linalg.expm(lv * t) @ vectorize(m.rho0))
        assert np.max(np.abs(got - r)) < 1e-9


# free bath generator


def test_single_mode_eigenvalue():
    om, g = 1.3, 0.4
    ev = np.linalg.eigvals(build_free_bath_generator(single_mode_bath(om, g, n_max=4)))
    assert np.min(np.abs(ev - (-1j * om - g / 2))) < 1e-12


def test_undamped_spectrum_imaginary():
    ev = np.linalg.eigvals(build_free_bath_generator(single_mode_bath(1.0, 0.0, n_max=4)))
    assert np.max(np.abs(ev.real)) < 1e-12


def test_two_mode_minkowski_sum():
    m = two_mode_model(np.random.default_rng(5))
    ev = np.linalg.eigvals(build_free_bath_generator(m))
    singles = [np.linalg.eigvals(build_free_bath_generator(single_mode_bath(mo.omega, mo.gamma, n_max=3)))
               for mo in m.bath.modes]
    expected = (singles[0][:, None] + singles[1][None, :]).ravel()
    # match as multisets by nearest-neighbour pairing after sorting
    key = lambda z: (round(z.real, 8), round(z.imag, 8))  # noqa: E731
    a, b = sorted(ev, key=key), sorted(expected, key=key)
    assert np.max(np.abs(np.array(a) - np.array(b))) < 1e-9


# free-bath correlators


@pytest.mark.parametrize("temperature", [0.0, 0.6])
def test_one_time_vanishes(temperature):
    m = single_mode_bath(temperature=temperature, n_max=6)
    for t in (0.0, 0.7, 3.0):
        assert abs(free_bath_one_time(m, 0, t)) < 1e-15


def test_one_time_displaced_state_is_direct_trace():
    m = single_mode_bath(n_max=5)
    alpha = 0.3
    psi = np.exp(-alpha**2 / 2) * np.array([alpha**n / np.sqrt(float(np.prod(range(1, n + 1)))) for n in range(5)])
    rho = np.outer(psi, psi)
    fb = FreeBath(m)
    f = m.coupling_operator(0)
    assert np.trace(f @ fb.evolve(rho, 0.0)) == pytest.approx(np.trace(f @ rho))


@pytest.mark.parametrize("n_max", [3, 5])
def test_two_time_pseudomode_identity(n_max):
    om, gam, g = 1.1, 0.5, 0.3
    m = single_mode_bath(om, gam, g, n_max=n_max)
    fb = FreeBath(m)
    for t in np.linspace(0, 10 / gam, 11):
        ref = g**2 * np.exp(-1j * om * t - gam * t / 2)
        assert abs(free_bath_two_time(m, 0, 0, t, 0.0, fb) - ref) < 1e-8


def test_two_time_stationary_in_vacuum():
    m = single_mode_bath(n_max=4)
    assert free_bath_two_time(m, 0, 0, 1.2, 2.5) == pytest.approx(free_bath_two_time(m, 0, 0, 1.2, 0.0), abs=1e-12)


def test_two_time_equal_times_and_zero_coupling():
    m = single_mode_bath(g=0.4, n_max=3)
    assert free_bath_two_time(m, 0, 0, 0.0, 0.0) == pytest.approx(0.16, abs=1e-15)
    m0 = single_mode_bath(g=0.0, n_max=3)
    assert free_bath_two_time(m0, 0, 0, 1.0, 0.5) == 0
    with pytest.raises(ValueError):
        free_bath_two_time(m, 0, 0, -1.0, 0.0)


def test_thermal_two_time_closed_form():
    # C(t) = g^2 [(n+1) e^{-i w t} + n e^{i w t}] e^{-gamma t / 2}
    om, gam, g, T = 1.0, 0.4, 0.3, 0.8
    m = single_mode_bath(om, gam, g, n_max=14, temperature=T)
    n = 1 / np.expm1(om / T)
    for t in (0.0, 1.0, 4.0):
        ref = g**2 * ((n + 1) * np.exp(-1j * om * t) + n * np.exp(1j * om * t)) * np.exp(-gam * t / 2)
        assert abs(free_bath_two_time(m, 0, 0, t, 0.0) - ref) < 1e-6


def test_truncation_warning():
    hot = single_mode_bath(n_max=2, temperature=5.0)
    with pytest.warns(TruncationWarning):
        check_truncation(hot, hot.rho0)
    cold = single_mode_bath(n_max=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        assert check_truncation(cold, cold.rho0) == {"B0": 0.0}


# Wick factorization


def test_wick_zero_coupling():
    assert wick_four_point_check(single_mode_bath(g=0.0), 0, (0, 0.1, 0.2, 0.3)) == (0, 0)


def test_wick_equal_times():
    g = 0.3
    m = single_mode_bath(g=g, n_max=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        lhs, rhs = wick_four_point_check(m, 0, (0.5, 0.5, 0.5, 0.5))
    assert lhs == pytest.approx(3 * g**4, abs=1e-14)
    assert rhs == pytest.approx(3 * g**4, abs=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=4, max_size=4))
def test_wick_generic_times(ts):
    m = single_mode_bath(g=0.3, n_max=5)
    lhs, rhs = wick_four_point_check(m, 0, sorted(ts))
    assert abs(lhs - rhs) < 1e-8


def test_wick_rejects_unordered_times():
    with pytest.raises(ValueError):
        wick_four_point_check(single_mode_bath(), 0, (0.3, 0.1, 0.5, 0.6))


def test_dephasing_model_builds():
    m = dephasing_model()
    assert build_liouvillian(m, 0.0).shape == (256, 256)
