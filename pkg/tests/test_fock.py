from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinres.fock import (
    BasisMismatchError,
    CapacityError,
    ModeSet,
    OperatorMatrix,
    build_basis,
    build_modes,
    build_shell_grid,
    discretize_region,
    embed,
    field_operator,
    ladder_matrices,
    photon_energies,
    photon_hamiltonian,
)
from spinres.model import ModelParams, coupling_l2_norms, dilation_ratio
from spinres.resolvent import operator_norm


def _modes(m: int) -> ModeSet:
    return discretize_region((0.1, 2.0), ModelParams(g=1.0), m)


def test_shell_grid_products():
    grid = build_shell_grid(0.5, 0.25, 2)
    assert grid.rhos == (0.5, 0.125, 0.03125)
    assert grid.shells == ((0.125, 0.5), (0.03125, 0.125))
    single = build_shell_grid(0.5, 0.25, 0)
    assert single.rhos == (0.5,) and single.shells == () and single.outer == (0.5, math.inf)


@given(rho0=st.floats(1e-6, 0.99), gamma=st.floats(1e-4, 0.49), n=st.integers(1, 8))
def test_shell_grid_ratio(rho0, gamma, n):
    r = build_shell_grid(rho0, gamma, n).rhos
    for a, b in zip(r[:-1], r[1:]):
        assert b == a * gamma


def test_zero_coupling_modes_have_zero_weight():
    ms = discretize_region((0.1, 1.0), ModelParams(g=0.0), 3)
    assert np.all(ms.weights == 0.0)


def test_single_mode_weight_is_shell_norm():
    p = ModelParams(g=0.4, rho0=0.2, gamma=0.25)
    shell = (p.rho(1), p.rho0)
    ms = discretize_region(shell, p, 1, shell=1)
    assert ms.weights[0] ** 2 == pytest.approx(coupling_l2_norms(p, shell)[1] ** 2, rel=1e-12)


@pytest.mark.parametrize("scheme", ["gauss", "centroid"])
def test_mode_refinement_preserves_total_weight(scheme):
    p = ModelParams(g=0.4, rho0=0.2, gamma=0.25)
    shell = (p.rho(1), p.rho0)
    one = discretize_region(shell, p, 1, scheme=scheme)
    four = discretize_region(shell, p, 4, scheme=scheme)
    assert np.sum(four.weights**2) == pytest.approx(np.sum(one.weights**2), rel=1e-12)
    for m in four:
        assert m.interval[0] <= m.k <= m.interval[1]


def test_modes_below_cutoff_excluded(small_params):
    ms = build_modes(small_params)
    assert ms.k.min() >= small_params.rho(small_params.n_scales)
    assert set(ms.shells) == set(range(small_params.n_scales + 1))


@pytest.mark.parametrize("m,occ,tot,dim", [(2, 2, None, 9), (2, 2, 2, 6), (0, 2, 4, 1), (3, 1, None, 8)])
def test_basis_counts(m, occ, tot, dim):
    b = build_basis(_modes(m) if m else ModeSet(()), occ, tot)
    assert b.dim == dim
    assert np.all(b.states[0] == 0)


def test_basis_size_limit():
    with pytest.raises(CapacityError):
        build_basis(_modes(12), 4, None, limit=1000)


def test_annihilator_kills_vacuum():
    b = build_basis(_modes(3), 2, 4)
    for j in range(3):
        a, _ = ladder_matrices(b, j)
        assert not np.any(a.data[:, 0])


def test_ccr_below_cap_and_boundary_defect():
    b = build_basis(_modes(3), 2, 4)
    occ = b.states
    for i in range(3):
        ai, adi = ladder_matrices(b, i)
        for j in range(3):
            aj, adj = ladder_matrices(b, j)
            assert not np.any((ai @ aj - aj @ ai).data)
            comm = (ai @ adj - adj @ ai).data - (np.eye(b.dim) if i == j else 0.0)
            interior = (occ[:, j] < b.occupancy_cap) & (occ.sum(axis=1) < b.total_cap)
            np.testing.assert_allclose(comm[:, interior], 0.0, atol=1e-14)
            if i == j:
                assert np.abs(comm[:, ~interior]).max() > 0.5


def test_undilated_field_is_hermitian(small_params):
    b = build_basis(build_modes(small_params), 2, 4)
    f = field_operator(b, small_params, False).data
    np.testing.assert_allclose(f, f.conj().T, atol=1e-14)
    p0 = small_params.replace(g=0.0)
    b0 = build_basis(build_modes(p0), 2, 4)
    assert not np.any(field_operator(b0, p0, True).data)


def test_single_mode_field_by_hand():
    p = ModelParams(g=0.3, vartheta=0.4, lambda_uv=1.5)
    ms = discretize_region((0.2, 0.9), p, 1)
    b = build_basis(ms, 1, None)
    k = float(ms.k[0])
    c = math.sqrt(4.0 * math.pi * p.g**2 * _gauss_int(0.2, 0.9, 1.5))
    down, up = np.exp(-0.4j), np.exp(0.4j)
    f = lambda q: np.exp(-q * q / 1.5**2)
    cre = c * down * f(down * k) / f(k)
    ann = c * np.conj(up * f(up * k)) / f(k)
    expected = np.array([[0.0, ann], [cre, 0.0]])
    np.testing.assert_allclose(field_operator(b, p, True).data, expected, rtol=1e-12)
    np.testing.assert_allclose([cre, ann], c * np.array([dilation_ratio(k, p),
                                                         dilation_ratio(k, p, True)]), rtol=1e-14)


def _gauss_int(a: float, b: float, lam: float) -> float:
    # ∫_a^b k e^{-2k²/Λ²} dk in closed form
    return lam**2 / 4.0 * (math.exp(-2 * a * a / lam**2) - math.exp(-2 * b * b / lam**2))


def test_field_linear_in_support(small_params):
    b = build_basis(build_modes(small_params), 2, 4)
    full = field_operator(b, small_params, True).data
    parts = sum(field_operator(b, small_params, True, (s,)).data for s in range(small_params.n_scales + 1))
    np.testing.assert_allclose(parts, full, atol=1e-15)


def test_photon_energies(small_params):
    b = build_basis(build_modes(small_params), 2, 4)
    e = photon_energies(b)
    assert e[0] == 0.0
    for j in range(b.n_modes):
        occ = np.zeros(b.n_modes, dtype=int)
        occ[j] = 1
        assert e[b.state_index(occ)] == b.modes.k[j]
    assert e[1:].min() >= small_params.rho(small_params.n_scales)


def test_operator_tags_checked():
    b1 = build_basis(_modes(2), 2, 4)
    b2 = build_basis(_modes(3), 2, 4)
    with pytest.raises(BasisMismatchError):
        photon_hamiltonian(b1) + photon_hamiltonian(b2)
    with pytest.raises(ValueError):
        OperatorMatrix(np.full((2, 2), np.nan), "x")


def test_embedding(small_params):
    p = small_params
    small = build_basis(build_modes(p, 1), 2, 4)
    large = build_basis(build_modes(p, 2), 2, 4)
    vac = np.zeros(2 * small.dim)
    vac[0] = 1.0
    out = embed(vac, small, large)
    assert out[0] == 1.0 and np.count_nonzero(out) == 1
    with pytest.raises(BasisMismatchError):
        embed(vac, large, small)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_embedding_preserves_norm(small_params, seed):
    p = small_params
    small = build_basis(build_modes(p, 1), 2, 4)
    large = build_basis(build_modes(p, 2), 2, 4)
    r = np.random.default_rng(seed)
    d = 2 * small.dim
    m = r.standard_normal((d, d)) + 1j * r.standard_normal((d, d))
    big = embed(m, small, large)
    assert operator_norm(big).value == pytest.approx(np.linalg.norm(m, 2), rel=1e-7)
