from __future__ import annotations

import numpy as np
import pytest

from spinres.feshbach import (
    feshbach_block,
    feshbach_root,
    feshbach_terms,
    interior_states,
    isospectrality_check,
    photon_parity_operator,
    spin_projections,
)
from spinres.fock import build_basis, build_modes, field_coefficients, photon_energies
from spinres.hamiltonian import build_hamiltonian
from spinres.oracle import dense_spectrum
from spinres.verify import feshbach_sample_points, feshbach_verification

Z = 2.0 + 0.004 - 0.002j


def _system(params):
    b = build_basis(build_modes(params), params.occupancy_cap, params.total_cap)
    return b, build_hamiltonian(params, b)


def test_decoupled_block_is_diagonal(tiny_params):
    p0 = tiny_params.replace(g=0.0)
    b, h = _system(p0)
    blk = feshbach_block(h, Z).data
    expected = (2.0 - Z) * np.eye(b.dim) + np.diag(np.exp(-1j * p0.vartheta) * photon_energies(b))
    np.testing.assert_allclose(blk, expected, atol=1e-15)


def test_vacuum_entry_scalar_sum(tiny_params, tiny_system):
    b, h = tiny_system
    cre, ann = field_coefficients(b, tiny_params, True)
    phase = np.exp(-1j * tiny_params.vartheta)
    expected = 2.0 - Z - np.sum(ann * cre / (phase * b.modes.k - Z))
    assert feshbach_block(h, Z).data[0, 0] == pytest.approx(expected, rel=1e-13)


def test_correction_quadratic_in_g(tiny_params):
    d = []
    for g in (0.01, 0.02):
        p = tiny_params.replace(g=g)
        _, h = _system(p)
        _, h0 = _system(p.replace(g=0.0))
        d.append(feshbach_block(h, Z).data - feshbach_block(h0, Z).data)
    # the subtraction cancels O(1) diagonal entries, so the floor is absolute
    np.testing.assert_allclose(d[1], 4.0 * d[0], rtol=1e-12, atol=1e-14)


def test_spin_projection_exact(tiny_system):
    b, _ = tiny_system
    P, Pbar = spin_projections(b)
    assert np.array_equal(P.data @ P.data, P.data)
    assert np.array_equal(P.data + Pbar.data, np.eye(2 * b.dim))


def test_terms_sum_to_block(tiny_params, tiny_system):
    b, h = tiny_system
    interior = interior_states(b)
    for z in feshbach_sample_points(tiny_params, 4):
        t = feshbach_terms(tiny_params, b, z)
        blk = feshbach_block(h, z).data
        assert np.linalg.norm(t.assembled() - blk) <= 1e-9 * np.linalg.norm(blk)
        ix = np.ix_(interior, interior)
        assert np.linalg.norm(t.assembled(False)[ix] - blk[ix]) <= 1e-9 * np.linalg.norm(blk[ix])


def test_two_creator_kernel_vanishes_on_vacuum(tiny_params, tiny_system):
    b, _ = tiny_system
    t = feshbach_terms(tiny_params, b, Z)
    assert t.W20[0, 0] == 0.0 and t.W02[0, 0] == 0.0


def test_g0_rescales_only_w00(tiny_params, tiny_system):
    b, _ = tiny_system
    g = tiny_params.g
    t1 = feshbach_terms(tiny_params, b, Z)
    t2 = feshbach_terms(tiny_params, b, Z, g0=0.5 * g)
    np.testing.assert_array_equal(t1.W20 + t1.W11 + t1.W02, t2.W20 + t2.W11 + t2.W02)
    np.testing.assert_allclose(t2.F0 - t1.F0, 0.75 * g**2 * t1.W00, atol=1e-16)


def test_root_decoupled(tiny_params):
    _, h = _system(tiny_params.replace(g=0.0))
    root, _ = feshbach_root(h, 2.0 + 1e-3j)
    assert abs(root - 2.0) < 1e-12


def test_root_matches_dense_oracle(tiny_system):
    _, h = tiny_system
    ev = dense_spectrum(h.matrix)
    target = ev[np.argmin(np.abs(ev - 2.0))]
    root, sv = feshbach_root(h, 2.0 + 0j)
    assert abs(root - target) <= 1e-8
    assert sv < 1e-12


def test_isospectrality_and_inverse_identity(tiny_params, tiny_system):
    _, h = tiny_system
    r = np.sin(tiny_params.vartheta) / 8.0 * tiny_params.rho0
    rep = isospectrality_check(h, 2.0, 4.0 * r, feshbach_sample_points(tiny_params, 16))
    assert rep.passed
    assert max(rep.inverse_relation_errors) <= 1e-9


def test_parity_commutes_with_block(tiny_system):
    b, h = tiny_system
    s = photon_parity_operator(b)
    blk = feshbach_block(h, Z).data
    assert not np.any(s @ blk - blk @ s)


def test_verification_selects_minus_z(tiny_params):
    rep = feshbach_verification(tiny_params, samples=16)
    dec = rep["decomposition"]
    assert dec["winner"] == "minus_z"
    assert dec["max_rel_error"]["measured"] <= 1e-9
    assert dec["variants"]["no_z"]["max_rel_error"] > 1e-6
    assert dec["variants"]["minus_z_w11_unshifted"]["max_rel_error"] > 1e-6
    assert rep["passed"]
