from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinres.fock import build_basis, build_modes
from spinres.hamiltonian import build_hamiltonian, interaction
from spinres.resolvent import (
    NearEigenvalueError,
    apply_resolvent,
    in_region_A,
    in_region_A0,
    in_region_A_tilde,
    neumann_contraction,
    operator_norm,
    resolvent_bound_audit,
    sample_region_A0,
    sample_region_A_tilde,
)

seeds = st.integers(0, 2**31 - 1)


def _rand(seed: int, n: int = 12) -> np.ndarray:
    r = np.random.default_rng(seed)
    return r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))


def test_resolvent_diagonal():
    h = np.diag([1.0, 2.0, 3.5])
    v = np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(apply_resolvent(h, 0.5j, v), v / (2.0 - 0.5j))


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_resolvent_solves(seed):
    m = _rand(seed)
    z = complex(*np.random.default_rng(seed + 1).standard_normal(2))
    v = np.random.default_rng(seed + 2).standard_normal(12)
    u = apply_resolvent(m, z, v)
    np.testing.assert_allclose((m - z * np.eye(12)) @ u, v, atol=1e-10 * np.linalg.norm(v))


def test_resolvent_near_eigenvalue():
    h = np.array([[1.0, 0.5, 0.0], [0.5, 2.0, 0.1], [0.0, 0.1, 3.0]])
    ev = np.linalg.eigvalsh(h)
    with pytest.raises(NearEigenvalueError):
        apply_resolvent(h, ev[1], np.ones(3))


@settings(max_examples=25, deadline=None)
@given(seed=seeds, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_resolvent_linear(seed, a, b):
    m = _rand(seed, 8)
    r = np.random.default_rng(seed)
    v, w = r.standard_normal(8), r.standard_normal(8)
    z = 0.3 + 2.5j
    lhs = apply_resolvent(m, z, a * v + b * w)
    rhs = a * apply_resolvent(m, z, v) + b * apply_resolvent(m, z, w)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(lhs).max()))


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_first_resolvent_identity(seed):
    m = _rand(seed, 6) / 4
    z1, z2 = 3.0 + 1.0j, -2.0 + 2.5j
    eye = np.eye(6)
    r1 = np.column_stack([apply_resolvent(m, z1, e) for e in eye])
    r2 = np.column_stack([apply_resolvent(m, z2, e) for e in eye])
    np.testing.assert_allclose(r1 - r2, (z1 - z2) * r1 @ r2, atol=1e-9)


def test_norm_trivial_cases():
    assert operator_norm(np.eye(7)).value == pytest.approx(1.0, rel=1e-12)
    u, v = np.arange(1.0, 6.0), np.array([1.0, -2.0, 0.5, 0.0, 3.0]) * 1j
    assert operator_norm(np.outer(u, v.conj())).value == pytest.approx(
        np.linalg.norm(u) * np.linalg.norm(v), rel=1e-10)
    assert operator_norm(np.zeros((3, 3))).value == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_norm_matches_svd(seed):
    m = _rand(seed, 20)
    assert operator_norm(m).value == pytest.approx(np.linalg.svd(m, compute_uv=False)[0], rel=1e-8)


def test_norm_tight_singular_cluster():
    r = np.random.default_rng(7)
    q1, _ = np.linalg.qr(r.standard_normal((40, 40)))
    q2, _ = np.linalg.qr(r.standard_normal((40, 40)))
    s = np.concatenate([[1.0, 1.0, 1.0, 1.0, 1.0 - 9.2e-7], np.linspace(0.9, 0.1, 35)])
    m = q1 @ np.diag(s) @ q2.T
    assert operator_norm(m).value == pytest.approx(1.0, rel=1e-8)


def test_kappa_trivial_and_linear(tiny_params, tiny_system):
    b, _ = tiny_system
    h0 = build_hamiltonian(tiny_params, b, free=True).matrix
    w = interaction(tiny_params, b)
    z = 2.0 + 0.01j
    assert neumann_contraction(h0, w, 0.0, z) == 0.0
    k1 = neumann_contraction(h0, w, 0.01, z)
    assert neumann_contraction(h0, w, 0.02, z) == pytest.approx(2.0 * k1, rel=1e-12)


def test_kappa_on_first_contour(deep_params):
    p = deep_params.replace(n_scales=0)
    b = build_basis(build_modes(p), p.occupancy_cap, p.total_cap)
    h0 = build_hamiltonian(p, b, free=True).matrix
    w = interaction(p, b)
    r = math.sin(p.vartheta) / 8.0 * p.rho0
    worst = max(neumann_contraction(h0, w, p.g, 2.0 + r * np.exp(2j * math.pi * k / 16)) for k in range(16))
    assert worst < 1.0 / 6.0


def test_resolvent_bound_audit_normal_toy():
    r = np.random.default_rng(3)
    q, _ = np.linalg.qr(r.standard_normal((5, 5)) + 1j * r.standard_normal((5, 5)))
    lam = np.array([2.0, 1.0 - 0.5j, 3.0, 0.2, 2.5 - 1.0j])
    h = q @ np.diag(lam) @ q.conj().T
    pbar = q @ np.diag([0, 1, 1, 1, 1]) @ q.conj().T
    z = 1.8 + 0.3j
    res = resolvent_bound_audit(h, z, pbar, 1.0, 0.1, 2.0, 0.5)
    assert res.measured == pytest.approx(max(1 / abs(lam[1:] - z)), rel=1e-8)
    assert resolvent_bound_audit(h, z, np.zeros((5, 5)), 1.0, 0.1, 2.0, 0.5).measured == 0.0


def test_regions(small_params):
    p = small_params
    s = math.sin(p.vartheta)
    assert in_region_A(0j, p)
    assert not in_region_A0(0j, p)
    assert in_region_A0(complex(s / 15.0 * p.rho0, 0.0), p)
    # far along the tilted ray stays inside A
    assert in_region_A(-10.0 * np.exp(-1j * p.vartheta), p)
    assert not in_region_A(10.0j, p)
    w = sample_region_A0(p)
    assert len(w) == 64 and all(in_region_A0(x, p) for x in w)
    e2 = 0.0j
    wt = sample_region_A_tilde(p, 0, e2, 32)
    assert len(wt) == 32 and all(in_region_A_tilde(x, e2, p, 0) for x in wt)
    assert all(abs(x) >= s / 16.0 * p.rho(1) for x in wt)
