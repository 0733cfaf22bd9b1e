"""Feshbach–Schur reduction onto the excited-spin sector.

``feshbach_block`` evaluates the block formula directly. ``feshbach_terms``
rebuilds the same operator from normal-ordered pieces on the finite mode set:
pull-through shifts are exact for truncated ladder operators, while the
reordering a_i a*_j = δ_ij + a*_j a_i fails on cap-boundary states. That
defect is returned as its own term so the decomposition can be compared
exactly on every state and without it on interior states.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla

from .fock import FockBasis, OperatorMatrix, _annihilator, field_coefficients, photon_energies
from .hamiltonian import SpinBosonOperator, build_hamiltonian
from .model import ModelParams
from .oracle import dense_spectrum

__all__ = [
    "LowerSectorSingular",
    "FeshbachData",
    "spin_projections",
    "feshbach_block",
    "feshbach_terms",
    "interior_states",
    "feshbach_root",
    "IsospectralityReport",
    "isospectrality_check",
    "photon_parity_operator",
]


class LowerSectorSingular(ArithmeticError):
    def __init__(self, z):
        self.z = z
        super().__init__(f"ground-spin block is singular at z={z!r}")


def spin_projections(basis: FockBasis) -> tuple[OperatorMatrix, OperatorMatrix]:
    """(P_↑ ⊗ 1, P_↓ ⊗ 1) on C² ⊗ Fock, spin-major."""
    d = basis.dim
    up = np.zeros((2 * d, 2 * d), dtype=complex)
    up[:d, :d] = np.eye(d)
    tag = "C2x" + basis.tag
    return OperatorMatrix(up, tag), OperatorMatrix(np.eye(2 * d) - up, tag)


def _lower_inverse_diag(H: SpinBosonOperator, z: complex) -> np.ndarray:
    # P̄(H − z)P̄ restricted to ran P̄ is diagonal: e^{-θ}H_ph − z
    den = H.phase * H.photon - z
    if np.min(np.abs(den)) <= 1e-14 * max(1.0, np.max(np.abs(den))):
        raise LowerSectorSingular(z)
    return 1.0 / den


def feshbach_block(H: SpinBosonOperator, z: complex) -> OperatorMatrix:
    """Fock-space matrix of P(H−z)P − P(H−z)P̄(P̄(H−z)P̄)^{-1}P̄(H−z)P."""
    m = H.matrix
    d = H.fock_dim
    top = m[:d, :d] - z * np.eye(d)
    lower = m[d:, d:] - z * np.eye(d)
    if np.count_nonzero(lower - np.diag(np.diag(lower))):
        inv = np.linalg.inv(lower)  # pragma: no cover - lower block is diagonal by construction
    else:
        inv = np.diag(_lower_inverse_diag(H, z))
    return OperatorMatrix(top - m[:d, d:] @ inv @ m[d:, :d], H.basis.tag)


@dataclass
class FeshbachData:
    """Normal-ordered decomposition of the effective operator at one z.

    All W's carry unit coupling; the effective operator is
    F_0 − g²(W_{2,0} + W_{1,1} + W_{0,2}) + g² cap_defect with
    F_0 = 2 − z + e^{-θ}H_ph − g0² W_{0,0}.
    """

    z: complex
    g: float
    g0: float
    P: OperatorMatrix
    Pbar: OperatorMatrix
    F0: np.ndarray
    W00: np.ndarray
    W20: np.ndarray
    W11: np.ndarray
    W02: np.ndarray
    cap_defect: np.ndarray
    w20_variant: str
    tag: str = field(repr=False, default="")

    def assembled(self, include_defect: bool = True) -> np.ndarray:
        out = self.F0 - self.g**2 * (self.W20 + self.W11 + self.W02)
        if include_defect:
            out = out + self.g**2 * self.cap_defect
        return out


def feshbach_terms(params: ModelParams, basis: FockBasis, z: complex, n: int | None = None,
                   g0: float | None = None, w20_variant: str = "minus_z",
                   w02_variant: str | None = None, theta_on: bool = True,
                   w11_shift: bool = True) -> FeshbachData:
    """Build W_{0,0}, W_{2,0}, W_{1,1}, W_{0,2} from the finite mode sums.

    ``w20_variant`` selects the denominator of W_{2,0} and W_{0,2}:
    ``"minus_z"`` uses e^{-θ}H_ph + e^{-θ}ω − z, ``"no_z"`` drops the −z.
    ``w11_shift=False`` drops the pull-through shift from the reordered
    W_{1,1} summand, which is the alternative reading of that kernel.
    """
    w02_variant = w02_variant or w20_variant
    g = params.g
    g0 = g if g0 is None else g0
    shells = None if n is None else tuple(range(n + 1))
    cre, ann = field_coefficients(basis, params, theta_on, shells, unit=True)
    phase = np.exp(-1j * params.vartheta) if theta_on else 1.0
    hph = photon_energies(basis, shells)
    om = basis.modes.k if basis.n_modes else np.zeros(0)
    d = basis.dim
    active = [j for j in range(basis.n_modes) if cre[j] != 0 or ann[j] != 0]
    lad = {j: _annihilator(basis, j) for j in active}

    def rdiag(shift: complex, with_z: bool = True) -> np.ndarray:
        den = phase * hph + shift - (z if with_z else 0.0)
        if np.min(np.abs(den)) == 0.0:
            raise LowerSectorSingular(z)
        return 1.0 / den

    r0 = rdiag(0.0)
    w00 = np.zeros((d, d), dtype=complex)
    w20 = np.zeros((d, d), dtype=complex)
    w11 = np.zeros((d, d), dtype=complex)
    w02 = np.zeros((d, d), dtype=complex)
    defect = np.zeros((d, d), dtype=complex)
    for i in active:
        ai = lad[i]
        adi = ai.T
        ri = rdiag(phase * om[i])
        w00 += ann[i] * cre[i] * np.diag(ri)
        for j in active:
            aj = lad[j]
            adj = aj.T
            # a*_i a*_j: pull-through moves the resolvent to the right
            rj20 = rdiag(phase * om[j], w20_variant == "minus_z")
            w20 += cre[i] * cre[j] * (adi @ adj) * rj20[None, :]
            # a_i a_j: resolvent moves to the left
            ri02 = rdiag(phase * om[i], w02_variant == "minus_z")
            w02 += ann[i] * ann[j] * ri02[:, None] * (ai @ aj)
            # a*_i R a_j is already normal ordered (unshifted denominator)
            w11 += cre[i] * ann[j] * (adi * r0[None, :]) @ aj
            # a_i R a*_j = R(ω_i) a_i a*_j = R(ω_i)(δ_ij + a*_j a_i) + defect
            shifted = rdiag(phase * (om[i] + om[j])) if w11_shift else r0
            w11 += ann[i] * cre[j] * (adj * shifted[None, :]) @ ai
            comm = ai @ adj - adj @ ai - (np.eye(d) if i == j else 0.0)
            defect += ann[i] * cre[j] * ri[:, None] * comm
    f0 = (2.0 - z) * np.eye(d) + np.diag(phase * hph) - g0**2 * w00
    P, Pbar = spin_projections(basis)
    return FeshbachData(z, g, g0, P, Pbar, f0, w00, w20, w11, w02, -defect,
                        w20_variant, basis.tag)


def interior_states(basis: FockBasis) -> np.ndarray:
    """Indices of states on which every single creation stays inside the basis."""
    occ = basis.states
    ok = np.all(occ < basis.occupancy_cap, axis=1)
    if basis.total_cap is not None:
        ok &= occ.sum(axis=1) < basis.total_cap
    return np.nonzero(ok)[0]


def photon_parity_operator(basis: FockBasis) -> np.ndarray:
    return np.diag(np.where(basis.number() % 2 == 0, 1.0, -1.0)).astype(complex)


def feshbach_root(H: SpinBosonOperator, z0: complex, tol: float = 1e-14,
                  max_iter: int = 60) -> tuple[complex, float]:
    """Zero of the effective operator near z0.

    Secant iteration on 1/[H_eff(z)^{-1}]_{ΩΩ}, which is analytic with a simple
    zero at every eigenvalue whose eigenvector overlaps the vacuum. Returns
    the root and the smallest singular value of H_eff there, relative to
    ‖H_eff‖.
    """

    def f(z: complex) -> complex:
        m = feshbach_block(H, z).data
        e0 = np.zeros(m.shape[0], dtype=complex)
        e0[0] = 1.0
        # near the root the block is singular by design
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            return 1.0 / sla.solve(m, e0)[0]

    za, zb = z0, z0 + 1e-6 * (1 + 1j) * max(1.0, abs(z0))
    fa, fb = f(za), f(zb)
    for _ in range(max_iter):
        if fb == fa:
            break
        zc = zb - fb * (zb - za) / (fb - fa)
        za, fa = zb, fb
        zb, fb = zc, f(zc)
        if abs(zb - za) <= tol * max(1.0, abs(zb)):
            break
    m = feshbach_block(H, zb).data
    sv = np.linalg.svd(m, compute_uv=False)
    return zb, float(sv[-1] / sv[0])


@dataclass
class IsospectralityReport:
    eigenvalues_in_region: list[complex]
    min_sv_at_eigenvalues: list[float]
    min_sv_off_grid: list[float]
    inverse_relation_errors: list[float]
    tol: float

    @property
    def passed(self) -> bool:
        zero_ok = all(s <= self.tol for s in self.min_sv_at_eigenvalues)
        off_ok = all(s > self.tol for s in self.min_sv_off_grid)
        inv_ok = all(e <= 1e-9 for e in self.inverse_relation_errors)
        return zero_ok and off_ok and inv_ok

    def as_dict(self) -> dict:
        return {
            "eigenvalues_in_region": [[e.real, e.imag] for e in self.eigenvalues_in_region],
            "min_sv_at_eigenvalues": self.min_sv_at_eigenvalues,
            "min_sv_off_grid": self.min_sv_off_grid,
            "inverse_relation_max_error": max(self.inverse_relation_errors, default=0.0),
            "passed": self.passed,
        }


def isospectrality_check(H: SpinBosonOperator, center: complex, radius: float,
                         z_grid: Sequence[complex], tol: float = 1e-9) -> IsospectralityReport:
    """Compare the spectrum of H in D(center, radius) with singular points of H_eff.

    (a) at every dense-spectrum eigenvalue in the disk the relative smallest
    singular value of H_eff vanishes to ``tol`` and stays above it at the grid
    points; (b) H_eff(z)^{-1} equals the excited-spin block of (H − z)^{-1}.
    """
    ev = dense_spectrum(H.matrix)
    inside = [complex(e) for e in ev if abs(e - center) < radius]
    d = H.fock_dim

    def rel_min_sv(z: complex) -> float:
        sv = np.linalg.svd(feshbach_block(H, z).data, compute_uv=False)
        return float(sv[-1] / sv[0])

    at_ev = [rel_min_sv(e) for e in inside]
    off = [rel_min_sv(z) for z in z_grid]
    errs = []
    for z in z_grid:
        heff_inv = np.linalg.inv(feshbach_block(H, z).data)
        full = np.linalg.inv(H.matrix - z * np.eye(2 * d))[:d, :d]
        errs.append(float(np.linalg.norm(heff_inv - full) / np.linalg.norm(full)))
    return IsospectralityReport(inside, at_ev, off, errs, tol)
