"""Two-level atom ⊗ truncated Fock space operators."""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from .fock import FockBasis, OperatorMatrix, field_operator, photon_energies
from .model import ModelParams

__all__ = [
    "ATOM_ENERGIES",
    "SpinBosonOperator",
    "build_hamiltonian",
    "interaction",
    "symmetry_operator",
    "photon_parity",
    "spin_tag",
]

ATOM_ENERGIES = (2.0, 0.0)

Kind = Literal["free", "full", "regularized", "bridged"]


def spin_tag(basis: FockBasis) -> str:
    return "C2x" + basis.tag


@dataclass(frozen=True, eq=False)
class SpinBosonOperator:
    """H = H_at ⊗ 1 + 1 ⊗ e^{-θ}H_ph + σ_1 ⊗ Φ_θ in spin-major ordering.

    The operator is kept in structured form: the photon energies of every
    Fock state (real), the dilation phase and the Fock-space field matrix.
    The dense matrix is assembled on demand; spectral code works on the
    shifted operator H − 2 to avoid rounding the atom energy into the
    small scales.
    """

    basis: FockBasis
    params: ModelParams
    photon: np.ndarray  # Σ ω_j n_j over the modes present in H_ph
    field: np.ndarray  # Fock-space field Φ_θ (carries g)
    theta_on: bool
    kind: Kind
    scale: int | None = None
    field_shells: tuple[int, ...] | None = field(default=None, repr=False)

    @property
    def phase(self) -> complex:
        return cmath.exp(-1j * self.params.vartheta) if self.theta_on else 1.0 + 0j

    @property
    def fock_dim(self) -> int:
        return self.basis.dim

    @property
    def dim(self) -> int:
        return 2 * self.basis.dim

    @property
    def tag(self) -> str:
        return spin_tag(self.basis)

    def diag_up(self) -> np.ndarray:
        """Diagonal of (H − 2) on the excited-spin block."""
        return self.phase * self.photon

    def diag_down(self) -> np.ndarray:
        """Diagonal of (H − 2) on the ground-spin block."""
        return -2.0 + self.phase * self.photon

    @cached_property
    def shifted(self) -> np.ndarray:
        d = self.fock_dim
        out = np.zeros((2 * d, 2 * d), dtype=complex)
        out[:d, :d] = np.diag(self.diag_up())
        out[d:, d:] = np.diag(self.diag_down())
        out[:d, d:] = self.field
        out[d:, :d] = self.field
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        d = self.fock_dim
        out = self.shifted.copy()
        out[:d, :d] = np.diag(ATOM_ENERGIES[0] + self.phase * self.photon)
        out[d:, d:] = np.diag(ATOM_ENERGIES[1] + self.phase * self.photon)
        return out

    def operator(self) -> OperatorMatrix:
        return OperatorMatrix(self.matrix, self.tag)

    def with_field(self, fld: np.ndarray) -> "SpinBosonOperator":
        return SpinBosonOperator(self.basis, self.params, self.photon, fld, self.theta_on,
                                 self.kind, self.scale, self.field_shells)


def _shells_upto(n: int | None) -> tuple[int, ...] | None:
    return None if n is None else tuple(range(n + 1))


def build_hamiltonian(params: ModelParams, basis: FockBasis, n: int | None = None,
                      bridged: bool = False, theta_on: bool = True,
                      free: bool = False) -> SpinBosonOperator:
    """H_g(θ), the regularized H_g^(n)(θ), or the bridge H̃_g^(n).

    ``n=None`` uses every mode of the basis. ``bridged`` keeps the coupling of
    shells ≤ n and adds the photon energy of shell n+1. ``free`` drops the
    coupling entirely.
    """
    max_shell = int(basis.modes.shells.max()) if basis.n_modes else 0
    if n is not None:
        need = n + 1 if bridged else n
        if need > max_shell:
            raise ValueError(f"basis has no modes for shell {need}")
    elif bridged:
        raise ValueError("bridged operator needs a scale")
    photon_shells = _shells_upto(n + 1 if bridged else n)
    field_shells = _shells_upto(n)
    photon = photon_energies(basis, photon_shells)
    if free:
        fld = np.zeros((basis.dim, basis.dim), dtype=complex)
    else:
        fld = field_operator(basis, params, theta_on, field_shells).data
    kind: Kind = "free" if free else ("bridged" if bridged else ("full" if n is None else "regularized"))
    return SpinBosonOperator(basis, params, photon, fld, theta_on, kind, n, field_shells)


def interaction(params: ModelParams, basis: FockBasis, shells=None, theta_on: bool = True) -> np.ndarray:
    """σ_1 ⊗ Φ_θ with unit coupling (the operator W_θ, so that gW_θ is the interaction)."""
    fld = field_operator(basis, params, theta_on, shells, unit=True).data
    d = basis.dim
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, d:] = fld
    out[d:, :d] = fld
    return out


def photon_parity(basis: FockBasis) -> np.ndarray:
    return np.where(basis.number() % 2 == 0, 1.0, -1.0)


def symmetry_operator(basis: FockBasis) -> OperatorMatrix:
    """S = σ_3 ⊗ (−1)^N."""
    par = photon_parity(basis)
    return OperatorMatrix(np.diag(np.concatenate([par, -par])).astype(complex), spin_tag(basis))
