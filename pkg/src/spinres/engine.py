"""Sector-structured numerics for one scale: resolvents, matvecs, contour sums.

A ``ScaleSystem`` holds the shifted operator K = H − 2 of one scale in the
backend's number type, split over the two S-sectors. Complex arguments are
always passed shifted, ``zp = z − 2``, as backend numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .fock import FockBasis, embed_indices, field_operator
from .hamiltonian import SpinBosonOperator, photon_parity
from .linalg import Sectors, sector_resolvent
from .resolvent import NearEigenvalueError, operator_norm

__all__ = ["ScaleSystem", "SectorEmbedding", "sector_norm", "frob_bound"]

SECTORS = ("+", "-")


def frob_bound(backend, m) -> float:
    """Frobenius norm (an upper bound for the operator norm)."""
    a = backend.to_numpy(m)
    return float(np.linalg.norm(a)) if a.size else 0.0


def sector_norm(backend, blocks: dict) -> float:
    """Operator norm of a sector-block-diagonal matrix."""
    best = 0.0
    for blk in blocks.values():
        a = backend.to_numpy(blk)
        if not a.size:
            continue
        d = np.diagonal(a)
        if not np.any(a - np.diag(d)):
            best = max(best, float(np.abs(d).max()))
        else:
            best = max(best, operator_norm(a).value)
    return best


@dataclass
class ScaleSystem:
    op: SpinBosonOperator
    backend: object
    sectors: Sectors = field(init=False)
    up: dict = field(init=False)
    dn: dict = field(init=False)
    phi_ud: dict = field(init=False)
    phi_du: dict = field(init=False)
    diagonal: bool = field(init=False)

    def __post_init__(self) -> None:
        be = self.backend
        self.sectors = Sectors.from_parity(photon_parity(self.op.basis))
        self.diagonal = not np.any(self.op.field)
        self.up, self.dn, self.phi_ud, self.phi_du = {}, {}, {}, {}
        with be.active():
            phase = be.phase(self.op.params.vartheta, self.op.theta_on)
            for s in SECTORS:
                u, d = self.sectors.parts(s)
                self.up[s] = be.affine(0.0, phase, self.op.photon[u])
                self.dn[s] = be.affine(-2.0, phase, self.op.photon[d])
                self.phi_ud[s] = be.mat(self.op.field[np.ix_(u, d)])
                self.phi_du[s] = be.mat(self.op.field[np.ix_(d, u)])

    # -- basic structure ------------------------------------------------------

    @property
    def basis(self) -> FockBasis:
        return self.op.basis

    def sizes(self, s: str) -> tuple[int, int]:
        u, d = self.sectors.parts(s)
        return len(u), len(d)

    def diag(self, s: str) -> list:
        return list(self.up[s]) + list(self.dn[s])

    def vacuum_up(self) -> dict:
        """(1, 0) ⊗ Ω in sector form; Ω is state 0 and lies in sector +."""
        be = self.backend
        out = {}
        for s in SECTORS:
            n = sum(self.sizes(s))
            v = [0j] * n
            if s == "+":
                v[0] = 1.0 + 0j
            out[s] = be.vec(v)
        return out

    def field_blocks(self, shells: Iterable[int] | None, unit: bool = True) -> dict:
        """Sector blocks (ud, du) of σ_1 ⊗ Φ restricted to ``shells``."""
        be = self.backend
        fld = field_operator(self.basis, self.op.params, self.op.theta_on, shells, unit=unit).data
        out = {}
        with be.active():
            for s in SECTORS:
                u, d = self.sectors.parts(s)
                out[s] = (be.mat(fld[np.ix_(u, d)]), be.mat(fld[np.ix_(d, u)]))
        return out

    # -- linear algebra -------------------------------------------------------

    def resolvent(self, zp, want_full: bool = True) -> tuple[dict, dict]:
        """Per-sector (K − zp)^{-1} and its excited-spin (Schur) block."""
        be = self.backend
        full, schur = {}, {}
        with be.active():
            zp = be.num(zp)
            for s in SECTORS:
                if self.diagonal:
                    dg = self.diag(s)
                    dvals = be.vsub(dg, zp)
                    self._check_diag(dg, dvals, zp)
                    inv = be.vrecip(dvals)
                    full[s] = be.diag(inv)
                    nu = self.sizes(s)[0]
                    schur[s] = be.diag(inv[:nu])
                    continue
                r, si = sector_resolvent(be, self.up[s], self.dn[s], self.phi_ud[s], self.phi_du[s], zp)
                self._check_full(r, zp)
                full[s], schur[s] = r, si
        return full, schur

    def _check_diag(self, dg, dvals, zp) -> None:
        be = self.backend
        # relative cancellation: d − zp with |d − zp| ≪ max(|d|, |zp|) loses all digits
        z = abs(be.to_complex(zp))
        for d, x in zip(dg, dvals):
            if abs(be.to_complex(x)) <= 2.0 ** (-be.bits + 8) * max(abs(be.to_complex(d)), z):
                raise NearEigenvalueError(be.to_complex(zp) + 2.0, "diagonal entry")

    def _check_full(self, r, zp) -> None:
        be = self.backend
        big = be.absmax(r)
        n = be.shape(r)[0]
        # ‖R‖ ≥ max|R_ij|; a resolvent this large means an eigenvalue within ~eps of zp
        if not math.isfinite(big) or big * n * 2.0 ** (-be.bits) * 10.0 > 1.0:
            raise NearEigenvalueError(be.to_complex(zp) + 2.0, f"‖R‖ ≳ {big:.3e}")

    def matvec(self, v: dict) -> dict:
        """K v in sector form."""
        be = self.backend
        out = {}
        with be.active():
            for s in SECTORS:
                nu, nd = self.sizes(s)
                x = list(v[s])
                xu, xd = x[:nu], x[nu:]
                top = [a * b for a, b in zip(self.up[s], xu)]
                bot = [a * b for a, b in zip(self.dn[s], xd)]
                if nd and nu:
                    t2 = be.matvec(self.phi_ud[s], be.vec(xd))
                    b2 = be.matvec(self.phi_du[s], be.vec(xu))
                    top = [a + b for a, b in zip(top, t2)]
                    bot = [a + b for a, b in zip(bot, b2)]
                out[s] = be.vec(top + bot)
        return out

    def apply(self, blocks: dict, v: dict) -> dict:
        be = self.backend
        with be.active():
            return {s: be.vec(be.matvec(blocks[s], be.vec(list(v[s])))) for s in SECTORS}

    # -- vector helpers -----------------------------------------------------------

    def to_numpy_vec(self, v: dict) -> np.ndarray:
        """Spin-major dense numpy vector."""
        d = self.basis.dim
        out = np.zeros(2 * d, dtype=complex)
        for s in SECTORS:
            idx = self.sectors.full_index(s)
            out[idx] = [self.backend.to_complex(x) for x in v[s]]
        return out

    def from_numpy_vec(self, x: np.ndarray) -> dict:
        be = self.backend
        with be.active():
            return {s: be.vec(list(np.asarray(x)[self.sectors.full_index(s)])) for s in SECTORS}

    def vnorm(self, v: dict) -> float:
        return float(np.linalg.norm(self.to_numpy_vec(v)))

    def inner(self, a: dict, b: dict):
        """⟨a, b⟩ (conjugate-linear in a) as a backend number."""
        be = self.backend
        with be.active():
            tot = be.num(0)
            for s in SECTORS:
                conj_a = [x.conjugate() for x in a[s]]
                tot = tot + be.vdot(conj_a, list(b[s]))
            return tot

    def axpy(self, alpha, x: dict, y: dict) -> dict:
        """alpha * x + y."""
        be = self.backend
        with be.active():
            alpha = be.num(alpha)
            return {s: be.vec([alpha * a + b for a, b in zip(x[s], y[s])]) for s in SECTORS}

    def scale_vec(self, alpha, x: dict) -> dict:
        be = self.backend
        with be.active():
            alpha = be.num(alpha)
            return {s: be.vec([alpha * a for a in x[s]]) for s in SECTORS}


@dataclass(frozen=True)
class SectorEmbedding:
    """Positions of a smaller scale's sector entries inside the larger scale's sectors."""

    small: ScaleSystem
    large: ScaleSystem
    pos: dict

    @classmethod
    def build(cls, small: ScaleSystem, large: ScaleSystem) -> "SectorEmbedding":
        idx = embed_indices(small.basis, large.basis)
        dl = large.basis.dim
        full_small = np.concatenate([idx, dl + idx])
        pos = {}
        for s in SECTORS:
            lookup = {int(v): i for i, v in enumerate(large.sectors.full_index(s))}
            pos[s] = np.array([lookup[int(full_small[j])] for j in small.sectors.full_index(s)],
                              dtype=np.int64)
        return cls(small, large, pos)

    def vec(self, v: dict) -> dict:
        be = self.large.backend
        out = {}
        with be.active():
            for s in SECTORS:
                n = sum(self.large.sizes(s))
                x = [be.num(0)] * n
                for j, val in zip(self.pos[s], v[s]):
                    x[int(j)] = val
                out[s] = be.vec(x)
        return out

    def mat(self, blocks: dict) -> dict:
        be = self.large.backend
        out = {}
        with be.active():
            for s in SECTORS:
                n = sum(self.large.sizes(s))
                src = be.to_numpy(blocks[s]) if be.name == "float64" else None
                if src is not None:
                    big = np.zeros((n, n), dtype=complex)
                    p = self.pos[s]
                    big[np.ix_(p, p)] = src
                    out[s] = big
                else:
                    big = be.zeros(n, n)
                    p = [int(v) for v in self.pos[s]]
                    m = blocks[s]
                    for a, ia in enumerate(p):
                        for b, ib in enumerate(p):
                            big[ia, ib] = m[a, b]
                    out[s] = big
        return out
