"""Precision backends and the symmetry-sector Schur resolvent.

Two backends share one interface: ``Float64`` (numpy) and ``Arb`` (python-flint
``acb_mat`` midpoints at a fixed working precision). Deep infrared scales put
contour radii far below double-precision resolution of the eigenvalue, so the
multiscale driver switches to ``Arb`` when the requested radii demand it.

Operators are kept block-diagonal over the two sectors of S = σ_3 ⊗ (−1)^N:
sector ``+`` holds (excited spin, even N) ⊕ (ground spin, odd N), sector ``-``
the remaining states. Within a sector the excited-spin diagonal block and the
ground-spin diagonal block are both diagonal, so the resolvent follows from the
Schur complement onto the excited-spin part.
"""

from __future__ import annotations

import cmath
import contextlib
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

try:  # pragma: no cover - import guard
    import flint
except ImportError:  # pragma: no cover
    flint = None

__all__ = [
    "Float64",
    "Arb",
    "make_backend",
    "Sectors",
    "SectorOp",
    "sector_resolvent",
]


class Float64:
    name = "float64"
    bits = 53

    @contextlib.contextmanager
    def active(self):
        yield self

    # scalars / vectors
    def num(self, x) -> complex:
        return complex(x)

    def to_complex(self, x) -> complex:
        return complex(x)

    def to_decimal(self, x) -> tuple[str, str]:
        x = complex(x)
        return repr(x.real), repr(x.imag)

    def phase(self, vartheta: float, on: bool = True) -> complex:
        return cmath.exp(-1j * vartheta) if on else 1.0 + 0j

    def unit_root(self, k: int, n: int) -> complex:
        return cmath.exp(2j * math.pi * k / n)

    def affine(self, const: float, phase, photon: np.ndarray) -> np.ndarray:
        return const + phase * np.asarray(photon, dtype=float)

    def vec(self, a) -> np.ndarray:
        return np.asarray(a, dtype=complex)

    def vsub(self, v, s) -> np.ndarray:
        return np.asarray(v, dtype=complex) - s

    def vrecip(self, v) -> np.ndarray:
        return 1.0 / np.asarray(v, dtype=complex)

    def vdot(self, a, b):
        return complex(np.sum(np.asarray(a, dtype=complex) * np.asarray(b, dtype=complex)))

    def vlen(self, v) -> int:
        return len(v)

    # matrices
    def mat(self, a) -> np.ndarray:
        return np.array(a, dtype=complex)

    def to_numpy(self, m) -> np.ndarray:
        return np.asarray(m, dtype=complex)

    def zeros(self, n: int, m: int) -> np.ndarray:
        return np.zeros((n, m), dtype=complex)

    def diag(self, v) -> np.ndarray:
        return np.diag(v)

    def shape(self, m) -> tuple[int, int]:
        return m.shape

    def mul(self, a, b):
        return a @ b

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def scale(self, a, s):
        return a * s

    def rowscale(self, v, a):
        return v[:, None] * a

    def colscale(self, a, v):
        return a * v[None, :]

    def inv(self, a):
        if a.shape[0] == 0:
            return a.copy()
        return np.linalg.inv(a)

    def take(self, a, rows: Sequence[int], cols: Sequence[int]):
        return a[np.ix_(np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))]

    def col(self, a, j: int):
        return a[:, j].copy()

    def matvec(self, a, v):
        return a @ v

    def blocks(self, rows: list[list[Any]]):
        return np.block(rows) if rows and rows[0] else np.zeros((0, 0), dtype=complex)

    def absmax(self, a) -> float:
        return float(np.max(np.abs(a))) if a.size else 0.0


class Arb:
    """Midpoint arithmetic in python-flint's complex ball matrices."""

    name = "arb"

    def __init__(self, bits: int):
        if flint is None:  # pragma: no cover
            raise RuntimeError("python-flint is required for extended precision")
        self.bits = int(bits)

    @contextlib.contextmanager
    def active(self):
        old = flint.ctx.prec
        flint.ctx.prec = self.bits
        try:
            yield self
        finally:
            flint.ctx.prec = old

    def num(self, x):
        if isinstance(x, flint.acb):
            return x
        if isinstance(x, (complex, np.complexfloating)):
            return flint.acb(float(x.real), float(x.imag))
        return flint.acb(x)

    def to_complex(self, x) -> complex:
        return complex(self.num(x).mid())

    def to_decimal(self, x) -> tuple[str, str]:
        x = self.num(x).mid()
        digits = int(math.ceil(self.bits * math.log10(2.0)))
        return x.real.str(digits, radius=False), x.imag.str(digits, radius=False)

    def phase(self, vartheta: float, on: bool = True):
        if not on:
            return flint.acb(1)
        return flint.acb(0, -flint.arb(vartheta)).exp()

    def unit_root(self, k: int, n: int):
        return flint.acb(flint.arb(2 * k) / n).exp_pi_i().mid()

    def affine(self, const: float, phase, photon: np.ndarray) -> list:
        c = flint.arb(const)
        return [(phase * flint.arb(float(e)) + c).mid() for e in photon]

    def vec(self, a) -> list:
        return [self.num(complex(x)) if not isinstance(x, flint.acb) else x for x in a]

    def vsub(self, v, s) -> list:
        return [(x - s).mid() for x in v]

    def vrecip(self, v) -> list:
        return [(1 / x).mid() for x in v]

    def vdot(self, a, b):
        out = flint.acb(0)
        for x, y in zip(a, b):
            out += x * y
        return out.mid()

    def vlen(self, v) -> int:
        return len(v)

    def mat(self, a):
        a = np.asarray(a, dtype=complex)
        n, m = a.shape
        return flint.acb_mat(n, m, [flint.acb(float(x.real), float(x.imag)) for x in a.ravel()])

    def to_numpy(self, m) -> np.ndarray:
        n, k = m.nrows(), m.ncols()
        if n == 0 or k == 0:
            return np.zeros((n, k), dtype=complex)
        return np.array([complex(x.mid()) for x in m.entries()], dtype=complex).reshape(n, k)

    def zeros(self, n: int, m: int):
        return flint.acb_mat(n, m)

    def diag(self, v):
        n = len(v)
        out = flint.acb_mat(n, n)
        for i, x in enumerate(v):
            out[i, i] = x
        return out

    def shape(self, m) -> tuple[int, int]:
        return (m.nrows(), m.ncols())

    @staticmethod
    def _empty(*ms) -> bool:
        return any(m.nrows() == 0 or m.ncols() == 0 for m in ms)

    def mul(self, a, b):
        if self._empty(a, b):
            return flint.acb_mat(a.nrows(), b.ncols())
        return (a * b).mid()

    def add(self, a, b):
        if self._empty(a):
            return a
        return (a + b).mid()

    def sub(self, a, b):
        if self._empty(a):
            return a
        return (a - b).mid()

    def scale(self, a, s):
        if self._empty(a):
            return a
        return (a * self.num(s)).mid()

    def rowscale(self, v, a):
        if self._empty(a):
            return a
        return self.mul(self.diag(v), a)

    def colscale(self, a, v):
        if self._empty(a):
            return a
        return self.mul(a, self.diag(v))

    def inv(self, a):
        n = a.nrows()
        if n == 0:
            return a
        ident = flint.acb_mat(n, n)
        for i in range(n):
            ident[i, i] = 1
        return a.solve(ident, algorithm="approx").mid()

    def take(self, a, rows: Sequence[int], cols: Sequence[int]):
        rows, cols = list(rows), list(cols)
        return flint.acb_mat(len(rows), len(cols), [a[i, j] for i in rows for j in cols])

    def col(self, a, j: int) -> list:
        return [a[i, j] for i in range(a.nrows())]

    def matvec(self, a, v) -> list:
        if a.ncols() == 0:
            return [flint.acb(0)] * a.nrows()
        col = flint.acb_mat(len(v), 1, list(v))
        res = (a * col).mid()
        return [res[i, 0] for i in range(res.nrows())]

    def blocks(self, rows: list[list[Any]]):
        heights = [r[0].nrows() for r in rows]
        widths = [b.ncols() for b in rows[0]]
        n, m = sum(heights), sum(widths)
        entries = []
        for r, h in zip(rows, heights):
            lists = [b.tolist() if h and b.ncols() else [[]] * h for b in r]
            for i in range(h):
                for b in lists:
                    entries.extend(b[i])
        return flint.acb_mat(n, m, entries)

    def absmax(self, a) -> float:
        if self._empty(a):
            return 0.0
        return max(abs(complex(x.mid())) for x in a.entries())


def make_backend(bits: int | None):
    """``None`` or ≤ 53 bits selects numpy doubles, otherwise python-flint."""
    if bits is None or bits <= 53:
        return Float64()
    return Arb(bits)


@dataclass(frozen=True)
class Sectors:
    """Index bookkeeping for the two S-sectors of a Fock basis of size d."""

    d: int
    even: np.ndarray
    odd: np.ndarray

    @classmethod
    def from_parity(cls, parity: np.ndarray) -> "Sectors":
        parity = np.asarray(parity)
        return cls(len(parity), np.nonzero(parity > 0)[0], np.nonzero(parity < 0)[0])

    def parts(self, s: str) -> tuple[np.ndarray, np.ndarray]:
        """(excited-spin Fock indices, ground-spin Fock indices) of sector s."""
        return (self.even, self.odd) if s == "+" else (self.odd, self.even)

    def full_index(self, s: str) -> np.ndarray:
        up, dn = self.parts(s)
        return np.concatenate([up, self.d + dn]).astype(np.int64)

    def size(self, s: str) -> int:
        up, dn = self.parts(s)
        return len(up) + len(dn)


@dataclass
class SectorOp:
    """Operator on C² ⊗ Fock stored as its two S-sector blocks."""

    sectors: Sectors
    blocks: dict  # "+" / "-" -> backend matrix in sector ordering

    def dense(self, backend) -> np.ndarray:
        d = self.sectors.d
        out = np.zeros((2 * d, 2 * d), dtype=complex)
        for s, blk in self.blocks.items():
            idx = self.sectors.full_index(s)
            out[np.ix_(idx, idx)] = backend.to_numpy(blk)
        return out


def sector_resolvent(backend, up_diag, dn_diag, phi_ud, phi_du, z):
    """(K − z)^{-1} for K = [[diag(up), Φ_ud], [Φ_du, diag(dn)]] in one sector.

    ``up_diag``/``dn_diag`` are backend vectors, ``phi_*`` backend matrices.
    Returns the full sector matrix and the Schur complement inverse.
    """
    a = backend.vsub(up_diag, z)
    binv = backend.vrecip(backend.vsub(dn_diag, z))
    x = backend.rowscale(binv, phi_du)  # D^{-1} Φ_du
    schur = backend.sub(backend.diag(a), backend.mul(phi_ud, x))
    s_inv = backend.inv(schur)
    y = backend.colscale(backend.mul(s_inv, phi_ud), binv)  # S^{-1} Φ_ud D^{-1}
    r_ud = backend.scale(y, -1)
    r_du = backend.scale(backend.mul(x, s_inv), -1)
    r_dd = backend.add(backend.diag(binv), backend.mul(x, y))
    return backend.blocks([[s_inv, r_ud], [r_du, r_dd]]), s_inv
