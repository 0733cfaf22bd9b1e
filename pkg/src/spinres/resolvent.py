"""Dense resolvent solves, operator norms, contraction and resolvent-bound audits.

The region predicates take z relative to the atomic level, i.e. ``z2 = z - 2``,
and the cut-out sets are tested on the offset from the current eigenvalue so
that very deep scales stay representable in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg as sla

from .fock import OperatorMatrix
from .model import ModelParams

__all__ = [
    "NearEigenvalueError",
    "NonConvergenceError",
    "NormEstimate",
    "AuditResult",
    "apply_resolvent",
    "operator_norm",
    "neumann_contraction",
    "resolvent_bound_audit",
    "in_region_A",
    "in_region_A0",
    "in_region_Am",
    "in_region_A_tilde",
    "halton",
    "sample_region",
    "sample_region_A0",
    "sample_region_Am",
    "sample_region_A_tilde",
]

RESIDUAL_TOL = 1e-10


class NearEigenvalueError(ArithmeticError):
    """(H - z) is singular to working tolerance."""

    def __init__(self, z, detail: str = ""):
        self.z = z
        super().__init__(f"z={z!r} is numerically an eigenvalue" + (f" ({detail})" if detail else ""))


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class NormEstimate:
    value: float
    rel_err: float
    iterations: int


@dataclass(frozen=True)
class AuditResult:
    name: str
    measured: float
    bound: float
    passed: bool
    detail: str = ""

    @property
    def slack(self) -> float:
        """bound / measured (inf when the measured value is 0)."""
        return math.inf if self.measured == 0 else self.bound / self.measured

    def as_dict(self) -> dict:
        return {"measured": self.measured, "bound": self.bound, "passed": self.passed,
                "slack": self.slack, "detail": self.detail}


def _data(m) -> np.ndarray:
    return m.data if isinstance(m, OperatorMatrix) else np.asarray(m)


def apply_resolvent(H, z: complex, v: np.ndarray) -> np.ndarray:
    """u = (H - z)^{-1} v by pivoted LU, with a residual check."""
    a = _data(H).astype(complex) - z * np.eye(_data(H).shape[0])
    v = np.asarray(v, dtype=complex)
    try:
        lu = sla.lu_factor(a, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:  # pragma: no cover - defensive
        raise NearEigenvalueError(z, str(exc)) from exc
    piv = np.abs(np.diag(lu[0]))
    scale = max(np.max(np.abs(a)), 1e-300)
    if piv.min() <= 1e-12 * scale:
        raise NearEigenvalueError(z, f"pivot {piv.min():.3e}")
    u = sla.lu_solve(lu, v)
    nv = np.linalg.norm(v)
    res = np.linalg.norm(a @ u - v)
    if not np.all(np.isfinite(u)) or res > RESIDUAL_TOL * max(nv, 1e-300):
        raise NearEigenvalueError(z, f"residual {res:.3e}")
    return u


def operator_norm(M, seed: int = 0, tol: float = 1e-8, max_iter: int = 10_000,
                  block: int = 6, grow_every: int = 50) -> NormEstimate:
    """Largest singular value by power iteration on M*M.

    A block of iterates with Rayleigh-Ritz extraction is used so that repeated
    top singular values do not stall convergence; the block doubles every
    ``grow_every`` iterations without convergence, which handles tight clusters.
    ``rel_err`` is ‖M*Mx − λx‖/λ for the top Ritz vector x, which bounds the
    distance of λ to the spectrum of M*M relative to λ.
    """
    m = _data(M).astype(complex)
    if m.size == 0 or not np.any(m):
        return NormEstimate(0.0, 0.0, 0)
    # Rescale first so tiny or huge operators do not under/overflow.
    s = float(np.max(np.abs(m)))
    m = m / s
    rng = np.random.default_rng(seed)
    n = m.shape[1]
    k = max(1, min(block, n))
    x = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    x, _ = np.linalg.qr(x)
    gram = m.conj().T @ m if n <= 2 * m.shape[0] else None

    def apply(v: np.ndarray) -> np.ndarray:
        return gram @ v if gram is not None else m.conj().T @ (m @ v)

    err = math.inf
    for it in range(1, max_iter + 1):
        y = apply(x)
        # Rayleigh-Ritz on span(x)
        small = x.conj().T @ y
        w, v = np.linalg.eigh(0.5 * (small + small.conj().T))
        lam = float(w[-1])
        top = x @ v[:, -1]
        if lam > 0.0:
            err = float(np.linalg.norm(y @ v[:, -1] - lam * top)) / lam
            if err <= tol:
                return NormEstimate(s * math.sqrt(lam), err / 2.0, it)
        nxt = y @ v[:, ::-1] if lam > 0.0 else x
        if it % grow_every == 0 and k < n:
            extra = min(k, n - k)
            nxt = np.hstack([nxt, rng.standard_normal((n, extra)) + 1j * rng.standard_normal((n, extra))])
            k += extra
        x, _ = np.linalg.qr(nxt)
    raise NonConvergenceError(f"power iteration stalled at rel_err {err:.2e}")


def neumann_contraction(H0, W, g: float, z: complex) -> float:
    """κ = g‖W (H0 − z)^{-1}‖ with H0 diagonal or dense."""
    if g == 0.0:
        return 0.0
    h0 = _data(H0)
    w = _data(W)
    if np.count_nonzero(h0 - np.diag(np.diag(h0))) == 0:
        d = np.diag(h0) - z
        if np.min(np.abs(d)) <= 1e-12 * max(1.0, np.max(np.abs(d))):
            raise NearEigenvalueError(z, "diagonal H0")
        prod = w / d[None, :]
    else:
        prod = sla.solve((h0 - z * np.eye(h0.shape[0])).T, w.T).T
    return g * operator_norm(prod).value


def resolvent_bound_audit(H, z: complex, Pbar, C: float, rho: float, E: complex,
                          vartheta: float, name: str = "resolvent_bound") -> AuditResult:
    """Check ‖(H − z)^{-1} P̄‖ ≤ C / ((sin ϑ / 2) ρ + |z − E|)."""
    pb = _data(Pbar)
    bound = C / (0.5 * math.sin(vartheta) * rho + abs(z - E))
    if not np.any(pb):
        return AuditResult(name, 0.0, bound, True, "Pbar = 0")
    h = _data(H)
    a = h - z * np.eye(h.shape[0])
    prod = sla.solve(a, pb)
    val = operator_norm(prod).value
    return AuditResult(name, val, bound, val <= bound)


# -- regions ----------------------------------------------------------------------


def in_region_A(z2: complex, params: ModelParams) -> bool:
    """z − 2 ∈ R − e^{-iϑ}[0, ∞) with R the closed rectangle of half-widths ρ0/4, sin ϑ ρ0/4."""
    a = params.rho0 / 4.0
    b = math.sin(params.vartheta) * params.rho0 / 4.0
    c, s = math.cos(params.vartheta), math.sin(params.vartheta)
    x, y = z2.real, z2.imag
    lo = max(0.0, (-a - x) / c, (y - b) / s)
    hi = min((a - x) / c, (y + b) / s)
    return lo <= hi


def in_region_A0(z2: complex, params: ModelParams) -> bool:
    return in_region_A(z2, params) and abs(z2) >= math.sin(params.vartheta) / 16.0 * params.rho0


def _cut(w: complex, depth: float) -> bool:
    # points E + r − is with s > depth are removed
    return -w.imag > depth


def in_region_Am(w: complex, e2: complex, params: ModelParams, m: int) -> bool:
    """z = E_m + w, with e2 ≈ E_m − 2 used only for the O(ρ0) test against A."""
    if _cut(w, math.sin(params.vartheta) / 4.0 * params.rho(m)):
        return False
    return in_region_A(e2 + w, params)


def in_region_A_tilde(w: complex, e2: complex, params: ModelParams, n: int) -> bool:
    if _cut(w, math.sin(params.vartheta) / 2.0 * params.rho(n + 1)):
        return False
    return in_region_A(e2 + w, params)


def halton(i: int, base: int) -> float:
    f, r = 1.0, 0.0
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


def sample_region(pred: Callable[[complex], bool], r_min: float, r_max: float, count: int,
                  boundary: Callable[[int], complex] | None = None, n_boundary: int = 0,
                  max_tries: int = 100_000) -> list[complex]:
    """Deterministic quasi-random offsets w with r_min ≤ |w| ≤ r_max and pred(w).

    Radii are log-uniform in a Halton sequence; the first ``n_boundary``
    accepted points come from the ``boundary`` generator when given.
    """
    out: list[complex] = []
    if boundary is not None:
        j = 0
        while len(out) < n_boundary and j < max_tries:
            w = boundary(j)
            j += 1
            if pred(w) and r_min <= abs(w) <= r_max:
                out.append(w)
    lr0, lr1 = math.log(r_min), math.log(r_max)
    i = 1
    while len(out) < count and i < max_tries:
        rad = math.exp(lr0 + (lr1 - lr0) * halton(i, 2))
        ang = 2.0 * math.pi * halton(i, 3)
        w = rad * complex(math.cos(ang), math.sin(ang))
        i += 1
        if pred(w):
            out.append(w)
    if len(out) < count:
        raise RuntimeError(f"only {len(out)} of {count} samples found in region")
    return out


def _cut_boundary(depth: float, r_min: float, r_max: float) -> Callable[[int], complex]:
    def gen(j: int) -> complex:
        # points just above the cut line Im w = -depth, log-spaced in |Re w|, both sides
        t = halton(j + 1, 2)
        x = math.exp(math.log(r_min) + (math.log(r_max) - math.log(r_min)) * t)
        sign = 1.0 if j % 2 == 0 else -1.0
        return complex(sign * x, -depth * (1.0 - 1e-9))
    return gen


def sample_region_A0(params: ModelParams, count: int = 64) -> list[complex]:
    """Offsets z − 2 in A_0."""
    s = math.sin(params.vartheta)
    r_min = s / 16.0 * params.rho0
    return sample_region(lambda w: in_region_A0(w, params), r_min, 4.0 * params.rho0, count)


def sample_region_Am(params: ModelParams, m: int, e2: complex, count: int = 32,
                     near: float | None = None) -> list[complex]:
    """Offsets z − E_m in A_m, half on the cut boundary, the rest in an annulus.

    ``near`` is the smallest admitted |z − E_m| (default sin ϑ ρ_m / 16).
    """
    s = math.sin(params.vartheta)
    rho = params.rho(m)
    r_min = near if near is not None else s / 16.0 * rho
    r_max = max(4.0 * params.rho0, 2.0 * r_min)
    depth = s / 4.0 * rho
    bnd = _cut_boundary(depth, max(r_min, depth / 4.0), max(rho, 2.0 * depth))
    return sample_region(lambda w: in_region_Am(w, e2, params, m), r_min, r_max, count,
                         bnd, count // 2)


def sample_region_A_tilde(params: ModelParams, n: int, e2: complex, count: int = 32) -> list[complex]:
    """Offsets z − E_n in Ã_n with |z − E_n| ≥ sin ϑ ρ_{n+1} / 16."""
    s = math.sin(params.vartheta)
    rho = params.rho(n + 1)
    r_min = s / 16.0 * rho
    r_max = max(4.0 * params.rho0, 2.0 * r_min)
    depth = s / 2.0 * rho
    bnd = _cut_boundary(depth, max(r_min, depth / 4.0), max(rho, 2.0 * depth))
    return sample_region(lambda w: in_region_A_tilde(w, e2, params, n), r_min, r_max, count,
                         bnd, count // 2)
