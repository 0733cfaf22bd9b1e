"""Independent checks: a dense eigenvalue routine, a winding-number counter and
the second-order perturbative resonance."""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import integrate

from .fock import OperatorMatrix
from .model import ModelParams, form_factor

__all__ = [
    "OracleError",
    "hessenberg",
    "dense_spectrum",
    "count_inside",
    "self_energy_integral",
    "perturbative_resonance",
]

MAX_DENSE_DIM = 1000


class OracleError(RuntimeError):
    pass


def _as_array(m) -> np.ndarray:
    return (m.data if isinstance(m, OperatorMatrix) else np.asarray(m)).astype(complex)


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form by Householder similarity transforms."""
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        h[k + 2:, k] = 0.0
    return h


def _givens(a: complex, b: complex) -> tuple[float, complex, complex]:
    # returns (c, s, r) with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, np.conj(b) / abs(b), abs(b)
    na, nb = abs(a), abs(b)
    nr = math.hypot(na, nb)
    c = na / nr
    s = (a / na) * np.conj(b) / nr
    return c, s, (a / na) * nr


def _wilkinson(h: np.ndarray, hi: int) -> complex:
    a, b = h[hi - 1, hi - 1], h[hi - 1, hi]
    c, d = h[hi, hi - 1], h[hi, hi]
    tr, det = a + d, a * d - b * c
    disc = cmath.sqrt(tr * tr / 4 - det)
    l1, l2 = tr / 2 + disc, tr / 2 - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def dense_spectrum(M, max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues via Hessenberg reduction and shifted complex QR sweeps.

    Deflation uses the standard small-subdiagonal criterion; exceptional shifts
    are applied every 11 stalled sweeps.
    """
    a = _as_array(M)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("square matrix required")
    if n > MAX_DENSE_DIM:
        raise ValueError(f"dimension {n} exceeds {MAX_DENSE_DIM}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    h = hessenberg(a)
    eps = np.finfo(float).eps
    eig = np.zeros(n, dtype=complex)
    hi = n - 1
    stall = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        # find the active unreduced block [lo, hi]
        lo = hi
        while lo > 0:
            scale = abs(h[lo, lo]) + abs(h[lo - 1, lo - 1])
            if scale == 0:
                scale = np.max(np.abs(h[: hi + 1, : hi + 1]))
            if abs(h[lo, lo - 1]) <= eps * scale:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            stall = 0
            continue
        stall += 1
        if stall > max_sweeps * 10:
            raise OracleError("QR iteration did not converge")
        if stall % 11 == 0:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * (1 + 1j)
        else:
            mu = _wilkinson(h, hi)
        # one explicit shifted QR step on the active block
        rot = []
        for k in range(lo, hi + 1):
            h[k, k] -= mu
        for k in range(lo, hi):
            c, s, _ = _givens(h[k, k], h[k + 1, k])
            rows = h[k:k + 2, k:hi + 1]
            top = c * rows[0] + s * rows[1]
            bot = -np.conj(s) * rows[0] + c * rows[1]
            h[k, k:hi + 1], h[k + 1, k:hi + 1] = top, bot
            rot.append((c, s))
        for k, (c, s) in zip(range(lo, hi), rot):
            r1 = min(k + 2, hi) + 1
            cols = h[lo:r1, k:k + 2]
            left = c * cols[:, 0] + np.conj(s) * cols[:, 1]
            right = -s * cols[:, 0] + c * cols[:, 1]
            h[lo:r1, k], h[lo:r1, k + 1] = left, right
        for k in range(lo, hi + 1):
            h[k, k] += mu
    return eig


def count_inside(M, center: complex, radius: float, nodes: int = 256,
                 max_nodes: int = 1 << 16) -> int:
    """Winding number of det(M − z) around the circle, by phase tracking.

    Node spacing is refined locally whenever consecutive phases jump by more
    than π/2.
    """
    a = _as_array(M)
    eye = np.eye(a.shape[0])

    def phase(t: float) -> float:
        z = center + radius * cmath.exp(1j * t)
        sign, _ = np.linalg.slogdet(a - z * eye)
        if sign == 0:
            raise OracleError(f"eigenvalue on contour near z={z}")
        return cmath.phase(sign)

    if nodes < 256:
        raise ValueError("need at least 256 nodes")
    ts = list(np.linspace(0.0, 2.0 * math.pi, nodes + 1))
    phs = [phase(t) for t in ts[:-1]]
    phs.append(phs[0])
    total = 0.0
    i = 0
    budget = max_nodes
    while i < len(ts) - 1:
        d = (phs[i + 1] - phs[i] + math.pi) % (2.0 * math.pi) - math.pi
        if abs(d) > math.pi / 2:
            if budget <= 0 or ts[i + 1] - ts[i] < 1e-12:
                raise OracleError("phase jump not resolved by refinement")
            tm = 0.5 * (ts[i] + ts[i + 1])
            ts.insert(i + 1, tm)
            phs.insert(i + 1, phase(tm))
            budget -= 1
            continue
        total += d
        i += 1
    return int(round(total / (2.0 * math.pi)))


def self_energy_integral(params: ModelParams, z: complex = 2.0, rtol: float = 1e-11) -> complex:
    """I(z) = ∫ 4πk e^{-2iϑ} f(e^{-iϑ}k)² / (e^{-iϑ}k − z) dk over (0, ∞), with unit g.

    The vacuum self-energy of the effective operator is −g² I(z); the
    integral is independent of ϑ for real z away from the real spectrum by
    analyticity, which the tests use as a check.
    """
    ph = cmath.exp(-1j * params.vartheta)
    lam = params.lambda_uv

    def integrand(k: float) -> complex:
        q = ph * k
        return 4.0 * math.pi * k * ph * ph * complex(form_factor(q, lam)) ** 2 / (q - z)

    # Gaussian tail: 12Λ gives exp(-288) relative truncation.
    top = 12.0 * lam * max(1.0, abs(z) / lam)
    pts = sorted({abs(z), 2.0 * lam, top / 2})
    pts = [p for p in pts if 0 < p < top]
    kw = dict(limit=400, points=pts)
    # The imaginary part can cancel to far below the integrand size, so the
    # absolute tolerance is tied to the modulus of the whole integral.
    mag, _ = integrate.quad(lambda k: abs(integrand(k)), 0.0, top, epsabs=0.0, epsrel=1e-6, **kw)
    tol = dict(epsabs=1e-3 * rtol * mag, epsrel=rtol)
    re, _ = integrate.quad(lambda k: integrand(k).real, 0.0, top, **tol, **kw)
    im, _ = integrate.quad(lambda k: integrand(k).imag, 0.0, top, **tol, **kw)
    return complex(re, im)


def perturbative_resonance(params: ModelParams) -> complex:
    """E₂ = 2 − g² I(2), independent of any mode discretization."""
    if params.g == 0.0:
        return 2.0 + 0j
    return 2.0 - params.g**2 * self_energy_integral(params, 2.0)
