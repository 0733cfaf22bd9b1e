"""Shell discretization of momentum space and truncated bosonic Fock spaces."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, special

from .model import ModelParams, coupling_l2_norms, dilation_ratio

__all__ = [
    "CapacityError",
    "BasisMismatchError",
    "ShellGrid",
    "Mode",
    "ModeSet",
    "FockBasis",
    "OperatorMatrix",
    "build_shell_grid",
    "discretize_region",
    "build_modes",
    "build_basis",
    "ladder_matrices",
    "field_operator",
    "photon_hamiltonian",
    "embed_indices",
    "embed",
    "DEFAULT_BASIS_LIMIT",
]

DEFAULT_BASIS_LIMIT = 20_000


class CapacityError(RuntimeError):
    """Basis enumeration would exceed the configured size limit."""


class BasisMismatchError(ValueError):
    """Operands live on incompatible bases."""


@dataclass(frozen=True)
class ShellGrid:
    rhos: tuple[float, ...]

    @property
    def n_scales(self) -> int:
        return len(self.rhos) - 1

    @property
    def outer(self) -> tuple[float, float]:
        return (self.rhos[0], math.inf)

    @property
    def shells(self) -> tuple[tuple[float, float], ...]:
        """Shell n (1-based) is [ρ_n, ρ_{n-1}]."""
        return tuple((self.rhos[n], self.rhos[n - 1]) for n in range(1, len(self.rhos)))

    def region(self, index: int) -> tuple[float, float]:
        return self.outer if index == 0 else self.shells[index - 1]


def build_shell_grid(rho0: float, gamma: float, n: int) -> ShellGrid:
    if not (0.0 < rho0 < 1.0 and 0.0 < gamma < 0.5 and n >= 0):
        raise ValueError("need 0<rho0<1, 0<gamma<1/2, N>=0")
    rhos = [rho0]
    for _ in range(n):
        rhos.append(rhos[-1] * gamma)
    return ShellGrid(tuple(rhos))


@dataclass(frozen=True)
class Mode:
    k: float
    weight: float  # c_j, undilated restricted L² norm of G
    shell: int  # 0 = outer region
    interval: tuple[float, float]
    unit_weight: float = 0.0  # c_j at g = 1

    @property
    def omega(self) -> float:
        return self.k


@dataclass(frozen=True)
class ModeSet:
    modes: tuple[Mode, ...]

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    @property
    def k(self) -> np.ndarray:
        return np.array([m.k for m in self.modes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.modes])

    @property
    def unit_weights(self) -> np.ndarray:
        return np.array([m.unit_weight for m in self.modes])

    @property
    def shells(self) -> np.ndarray:
        return np.array([m.shell for m in self.modes], dtype=int)

    def upto(self, shell: int) -> "ModeSet":
        return ModeSet(tuple(m for m in self.modes if m.shell <= shell))

    def fingerprint(self) -> str:
        h = hashlib.sha1()
        for m in self.modes:
            h.update(np.array([m.k, m.weight, m.shell], dtype=float).tobytes())
        return h.hexdigest()[:12]


# -- mode discretization ------------------------------------------------------


def _measure(params: ModelParams, a: float, b: float):
    """Unnormalized weight of the ‖G‖² measure, 4πg²k|f(k)|², on [a, b]."""
    lam = params.lambda_uv
    return lambda k: k * np.exp(-2.0 * np.asarray(k) ** 2 / lam**2)


def _cumulative(params: ModelParams, a: float):
    return lambda x: coupling_l2_norms(params, (a, x))[1] ** 2


def _split_points(params: ModelParams, a: float, b: float, targets: Sequence[float]) -> list[float]:
    """Points x with squared norm over [a, x] equal to each target."""
    cum = _cumulative(params, a)
    points = []
    lo = a
    for t in targets:
        x = optimize.brentq(lambda x: cum(x) - t, lo, b, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                            maxiter=200)
        points.append(x)
        lo = x
    return points


def _gauss_rule(params: ModelParams, a: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss rule for the weight k|f(k)|² on [a, b] (discretized Stieltjes).

    Returns nodes and normalized weights summing to one.
    """
    n_fine = max(200, 40 * m)
    x, w = special.roots_legendre(n_fine)
    # composite rule on a few panels resolves the Gaussian tail
    panels = np.linspace(0.0, 1.0, 9)
    ts, ws = [], []
    for lo, hi in zip(panels[:-1], panels[1:]):
        ts.append(lo + (hi - lo) * (x + 1) / 2)
        ws.append((hi - lo) / 2 * w)
    t = np.concatenate(ts)
    wt = np.concatenate(ws)
    k = a + (b - a) * t
    mu = wt * _measure(params, a, b)(k)
    mu = mu / mu.sum()
    # Stieltjes procedure on the unit variable t with full reorthogonalization
    alpha = np.zeros(m)
    beta = np.zeros(m)
    q_prev = np.zeros_like(t)
    q = np.ones_like(t)
    basis = []
    for j in range(m):
        for v in basis:
            q = q - np.sum(mu * q * v) * v
        nrm = math.sqrt(np.sum(mu * q * q))
        q = q / nrm
        if j > 0:
            beta[j] = nrm
        basis.append(q)
        alpha[j] = np.sum(mu * t * q * q)
        nxt = (t - alpha[j]) * q - (beta[j] * q_prev if j > 0 else 0.0)
        q_prev, q = q, nxt
    jac = np.diag(alpha) + np.diag(beta[1:], 1) + np.diag(beta[1:], -1)
    nodes, vecs = np.linalg.eigh(jac)
    weights = vecs[0, :] ** 2
    return a + (b - a) * nodes, weights


def discretize_region(region: tuple[float, float], params: ModelParams, m: int,
                      shell: int = 0, scheme: str | None = None) -> ModeSet:
    """Replace the radial interval ``region`` by ``m`` effective s-wave modes.

    ``scheme="centroid"`` splits the region into sub-intervals of equal coupling
    weight and places each mode at the weight centroid. ``scheme="gauss"``
    places the modes at the nodes of the m-point Gauss rule of the coupling
    weight and splits the region at the points where the cumulative weight
    matches the partial sums of the Gauss weights; each node then lies in its
    sub-interval. For m=1 both schemes coincide.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    scheme = scheme or params.mode_scheme
    a, b = float(region[0]), float(region[1])
    if math.isinf(b):
        b = max(params.k_max, a)
    if not b > a:
        raise ValueError("empty region")
    unit = params.replace(g=1.0)
    total = coupling_l2_norms(unit, (a, b))[1] ** 2
    if total <= 0.0 or not math.isfinite(total):
        edges = np.linspace(a, b, m + 1)
        return ModeSet(tuple(Mode(0.5 * (lo + hi), 0.0, shell, (lo, hi), 0.0)
                             for lo, hi in zip(edges[:-1], edges[1:])))
    if scheme == "centroid" or m == 1:
        inner = _split_points(unit, a, b, [total * j / m for j in range(1, m)])
        edges = [a, *inner, b]
        nodes = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            # centroid of k·dμ over the sub-interval, in the unit variable
            x, w = special.roots_legendre(64)
            t = (x + 1) / 2
            kk = lo + (hi - lo) * t
            mu = w * _measure(unit, lo, hi)(kk)
            nodes.append(float(np.sum(mu * kk) / np.sum(mu)))
    elif scheme == "gauss":
        nodes, gw = _gauss_rule(unit, a, b, m)
        nodes = [float(v) for v in nodes]
        inner = _split_points(unit, a, b, list(total * np.cumsum(gw)[:-1]))
        edges = [a, *inner, b]
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    modes = []
    for j, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        cu = coupling_l2_norms(unit, (lo, hi))[1]
        modes.append(Mode(nodes[j], params.g * cu, shell, (lo, hi), cu))
    return ModeSet(tuple(modes))


def build_modes(params: ModelParams, n: int | None = None) -> ModeSet:
    """Modes of the outer region followed by shells 1..n (default N)."""
    n = params.n_scales if n is None else n
    grid = build_shell_grid(params.rho0, params.gamma, n)
    out = list(discretize_region(grid.outer, params, params.modes_outer, shell=0).modes)
    for idx in range(1, n + 1):
        out += discretize_region(grid.region(idx), params, params.modes_per_shell, shell=idx).modes
    return ModeSet(tuple(out))


# -- Fock basis ----------------------------------------------------------------


@dataclass(frozen=True)
class FockBasis:
    modes: ModeSet
    occupancy_cap: int
    total_cap: int | None
    states: np.ndarray = field(repr=False)  # (dim, M) occupations
    index: dict = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def tag(self) -> str:
        return f"fock[{self.n_modes}m,{self.occupancy_cap},{self.total_cap}]:{self.modes.fingerprint()}"

    def number(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def state_index(self, occ: Iterable[int]) -> int:
        return self.index[tuple(int(v) for v in occ)]


def _count(m: int, occ: int, tot: int) -> int:
    # number of occupation tuples with entries <= occ and sum <= tot
    ways = [1] + [0] * tot
    for _ in range(m):
        new = [0] * (tot + 1)
        for s, v in enumerate(ways):
            if v:
                for j in range(0, min(occ, tot - s) + 1):
                    new[s + j] += v
        ways = new
    return sum(ways)


def _compositions(total: int, m: int, occ: int):
    """Tuples of length m with entries <= occ summing to total, lexicographically descending."""
    if m == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(occ, total), -1, -1):
        for rest in _compositions(total - first, m - 1, occ):
            yield (first, *rest)


def build_basis(modes: ModeSet, occupancy_cap: int, total_cap: int | None,
                limit: int = DEFAULT_BASIS_LIMIT) -> FockBasis:
    """Graded-lexicographic enumeration; the vacuum is state 0."""
    if occupancy_cap < 1 or (total_cap is not None and total_cap < 1):
        raise ValueError("caps must be >= 1")
    m = len(modes)
    tot = m * occupancy_cap if total_cap is None else min(total_cap, m * occupancy_cap)
    size = _count(m, occupancy_cap, tot)
    if size > limit:
        raise CapacityError(f"basis size {size} exceeds limit {limit}")
    states = [s for n in range(tot + 1) for s in _compositions(n, m, occupancy_cap)]
    arr = np.array(states, dtype=np.int64).reshape(len(states), m)
    index = {s: i for i, s in enumerate(states)}
    return FockBasis(modes, occupancy_cap, total_cap, arr, index)


# -- operators -----------------------------------------------------------------


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex matrix tagged with the basis it acts on."""

    data: np.ndarray
    tag: str

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError("operator must be square")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("operator has non-finite entries")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def _check(self, other: "OperatorMatrix") -> None:
        if self.tag != other.tag:
            raise BasisMismatchError(f"{self.tag} vs {other.tag}")

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check(other)
        return OperatorMatrix(self.data + other.data, self.tag)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check(other)
        return OperatorMatrix(self.data - other.data, self.tag)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check(other)
        return OperatorMatrix(self.data @ other.data, self.tag)

    def __mul__(self, scalar: complex) -> "OperatorMatrix":
        return OperatorMatrix(self.data * scalar, self.tag)

    __rmul__ = __mul__

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.data.conj().T, self.tag)


def ladder_matrices(basis: FockBasis, j: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    """(a_j, a*_j); transitions leaving the truncated basis are dropped."""
    if not 0 <= j < basis.n_modes:
        raise IndexError(j)
    a = _annihilator(basis, j)
    return OperatorMatrix(a.astype(complex), basis.tag), OperatorMatrix(a.T.astype(complex), basis.tag)


def _annihilator(basis: FockBasis, j: int) -> np.ndarray:
    d = basis.dim
    a = np.zeros((d, d))
    occ = basis.states
    for col in np.nonzero(occ[:, j] > 0)[0]:
        tgt = occ[col].copy()
        tgt[j] -= 1
        row = basis.index[tuple(int(v) for v in tgt)]
        a[row, col] = math.sqrt(occ[col, j])
    return a


def _shell_mask(basis: FockBasis, shells: Iterable[int] | None) -> np.ndarray:
    if shells is None:
        return np.ones(basis.n_modes, dtype=bool)
    wanted = set(shells)
    return np.array([m.shell in wanted for m in basis.modes], dtype=bool)


def field_coefficients(basis: FockBasis, params: ModelParams, theta_on: bool,
                       shells: Iterable[int] | None = None,
                       unit: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode coefficients of a*_j and a_j in the (dilated) field."""
    c = (basis.modes.unit_weights if unit else basis.modes.weights).astype(complex)
    mask = _shell_mask(basis, shells)
    c = np.where(mask, c, 0.0)
    if not theta_on or basis.n_modes == 0:
        return c.copy(), c.copy()
    k = basis.modes.k
    return c * dilation_ratio(k, params), c * dilation_ratio(k, params, conjugate_branch=True)


def field_operator(basis: FockBasis, params: ModelParams, theta_on: bool,
                   shells: Iterable[int] | None = None, unit: bool = False) -> OperatorMatrix:
    """Φ = Σ_j [cre_j a*_j + ann_j a_j] restricted to the selected shells.

    The coefficients carry g through the mode weights c_j; ``unit`` drops it.
    """
    cre, ann = field_coefficients(basis, params, theta_on, shells, unit)
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j in range(basis.n_modes):
        if cre[j] == 0 and ann[j] == 0:
            continue
        a = _annihilator(basis, j)
        out += ann[j] * a + cre[j] * a.T
    return OperatorMatrix(out, basis.tag)


def photon_energies(basis: FockBasis, shells: Iterable[int] | None = None) -> np.ndarray:
    """Σ_j ω_j n_j per state over the selected modes, correctly rounded."""
    mask = _shell_mask(basis, shells)
    om = np.where(mask, basis.modes.k, 0.0) if basis.n_modes else np.zeros(0)
    return np.array([math.fsum(om * row) for row in basis.states]) if basis.n_modes else np.zeros(1)


def photon_hamiltonian(basis: FockBasis, shells: Iterable[int] | None = None) -> OperatorMatrix:
    return OperatorMatrix(np.diag(photon_energies(basis, shells)).astype(complex), basis.tag)


def embed_indices(small: FockBasis, large: FockBasis) -> np.ndarray:
    """Index in ``large`` of every state of ``small`` padded with empty new modes."""
    m = small.n_modes
    if large.n_modes < m or large.modes.modes[:m] != small.modes.modes:
        raise BasisMismatchError("small basis modes are not a prefix of the large basis modes")
    if small.occupancy_cap != large.occupancy_cap or small.total_cap != large.total_cap:
        raise BasisMismatchError("caps differ")
    pad = (0,) * (large.n_modes - m)
    return np.array([large.index[tuple(int(v) for v in s) + pad] for s in small.states], dtype=np.int64)


def embed(obj: np.ndarray | OperatorMatrix, small: FockBasis, large: FockBasis,
          spin: bool = True) -> np.ndarray:
    """Tensor a vector or operator with the new-mode vacuum projection.

    With ``spin`` the objects live on C² ⊗ Fock (spin-major ordering).
    """
    data = obj.data if isinstance(obj, OperatorMatrix) else np.asarray(obj)
    idx = embed_indices(small, large)
    if spin:
        idx = np.concatenate([idx, idx + large.dim])
        dim = 2 * large.dim
    else:
        dim = large.dim
    if data.ndim == 1:
        out = np.zeros(dim, dtype=np.result_type(data, complex))
        out[idx] = data
        return out
    out = np.zeros((dim, dim), dtype=np.result_type(data, complex))
    out[np.ix_(idx, idx)] = data
    return out
