"""Model parameters, the (dilated) coupling function and the parameter-restriction chain."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "ParameterError",
    "DomainError",
    "ModelParams",
    "DerivedConstants",
    "Restriction",
    "RestrictionReport",
    "form_factor",
    "eval_coupling",
    "dilation_ratio",
    "coupling_l2_norms",
    "derive_constants",
    "constant_Cn",
    "check_parameter_chain",
]

QUAD_RTOL = 1e-12


class ParameterError(ValueError):
    """Raised when a parameter record violates its invariants."""


class DomainError(ValueError):
    """Raised when the coupling is evaluated outside k > 0."""


@dataclass(frozen=True)
class ModelParams:
    """Physical, scale and truncation parameters.

    ``g`` is allowed to be zero (the decoupled limit); every other
    invariant is enforced on construction.
    """

    g: float = 1e-3
    vartheta: float = 0.5
    lambda_uv: float = 1.0
    rho0: float = 0.1
    gamma: float = 0.25
    n_scales: int = 2
    modes_per_shell: int = 1
    modes_outer: int = 8
    occupancy_cap: int = 2
    total_cap: int = 4
    k_max_factor: float = 6.0
    mode_scheme: str = "gauss"

    def __post_init__(self) -> None:
        bad = []
        if not (0.0 < self.vartheta < math.pi / 6):
            bad.append("vartheta")
        if not (0.0 < self.rho0 < 1.0):
            bad.append("rho0")
        if not (0.0 < self.gamma < 0.5):
            bad.append("gamma")
        if not (self.g >= 0.0 and math.isfinite(self.g)):
            bad.append("g")
        if not (self.lambda_uv > 0.0 and math.isfinite(self.lambda_uv)):
            bad.append("lambda_uv")
        if self.n_scales < 0:
            bad.append("n_scales")
        for name in ("modes_per_shell", "modes_outer", "occupancy_cap", "total_cap"):
            if getattr(self, name) < 1:
                bad.append(name)
        if not self.k_max_factor > 0.0:
            bad.append("k_max_factor")
        if self.mode_scheme not in ("gauss", "centroid"):
            bad.append("mode_scheme")
        if bad:
            raise ParameterError(f"invalid parameters: {', '.join(bad)}")

    @property
    def theta(self) -> complex:
        return 1j * self.vartheta

    @property
    def k_max(self) -> float:
        return self.k_max_factor * self.lambda_uv

    def rho(self, n: int) -> float:
        """Cutoff ρ_n = ρ_0 γ^n, built multiplicatively."""
        r = self.rho0
        for _ in range(n):
            r *= self.gamma
        return r

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def form_factor(k, lambda_uv: float):
    """Ultraviolet form factor f(k) = exp(-k²/Λ²); accepts complex k."""
    return np.exp(-(np.asarray(k) ** 2) / lambda_uv**2)


def eval_coupling(k: float, theta_on: bool, params: ModelParams) -> complex:
    """G(k) = g f(k)/√k, or its dilated continuation g e^{-iϑ} f(e^{-iϑ}k)/√k."""
    if not k > 0.0:
        raise DomainError(f"coupling is singular at k={k!r}; need k > 0")
    if not theta_on:
        return complex(params.g * form_factor(k, params.lambda_uv) / math.sqrt(k))
    phase = np.exp(-1j * params.vartheta)
    return complex(params.g * phase * form_factor(phase * k, params.lambda_uv) / math.sqrt(k))


def dilation_ratio(k, params: ModelParams, conjugate_branch: bool = False):
    """Ratio of the dilated to the undilated coupling at real k > 0.

    With ``conjugate_branch`` the ratio uses conj(G_{θ̄}), the coefficient of
    the annihilation part of the dilated field.
    """
    k = np.asarray(k, dtype=float)
    lam = params.lambda_uv
    if conjugate_branch:
        up = np.exp(1j * params.vartheta)
        num = np.conj(up * form_factor(up * k, lam))
    else:
        down = np.exp(-1j * params.vartheta)
        num = down * form_factor(down * k, lam)
    return num / form_factor(k, lam)


def _abs_f2(params: ModelParams, theta_on: bool) -> Callable[[float], float]:
    lam = params.lambda_uv
    if not theta_on:
        return lambda k: math.exp(-2.0 * k * k / lam**2)
    phase = complex(math.cos(params.vartheta), -math.sin(params.vartheta))
    return lambda k: abs(complex(form_factor(phase * k, lam))) ** 2


def coupling_l2_norms(
    params: ModelParams,
    region: tuple[float, float],
    theta_on: bool = False,
) -> tuple[float, float]:
    """(‖G/√ω‖, ‖G‖) restricted to the radial interval ``region``.

    The squared norms are 4π∫|G|² k dk and 4π∫|G|² k² dk with |G|² = g²|f|²/k.
    """
    a, b = float(region[0]), float(region[1])
    if a < 0.0:
        raise DomainError("region must lie in (0, inf)")
    if params.g == 0.0 or not b > a:
        return 0.0, 0.0
    f2 = _abs_f2(params, theta_on)
    kw = dict(epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    # Scale the variable to the unit interval so tiny shells keep full relative accuracy.
    if math.isinf(b):
        s1, _ = integrate.quad(f2, a, math.inf, **kw)
        s2, _ = integrate.quad(lambda k: k * f2(k), a, math.inf, **kw)
    else:
        w = b - a
        s1, _ = integrate.quad(lambda t: f2(a + w * t), 0.0, 1.0, **kw)
        s2, _ = integrate.quad(lambda t: (a + w * t) * f2(a + w * t), 0.0, 1.0, **kw)
        s1 *= w
        s2 *= w
    pref = 4.0 * math.pi * params.g**2
    return math.sqrt(pref * s1), math.sqrt(pref * s2)


def _unit_g(params: ModelParams) -> ModelParams:
    return params.replace(g=1.0)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from a parameter record."""

    c_f: float
    energy_constant: float
    delta_disk: float
    delta_strip: float
    theta_d: float
    c_fs: float
    cn_ratio: float
    c_n: tuple[float, ...]
    contour_radii: tuple[float, ...]
    rhos: tuple[float, ...] = field(repr=False)

    @property
    def delta_geom(self) -> float:
        return self.theta_d


def _c_f(params: ModelParams) -> float:
    grid = np.linspace(0.0, params.rho0, 10_001)
    return float(np.max(np.abs(form_factor(grid, params.lambda_uv))))


def derive_constants(params: ModelParams) -> DerivedConstants:
    """Evaluate C_f, δ, ϑd, C_FS, the C_n sequence and the contour radii.

    ϑd is the smaller of the disk distance 2 sin ϑ − Cg and the strip
    distance, where the strip formula is evaluated with the worst case
    Im E ≤ Cg and ρ_{n+1} ≤ ρ_1.
    """
    s = math.sin(params.vartheta)
    c_f = _c_f(params)
    energy_constant = 9.0 * math.sqrt(math.pi) * c_f / (1.0 - params.gamma)
    cg = energy_constant * params.g
    delta_disk = 2.0 * s - cg
    delta_strip = s * (
        2.0 - params.rho0 / 4.0 - math.cos(params.vartheta) * (cg + 0.5 * s * params.rho(1))
    )
    theta_d = min(delta_disk, delta_strip)
    c_fs = 2.0 + 7.0 / theta_d if theta_d > 0 else math.inf
    ratio = 1120.0 / s + 600.0 / (theta_d * s) if theta_d > 0 else math.inf
    n_max = params.n_scales + 1
    c_n = tuple(43.0 * ratio**n for n in range(n_max + 1))
    rhos = tuple(params.rho(n) for n in range(n_max + 1))
    radii = tuple(s / 8.0 * r for r in rhos)
    return DerivedConstants(
        c_f=c_f,
        energy_constant=energy_constant,
        delta_disk=delta_disk,
        delta_strip=delta_strip,
        theta_d=theta_d,
        c_fs=c_fs,
        cn_ratio=ratio,
        c_n=c_n,
        contour_radii=radii,
        rhos=rhos,
    )


def constant_Cn(n: int, consts: DerivedConstants) -> float:
    """C_n = 43 (1120/sin ϑ + 600/(ϑd sin ϑ))^n."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 43.0 * consts.cn_ratio**n


@dataclass(frozen=True)
class Restriction:
    name: str
    value: float
    bound: float
    passed: bool
    required: bool = True
    note: str = ""


@dataclass(frozen=True)
class RestrictionReport:
    entries: tuple[Restriction, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.required)

    def __getitem__(self, name: str) -> Restriction:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self) -> list[str]:
        return [e.name for e in self.entries if e.required and not e.passed]

    def format(self) -> str:
        lines = []
        for e in self.entries:
            tag = "pass" if e.passed else "FAIL"
            if not e.required:
                tag += " (informational)"
            lines.append(f"{e.name:28s} {e.value:.6e} < {e.bound:.6e}  {tag}  {e.note}".rstrip())
        lines.append("overall: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)


def _lt(name: str, value: float, bound: float, required: bool = True, note: str = "") -> Restriction:
    return Restriction(name, float(value), float(bound), bool(value < bound), required, note)


def check_parameter_chain(params: ModelParams) -> RestrictionReport:
    """Evaluate every restriction of the chain with strict inequalities."""
    s = math.sin(params.vartheta)
    consts = derive_constants(params)
    cf, td, cfs = consts.c_f, consts.theta_d, consts.c_fs
    a_th, b_th = coupling_l2_norms(_unit_g(params), (0.0, math.inf), theta_on=True)
    entries = [
        _lt("theta", params.vartheta, math.pi / 6),
        _lt("gamma_half", params.gamma, 0.5),
        _lt("rho0_sin", params.rho0, (s / 100.0) ** 4),
        _lt("rho0_43", params.rho0, (1.0 / 43.0) ** 4),
        _lt("gamma_625", params.gamma, 1.0 / 625.0),
        _lt("gamma_constants_printed", params.gamma, consts.cn_ratio**4, required=False,
            note="exponent +4 as printed"),
        _lt("gamma_constants_inverse", params.gamma, consts.cn_ratio**-4,
            note="exponent -4"),
        Restriction("delta_positive", -td, 0.0, td > 0.0, True, "value is -theta_d"),
    ]
    if td > 0:
        bound1 = (1.0 / 6.0) / (
            8.0 / (s * math.sqrt(2.0 * params.rho0)) * (a_th + b_th / math.sqrt(params.rho0))
        )
        entries += [
            _lt("g_restriction_1", params.g, bound1),
            _lt("g_neumann_step", params.g**2 * 4100.0 * cf**2 * math.pi / (s * params.gamma * td), 0.5,
                note="value is g^2*4100*C_f^2*pi/(sin*gamma*theta_d)"),
            _lt("g_final_sqrt", params.g,
                0.25 * math.sqrt(s * params.gamma * td / (4100.0 * cf**2 * math.pi))),
            _lt("g_restriction_2", params.g, 1.0 / (cfs * (a_th + b_th))),
            _lt("g_restriction_3", params.g, 1.0 / (1.5 * math.sqrt(math.pi) * cfs * cf)),
            _lt("g_restriction_4", params.g, s * params.gamma / (72.0 * math.sqrt(math.pi) * cf)),
        ]
        # log-space keeps ρ_n^{1/4} C_n finite for deep grids
        worst = max(
            0.25 * math.log(params.rho0) + 0.25 * n * math.log(params.gamma)
            + math.log(43.0) + n * math.log(consts.cn_ratio)
            for n in range(params.n_scales + 1)
        )
        entries.append(_lt("rho_n_Cn", math.exp(worst), 1.0, note="max over n<=N of rho_n^(1/4)*C_n"))
    return RestrictionReport(tuple(entries))
