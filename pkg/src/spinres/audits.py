"""Lemma-level bound audits on the constructed finite operators.

Each audit compares a measured operator norm with the analytic right-hand
side; a failed audit is data, not an exception. The worst case over the
sampled spectral parameters is reported.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .engine import SECTORS, ScaleSystem, SectorEmbedding, sector_norm
from .fock import FockBasis, field_coefficients, field_operator, photon_energies
from .model import ModelParams, constant_Cn, coupling_l2_norms, derive_constants
from .resolvent import AuditResult, operator_norm, sample_region_A_tilde

__all__ = [
    "standard_estimate_audit",
    "feshbach_cutoff_audit",
    "neumann_shell_audit",
    "scale0_lemma_audits",
    "step_lemma_audits",
]


def _support(params: ModelParams, n: int) -> tuple[float, float]:
    """Radial support of the modes present at scale n."""
    return params.rho(n), params.k_max


def _unit(params: ModelParams) -> ModelParams:
    return params.replace(g=1.0)


def _max_shell(basis: FockBasis) -> int:
    return int(basis.modes.shells.max()) if basis.n_modes else 0


def standard_estimate_audit(params: ModelParams, basis: FockBasis, rho: float,
                            dilated: bool = False, name: str | None = None) -> AuditResult:
    """‖Φ(G)(H_ph + ρ)^{-1/2}‖ ≤ 2(‖G/√ω‖ + ρ^{-1/2}‖G‖) on the truncated space.

    The norms on the right are continuum norms over the radial support of the
    basis modes. With ``dilated`` the field is the dilated one and the norms
    are those of G_θ, which is how the estimate enters the cutoff lemma.
    """
    n = _max_shell(basis)
    fld = field_operator(basis, params, dilated, unit=True).data
    hph = photon_energies(basis)
    measured = operator_norm(fld / np.sqrt(hph + rho)[None, :]).value
    a, b = coupling_l2_norms(_unit(params), _support(params, n), theta_on=dilated)
    bound = 2.0 * (a + b / math.sqrt(rho))
    label = name or f"standard_estimate_rho{rho:g}" + ("_dilated" if dilated else "")
    return AuditResult(label, params.g * measured, params.g * bound,
                       params.g * measured <= params.g * bound,
                       f"rho={rho:g}; norms over [{_support(params, n)[0]:.3e}, k_max]")


def feshbach_cutoff_audit(params: ModelParams, basis: FockBasis, z_values: Iterable[complex],
                          n: int | None = None) -> list[AuditResult]:
    """‖gΦ_θ(e^{-θ}H_ph − z)^{-1}‖ and ‖(e^{-θ}H_ph − z)^{-1}gΦ_θ‖ against g·C_FS(‖G/√ω‖ + ‖G‖)."""
    n = _max_shell(basis) if n is None else n
    consts = derive_constants(params)
    fld = field_operator(basis, params, True, unit=True).data
    phase = np.exp(-1j * params.vartheta)
    hph = photon_energies(basis)
    a, b = coupling_l2_norms(_unit(params), _support(params, n), theta_on=True)
    bound = params.g * consts.c_fs * (a + b)
    right = left = 0.0
    zs = list(z_values)
    for z in zs:
        dinv = 1.0 / (phase * hph - z)
        right = max(right, operator_norm(fld * dinv[None, :]).value)
        left = max(left, operator_norm(dinv[:, None] * fld).value)
    out = []
    for tag, val in (("right", right), ("left", left)):
        m = params.g * val
        out.append(AuditResult(f"feshbach_cutoff_{tag}_{n}", m, bound, m <= bound,
                               f"C_FS={consts.c_fs:.6g}; {len(zs)} samples"))
    return out


def neumann_shell_audit(params: ModelParams, basis: FockBasis, n: int,
                        z_values: Iterable[complex], eps: float | None = None) -> tuple[AuditResult, float]:
    """‖(W_20 + W_11 + W_02)^{(n,n+1)}(H_ph^{(n,n+1)} + ε)^{-1}‖ against the shell integral bound.

    The shell part of the effective operator is φ D^{-1} φ with φ the unit
    field of shell n+1 and D = e^{-θ}H_ph − z; its W_00 piece is removed so
    what remains is the sum of the three normal-ordered kernels (up to the
    cap-boundary commutator defect). Also returns, as a diagnostic, the same
    norm when the cross terms between the old field and the new shell are
    kept, which is the full difference of the two effective operators.
    """
    consts = derive_constants(params)
    eps = params.rho(n + 1) if eps is None else eps
    new = (n + 1,)
    old = tuple(range(n + 1))
    phase = np.exp(-1j * params.vartheta)
    hph = photon_energies(basis)
    hnew = photon_energies(basis, new)
    phi_new = field_operator(basis, params, True, new, unit=True).data
    phi_old = field_operator(basis, params, True, old, unit=True).data
    cre, ann = field_coefficients(basis, params, True, new, unit=True)
    om = basis.modes.k
    scale = 1.0 / (hnew + eps)
    shell = (params.rho(n + 1), params.rho(n))
    a, b = coupling_l2_norms(_unit(params), shell, theta_on=True)
    td = consts.theta_d
    bound = 10.0 / td * (a * a + b * b / eps) if td > 0 else math.inf
    worst = cross = 0.0
    zs = list(z_values)
    for z in zs:
        dinv = 1.0 / (phase * hph - z)
        w00 = np.zeros(basis.dim, dtype=complex)
        for j in np.nonzero(cre)[0]:
            w00 += ann[j] * cre[j] / (phase * (hph + om[j]) - z)
        x = phi_new @ (dinv[:, None] * phi_new) - np.diag(w00)
        worst = max(worst, operator_norm(x * scale[None, :]).value)
        y = phi_old @ (dinv[:, None] * phi_new) + phi_new @ (dinv[:, None] * phi_old)
        cross = max(cross, operator_norm((x + y) * scale[None, :]).value)
    res = AuditResult(f"neumann_1_{n}", worst, bound, worst <= bound,
                      f"eps=rho_{n + 1}; 10/theta_d * shell integral; {len(zs)} samples")
    return res, cross


def _weight(params: ModelParams, n_next: int, w: complex) -> float:
    return 0.5 * math.sin(params.vartheta) * params.rho(n_next) + abs(w)


def scale0_lemma_audits(params: ModelParams, state, count: int) -> list[AuditResult]:
    """Standard estimate at ρ ∈ {ρ_0, 1} and the cutoff lemma on samples of Ã_0."""
    basis = state.system.basis
    out = [standard_estimate_audit(params, basis, params.rho0, name="standard_estimate_rho0"),
           standard_estimate_audit(params, basis, 1.0, name="standard_estimate_rho1"),
           standard_estimate_audit(params, basis, 1.0, dilated=True,
                                   name="standard_estimate_dilated_rho1")]
    if params.n_scales >= 1:
        e_c = state.system.backend.to_complex(state.E_shift)
        offs = sample_region_A_tilde(params, 0, e_c, count)
        out += feshbach_cutoff_audit(params, basis, [state.E + w for w in offs], n=0)
    return out


def step_lemma_audits(params: ModelParams, state, new, bridged: ScaleSystem,
                      options) -> list[AuditResult]:
    """Audits of the step n → n+1 that concern the bridge operator H̃^{(n)}.

    Samples are taken in Ã_n with |z − E^{(n)}| ≥ sin ϑ ρ_{n+1}/16.
    """
    n = state.n
    s = math.sin(params.vartheta)
    consts = derive_constants(params)
    cn = constant_Cn(n, consts)
    e_c = state.system.backend.to_complex(state.E_shift)
    offs = sample_region_A_tilde(params, n, e_c, options.lemma_samples)
    be = bridged.backend
    old = ScaleSystem(state.system.op, be)
    emb = SectorEmbedding.build(state.system, bridged)
    hnew = photon_energies(bridged.basis, (n + 1,))
    worst = {"inv": 0.0, "fn": 0.0, "fnt": 0.0, "n2": 0.0}
    with be.active():
        p_tilde = emb.mat(state.P)
        pbar = {}
        for sec in SECTORS:
            size = sum(bridged.sizes(sec))
            pbar[sec] = be.sub(be.diag([be.num(1)] * size), p_tilde[sec])
        for w in offs:
            zp = be.num(state.E_shift) + be.num(w)
            wt = _weight(params, n + 1, w)
            full_b, schur_b = bridged.resolvent(zp)
            _, schur_o = old.resolvent(zp)
            worst["inv"] = max(worst["inv"], wt * sector_norm(
                be, {sec: be.mul(full_b[sec], pbar[sec]) for sec in SECTORS}))
            worst["fnt"] = max(worst["fnt"], wt * sector_norm(be, schur_b))
            worst["fn"] = max(worst["fn"], wt * sector_norm(be, schur_o))
            scaled = {}
            for sec in SECTORS:
                up_idx, _ = bridged.sectors.parts(sec)
                v = be.vec(list(hnew[up_idx] + params.rho(n + 1)))
                scaled[sec] = be.rowscale(v, schur_b[sec])
            worst["n2"] = max(worst["n2"], sector_norm(be, scaled))
    k = len(offs)
    out = [
        AuditResult(f"invertibility_tilde_{n}", worst["inv"], 4.0 / s * cn,
                    worst["inv"] <= 4.0 / s * cn, f"max ‖R̃ P̃̄‖·(sinϑρ/2+|z−E|), {k} samples"),
        AuditResult(f"feshbach_norm_{n}", worst["fn"], 25.0 * cn, worst["fn"] <= 25.0 * cn,
                    f"max ‖H_eff^-1‖·(sinϑρ/2+|z−E|), {k} samples"),
        AuditResult(f"feshbach_norm_tilde_{n}", worst["fnt"], 28.0 / s * cn,
                    worst["fnt"] <= 28.0 / s * cn, f"bridge operator, {k} samples"),
        AuditResult(f"neumann_2_{n}", worst["n2"], 100.0 * cn / s, worst["n2"] <= 100.0 * cn / s,
                    f"max ‖(H_ph^new+ρ_(n+1)) H̃_eff^-1‖, {k} samples"),
    ]
    zs = [state.E + w for w in offs]
    out += feshbach_cutoff_audit(params, state.system.basis, zs, n=n)
    n1, cross = neumann_shell_audit(params, bridged.basis, n, zs)
    out.append(n1)
    new.diagnostics[f"neumann_1_with_cross_terms_{n}"] = cross
    return out
