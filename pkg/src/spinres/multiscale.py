"""Multiscale construction of the resonance: scale-0 basis, induction steps,
per-scale audits and the infrared limit."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .engine import SECTORS, ScaleSystem, SectorEmbedding, frob_bound, sector_norm
from .fock import build_basis, build_modes
from .hamiltonian import build_hamiltonian, interaction
from .linalg import make_backend
from .model import ModelParams, check_parameter_chain, constant_Cn, derive_constants
from .resolvent import (
    AuditResult,
    NearEigenvalueError,
    NonConvergenceError,
    operator_norm,
    sample_region_A0,
    sample_region_Am,
)

__all__ = [
    "RunOptions",
    "ContourSpec",
    "ScaleState",
    "ProjectorResult",
    "MultiscaleResult",
    "AuditFailure",
    "NonConvergence",
    "DegenerateOverlap",
    "choose_precision",
    "contour_projector",
    "eigenvalue_from_projection",
    "induction_basis",
    "induction_step",
    "run_multiscale",
]


class AuditFailure(RuntimeError):
    def __init__(self, audit: AuditResult, n: int):
        self.audit = audit
        self.n = n
        super().__init__(f"audit {audit.name} failed at scale {n}: "
                         f"{audit.measured:.3e} > {audit.bound:.3e}")


class NonConvergence(NonConvergenceError):
    pass


class DegenerateOverlap(ArithmeticError):
    pass


@dataclass(frozen=True)
class RunOptions:
    """Numerical and audit knobs of a multiscale run (all deterministic)."""

    tol: float = 1e-12
    policy: str = "warn"  # or "strict"
    ref_mode: str = "chained"  # "chained", "unnormalized" or "bare"
    audit_level: str = "standard"  # "none", "standard" or "full"
    audit_samples: int = 32
    audit_samples_a0: int = 64
    lemma_samples: int = 8
    contour_nodes: int = 16
    max_nodes: int = 1024
    idempotency_tol: float = 1e-9
    precision_bits: int = 0  # 0 selects automatically
    float64_min_radius: float = 1e-9
    threads: int = 1

    def __post_init__(self) -> None:
        if self.policy not in ("warn", "strict"):
            raise ValueError("policy must be warn or strict")
        if self.ref_mode not in ("chained", "unnormalized", "bare"):
            raise ValueError("ref_mode must be chained, unnormalized or bare")
        if self.audit_level not in ("none", "standard", "full"):
            raise ValueError("audit_level must be none, standard or full")
        if self.contour_nodes < 16:
            raise ValueError("contour_nodes must be >= 16")
        if self.max_nodes < self.contour_nodes:
            raise ValueError("max_nodes must be >= contour_nodes")


@dataclass(frozen=True)
class ContourSpec:
    """Circle of ``radius`` around ``center``; ``shift`` is center − 2 in backend precision."""

    center: complex
    radius: float
    nodes: int = 16
    shift: Any = None

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.nodes < 16:
            raise ValueError("nodes must be >= 16")


@dataclass
class ProjectorResult:
    blocks: dict
    nodes_used: int
    idempotency: float
    trace: complex


@dataclass
class ScaleState:
    n: int
    system: ScaleSystem
    P: dict
    E_shift: Any  # E − 2 in backend precision
    E: complex
    psi: dict
    contour: ContourSpec
    diagnostics: dict = field(default_factory=dict)
    audits: list = field(default_factory=list)
    psi_raw: dict | None = None  # P ref before normalization

    @property
    def trace(self) -> complex:
        return self.diagnostics["trace"]

    def P_dense(self) -> np.ndarray:
        return _blocks_dense(self.system, self.P)

    def psi_dense(self) -> np.ndarray:
        return self.system.to_numpy_vec(self.psi)


@dataclass
class MultiscaleResult:
    states: list
    E_res: complex
    E_res_shift: Any
    residual: float
    converged: bool
    stop_reason: str
    bits: int
    audits: dict
    wall_time: float
    params: ModelParams
    options: RunOptions

    @property
    def final(self) -> ScaleState:
        return self.states[-1]

    @property
    def P_res(self) -> np.ndarray:
        return self.final.P_dense()

    @property
    def psi_res(self) -> np.ndarray:
        return self.final.psi_dense()

    @property
    def failed_audits(self) -> list[str]:
        return [k for k, v in self.audits.items() if not v["passed"]]


# -- precision ----------------------------------------------------------------------


def choose_precision(params: ModelParams, options: RunOptions | None = None) -> int:
    """Working precision in bits (53 means numpy doubles).

    Doubles are used when g = 0 or every contour radius is at least
    ``float64_min_radius``. Otherwise the precision resolves the smallest
    contour radius and one thousandth of the smallest expected energy step
    π g² ρ_{n−1}², with 64 guard bits.
    """
    options = options or RunOptions()
    if options.precision_bits:
        return max(53, int(options.precision_bits))
    s = math.sin(params.vartheta)
    radii = [s / 8.0 * params.rho(n) for n in range(params.n_scales + 1)]
    if params.g == 0.0 or min(radii) >= options.float64_min_radius:
        return 53
    floor = min(radii)
    for n in range(1, params.n_scales + 1):
        floor = min(floor, 1e-3 * math.pi * params.g**2 * params.rho(n - 1) ** 2)
    return 64 + int(math.ceil(math.log2(4.0 / floor)))


def audit_bits(bits: int, params: ModelParams, n: int) -> int:
    """Precision for norm audits at scale n: resolves distances ~ sin ϑ ρ_n / 16."""
    if bits <= 53:
        return 53
    need = 64 + int(math.ceil(math.log2(64.0 / (math.sin(params.vartheta) * params.rho(n)))))
    return min(bits, max(need, 64))


# -- helpers ----------------------------------------------------------------------------


def _blocks_dense(system: ScaleSystem, blocks: dict) -> np.ndarray:
    d = system.basis.dim
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    for s in SECTORS:
        idx = system.sectors.full_index(s)
        out[np.ix_(idx, idx)] = system.backend.to_numpy(blocks[s])
    return out


def _sub_blocks(be, a: dict, b: dict) -> dict:
    with be.active():
        return {s: be.sub(a[s], b[s]) for s in SECTORS}


def _identity_minus(be, system: ScaleSystem, blocks: dict) -> dict:
    out = {}
    with be.active():
        for s in SECTORS:
            n = sum(system.sizes(s))
            out[s] = be.sub(be.diag([be.num(1)] * n), blocks[s])
    return out


def _trace(be, blocks: dict) -> complex:
    tot = 0j
    for s in SECTORS:
        a = be.to_numpy(blocks[s])
        tot += complex(np.trace(a)) if a.size else 0j
    return tot


def _audit(name: str, measured: float, bound: float, strict_lt: bool = False, detail: str = "") -> AuditResult:
    ok = measured < bound if strict_lt else measured <= bound
    return AuditResult(name, float(measured), float(bound), bool(ok), detail)


def _record(state: ScaleState, audit: AuditResult, options: RunOptions) -> None:
    state.audits.append(audit)
    if not audit.passed and options.policy == "strict":
        raise AuditFailure(audit, state.n)


def _system(params: ModelParams, n: int, backend, bridged: bool = False, free: bool = False) -> ScaleSystem:
    shells = n + 1 if bridged else n
    basis = build_basis(build_modes(params, shells), params.occupancy_cap, params.total_cap)
    op = build_hamiltonian(params, basis, n, bridged=bridged, free=free)
    return ScaleSystem(op, backend)


# -- contour projection ---------------------------------------------------------------


def _node_terms(system: ScaleSystem, c, r: float, n: int, ks, threads: int) -> list:
    """ζ_k (K − c − rζ_k)^{-1} for each node, returned in node order.

    Double-precision nodes may run on a thread pool; the caller sums the
    ordered list, so the result does not depend on the thread count. The
    extended-precision backend sets a process-wide precision and stays serial.
    """
    be = system.backend

    def one(k: int) -> dict:
        with be.active():
            zeta = be.unit_root(k, n)
            full, _ = system.resolvent(c + be.num(r) * zeta)
            return {s: be.scale(full[s], zeta) for s in SECTORS}

    ks = list(ks)
    if threads > 1 and be.name == "float64" and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ks))
    return [one(k) for k in ks]


def contour_projector(system: ScaleSystem, contour: ContourSpec, max_nodes: int = 1024,
                      tol: float = 1e-9, threads: int = 1) -> ProjectorResult:
    """−(1/2πi)∮(H − z)^{-1} dz by the trapezoidal rule, doubling nodes until P² ≈ P.

    For a decoupled (diagonal) operator the residue theorem gives the exact
    coordinate projection onto the diagonal entries inside the circle.
    """
    be = system.backend
    with be.active():
        c = contour.shift if contour.shift is not None else be.num(contour.center - 2.0)
        c = be.num(c)
        r = contour.radius
        if system.diagonal:
            blocks = {}
            for s in SECTORS:
                vals = system.diag(s)
                flags = []
                for v in vals:
                    dist = abs(be.to_complex(be.num(v) - c))
                    if abs(dist - r) <= 1e-12 * r:
                        raise NearEigenvalueError(contour.center, "diagonal entry on contour")
                    flags.append(1.0 if dist < r else 0.0)
                blocks[s] = be.diag(be.vec(flags))
            return ProjectorResult(blocks, 0, 0.0, _trace(be, blocks))
        n = contour.nodes
        acc = None
        ks = range(n)
        while True:
            for term in _node_terms(system, c, r, n, ks, threads):
                acc = term if acc is None else {s: be.add(acc[s], term[s]) for s in SECTORS}
            blocks = {s: be.scale(acc[s], be.num(-r / n)) for s in SECTORS}
            idem = max(frob_bound(be, be.sub(be.mul(blocks[s], blocks[s]), blocks[s])) for s in SECTORS)
            if idem <= tol:
                return ProjectorResult(blocks, n, idem, _trace(be, blocks))
            if 2 * n > max_nodes:
                raise NonConvergence(f"projector not idempotent ({idem:.2e}) with {n} nodes")
            # reuse the previous sum: new nodes are the odd 2n-th roots of unity
            n *= 2
            ks = range(1, n, 2)


def eigenvalue_from_projection(system: ScaleSystem, P: dict, ref: dict, center_shift=None):
    """(E − 2, P ref) from E = ⟨ref, H P ref⟩ / ⟨ref, P ref⟩.

    The quotient is evaluated as c + ⟨ref, (K − c) u⟩/⟨ref, u⟩ with u = P ref
    and K = H − 2, which is algebraically identical and keeps relative accuracy.
    """
    be = system.backend
    with be.active():
        u = system.apply(P, ref)
        nu, nr = system.vnorm(u), system.vnorm(ref)
        if nu < 0.1 * nr:
            raise DegenerateOverlap(f"‖P ref‖ = {nu:.3e} < 0.1 ‖ref‖ = {0.1 * nr:.3e}")
        c = be.num(0) if center_shift is None else be.num(center_shift)
        ku = system.matvec(u)
        kcu = system.axpy(-c, u, ku)
        num = system.inner(ref, kcu)
        den = system.inner(ref, u)
        e_shift = c + num / den
        if hasattr(e_shift, "mid"):
            e_shift = e_shift.mid()
        return e_shift, u


# -- audits shared by the basis and the step ----------------------------------------


def _psi_normalized(system: ScaleSystem, u: dict) -> dict:
    return system.scale_vec(1.0 / system.vnorm(u), u)


def _residual(system: ScaleSystem, e_shift, psi: dict) -> float:
    ku = system.matvec(psi)
    r = system.axpy(-system.backend.num(e_shift), psi, ku)
    return system.vnorm(r)


def _resolvent_bound_samples(system: ScaleSystem, P: dict, e_shift, offsets, C: float,
                             rho: float, vartheta: float, name: str) -> AuditResult:
    """max over samples of ‖(H − z)^{-1}P̄‖ (sin ϑ ρ/2 + |z − E|) against C."""
    be = system.backend
    worst, worst_ratio = 0.0, 0.0
    with be.active():
        pbar = _identity_minus(be, system, P)
        for w in offsets:
            zp = be.num(e_shift) + be.num(w)
            full, _ = system.resolvent(zp)
            val = sector_norm(be, {s: be.mul(full[s], pbar[s]) for s in SECTORS})
            weight = 0.5 * math.sin(vartheta) * rho + abs(w)
            if val * weight > worst_ratio:
                worst_ratio, worst = val * weight, val
    return _audit(name, worst_ratio, C, detail=f"max ‖R P̄‖·(sinϑρ/2+|z−E|) over {len(offsets)} samples")


def _kappa_free(params: ModelParams, system: ScaleSystem, contour: ContourSpec) -> float:
    """max over contour nodes of g‖W (H_0 − z)^{-1}‖ for the free scale-0 operator."""
    if params.g == 0.0:
        return 0.0
    op = system.op
    w = interaction(params, op.basis, tuple(range((op.scale or 0) + 1)), theta_on=op.theta_on)
    d_up = op.phase * op.photon
    d_dn = -2.0 + op.phase * op.photon
    diag = np.concatenate([d_up, d_dn])
    worst = 0.0
    c = contour.center - 2.0
    for k in range(contour.nodes):
        zp = c + contour.radius * np.exp(2j * np.pi * k / contour.nodes)
        prod = w / (diag - zp)[None, :]
        worst = max(worst, params.g * operator_norm(prod).value)
    return worst


def _kappa_bridge(params: ModelParams, bridged: ScaleSystem, new_shell: int, center_shift,
                  radius: float, nodes: int) -> float:
    """max over contour nodes of g‖W_new (H̃ − z)^{-1}‖, W_new the unit coupling of the new shell."""
    if params.g == 0.0:
        return 0.0
    be = bridged.backend
    wb = bridged.field_blocks((new_shell,), unit=True)
    worst = 0.0
    with be.active():
        for k in range(nodes):
            zp = be.num(center_shift) + be.num(radius) * be.unit_root(k, nodes)
            full, _ = bridged.resolvent(zp)
            blocks = {}
            for s in SECTORS:
                nu, nd = bridged.sizes(s)
                wud, wdu = wb[s]
                top = be.mul(wud, _rows(be, full[s], nu, nu + nd))
                bot = be.mul(wdu, _rows(be, full[s], 0, nu))
                blocks[s] = (top, bot)
            val = 0.0
            for s in SECTORS:
                top, bot = blocks[s]
                a = np.vstack([be.to_numpy(top), be.to_numpy(bot)])
                if a.size:
                    val = max(val, operator_norm(a).value)
            worst = max(worst, params.g * val)
    return worst


def _rows(be, m, lo: int, hi: int):
    n = be.shape(m)[1]
    return be.take(m, range(lo, hi), range(n))


# -- induction basis and step ---------------------------------------------------------


def _backend_for(bits: int):
    return make_backend(None if bits <= 53 else bits)


def induction_basis(params: ModelParams, options: RunOptions | None = None,
                    bits: int | None = None) -> ScaleState:
    """Scale 0: contour of radius (sin ϑ/8) ρ_0 around 2 and the first projection."""
    options = options or RunOptions()
    bits = choose_precision(params, options) if bits is None else bits
    be = _backend_for(bits)
    s = math.sin(params.vartheta)
    system = _system(params, 0, be)
    with be.active():
        contour = ContourSpec(2.0 + 0j, s / 8.0 * params.rho0, options.contour_nodes, be.num(0))
        proj = contour_projector(system, contour, options.max_nodes, options.idempotency_tol,
                                 options.threads)
        ref = system.vacuum_up()
        e_shift, u = eigenvalue_from_projection(system, proj.blocks, ref, contour.shift)
        psi_raw_norm = system.vnorm(u)
        psi = _psi_normalized(system, u)
        e_c = be.to_complex(e_shift)
        free_p = {}
        for sec in SECTORS:
            n = sum(system.sizes(sec))
            free_p[sec] = be.diag(be.vec([1.0 if (sec == "+" and i == 0) else 0.0 for i in range(n)]))
        dP = sector_norm(be, _sub_blocks(be, proj.blocks, free_p))
    state = ScaleState(0, system, proj.blocks, e_shift, 2.0 + e_c, psi, contour, psi_raw=u)
    dE = abs(e_c)
    state.diagnostics.update(
        rho=params.rho0,
        dE=dE,
        dE_bound=s / 16.0 * params.rho0,
        dP=dP,
        dP_bound=0.2,
        trace=proj.trace,
        idempotency=proj.idempotency,
        nodes=proj.nodes_used,
        psi_raw_norm=psi_raw_norm,
        P_norm=sector_norm(be, proj.blocks),
        residual=_residual(system, e_shift, psi),
        bits=bits,
    )
    state.diagnostics["kappa"] = _kappa_free(params, system, contour)
    _record(state, _audit("localization_0", dE, s / 16.0 * params.rho0, strict_lt=True), options)
    _record(state, _audit("projection_change_0", dP, 0.2), options)
    _record(state, AuditResult("psi0_norm", psi_raw_norm, 1.2, 0.8 <= psi_raw_norm <= 1.2,
                               "requires 4/5 <= ||P0 Psi(-1)|| <= 6/5"), options)
    _record(state, _audit("kappa_0", state.diagnostics["kappa"], 1.0 / 6.0, strict_lt=True), options)
    _common_audits(state, proj, options)
    if options.audit_level != "none":
        from .audits import scale0_lemma_audits

        _scale0_resolvent_audits(params, state, bits, options)
        for a in scale0_lemma_audits(params, state, options.lemma_samples):
            _record(state, a, options)
    return state


def _common_audits(state: ScaleState, proj: ProjectorResult, options: RunOptions) -> None:
    n = state.n
    _record(state, _audit(f"idempotency_{n}", proj.idempotency, 1e-8), options)
    _record(state, _audit(f"trace_{n}", abs(proj.trace - 1.0), 1e-6), options)
    _record(state, _audit(f"projector_norm_{n}", state.diagnostics["P_norm"], 1.5), options)


def _audit_system(state: ScaleState, params: ModelParams, bits: int, n: int) -> ScaleSystem:
    ab = audit_bits(bits, params, n)
    if ab == bits:
        return state.system
    return ScaleSystem(state.system.op, _backend_for(ab))


def _scale0_resolvent_audits(params: ModelParams, state: ScaleState, bits: int,
                             options: RunOptions) -> None:
    """Resolvent bounds on A_0: the (6/5)/|2 − z| bound and the C_0 = 43 bound."""
    system = _audit_system(state, params, bits, 0)
    be = system.backend
    offs = sample_region_A0(params, options.audit_samples_a0)
    worst = 0.0
    with be.active():
        for w in offs:
            full, _ = system.resolvent(be.num(w))
            worst = max(worst, sector_norm(be, full) * abs(w))
    _record(state, _audit("resolvent_A0", worst, 1.2,
                          detail=f"max ‖(H−z)^-1‖·|2−z| over {len(offs)} samples"), options)
    # the C_0 audit is taken relative to E_0 over the same points
    e0 = be.to_complex(state.E_shift)
    shifted = [w - e0 for w in offs]
    res = _resolvent_bound_samples(system, state.P, state.E_shift, shifted, 43.0,
                                   params.rho0, params.vartheta, "resolvent_C0")
    _record(state, res, options)


def induction_step(state: ScaleState, params: ModelParams, options: RunOptions | None = None,
                   bits: int | None = None) -> ScaleState:
    """Scale n → n+1: contour of radius (sin ϑ/8) ρ_{n+1} around E^{(n)}."""
    options = options or RunOptions()
    bits = state.diagnostics.get("bits", 53) if bits is None else bits
    be = state.system.backend
    n1 = state.n + 1
    s = math.sin(params.vartheta)
    consts = derive_constants(params)
    system = _system(params, n1, be)
    emb = SectorEmbedding.build(state.system, system)
    with be.active():
        r = s / 8.0 * params.rho(n1)
        contour = ContourSpec(state.E, r, options.contour_nodes, state.E_shift)
        proj = contour_projector(system, contour, options.max_nodes, options.idempotency_tol,
                                 options.threads)
        if options.ref_mode == "chained":
            ref = emb.vec(state.psi)
        elif options.ref_mode == "unnormalized":
            ref = emb.vec(state.psi_raw)
        else:
            ref = system.vacuum_up()
        e_shift, u = eigenvalue_from_projection(system, proj.blocks, ref, contour.shift)
        psi = _psi_normalized(system, u)
        diff = be.num(e_shift) - be.num(state.E_shift)
        dE = abs(be.to_complex(diff))
        p_tilde = emb.mat(state.P)
        dP = sector_norm(be, _sub_blocks(be, proj.blocks, p_tilde))
        e_c = be.to_complex(e_shift)
    new = ScaleState(n1, system, proj.blocks, e_shift, 2.0 + e_c, psi, contour, psi_raw=u)
    rho_n = params.rho(state.n)
    new.diagnostics.update(
        rho=params.rho(n1),
        dE=dE,
        dE_bound=consts.energy_constant * (1.0 - params.gamma) * params.g * rho_n,
        dP=dP,
        dP_bound=100.0 / s * rho_n**0.25,
        trace=proj.trace,
        idempotency=proj.idempotency,
        nodes=proj.nodes_used,
        P_norm=sector_norm(be, proj.blocks),
        residual=_residual(system, e_shift, psi),
        bits=bits,
    )
    _record(new, _audit(f"energy_step_{n1}", dE, new.diagnostics["dE_bound"]), options)
    _record(new, _audit(f"projection_step_{n1}", dP, new.diagnostics["dP_bound"]), options)
    _record(new, _audit(f"localization_{n1}", dE, r, strict_lt=True,
                        detail="E(n+1) strictly inside the contour around E(n)"), options)
    _common_audits(new, proj, options)
    cn = constant_Cn(n1, consts)
    _record(new, _audit(f"rho_Cn_{n1}", params.rho(n1) ** 0.25 * cn, 1.0, strict_lt=True), options)
    if options.audit_level != "none":
        bridged = ScaleSystem(build_hamiltonian(params, system.basis, state.n, bridged=True),
                              _backend_for(audit_bits(bits, params, n1)))
        new.diagnostics["kappa"] = _kappa_bridge(params, bridged, n1, state.E_shift, r,
                                                 options.contour_nodes)
        _record(new, _audit(f"kappa_{n1}", new.diagnostics["kappa"], 1.0, strict_lt=True,
                            detail="Neumann contraction of the new-shell coupling"), options)
        audit_sys = _audit_system(new, params, bits, n1)
        offs = sample_region_Am(params, n1, e_c, options.audit_samples)
        res = _resolvent_bound_samples(audit_sys, new.P, e_shift, offs, cn, params.rho(n1),
                                       params.vartheta, f"resolvent_C{n1}")
        _record(new, res, options)
        if options.audit_level == "full":
            from .audits import step_lemma_audits

            for a in step_lemma_audits(params, state, new, bridged, options):
                _record(new, a, options)
    else:
        new.diagnostics["kappa"] = math.nan
    return new


def _audits_map(states: list) -> dict:
    out = {}
    for st in states:
        for a in st.audits:
            out[a.name] = a.as_dict()
    return out


def run_multiscale(params: ModelParams, options: RunOptions | None = None,
                   check_chain: bool = False) -> MultiscaleResult:
    """Iterate to n = N or until |E^{(n+1)} − E^{(n)}| < tol, then report the limit.

    ``check_chain`` records the parameter-chain verdict as an audit (strict
    mode aborts on failure); fixtures outside the chain run under the warn
    policy.
    """
    options = options or RunOptions()
    t0 = time.perf_counter()
    bits = choose_precision(params, options)
    chain = check_parameter_chain(params)
    states = [induction_basis(params, options, bits)]
    states[0].audits.insert(0, AuditResult("parameter_chain", float(len(chain.failures())), 0.0,
                                           chain.passed, ",".join(chain.failures())))
    if check_chain and not chain.passed and options.policy == "strict":
        raise AuditFailure(states[0].audits[0], 0)
    stop = "max_scale"
    for _ in range(params.n_scales):
        nxt = induction_step(states[-1], params, options, bits)
        states.append(nxt)
        if options.tol > 0 and nxt.diagnostics["dE"] < options.tol:
            stop = "tolerance"
            break
    final = states[-1]
    if final.n < params.n_scales:
        # residual on the full truncated operator with every shell coupled
        full = _system(params, params.n_scales, final.system.backend)
        emb = SectorEmbedding.build(final.system, full)
        with full.backend.active():
            psi_full = emb.vec(final.psi)
            residual = _residual(full, final.E_shift, psi_full)
    else:
        residual = final.diagnostics["residual"]
    return MultiscaleResult(
        states=states,
        E_res=final.E,
        E_res_shift=final.E_shift,
        residual=residual,
        converged=True,
        stop_reason=stop,
        bits=bits,
        audits=_audits_map(states),
        wall_time=time.perf_counter() - t0,
        params=params,
        options=options,
    )
