"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary (see conftest.py).
"""
from __future__ import annotations

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from spinres.cli import parse_config
from spinres.feshbach import feshbach_block, photon_parity_operator, spin_projections
from spinres.fock import build_basis, build_modes, ladder_matrices
from spinres.hamiltonian import build_hamiltonian, symmetry_operator
from spinres.model import derive_constants
from spinres.multiscale import RunOptions, run_multiscale
from spinres.oracle import perturbative_resonance
from spinres.verify import feshbach_verification, oracle_comparison

RESULTS: dict[int, tuple[str, bool, str]] = {}

TITLES = {
    1: "trivial limit",
    2: "oracle equivalence",
    3: "Feshbach isospectrality",
    4: "bound audits at the admissible tuple",
    5: "multiscale decay over 6 scales",
    6: "resonance character",
    7: "perturbative consistency",
    8: "structural exactness",
    9: "determinism across thread counts",
}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (TITLES[n], bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def _slack(a: dict) -> str:
    return f"{a['measured']:.3g}/{a['bound']:.3g}"


@pytest.fixture(scope="module")
def deep_run(configs):
    cfg = parse_config(configs / "deep.cfg")
    t = time.perf_counter()
    r = run_multiscale(cfg.params, cfg.options)
    return r, time.perf_counter() - t


def test_c1_trivial_limit(configs):
    cfg = parse_config(configs / "trivial.cfg")
    t = time.perf_counter()
    r = run_multiscale(cfg.params, cfg.options)
    dt = time.perf_counter() - t
    expected = np.zeros_like(r.P_res)
    expected[0, 0] = 1.0
    diffs = [v for st in r.states[1:] for v in (st.diagnostics["dE"], st.diagnostics["dP"])]
    ok = (r.E_res == 2.0 and r.residual == 0.0 and np.array_equal(r.P_res, expected)
          and all(d == 0.0 for d in diffs) and len(r.states) == cfg.params.n_scales + 1 and dt < 1.0)
    record(1, ok, f"E_res={r.E_res}, {len(r.states)} scales, max diff {max(diffs, default=0.0)}, {dt:.2f}s")


def test_c2_oracle_equivalence(small_params):
    p = small_params
    dim = 2 * build_basis(build_modes(p), p.occupancy_cap, p.total_cap).dim
    t = time.perf_counter()
    r = run_multiscale(p, RunOptions(tol=0.0))
    rep = oracle_comparison(r)
    dt = time.perf_counter() - t
    ok = (dim <= 400 and p.n_scales == 2 and rep["max_deviation"]["passed"]
          and rep["counts"] == [1] * len(r.states) and dt < 60.0)
    record(2, ok, f"dim {dim}, max |dE| {_slack(rep['max_deviation'])}, counts {rep['counts']}, {dt:.1f}s")


def test_c3_feshbach_isospectrality(small_params):
    t = time.perf_counter()
    rep = feshbach_verification(small_params, samples=16)
    dt = time.perf_counter() - t
    dec = rep["decomposition"]
    ok = (rep["samples"] == 16 and dec["max_rel_error"]["passed"] and rep["root"]["deviation"]["passed"]
          and rep["passed"] and dt < 60.0)
    record(3, ok, f"winner {dec['winner']}, rel err {_slack(dec['max_rel_error'])}, "
                  f"root {_slack(rep['root']['deviation'])}, {dt:.1f}s")


def test_c4_bound_audits(deep_params):
    p = deep_params.replace(n_scales=1)
    opts = RunOptions(audit_level="full")
    t = time.perf_counter()
    r = run_multiscale(p, opts)
    dt = time.perf_counter() - t
    names = ["parameter_chain", "kappa_0", "projection_change_0", "resolvent_A0",
             "standard_estimate_rho0", "standard_estimate_rho1", "standard_estimate_dilated_rho1",
             "feshbach_cutoff_right_0", "feshbach_cutoff_left_0"]
    present = all(n in r.audits for n in names)
    ok = present and all(r.audits[n]["passed"] for n in names) and not r.failed_audits and dt < 120.0
    detail = ", ".join(f"{n} {_slack(r.audits[n])}" for n in names[1:] if n in r.audits)
    record(4, ok, f"{detail}, {dt:.1f}s")


@pytest.mark.slow
def test_c5_multiscale_decay(deep_run, deep_params):
    r, dt = deep_run
    p = deep_params
    consts = derive_constants(p)
    steps = [r.audits.get(f"{kind}_{n}") for kind in ("energy_step", "projection_step", "rho_Cn")
             for n in range(1, p.n_scales + 1)]
    chain = all(p.rho(n) ** 0.25 * consts.c_n[n] < 1.0 for n in range(p.n_scales + 1))
    ok = (len(r.states) == p.n_scales + 1 and all(a is not None and a["passed"] for a in steps)
          and chain and not r.failed_audits and dt < 600.0)
    worst = max(a["measured"] / a["bound"] for a in steps if a is not None)
    record(5, ok, f"{len(steps)} step audits, worst measured/bound {worst:.3g}, {dt:.0f}s")


@pytest.mark.slow
def test_c6_resonance_character(deep_run, deep_params):
    r, _ = deep_run
    c = derive_constants(deep_params).energy_constant
    dist = abs(r.E_res - 2.0)
    ok = r.E_res.imag <= 0.0 and dist <= c * deep_params.g
    record(6, ok, f"Im E_res={r.E_res.imag:.3g}, |E_res-2|={dist:.3g} <= Cg={c * deep_params.g:.3g}")


def test_c7_perturbative_consistency(configs):
    cfg = parse_config(configs / "perturbative.cfg")
    t = time.perf_counter()
    ratios = []
    for g in (1e-3, 5e-4):
        p = cfg.params.replace(g=g)
        r = run_multiscale(p, cfg.options)
        ratios.append(abs(r.E_res - perturbative_resonance(p)) / g**4)
    dt = time.perf_counter() - t
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    ok = spread <= 4.0 and dt < 300.0
    record(7, ok, f"|E_res-E2|/g^4 = {ratios[0]:.3g}, {ratios[1]:.3g}, factor {spread:.3g}, {dt:.1f}s")


def test_c8_structural_exactness(small_params):
    p = small_params
    b = build_basis(build_modes(p), p.occupancy_cap, p.total_cap)
    h = build_hamiltonian(p, b).matrix
    s = symmetry_operator(b).data
    sym = np.abs(s @ h - h @ s).max()
    z = 2.0 + 0.25 * math.sin(p.vartheta) * p.rho0 * (1 - 1j)
    blk = feshbach_block(build_hamiltonian(p, b), z).data
    sph = photon_parity_operator(b)
    par = np.abs(sph @ blk - blk @ sph).max()
    P, _ = spin_projections(b)
    idem = np.abs(P.data @ P.data - P.data).max()
    ccr_in, ccr_boundary = 0.0, 0.0
    occ = b.states
    for j in range(len(b.modes)):
        a, ad = ladder_matrices(b, j)
        comm = (a @ ad - ad @ a).data - np.eye(b.dim)
        interior = (occ[:, j] < b.occupancy_cap) & (occ.sum(axis=1) < b.total_cap)
        ccr_in = max(ccr_in, np.abs(comm[:, interior]).max())
        ccr_boundary = max(ccr_boundary, np.abs(comm[:, ~interior]).max())
    ok = sym == 0.0 and par == 0.0 and idem == 0.0 and ccr_in <= 1e-14 and ccr_boundary > 0.0
    record(8, ok, f"[S,H]={sym}, [S_ph,H_eff]={par}, P^2-P={idem}, "
                  f"CCR interior {ccr_in:.1e}, boundary {ccr_boundary:.2g}")


def test_c9_determinism(configs, tmp_path):
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}"
        env = dict(os.environ, SPINRES_THREADS=threads)
        subprocess.run([sys.executable, "-m", "spinres.cli", "run", str(configs / "small.cfg"),
                        "--out", str(out)], env=env, check=True, capture_output=True)
        outputs.append({f: (out / f).read_bytes() for f in ("scales.csv", "summary.json")})
    same = [f for f in outputs[0] if outputs[0][f] == outputs[1][f]]
    record(9, len(same) == 2, f"identical: {', '.join(same) or 'none'} (threads 1 vs 4)")

