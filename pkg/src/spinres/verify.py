"""Cross-checks of the constructed operators against the independent oracles.

Both reports are plain dicts ready for JSON; every measured number is
stored next to the bound it is compared with.
"""

from __future__ import annotations

import math

import numpy as np

from .feshbach import (
    feshbach_block,
    feshbach_root,
    feshbach_terms,
    interior_states,
    isospectrality_check,
    photon_parity_operator,
)
from .fock import build_basis, build_modes
from .hamiltonian import build_hamiltonian
from .model import ModelParams
from .oracle import MAX_DENSE_DIM, OracleError, count_inside, dense_spectrum, perturbative_resonance
from .resolvent import halton

__all__ = ["feshbach_sample_points", "feshbach_verification", "oracle_comparison"]

DECOMP_TOL = 1e-9
ROOT_TOL = 1e-8
ORACLE_TOL = 1e-8


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb else float(np.linalg.norm(a))


def feshbach_sample_points(params: ModelParams, count: int = 16) -> list[complex]:
    """Quasi-random points in the disk D(2, sin ϑ ρ_0 / 2), off the real axis."""
    r = 0.5 * math.sin(params.vartheta) * params.rho0
    pts = []
    for i in range(1, count + 1):
        rad = r * math.sqrt(0.05 + 0.95 * halton(i, 2))
        ang = 2.0 * math.pi * halton(i, 3)
        pts.append(2.0 + rad * complex(math.cos(ang), math.sin(ang)))
    return pts


def feshbach_verification(params: ModelParams, samples: int = 16) -> dict:
    """Block formula vs normal-ordered decomposition, isospectrality and the root check."""
    basis = build_basis(build_modes(params), params.occupancy_cap, params.total_cap)
    H = build_hamiltonian(params, basis)
    zs = feshbach_sample_points(params, samples)
    interior = interior_states(basis)
    variants = {"minus_z": {}, "no_z": {}, "minus_z_w11_unshifted": {}}
    parity = photon_parity_operator(basis)
    sym = 0.0
    for name, kw in (("minus_z", {}), ("no_z", {"w20_variant": "no_z"}),
                     ("minus_z_w11_unshifted", {"w11_shift": False})):
        full = inner = 0.0
        for z in zs:
            block = feshbach_block(H, z).data
            terms = feshbach_terms(params, basis, z, **kw)
            full = max(full, _rel(terms.assembled(True), block))
            ix = np.ix_(interior, interior)
            inner = max(inner, _rel(terms.assembled(False)[ix], block[ix]))
            if name == "minus_z":
                sym = max(sym, float(np.max(np.abs(parity @ block - block @ parity))))
        variants[name] = {"max_rel_error": full, "max_rel_error_interior_no_defect": inner}
    winner = min(variants, key=lambda k: variants[k]["max_rel_error"])
    win_err = variants[winner]["max_rel_error"]

    center = 2.0
    radius = math.sin(params.vartheta) / 8.0 * params.rho0
    iso = isospectrality_check(H, center, radius, zs[:16]).as_dict()
    ev = dense_spectrum(H.matrix)
    target = ev[np.argmin(np.abs(ev - 2.0))]
    root, sv = feshbach_root(H, complex(target) if abs(target - 2.0) < radius else 2.0 + 0j)
    dev = float(abs(root - target))
    passed = win_err <= DECOMP_TOL and iso["passed"] and dev <= ROOT_TOL and sym == 0.0
    return {
        "samples": len(zs),
        "decomposition": {
            "variants": variants,
            "winner": winner,
            "max_rel_error": {"measured": win_err, "bound": DECOMP_TOL, "passed": bool(win_err <= DECOMP_TOL)},
        },
        "parity_commutator": {"measured": sym, "bound": 0.0, "passed": sym == 0.0},
        "isospectrality": iso,
        "root": {
            "feshbach_root": [root.real, root.imag],
            "oracle_eigenvalue": [float(target.real), float(target.imag)],
            "deviation": {"measured": dev, "bound": ROOT_TOL, "passed": bool(dev <= ROOT_TOL)},
            "relative_min_singular_value": sv,
        },
        "passed": bool(passed),
    }


def oracle_comparison(result) -> dict:
    """Per-scale deviation from the dense spectrum, winding counts and the perturbative oracle."""
    rows = []
    counts = []
    max_dev = 0.0
    ok = True
    for st in result.states:
        m = st.system.op.matrix
        if m.shape[0] > MAX_DENSE_DIM:
            rows.append({"n": st.n, "skipped": f"dimension {m.shape[0]} > {MAX_DENSE_DIM}"})
            ok = False
            continue
        ev = dense_spectrum(m)
        e = st.E
        near = ev[np.argmin(np.abs(ev - e))]
        dev = float(abs(near - e))
        try:
            cnt = count_inside(m, st.contour.center, st.contour.radius)
        except OracleError as exc:
            cnt = -1
            rows.append({"n": st.n, "count_error": str(exc)})
        counts.append(cnt)
        max_dev = max(max_dev, dev)
        ok &= dev <= ORACLE_TOL and cnt == 1
        rows.append({"n": st.n, "E": [e.real, e.imag], "oracle": [float(near.real), float(near.imag)],
                     "deviation": {"measured": dev, "bound": ORACLE_TOL, "passed": bool(dev <= ORACLE_TOL)},
                     "count_inside": {"measured": cnt, "bound": 1, "passed": cnt == 1}})
    e2 = perturbative_resonance(result.params)
    pdev = abs(result.E_res - e2)
    g = result.params.g
    return {
        "scales": rows,
        "counts": counts,
        "max_deviation": {"measured": max_dev, "bound": ORACLE_TOL, "passed": max_dev <= ORACLE_TOL},
        "perturbative": {
            "E2": [e2.real, e2.imag],
            "abs_E_res_minus_E2": pdev,
            "ratio_over_g4": (pdev / g**4) if g > 0 else 0.0,
            "detail": "informational: fourth-order remainder plus discretization error",
        },
        "passed": bool(ok),
    }
