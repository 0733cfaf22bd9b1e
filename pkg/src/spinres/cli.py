"""Command-line interface: config parsing, runs, audits and oracle comparisons.

Exit codes: 0 success, 2 a check or audit failed, 3 the iteration did not
converge. Outputs are deterministic for a given config; wall-clock time is
written to a separate ``timing.json`` so that ``summary.json`` stays
byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import typing
from pathlib import Path

import numpy as np

from .model import ModelParams, ParameterError, check_parameter_chain, derive_constants
from .multiscale import (
    AuditFailure,
    DegenerateOverlap,
    MultiscaleResult,
    RunOptions,
    run_multiscale,
)
from .resolvent import NearEigenvalueError, NonConvergenceError

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_config_text", "write_outputs", "main"]

EXIT_OK, EXIT_FAIL, EXIT_NONCONV = 0, 2, 3
THREADS_ENV = "SPINRES_THREADS"
CSV_HEADER = ["n", "rho_n", "re_E", "im_E", "dE_abs", "dE_bound", "dP_norm", "dP_bound",
              "kappa", "residual", "rank_trace"]


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    options: RunOptions

    def as_dict(self) -> dict:
        opts = dataclasses.asdict(self.options)
        opts.pop("threads")
        return {"params": self.params.as_dict(), "options": opts}


def _field_types(cls) -> dict[str, type]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


PARAM_KEYS = _field_types(ModelParams)
OPTION_KEYS = {k: v for k, v in _field_types(RunOptions).items() if k != "threads"}


def _convert(key: str, raw: str, kind: type, lineno: int):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip("\"'")
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {kind.__name__}, got {raw!r}") from None


def parse_config_text(text: str) -> RunConfig:
    """``key = value`` lines with ``#`` comments; unknown keys are rejected."""
    params: dict = {}
    options: dict = {}
    unknown = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if not key or not raw:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in params or key in options:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in PARAM_KEYS:
            params[key] = _convert(key, raw, PARAM_KEYS[key], lineno)
        elif key in OPTION_KEYS:
            options[key] = _convert(key, raw, OPTION_KEYS[key], lineno)
        else:
            unknown.append(f"{key} (line {lineno})")
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(unknown))
    try:
        p = ModelParams(**params)
    except ParameterError as exc:
        raise ConfigError(f"validation error: {exc}") from None
    try:
        o = RunOptions(threads=_threads(), **options)
    except ValueError as exc:
        raise ConfigError(f"validation error: {exc}") from None
    return RunConfig(p, o)


def parse_config(path: str | os.PathLike) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# -- output ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _num(x: float):
    """JSON-safe float (non-finite values as strings)."""
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _scale_rows(result: MultiscaleResult) -> list[list[str]]:
    rows = []
    for st in result.states:
        d = st.diagnostics
        rows.append([str(st.n), _fmt(d["rho"]), _fmt(st.E.real), _fmt(st.E.imag), _fmt(d["dE"]),
                     _fmt(d["dE_bound"]), _fmt(d["dP"]), _fmt(d["dP_bound"]),
                     _fmt(d.get("kappa", math.nan)), _fmt(d["residual"]), _fmt(d["trace"].real)])
    return rows


def summary_dict(result: MultiscaleResult, config: RunConfig) -> dict:
    params = result.params
    be = result.final.system.backend
    consts = derive_constants(params)
    shift = be.to_complex(result.E_res_shift)
    re_s, im_s = be.to_decimal(result.E_res_shift)
    c_bound = consts.energy_constant * params.g
    audits = {k: {kk: (_num(vv) if isinstance(vv, float) else vv) for kk, vv in v.items()}
              for k, v in result.audits.items()}
    failed = result.failed_audits
    return {
        "E_res": {"re": _num(result.E_res.real), "im": _num(result.E_res.imag)},
        "E_res_minus_2": {"re": re_s, "im": im_s},
        "abs_E_res_minus_2": {"measured": _num(abs(shift)), "bound": _num(c_bound),
                              "passed": abs(shift) <= c_bound, "detail": "C g with C = 9 sqrt(pi) C_f/(1-gamma)"},
        "im_sign": {"measured": _num(shift.imag), "bound": 0.0, "passed": shift.imag <= 0.0,
                    "detail": "Im E_res <= 0"},
        "residual": {"measured": _num(result.residual), "bound": _num(1e-8 * _hnorm(result)),
                     "passed": result.residual <= 1e-8 * _hnorm(result)},
        "scales_completed": result.final.n,
        "stop_reason": result.stop_reason,
        "precision_bits": result.bits,
        "audits": audits,
        "failed_audits": failed,
        "all_audits_passed": not failed,
        "config": config.as_dict(),
    }


def _hnorm(result: MultiscaleResult) -> float:
    # ‖H‖ of the final truncated operator, by the row-sum bound (a cheap upper bound)
    op = result.final.system.op
    return float(np.max(np.sum(np.abs(op.matrix), axis=1)))


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def write_outputs(result: MultiscaleResult, config: RunConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scales.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(_scale_rows(result))
    summary = summary_dict(result, config)
    _dump(out / "summary.json", summary)
    be = result.final.system.backend
    state = {
        "config": config.as_dict(),
        "precision_bits": result.bits,
        "scales": [dict(zip(("re", "im"), be.to_decimal(st.E_shift)), n=st.n) for st in result.states],
    }
    _dump(out / "state.json", state)
    _dump(out / "timing.json", {"wall_time_s": result.wall_time})
    return summary


# -- subcommands ----------------------------------------------------------------------


def cmd_check_params(args) -> int:
    cfg = parse_config(args.config)
    report = check_parameter_chain(cfg.params)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_FAIL


def _run(cfg: RunConfig) -> MultiscaleResult:
    return run_multiscale(cfg.params, cfg.options, check_chain=True)


def _failure_summary(out: Path, cfg: RunConfig, kind: str, exc: Exception) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "summary.json", {"error": {"kind": kind, "message": str(exc)}, "config": cfg.as_dict()})


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out)
    try:
        result = _run(cfg)
    except AuditFailure as exc:
        _failure_summary(out, cfg, "audit_failure", exc)
        print(f"strict policy abort: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (NonConvergenceError, DegenerateOverlap, NearEigenvalueError) as exc:
        _failure_summary(out, cfg, "non_convergence", exc)
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    summary = write_outputs(result, cfg, out)
    print(f"E_res = {result.E_res.real:.17g} {result.E_res.imag:+.17g}i")
    print(f"E_res - 2 = {summary['E_res_minus_2']['re']} + i({summary['E_res_minus_2']['im']})")
    print(f"scales: {result.final.n}; failed audits: {len(result.failed_audits)}")
    return EXIT_OK


def cmd_audit(args) -> int:
    """Reload a saved run, rebuild every scale and rerun all lemma-level audits."""
    src = Path(args.state)
    state_path = src / "state.json" if src.is_dir() else src
    saved = json.loads(state_path.read_text(encoding="utf-8"))
    params = ModelParams(**saved["config"]["params"])
    opts = dict(saved["config"]["options"], audit_level="full", policy="warn")
    cfg = RunConfig(params, RunOptions(threads=_threads(), **opts))
    try:
        result = _run(cfg)
    except (NonConvergenceError, DegenerateOverlap, NearEigenvalueError) as exc:
        print(f"non-convergence while rebuilding: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    # the rebuilt eigenvalues must reproduce the saved ones well inside each contour
    repro = []
    for st, rec in zip(result.states, saved["scales"]):
        be = st.system.backend
        with be.active():
            diff = abs(be.to_complex(be.num(st.E_shift) - _parse_saved(be, rec)))
        radius = st.contour.radius
        repro.append({"n": st.n, "measured": _num(diff), "bound": _num(1e-6 * radius),
                      "passed": diff <= 1e-6 * radius})
    ok_repro = all(r["passed"] for r in repro) and len(result.states) == len(saved["scales"])
    report = {
        "reproduction": repro,
        "audits": summary_dict(result, cfg)["audits"],
        "failed_audits": result.failed_audits,
        "passed": ok_repro and not result.failed_audits,
    }
    out = Path(args.out) if args.out else state_path.parent
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "audit.json", report)
    for name, a in report["audits"].items():
        print(f"{name:36s} {'pass' if a['passed'] else 'FAIL'}  {a['measured']} <= {a['bound']}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _parse_saved(be, rec: dict):
    if be.name == "float64":
        return complex(float(rec["re"]), float(rec["im"]))
    import flint

    return flint.acb(flint.arb(rec["re"]), flint.arb(rec["im"]))


def cmd_feshbach_verify(args) -> int:
    from .verify import feshbach_verification

    cfg = parse_config(args.config)
    report = feshbach_verification(cfg.params, samples=args.samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "feshbach.json", report)
    print(f"decomposition winner: {report['decomposition']['winner']}; "
          f"max rel error {report['decomposition']['max_rel_error']['measured']:.3e}")
    print(f"root deviation from oracle: {report['root']['deviation']['measured']:.3e}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_oracle_compare(args) -> int:
    from .verify import oracle_comparison

    cfg = parse_config(args.config)
    try:
        result = _run(cfg)
    except (NonConvergenceError, DegenerateOverlap, NearEigenvalueError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    report = oracle_comparison(result)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "oracle.json", report)
    print(f"max deviation {report['max_deviation']['measured']:.3e} "
          f"(bound {report['max_deviation']['bound']:.0e}); counts {report['counts']}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinres", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-params", help="print the parameter restriction report")
    p.add_argument("config")
    p.set_defaults(func=cmd_check_params)
    p = sub.add_parser("run", help="run the multiscale iteration")
    p.add_argument("config")
    p.add_argument("--out", default="spinres_out")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("audit", help="rerun all lemma-level audits on a saved run")
    p.add_argument("state", help="output directory of a previous run, or its state.json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_audit)
    p = sub.add_parser("feshbach-verify", help="decomposition and isospectrality checks")
    p.add_argument("config")
    p.add_argument("--out", default="spinres_out")
    p.add_argument("--samples", type=int, default=16)
    p.set_defaults(func=cmd_feshbach_verify)
    p = sub.add_parser("oracle-compare", help="compare a run with the independent oracles")
    p.add_argument("config")
    p.add_argument("--out", default="spinres_out")
    p.set_defaults(func=cmd_oracle_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
