"""Command-line orchestrator: ``reveuler run <config>``, ``reveuler presets``, ``reveuler version``.

Exit codes: 0 all enabled contracts pass, 1 a contract failed, 2 the config is
invalid, 3 a runtime fault.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import traceback
from pathlib import Path

import numpy as np
import scipy.fft

from . import __version__
from .config import PRESETS, ConfigError, ExperimentConfig, list_presets, load_config, parse_config, preset_text
from .data import RadialProfile
from .diagnostics import (
    ContractResult,
    DiagnosticsReport,
    blowup_indicator,
    contraction_ratios,
    decay_contract,
    decay_envelope_table,
    growth_ratio,
    incompressibility_residual,
    measured_lipschitz,
    moment_bound_check,
    random_lipschitz_field,
    viscosity_sweep,
)
from .fields import Grid, NormKind, VectorField3, write_snapshot
from .iteration import SignPack, run_picard, vorticity_increment_recursion
from .manufactured import convergence_study

OUTPUT_ENV = "REVEULER_OUTPUT_DIR"
UNITS = "units: t and x in nondimensional model units; norms are discrete max-norms (dimensionless)"

EXIT_OK, EXIT_CONTRACT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

# contract thresholds
RECURSION_TOL = 1e-8
DIV_GROWTH = 1.1
MOMENT_SLACK = 1e-3
BLOWUP_TOL = 0.03
LIPSCHITZ_TOL = 0.01
MMS_MIN_ORDER = 1.6
MMS_MAX_ERROR = 0.1
SWEEP_SPREAD = 0.25


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(fingerprint: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# fingerprint {fingerprint}; {UNITS}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def resolve_config(arg: str) -> ExperimentConfig:
    """A bundled preset name or a path to a config file."""
    if arg in PRESETS and not Path(arg).is_file():
        return parse_config(preset_text(arg))
    try:
        return load_config(arg)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {arg!r}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# individual diagnostics; each adds contracts and tables to the report


def _contraction(cfg, trace, report):
    table = contraction_ratios(trace, NormKind.C(2))
    hc = contraction_ratios(trace, NormKind.HC(2))
    rows = [(k, float(trace.times[j]), "C2", r) for (k, j), r in sorted(table.per_slice.items())]
    report.tables["contraction"] = (["k", "t", "norm_kind", "ratio"], rows)
    sup_rows = [(k, label, r) for label, tab in (("C2", table), ("HC2", hc)) for k, r in sorted(tab.sup.items())]
    report.tables["contraction_sup"] = (["k", "norm_kind", "sup_ratio"], sup_rows)
    k_hi = trace.K - 1
    worst = table.max_ratio(3, k_hi)
    report.add(ContractResult(
        "contraction", worst < cfg.contraction_threshold,
        f"max C2 ratio over k=3..{k_hi}: {worst:.4g} (threshold {cfg.contraction_threshold:g})",
    ))


def _decay(cfg, trace, report):
    table = decay_envelope_table(trace, order=cfg.decay_order)
    rows = [(k, m, float(trace.times[j]), v) for (k, m, j), v in sorted(table.items())]
    report.tables["decay"] = (["k", "derivative_order", "t", "envelope"], rows)
    ok, worst = decay_contract(table, k_ref=3, factor=2.0)
    report.add(ContractResult("decay", ok, f"max envelope(k)/envelope(3) over k>=3: {worst:.4g} (limit 2)"))


def _incompressibility(cfg, trace, report):
    res = incompressibility_residual(trace)
    rows = [(k, float(trace.times[j]), v) for (k, j), v in sorted(res.items())]
    report.tables["divergence"] = (["k", "t", "max_abs_div_core"], rows)
    g = growth_ratio(res)
    report.add(ContractResult("incompressibility", g <= DIV_GROWTH, f"growth in k: {g:.4g} (limit {DIV_GROWTH})"))


def _recursion(cfg, trace, report):
    gaps = vorticity_increment_recursion(trace)
    rows = sorted(gaps.items())
    report.tables["recursion"] = (["k", "max_abs_residual"], rows)
    worst = max((v for k, v in gaps.items() if k >= 3), default=0.0)
    report.add(ContractResult("recursion", worst <= RECURSION_TOL, f"max residual k>=3: {worst:.3g}"))


def _moment(cfg, report):
    grid = Grid(cfg.R, cfg.n)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    x1 = grid.mesh()[0]
    lhs, rhs = moment_bound_check(x1, grid, cfg.nu, cfg.T, axis=0, L=1.0, n_slices=cfg.n_steps)
    rows.append(("linear", 1.0, lhs, rhs))
    for i in range(cfg.moment_fields):
        F = random_lipschitz_field(rng, grid)
        L = measured_lipschitz(F, grid)
        lhs, rhs = moment_bound_check(F, grid, cfg.nu, cfg.T, axis=i % 3, L=L, n_slices=cfg.n_steps)
        rows.append((f"random{i}", L, lhs, rhs))
    report.tables["moment"] = (["field", "lipschitz", "lhs", "rhs"], rows)
    worst = max(r[2] / r[3] for r in rows)
    report.add(ContractResult(
        "moment", worst <= 1.0 + MOMENT_SLACK, f"max lhs/rhs over {len(rows)} fields: {worst:.4g}",
    ))


def _blowup(cfg, report):
    spec = cfg.data_spec()
    grids = [Grid(cfg.blowup_R, n) for n in cfg.blowup_n]
    res = blowup_indicator(spec, grids)
    rows = [(h, s) for h, s in zip(res.hs, res.sups)]
    report.tables["blowup"] = (["h", "sup_abs_vorticity"], rows)
    prof = spec.profile
    detail = f"exponent {res.exponent:.4g}; kink order {res.kink_order}"
    if not isinstance(prof, RadialProfile):
        ok = abs(res.exponent) <= LIPSCHITZ_TOL and res.kink_order is None
    elif cfg.k == 0:
        p = prof.params
        target = p.beta0 - 2.0 - p.alpha0
        tol = LIPSCHITZ_TOL if abs(target) < 1e-12 else BLOWUP_TOL
        ok = abs(res.exponent - target) <= tol
        detail += f" (target {target:.4g} +/- {tol:g})"
    else:
        # the probe resolves derivatives up to second order only
        ok = res.kink_order == 2 if cfg.k == 2 else res.kink_order is not None
        detail += f" (expected {2 if cfg.k == 2 else 'finite'})"
    report.add(ContractResult("blowup", ok, detail))


def _mms(cfg, report):
    signs = SignPack(cfg.flip_burgers, cfg.flip_leray)
    study = convergence_study(cfg.mms_n, cfg.mms_R, cfg.mms_T, 0.1, cfg.mms_K, signs)
    rows = [(h, e) for h, e in zip(study.hs, study.errors)]
    report.tables["mms"] = (["h", "relative_error"], rows)
    ok = study.order >= MMS_MIN_ORDER and study.errors[-1] <= MMS_MAX_ERROR
    report.add(ContractResult(
        "manufactured", ok,
        f"order {study.order:.3g} (min {MMS_MIN_ORDER}); finest error {study.errors[-1]:.3g} (max {MMS_MAX_ERROR})",
    ))


def _nu_sweep(cfg, report):
    res = viscosity_sweep(cfg.iteration_config(), cfg.nu_sweep)
    rows = [(res.nus[p], res.nus[p + 1], d) for p, d in enumerate(res.consecutive())]
    report.tables["nu_sweep"] = (["nu_a", "nu_b", "cauchy_C1"], rows)
    ratio_rows = [
        (nu, label, k, r) for (nu, label), sup in sorted(res.ratios.items()) for k, r in sorted(sup.items())
    ]
    report.tables["nu_sweep_ratios"] = (["nu", "norm_kind", "k", "sup_ratio"], ratio_rows)
    dec = res.strictly_decreasing()
    spread = res.ratio_spread("HC2", k_lo=3)
    report.add(ContractResult("nu_sweep_cauchy", dec, "consecutive differences " + ", ".join(f"{d:.4g}" for d in res.consecutive())))
    report.add(ContractResult("nu_sweep_ratios", spread < SWEEP_SPREAD, f"HC2 ratio spread k>=3: {spread:.3g} (limit {SWEEP_SPREAD})"))


# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, out_dir: Path, log=print) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint
    report = DiagnosticsReport(fp)
    (out_dir / "config.cfg").write_text(cfg.canonical(), encoding="utf-8")
    (out_dir / "fingerprint.txt").write_text(fp + "\n", encoding="utf-8")
    with scipy.fft.set_workers(cfg.threads):
        icfg = cfg.iteration_config()
        log(f"[reveuler] {cfg.name} fingerprint {fp}: Picard run K_max={cfg.K_max} on {cfg.n}^3")
        trace = run_picard(icfg)
        kinds = (NormKind.C(0), NormKind.C(2), NormKind.HC(2))
        (out_dir / "norms.csv").write_text(
            trace.to_csv(kinds, "delta", header_lines=(f"fingerprint {fp}; {UNITS}",)), encoding="utf-8"
        )
        if cfg.snapshots:
            write_snapshot(out_dir / "velocity_final.bin", VectorField3(icfg.grid, trace.velocity(trace.K)[-1]),
                           time=float(trace.times[-1]), nu=cfg.nu)
        steps = [
            (cfg.contraction, "contraction", lambda: _contraction(cfg, trace, report)),
            (cfg.decay, "decay", lambda: _decay(cfg, trace, report)),
            (cfg.incompressibility, "incompressibility", lambda: _incompressibility(cfg, trace, report)),
            (cfg.recursion, "recursion", lambda: _recursion(cfg, trace, report)),
            (cfg.moment, "moment", lambda: _moment(cfg, report)),
            (cfg.blowup, "blowup", lambda: _blowup(cfg, report)),
            (cfg.mms, "manufactured solution", lambda: _mms(cfg, report)),
            (bool(cfg.nu_sweep), "viscosity sweep", lambda: _nu_sweep(cfg, report)),
        ]
        for enabled, label, fn in steps:
            if enabled:
                log(f"[reveuler] {label}")
                fn()
    if not report.all_finite():
        raise FloatingPointError("non-finite entry in a diagnostics table")
    for name, (header, rows) in report.tables.items():
        (out_dir / f"{name}.csv").write_text(csv_text(fp, header, rows), encoding="utf-8")
    summary = report.summary()
    (out_dir / "summary.txt").write_text(summary, encoding="utf-8")
    log(summary.rstrip())
    return EXIT_OK if report.passed else EXIT_CONTRACT


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reveuler", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a config file or bundled preset")
    run.add_argument("config", help="path to a key = value config, or a preset name")
    run.add_argument("-o", "--output-dir", help=f"artifact directory (overrides the config and ${OUTPUT_ENV})")
    sub.add_parser("presets", help="list bundled presets")
    sub.add_parser("version", help="print the package version")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "presets":
        sys.stdout.write(list_presets())
        return EXIT_OK
    try:
        cfg = resolve_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    try:
        return run_experiment(cfg, Path(out))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any fault maps to exit 3
        traceback.print_exc()
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
