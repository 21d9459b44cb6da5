"""Command-line experiment runner.

Exit codes: 0 success, 1 configuration or I/O error, 2 numeric failure,
3 diagnostic gate failure (split-R̂ above ``RHAT_GATE``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .config import PROVENANCE_FILE, ExperimentConfig
from .errors import DegenerateVariance, InvalidInput, NotPositiveDefinite, StepTooLarge
from .geoval import run_validation_experiment
from .sampler import KERNELS, OBSERVABLES, ChainTrace, run_chains
from .traceio import read_trace_dir, trace_filename, write_trace

log = logging.getLogger("conegeo")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GATE = 0, 1, 2, 3
RHAT_GATE = 1.05


def _workers(cfg: ExperimentConfig) -> int | None:
    return cfg.workers if cfg.workers > 0 else None


def cmd_validate_geometry(cfg: ExperimentConfig, out: Path) -> int:
    report = run_validation_experiment(cfg.validation())
    report.write(out)
    cfg.write(out)
    (out / "validation_stats.json").write_text(json.dumps(report.stats, indent=2, sort_keys=True)
                                               + "\n")
    st = report.stats
    print(f"max relative calibration deviation: {st['max_rel_deviation']:.3e}")
    print(f"kendall tau (metric vs finite-difference ranking): {st['kendall_tau']:.4f}")
    print(f"spearman |margin change| vs score (non-trivial spectrum): "
          f"{st['spearman_margin_nontrivial']:.4f}")
    return EXIT_OK


def sample_kernel(cfg: ExperimentConfig, kernel: str, out: Path) -> list[ChainTrace]:
    traces = run_chains(cfg.potential(), cfg.sampler(kernel), workers=_workers(cfg))
    tdir = out / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    for t in traces:
        write_trace(tdir / trace_filename(kernel, t.chain_id), t)
        log.info("%s chain %d: acceptance %.3f, %.2fs, %d numeric rejections",
                 kernel, t.chain_id, t.acceptance_rate, t.wall_seconds, t.failures)
    return traces


def cmd_sample(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out)
    (out / "traces").mkdir(exist_ok=True)
    cfg.write(out / "traces")
    for kernel in cfg.kernels():
        traces = sample_kernel(cfg, kernel, out)
        acc = [t.acceptance_rate for t in traces]
        print(f"{kernel}: h={cfg.step_size(kernel)} acceptance {np.mean(acc):.3f}"
              f" +- {np.std(acc, ddof=1) if len(acc) > 1 else 0.0:.3f}")
    return EXIT_OK


def build_reports(cfg: ExperimentConfig,
                  traces_by_kernel: dict[str, list[ChainTrace]]) -> list[dg.MethodReport]:
    observables = dg.canonical_observables(cfg.potential().X0)
    reports = []
    for kernel in KERNELS:
        traces = traces_by_kernel.get(kernel)
        if not traces:
            continue
        reports.append(dg.summarize_method(
            kernel,
            {o: [t.kept(o) for t in traces] for o in OBSERVABLES},
            [t.acceptance_rate for t in traces],
            [t.wall_seconds for t in traces],
            [t.kept_states() for t in traces],
            observables,
        ))
    return reports


def write_diagnostics(out: Path, reports: list[dg.MethodReport],
                      traces_by_kernel: dict[str, list[ChainTrace]]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(dg.report_csv(reports))
    for obs in OBSERVABLES:
        samples = {k: np.concatenate([t.kept(obs) for t in ts])
                   for k, ts in traces_by_kernel.items()}
        ecdf_txt, hist_txt = dg.ecdf_and_histogram_csv(samples)
        (out / f"ecdf_{obs}.csv").write_text(ecdf_txt)
        (out / f"hist_{obs}.csv").write_text(hist_txt)
    if len(reports) == 2:
        a, b = reports
        z = dg.cross_method_z(a, b)
        lines = ["observable,mean_a,mean_b,ess_a,ess_b,mcse_a,mcse_b,z"]
        for name, zv in z.items():
            sa, sb = a.observables[name], b.observables[name]
            lines.append(",".join([name, *(repr(float(v)) for v in
                                           (sa.mean, sb.mean, sa.ess, sb.ess, sa.mcse, sb.mcse, zv))]))
        (out / "zscores.csv").write_text("\n".join(lines) + "\n")
        tables = dg.format_tables(a, b)
        (out / "tables.txt").write_text(tables)
        print(tables, end="")
    else:
        for r in reports:
            print(f"{r.method}: acceptance {r.acceptance_mean:.3f}, R-hat max {r.rhat_max:.6f}")


def _gate(reports: list[dg.MethodReport]) -> int:
    worst = max(r.rhat_max for r in reports)
    if not worst <= RHAT_GATE:
        print(f"diagnostic gate failed: R-hat max {worst:.4f} > {RHAT_GATE}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_diagnose(trace_dir: Path, out: Path | None = None) -> int:
    cfg_path = trace_dir / PROVENANCE_FILE
    if not cfg_path.exists() and (trace_dir.parent / PROVENANCE_FILE).exists():
        cfg_path = trace_dir.parent / PROVENANCE_FILE
    cfg = ExperimentConfig.load(cfg_path)
    traces = read_trace_dir(trace_dir, burn_in=int(cfg.burn_in_fraction * cfg.n_steps))
    if not traces:
        raise InvalidInput(f"no trace files in {trace_dir}")
    reports = build_reports(cfg, traces)
    write_diagnostics(out or trace_dir, reports, traces)
    return _gate(reports)


def cmd_reproduce_tables(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg.replace(kernel="both")
    cfg.write(out)
    (out / "traces").mkdir(exist_ok=True)
    cfg.write(out / "traces")
    traces = {k: sample_kernel(cfg, k, out) for k in KERNELS}
    reports = build_reports(cfg, traces)
    write_diagnostics(out, reports, traces)
    return _gate(reports)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conegeo", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("validate-geometry", "sample", "reproduce-tables"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--out", type=Path, default=Path("out") / name)
        p.add_argument("--seed", type=int)
        p.add_argument("--kernel", choices=(*KERNELS, "both"))
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config entry")
    p = sub.add_parser("diagnose")
    p.add_argument("trace_dir", type=Path)
    p.add_argument("--out", type=Path)
    return ap


def _load_config(args) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config).to_text() if args.config else ""
    extra = list(args.set)
    if args.seed is not None:
        extra.append(f"seed = {args.seed}")
    if args.kernel:
        extra.append(f"kernel = {args.kernel}")
    return ExperimentConfig.from_text(base + "\n".join(extra))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "diagnose":
            return cmd_diagnose(args.trace_dir, args.out)
        cfg = _load_config(args)
        cmd = {"validate-geometry": cmd_validate_geometry, "sample": cmd_sample,
               "reproduce-tables": cmd_reproduce_tables}[args.command]
        return cmd(cfg, args.out)
    except (InvalidInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotPositiveDefinite, StepTooLarge, DegenerateVariance, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
