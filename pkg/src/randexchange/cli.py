"""Command-line entry point: ``randexchange <subcommand> --config cfg.json --seed S --out DIR``.

Exit codes: 0 success, 1 invalid config or failed verification, 2 output
directory not writable.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance, renewal, rwre, specfun
from . import exchange as ex
from . import stats as st
from .config import ConfigError, ExperimentConfig, load_config
from .renewal import format_real
from .specfun import RngHandle

log = logging.getLogger("randexchange")

EXIT_OK, EXIT_FAIL, EXIT_UNWRITABLE = 0, 1, 2

# sub-stream ids, fixed so outputs depend only on the seed
STREAM_INPUT, STREAM_DYNAMICS, STREAM_REFERENCE, STREAM_AUX = 0, 1, 2, 3


class UnwritableOutput(OSError):
    pass


def _prepare_out(out: str) -> Path:
    d = Path(out)
    try:
        d.mkdir(parents=True, exist_ok=True)
        probe = d / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UnwritableOutput(f"cannot write to {d}: {exc}") from exc
    return d


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_real(v) if isinstance(v, float) else v for v in row])


def _emit(summary: dict, quiet: bool) -> None:
    if not quiet:
        print(json.dumps(summary, sort_keys=True))


def _initial_gaps(cfg: ExperimentConfig, h: RngHandle) -> renewal.GapSequence:
    if cfg.input is not None:
        return renewal.read_gaps_csv(cfg.input)
    return renewal.sample_gaps(cfg.F, cfg.n, h.generator(STREAM_INPUT))


def _target_law(cfg: ExperimentConfig, gaps: renewal.GapSequence) -> specfun.DistributionSpec:
    """Fixed-point law to measure against: Gamma(a+b, (a+b)/mean) for beta(a, b) divisions."""
    if cfg.target is not None:
        return cfg.target
    mu = specfun.mean(cfg.F) if cfg.F is not None else float(gaps.gaps.mean())
    if cfg.G.kind == "beta":
        shape = sum(cfg.G.params)
        return specfun.gamma(shape, shape / mu)
    if cfg.F is not None:
        return cfg.F
    raise ConfigError("cannot infer a target law; add 'target' to the config")


def _gap_reports(gaps: np.ndarray, law, tests, seed: int, step: int | None = None) -> list[st.TestReport]:
    suffix = "" if step is None else f"@{step}"
    reports = []
    if "ks" in tests and gaps.size >= 100:
        reports.append(st.ks_test(gaps, law, name="ks" + suffix, seed=seed))
    if "lag" in tests and gaps.size > 31:
        rho = st.lag_correlation(gaps, 1)
        band = 4 / math.sqrt(gaps.size)
        reports.append(st.TestReport("lag1" + suffix, rho, None, abs(rho) < band, int(gaps.size), seed=seed,
                                     details=f"band={band:.6g}"))
    if "chi2" in tests:
        try:
            reports.append(st.chi2_independence(np.column_stack((gaps[:-1], gaps[1:])),
                                                name="chi2" + suffix, seed=seed))
        except ValueError as exc:
            log.warning("chi2 skipped: %s", exc)
    return reports


# ---------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    h = RngHandle(cfg.seed)
    gaps = renewal.sample_gaps(cfg.F, cfg.n, h.generator(STREAM_INPUT))
    renewal.write_gaps_csv(out / "gaps.csv", gaps)
    _emit({"n": len(gaps), "mean": float(gaps.gaps.mean()), "var": float(gaps.gaps.var(ddof=1)),
           "gaps": "gaps.csv"}, quiet)
    return EXIT_OK


def cmd_shift(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    h = RngHandle(cfg.seed)
    gaps = _initial_gaps(cfg, h)
    pts = renewal.gaps_to_points(gaps)
    shifted = ex.apply_division_shift(pts, cfg.G, h.generator(STREAM_DYNAMICS))
    new_gaps = renewal.points_to_gaps(shifted)
    renewal.write_column_csv(out / "points.csv", shifted.points, "t")
    renewal.write_gaps_csv(out / "gaps.csv", new_gaps)
    law = cfg.F if cfg.F is not None else _target_law(cfg, gaps)
    reports = _gap_reports(new_gaps.gaps, law, cfg.tests, cfg.seed)
    st.write_reports_jsonl(out / "reports.jsonl", reports)
    _emit({"points": len(shifted), "mean_gap": float(new_gaps.gaps.mean()),
           "reports": {r.name: r.verdict for r in reports}}, quiet)
    return EXIT_OK


def cmd_iterate(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    h = RngHandle(cfg.seed)
    gaps = _initial_gaps(cfg, h)
    if len(gaps) <= cfg.steps + 1 and cfg.steps > 0:
        raise ConfigError(f"{len(gaps)} gaps cannot support {cfg.steps} steps")
    target = _target_law(cfg, gaps)
    reference = specfun.sample(target, h.generator(STREAM_REFERENCE), size=max(len(gaps), 100_000))
    trace, reports = [], []
    snaps = set(cfg.snapshots)

    def record(step, g):
        x = g.gaps
        w1 = st.quantile_distance(x, reference, 1000) if x.size >= 2 else math.nan
        trace.append((step, float(x.mean()), float(x.var(ddof=1)) if x.size > 1 else 0.0, w1))
        reports.extend(_gap_reports(x, target, cfg.tests, cfg.seed, step))
        if step in snaps:
            renewal.write_gaps_csv(out / f"gaps_step{step}.csv", g)

    final = ex.iterate_exchange(gaps, cfg.G, cfg.steps, h.generator(STREAM_DYNAMICS), callback=record)
    _write_rows(out / "trace.csv", ["step", "mean", "var", "w1"], trace)
    renewal.write_gaps_csv(out / "gaps.csv", final)
    st.write_reports_jsonl(out / "reports.jsonl", reports)
    failed = [r.name for r in reports if not r.passed]
    _emit({"steps": cfg.steps, "target": target.to_dict(), "w1_start": trace[0][3], "w1_end": trace[-1][3],
           "final_gaps": len(final), "reports": len(reports), "failed_reports": failed}, quiet)
    return EXIT_OK


def cmd_exchange(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    h = RngHandle(cfg.seed)
    masses = specfun.sample(cfg.F, h.generator(STREAM_INPUT), size=cfg.n)
    traj = ex.iterate_random_exchange(ex.ExchangeState(masses), cfg.sharing, cfg.steps,
                                      h.generator(STREAM_DYNAMICS), snapshots=cfg.snapshots, summaries=True)
    _write_rows(out / "trace.csv", ["step", "mean", "var", "total_mass"], traj.summaries)
    renewal.write_column_csv(out / "masses.csv", traj.final.masses, "mass")
    for k, m in sorted(traj.snapshots.items()):
        renewal.write_column_csv(out / f"snapshot_{k}.csv", m, "mass")
    summary = {"steps": cfg.steps, "N": cfg.n, "total_mass": traj.final.total_mass,
               "initial_total_mass": traj.summaries[0][3]}
    try:
        shape, rate = st.gamma_fit_mom(traj.final.masses)
        summary.update(gamma_shape=shape, gamma_rate=rate)
    except ValueError:
        pass
    _emit(summary, quiet)
    return EXIT_OK


def cmd_rwre(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    h = RngHandle(cfg.seed)
    rows = []
    for i, n in enumerate(cfg.ns):
        walk = rwre.estimate_return_probability(cfg.sharing, n, cfg.replicas, h.with_stream(1000 + i),
                                                cfg.threads)
        cols = rwre.sum_squared_columns(cfg.sharing, n, cfg.N, cfg.replicas, h.with_stream(2000 + i),
                                        cfg.threads)
        rows.append((n, walk.value, walk.stderr, "walkers"))
        rows.append((n, cols.value, cols.stderr, "columns"))
    rwre.write_trace_csv(out / "rwre.csv", rows)
    # equals 1 only when every row is a point mass; then the walkers never separate
    stay = rwre.z_transition_distribution(True, cfg.sharing, h.generator(STREAM_AUX)).get(0, 0.0)
    summary = {"ns": cfg.ns, "replicas": cfg.replicas, "stay_probability_at_zero": stay,
               "decay_expected": stay < 1.0}
    if cfg.F is not None:
        trace = rwre.variance_decay_trace(cfg.F, cfg.sharing, cfg.ns, cfg.N, cfg.replicas,
                                          h.with_stream(3000), cfg.threads)
        keys = ["n", "variance", "variance_se", "column_sum", "column_sum_se", "ratio", "ratio_se"]
        _write_rows(out / "variance.csv", keys, [tuple(r[k] for k in keys) for r in trace])
        summary["variance_ratios"] = {str(r["n"]): r["ratio"] for r in trace}
    _emit(summary, quiet)
    return EXIT_OK


def cmd_euler(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    gen = RngHandle(cfg.seed).generator(STREAM_INPUT)
    top = max(cfg.ns)
    values = np.empty((cfg.replicas, len(cfg.ns)))
    for r in range(cfg.replicas):
        tau0 = specfun.sample(cfg.F, gen, size=top + 1)
        values[r] = [ex.euler_sum_value(tau0, cfg.p, n) for n in cfg.ns]
    rows = [(n, float(values[:, j].mean()), float(values[:, j].std(ddof=1)), cfg.replicas)
            for j, n in enumerate(cfg.ns)]
    _write_rows(out / "euler.csv", ["n", "mean", "std", "replicas"], rows)
    _emit({"p": cfg.p, "std": {str(n): s for n, _, s, _ in rows}}, quiet)
    return EXIT_OK


COMMANDS = {
    "simulate-renewal": cmd_simulate,
    "shift": cmd_shift,
    "iterate": cmd_iterate,
    "exchange": cmd_exchange,
    "rwre": cmd_rwre,
    "euler": cmd_euler,
}


def cmd_verify(args) -> int:
    seed = acceptance.DEFAULT_SEED if args.seed is None else args.seed

    def progress(r):
        if not args.quiet:
            print(r.line(), file=sys.stderr)

    results = acceptance.run_suite(args.suite, seed, args.threads, progress)
    report = {"suite": args.suite, "seed": seed, "passed": all(r.passed for r in results),
              "criteria": [r.to_dict(timings=args.timings) for r in results]}
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        try:
            d = _prepare_out(args.out)
        except UnwritableOutput as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_UNWRITABLE
        (d / "verify.json").write_text(text + "\n")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randexchange", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
        p.add_argument("--out", default=None if name == "verify" else ".", help="output directory")
        p.add_argument("--replicas", type=int, help="replica count (config value wins)")
        p.add_argument("--threads", type=int, default=None, help="worker threads for replicas")
        p.add_argument("--quiet", action="store_true")
        if name == "verify":
            p.add_argument("--suite", default="all", choices=sorted(acceptance.SUITES))
            p.add_argument("--timings", action="store_true", help="include wall-clock times in the report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_FAIL
    if args.command == "verify":
        args.threads = args.threads or 1
        return cmd_verify(args)
    if not args.config:
        print(f"error: {args.command} requires --config", file=sys.stderr)
        return EXIT_FAIL
    try:
        cfg = load_config(args.command, args.config, seed=args.seed, replicas=args.replicas,
                          threads=args.threads)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        out = _prepare_out(args.out)
    except UnwritableOutput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNWRITABLE
    try:
        return COMMANDS[args.command](cfg, out, args.quiet)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
