"""Command-line driver: ``mpa-codebook {complexity,simulate,train,sweep}``.

Every subcommand accepts ``--config``, ``--seed``, ``--out``, ``--trials`` and
``--threads``.  CSV outputs carry the seed, the config hash and the schema
version on every row.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .bitalloc import RateEvaluator, train_allocation, write_trace
from .channel import ConfigurationError
from .codebook import BitAllocation, CodebookSpec
from .config import SCHEMA_VERSION, ConfigError, load_config
from .evaluate import (evaluate_scheme, lp_3gpp_allocation, lp_min_bits, panel_gap_config,
                       sp_min_bits)
from .quantizer import SearchBudgetExceeded

log = logging.getLogger("mpa_codebook")

COMPLEXITY_FIELDS = ("family", "B", "omega", "seed", "config_hash", "schema_version")
RATE_FIELDS = ("scheme", "B", "d_M", "mean", "half_width", "trials", "alloc", "seed",
               "config_hash", "schema_version")


class UsageError(Exception):
    pass


# -- helpers -------------------------------------------------------------------------

def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.experiment.seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        cfg.experiment.trials = args.trials
    return cfg


def _write_csv(path, fieldnames, rows):
    if path is None:
        out = sys.stdout
        w = csv.DictWriter(out, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _stamp(cfg):
    return {"seed": cfg.experiment.seed, "config_hash": cfg.hash(),
            "schema_version": SCHEMA_VERSION}


def complexity_rows(cfg):
    """Rows ``(family, B, omega)``; a family is omitted below its minimum budget."""
    budgets = cfg.experiment.budgets
    if not budgets:
        raise UsageError("experiment.budgets: the budget sweep is empty")
    array = cfg.array.build()
    n_beams = cfg.experiment.n_beams
    sp_min = sp_min_bits(array, n_beams)
    lp_min = lp_min_bits(array, n_beams)
    rows = []
    for B in budgets:
        rows.append({"family": "dft", "B": B, "omega": 2**B})
        if B >= sp_min and array.cross_polarized:
            spec = CodebookSpec.for_array("sp", array, BitAllocation(b_lp=0, b_h=B - sp_min),
                                          n_beams=n_beams)
            rows.append({"family": "sp", "B": B, "omega": spec.search_size})
        if B >= lp_min and array.cross_polarized:
            extra = (B - lp_min) // array.n_panels_h
            spec = CodebookSpec.for_array("lp", array, BitAllocation(b_h=extra), n_beams=n_beams)
            rows.append({"family": "lp", "B": B, "omega": spec.search_size})
    stamp = _stamp(cfg)
    return [{**r, **stamp} for r in rows]


def _load_allocations(paths):
    """Budget -> BitAllocation from one or more training records."""
    out = {}
    for p in paths or []:
        try:
            with open(p) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read allocation record {p}: {exc}") from exc
        records = data.get("records", [data]) if isinstance(data, dict) else data
        for rec in records:
            out[int(rec["budget"])] = BitAllocation(**rec["best"])
    return out


def _scheme_alloc(scheme, B, allocations):
    if scheme != "lp-rl":
        return None
    if B not in allocations:
        have = sorted(allocations) or "none"
        raise UsageError(f"scheme lp-rl needs an allocation record for B={B} "
                         f"(--allocation); available: {have}")
    return allocations[B]


def _feasible(scheme, B, array, n_beams):
    if scheme == "sp":
        return B >= sp_min_bits(array, n_beams)
    if scheme == "lp-3gpp":
        return B >= lp_min_bits(array, n_beams)
    return True


def _style(scheme, ex):
    return {} if scheme in ("dft", "perfect") else {"amplitude_style": ex.amplitude_style}


def _rate_row(rep, cfg):
    row = rep.row(cfg.experiment.seed)
    row["d_M"] = "" if rep.panel_gap is None else f"{rep.panel_gap:g}"
    row["B"] = "" if rep.budget is None else rep.budget
    return {**row, **_stamp(cfg)}


def simulate_rows(cfg, allocations=None, threads=1):
    ex = cfg.experiment
    array, scenario, link = cfg.array.build(), cfg.scenario.build(), cfg.link.build()
    allocations = allocations or {}
    rows = []
    for B in ex.budgets:
        for scheme in ex.schemes:
            if not _feasible(scheme, B, array, ex.n_beams):
                log.info("skipping %s at B=%d (below its minimum)", scheme, B)
                continue
            alloc = _scheme_alloc(scheme, B, allocations)
            rep = evaluate_scheme(scheme, B, array, scenario, ex.trials, ex.seed, link,
                                  threads, alloc, n_beams=ex.n_beams,
                                  panel_gap=cfg.array.panel_gap_h, **_style(scheme, ex))
            rows.append(_rate_row(rep, cfg))
    return rows


def sweep_rows(cfg, allocations=None, threads=1):
    ex = cfg.experiment
    base, scenario, link = cfg.array.build(), cfg.scenario.build(), cfg.link.build()
    B = ex.panel_gap_budget
    allocations = allocations or {}
    rows = []
    for d in ex.panel_gaps:
        array = panel_gap_config(base, d, ex.panel_gap_unit)
        for scheme in ex.schemes:
            if not _feasible(scheme, B, array, ex.n_beams):
                continue
            alloc = _scheme_alloc(scheme, B, allocations)
            rep = evaluate_scheme(scheme, B, array, scenario, ex.trials, ex.seed, link,
                                  threads, alloc, n_beams=ex.n_beams, panel_gap=d,
                                  **_style(scheme, ex))
            rows.append(_rate_row(rep, cfg))
    return rows


def train_record(cfg, budget, threads=1, trace_path=None):
    ex, rl = cfg.experiment, cfg.rl
    hp = rl.build()
    array, scenario, link = cfg.array.build(), cfg.scenario.build(), cfg.link.build()
    evaluator = RateEvaluator(array, scenario, hp.train_trials, ex.seed, link, threads,
                              ex.n_beams, ex.amplitude_style)
    result = train_allocation(budget, evaluator, hp, seed=ex.seed, n_beams=ex.n_beams)
    if trace_path is not None:
        write_trace(result, trace_path)
    report = RateEvaluator(array, scenario, hp.report_trials, ex.seed + 1, link, threads,
                           ex.n_beams, ex.amplitude_style)
    best, base = report.report(result.best), report.report(result.baseline)
    record = result.as_record()
    record.update({
        "best_rate_report": best.mean, "best_half_width": best.half_width,
        "baseline_rate_report": base.mean, "baseline_half_width": base.half_width,
        "report_trials": hp.report_trials, "g_max_trace_final": result.best_rate,
        **_stamp(cfg)})
    if budget >= lp_min_bits(array, ex.n_beams):
        record["lp_3gpp"] = lp_3gpp_allocation(budget, array, ex.n_beams).as_dict()
    return record


# -- commands ------------------------------------------------------------------------

def cmd_complexity(cfg, args):
    rows = complexity_rows(cfg)
    _write_csv(args.out, COMPLEXITY_FIELDS, rows)
    return f"complexity: {len(rows)} rows"


def cmd_simulate(cfg, args):
    allocations = _load_allocations(args.allocation or (
        [cfg.experiment.allocation_file] if cfg.experiment.allocation_file else []))
    rows = simulate_rows(cfg, allocations, args.threads)
    _write_csv(args.out, RATE_FIELDS, rows)
    return "\n".join(f"{r['scheme']:>8} B={r['B']:<3} mean={r['mean']} +-{r['half_width']}"
                     for r in rows)


def cmd_sweep(cfg, args):
    allocations = _load_allocations(args.allocation or (
        [cfg.experiment.allocation_file] if cfg.experiment.allocation_file else []))
    rows = sweep_rows(cfg, allocations, args.threads)
    _write_csv(args.out, RATE_FIELDS, rows)
    return "\n".join(f"{r['scheme']:>8} d_M={r['d_M']:<4} mean={r['mean']} +-{r['half_width']}"
                     for r in rows)


def cmd_train(cfg, args):
    budget = args.budget if args.budget is not None else cfg.rl.budget
    if args.reduced:
        cfg.rl.reduced = True
    out = Path(args.out) if args.out else None
    trace = out.with_name(out.stem + "_trace.csv") if out else None
    record = train_record(cfg, budget, args.threads, trace)
    text = json.dumps(record, indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    best = BitAllocation(**record["best"])
    return (f"train: B={budget} best={best.as_tuple()} "
            f"G={record['best_rate_report']:.6g} (baseline {record['baseline_rate_report']:.6g})")


COMMANDS = {"complexity": cmd_complexity, "simulate": cmd_simulate,
            "train": cmd_train, "sweep": cmd_sweep}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults if omitted)")
    common.add_argument("--seed", type=int, help="override experiment.seed")
    common.add_argument("--out", help="output path (CSV, or JSON for train); stdout if omitted")
    common.add_argument("--trials", type=int, help="override experiment.trials")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mpa-codebook", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("complexity", parents=[common], help="search complexity versus B")
    for name, text in (("simulate", "average sum-rate versus B"),
                       ("sweep", "average sum-rate versus panel gap")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--allocation", action="append",
                       help="training record(s) for the lp-rl scheme")
    p = sub.add_parser("train", parents=[common], help="learn a bit allocation")
    p.add_argument("--budget", type=int, help="feedback budget B (default rl.budget)")
    p.add_argument("--reduced", action="store_true",
                   help="allow budgets below the standard minimum")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        summary = COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError, ConfigurationError, SearchBudgetExceeded) as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")
    except FileNotFoundError as exc:
        parser.exit(2, f"{parser.prog} {args.command}: error: {exc}\n")
    if args.out:
        print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
