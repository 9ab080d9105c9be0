#!/usr/bin/env python3
"""
masked-regression engine - command-line surface of the `mreg` tool.
Regression under coordinate-wise erasure: estimators, couplings, and the
experiments that check them.
"""

import sys
import os
import json
import argparse
import datetime
from pathlib import Path

import numpy as np

from masked_regression.adversaries import ADVERSARIES, AdversaryConfig, coupling_adversary
from masked_regression.couplings import SPEC_TYPES, spec_from_dict
from masked_regression.errors import BudgetExceededError, InvalidInputError, MaskedRegressionError
from masked_regression.estimators import ESTIMATORS, run_estimator
from masked_regression.gaussian_math import RngStream
from masked_regression.model_core import Dataset, RegressionInstance, regressor_for_norm, sample_clean
from masked_regression import harness
from masked_regression.mreg_i18n import msg


VERSION = "0.1.0"

MREG_DIR = Path(os.environ.get("MREG_HOME", Path.home() / ".mreg"))
RUNS_FILE = MREG_DIR / "runs.jsonl"
OUTPUT_DIR = MREG_DIR / "output"

ALL_ESTIMATORS = ("a1", "a2", "a3", "unified", "ols")
SPEC_FIELDS = ("d", "b", "s", "eps", "B", "E", "sigma", "r")


def ensure_dirs():
    MREG_DIR.mkdir(parents=True, exist_ok=True)
    OUTPUT_DIR.mkdir(parents=True, exist_ok=True)


def default_threads() -> int:
    raw = os.environ.get("MREG_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        print(msg("warn_bad_threads", value=raw), file=sys.stderr)
        return 1


# --- Output helpers ---

def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps_report(report: dict) -> str:
    """Deterministic JSON: sorted keys, repr-precision floats, no timestamps."""
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_report(report: dict, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report))


# --- Run log ---

def log_run(command: str, argv, passed: bool, output=None, seed=None):
    """Append a run entry."""
    ensure_dirs()
    entry = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "passed": passed,
        "output": str(output) if output is not None else None,
    }
    with open(RUNS_FILE, "a") as f:
        f.write(json.dumps(entry, ensure_ascii=False) + "\n")


def load_runs() -> list:
    """Load all run entries. Skips corrupt lines gracefully."""
    if not RUNS_FILE.exists():
        return []
    try:
        text = RUNS_FILE.read_text()
    except OSError as e:
        print(msg("warn_runs_read_failed", error=str(e)), file=sys.stderr)
        return []
    entries = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            entries.append(json.loads(line))
        except json.JSONDecodeError:
            print(msg("warn_runs_corrupt_line", line_num=i), file=sys.stderr)
    return entries


# --- Argument parsing ---

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    return common


def _float_list(raw: str) -> np.ndarray:
    """argparse type for comma-separated reals such as `1.5,-2`."""
    try:
        return np.array([float(v) for v in raw.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from None


def _parser(command: str, description: str) -> argparse.ArgumentParser:
    return argparse.ArgumentParser(prog=f"mreg {command}", description=description, parents=[_common_parser()])


def _add_spec_args(parser: argparse.ArgumentParser):
    parser.add_argument("--regime", choices=sorted(SPEC_TYPES))
    parser.add_argument("--d", type=int)
    parser.add_argument("--b", type=float)
    parser.add_argument("--s", type=float)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--B", type=float)
    parser.add_argument("--E", type=float)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--r", type=float)


def _spec_entry(args) -> dict:
    if not args.regime:
        raise InvalidInputError(msg("error_regime_required"))
    entry = {"regime": args.regime}
    entry.update({k: getattr(args, k) for k in SPEC_FIELDS if getattr(args, k, None) is not None})
    return entry


def _threads(args) -> int:
    return args.threads if args.threads else default_threads()


def _output_path(args, default_name: str) -> Path:
    return args.out if args.out is not None else OUTPUT_DIR / default_name


def _load_dataset(path) -> Dataset:
    if path is None:
        raise InvalidInputError(msg("error_data_required"))
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(msg("error_file_not_found", path=path))
    return Dataset.load_jsonl(path)


def _print_verdict(passed: bool, path=None):
    if path is not None:
        print(msg("report_written", path=path))
    print(msg("verdict_pass") if passed else msg("verdict_fail"))


# --- Commands ---

def cmd_generate(args):
    """Draw a clean dataset from the linear model."""
    p = _parser("generate", msg("generate_desc"))
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta-norm", type=float, default=None)
    p.add_argument("--beta", type=_float_list, default=None, help="comma-separated coefficients")
    p.add_argument("--sigma", type=float, default=1.0)
    a = p.parse_args(args)
    if a.beta is not None:
        beta = a.beta
    elif a.beta_norm is not None:
        beta = regressor_for_norm(a.d, a.beta_norm)
    else:
        raise InvalidInputError(msg("generate_error_no_beta"))
    inst = RegressionInstance(a.d, beta, a.sigma)
    data = sample_clean(inst, a.n, RngStream(a.seed))
    out = _output_path(a, "clean.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    data.save_jsonl(out)
    print(msg("generate_done", n=data.n, d=data.d, path=out))
    log_run("generate", args, True, out, a.seed)
    return 0


def cmd_corrupt(args):
    """Apply a named adversary to a dataset, or run the coupling adversary."""
    p = _parser("corrupt", msg("corrupt_desc"))
    p.add_argument("--adversary", choices=sorted(ADVERSARIES) + ["coupling"], required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--data", type=Path, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--mode", choices=["erase", "replace"], default="erase")
    _add_spec_args(p)
    a = p.parse_args(args)
    if a.adversary == "coupling":
        if a.n is None:
            raise InvalidInputError(msg("corrupt_error_n_required"))
        spec = spec_from_dict(_spec_entry(a))
        paired = coupling_adversary(spec, a.n, AdversaryConfig(a.eta, mode=a.mode), RngStream(a.seed),
                                    threads=_threads(a))
        out = _output_path(a, "paired")
        paired.save(out)
        print(msg("corrupt_paired_done", path=out, success=paired.success,
                  max_edits=int(paired.edits_per_coordinate.max(initial=0))))
        log_run("corrupt", args, bool(paired.success), out, a.seed)
        return 0
    data = _load_dataset(a.data)
    corrupted = ADVERSARIES[a.adversary](data, a.eta, RngStream(a.seed))
    out = _output_path(a, "corrupted.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    corrupted.save_jsonl(out)
    print(msg("corrupt_done", adversary=a.adversary, path=out))
    log_run("corrupt", args, True, out, a.seed)
    return 0


def cmd_estimate(args):
    """Run a named estimator on a dataset file."""
    p = _parser("estimate", msg("estimate_desc"))
    p.add_argument("--alg", choices=sorted(ESTIMATORS), required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--constants", type=Path, default=None)
    a = p.parse_args(args)
    data = _load_dataset(a.data)
    meta = harness.meta_config_from(harness.load_constants(a.constants))
    out = run_estimator(a.alg, data, a.eta, meta)
    text = dumps_report(out.to_json())
    if a.out is None:
        sys.stdout.write(text)
    else:
        a.out.parent.mkdir(parents=True, exist_ok=True)
        a.out.write_text(text)
        print(msg("report_written", path=a.out))
    log_run("estimate", args, True, a.out, a.seed)
    return 0


def cmd_couple_verify(args):
    """Monte Carlo check of coupling marginals and disagreement budgets."""
    p = _parser("couple-verify", msg("couple_verify_desc"))
    _add_spec_args(p)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--marginal-n", type=int, default=None)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--constants", type=Path, default=None)
    a = p.parse_args(args)
    if a.regime:
        entry = _spec_entry(a)
        if a.eta is not None:
            entry["eta"] = a.eta
        entries = [entry]
        marginal_n = a.marginal_n or 0
    else:
        cfg = harness.load_yaml(a.config) if a.config else harness.load_preset("coupling_reference")
        entries = cfg.get("specs", [])
        marginal_n = a.marginal_n if a.marginal_n is not None else int(cfg.get("marginal_n", 0))
        if not entries:
            raise InvalidInputError(msg("couple_verify_error_no_specs"))
    report = harness.run_coupling_verification(entries, a.trials or 10_000, a.seed,
                                               harness.load_constants(a.constants),
                                               marginal_n=marginal_n, threads=_threads(a))
    out = _output_path(a, "couple_verify.json")
    write_report(report, out)
    for r in report["results"]:
        print(msg("couple_verify_line", regime=r["spec"]["regime"], mean=r["stats"]["mean_coord_disagreements"],
                  bound=r["bound"], result=msg("pass_word") if r["pass"] else msg("fail_word")))
    _print_verdict(report["pass"], out)
    log_run("couple-verify", args, report["pass"], out, a.seed)
    return 0 if report["pass"] else 1


def cmd_forced_error(args):
    """Show that identical masked datasets force half the separation as error."""
    p = _parser("forced-error", msg("forced_error_desc"))
    _add_spec_args(p)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--mode", choices=["erase", "replace"], default="erase")
    p.add_argument("--alg", action="append", choices=sorted(ESTIMATORS), default=None)
    p.add_argument("--min-success-rate", type=float, default=0.0)
    p.add_argument("--constants", type=Path, default=None)
    a = p.parse_args(args)
    spec = spec_from_dict(_spec_entry(a))
    meta = harness.meta_config_from(harness.load_constants(a.constants))
    report = harness.run_forced_error_demo(spec, a.n, a.eta, a.alg or list(ALL_ESTIMATORS), a.runs, a.seed,
                                           mode=a.mode, meta=meta, min_success_rate=a.min_success_rate,
                                           threads=_threads(a))
    out = _output_path(a, "forced_error.json")
    write_report(report, out)
    print(msg("forced_error_summary", successes=report["successes"], runs=report["runs"],
              half=report["half_separation"], predicted=report["predicted_lower_bound"]))
    _print_verdict(report["pass"], out)
    log_run("forced-error", args, report["pass"], out, a.seed)
    return 0 if report["pass"] else 1


def cmd_regime_table(args):
    """Run estimators over a regime grid and write one CSV row per cell, estimator and adversary."""
    p = _parser("regime-table", msg("regime_table_desc"))
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--n", type=int, default=None)
    a = p.parse_args(args)
    raw = harness.load_yaml(a.config) if a.config else harness.load_preset("regime_grid")
    constants = harness.load_constants()
    cfg = harness.ExperimentConfig.from_dict(raw, seed=a.seed, trials=a.trials, n=a.n, threads=_threads(a),
                                             meta=harness.meta_config_from(constants))
    report = harness.run_regime_table(cfg)
    out = _output_path(a, "regime_table.csv")
    harness.write_csv(report.records, out)
    summary = out.with_suffix(".json")
    write_report(report.to_json(), summary)
    for c in report.cells:
        print(msg("regime_table_line", d=c.d, eta=c.eta, beta_norm=c.beta_norm, predicted=c.predicted,
                  best=c.empirical_best, interior=c.interior,
                  result=msg("pass_word") if c.passed else msg("fail_word")))
    print(msg("report_written", path=summary))
    _print_verdict(report.passed, out)
    log_run("regime-table", args, report.passed, out, a.seed)
    return 0 if report.passed else 1


def cmd_calibrate(args):
    """Measure unspecified constants against their bound formulas."""
    p = _parser("calibrate", msg("calibrate_desc"))
    p.add_argument("--constants", type=Path, default=None)
    p.add_argument("--write-constants", type=Path, default=None)
    p.add_argument("--est-n", type=int, default=100_000)
    a = p.parse_args(args)
    frozen = harness.load_constants(a.constants)
    report = harness.calibrate_constants(a.seed, frozen, trials=a.trials or 10_000, est_n=a.est_n,
                                         threads=_threads(a))
    out = _output_path(a, "calibration.json")
    write_report(report, out)
    for key, value in sorted(report["measured"].items()):
        print(msg("calibrate_line", key=key, value=value))
    if a.write_constants is not None:
        harness.dump_yaml({"constants": report["proposed"]}, a.write_constants)
        print(msg("calibrate_constants_written", path=a.write_constants))
    _print_verdict(report["pass"], out)
    log_run("calibrate", args, report["pass"], out, a.seed)
    return 0 if report["pass"] else 1


def cmd_history(args):
    """Show recent runs from the run log."""
    p = argparse.ArgumentParser(prog="mreg history", description=msg("history_desc"))
    p.add_argument("--last", type=int, default=10)
    a = p.parse_args(args)
    runs = load_runs()
    if not runs:
        print(msg("history_empty"))
        return 0
    for entry in runs[-a.last:] if a.last > 0 else runs:
        passed = entry.get("passed")
        print(msg("history_line", timestamp=entry.get("timestamp", "?"), command=entry.get("command", "?"),
                  seed=entry.get("seed"), result=msg("pass_word") if passed else msg("fail_word"),
                  output=entry.get("output") or "-"))
    return 0


def cmd_version(args):
    """Show version, Python, numpy/scipy and home directory."""
    import platform
    import scipy

    print(f"masked-regression v{VERSION}")
    print(f"   Python:  {sys.version.split()[0]}")
    print(f"   numpy:   {np.__version__}")
    print(f"   scipy:   {scipy.__version__}")
    print(f"   OS:      {platform.system()} {platform.release()}")
    print(f"   Home:    {MREG_DIR}")
    return 0


def cmd_help(args=None):
    """Show help."""
    print(msg("help_text"))
    return 0


# --- Main ---

COMMANDS = {
    "generate": cmd_generate,
    "corrupt": cmd_corrupt,
    "estimate": cmd_estimate,
    "couple-verify": cmd_couple_verify,
    "forced-error": cmd_forced_error,
    "regime-table": cmd_regime_table,
    "calibrate": cmd_calibrate,
    "history": cmd_history,
    "version": cmd_version,
    "--version": cmd_version,
    "help": cmd_help,
    "--help": cmd_help,
    "-h": cmd_help,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    ensure_dirs()

    if not argv:
        cmd_help()
        return 0

    cmd, args = argv[0], argv[1:]
    if cmd not in COMMANDS:
        print(msg("main_error_unknown_command", cmd=cmd), file=sys.stderr)
        print(msg("main_error_available_commands"), file=sys.stderr)
        print(msg("main_error_help_hint"), file=sys.stderr)
        return 2
    try:
        return COMMANDS[cmd](args)
    except SystemExit as e:
        # argparse: 0 after --help, 2 on malformed flags
        return e.code if isinstance(e.code, int) else 2
    except BudgetExceededError as e:
        print(msg("error_prefix", error=str(e)), file=sys.stderr)
        return 1
    except MaskedRegressionError as e:
        print(msg("error_prefix", error=str(e)), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main() or 0)
