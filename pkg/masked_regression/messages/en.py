"""
masked-regression CLI - English message catalog (default/fallback).

Placeholders ({path}, {cmd}, etc.) are substituted via str.format().
"""

MESSAGES = {

    # =========================================================================
    # Common
    # =========================================================================

    "pass_word": "PASS",
    "fail_word": "FAIL",
    "verdict_pass": "All checks passed.",
    "verdict_fail": "Some checks FAILED (see report).",
    "report_written": "Report written to {path}",
    "error_prefix": "Error: {error}",
    "error_regime_required": "--regime is required (small-beta, big-eta, interm-eta, small-eta)",
    "error_data_required": "--data is required",
    "error_file_not_found": "file not found: {path}",

    # =========================================================================
    # Warnings (stderr)
    # =========================================================================

    "warn_runs_read_failed": "Warning: Could not read run log: {error}",
    "warn_runs_corrupt_line": "Warning: Skipping corrupt run log entry on line {line_num}",
    "warn_bad_threads": "Warning: MREG_THREADS={value} is not an integer; using 1 thread",

    # =========================================================================
    # mreg generate / corrupt / estimate
    # =========================================================================

    "generate_desc": "Draw a clean dataset (x ~ N(0, I), y = beta^T x + noise) as JSON lines.",
    "generate_error_no_beta": "give either --beta-norm or --beta",
    "generate_done": "Wrote {n} samples of dimension {d} to {path}",
    "corrupt_desc": "Apply an adversary to a dataset, or run the coupling adversary on a regime construction.",
    "corrupt_error_n_required": "--n is required with --adversary coupling",
    "corrupt_done": "Applied {adversary}; wrote {path}",
    "corrupt_paired_done": "Wrote paired datasets to {path} (success={success}, max edits per column={max_edits})",
    "estimate_desc": "Run an estimator (a1, a2, a3, unified, ols) on a JSON-lines dataset.",

    # =========================================================================
    # mreg couple-verify / forced-error
    # =========================================================================

    "couple_verify_desc": "Monte Carlo check of a coupling: marginals, disagreement budget, shared labels.",
    "couple_verify_error_no_specs": "config contains no specs",
    "couple_verify_line": "  {regime:<11} mean disagreements {mean:.4g}  bound {bound:.4g}  {result}",
    "forced_error_desc": "Run the coupling adversary and check that every estimator is forced to half the separation.",
    "forced_error_summary": "Adversary succeeded {successes}/{runs}; forced error >= {half:.4g} (predicted order {predicted:.4g})",

    # =========================================================================
    # mreg regime-table / calibrate
    # =========================================================================

    "regime_table_desc": "Run A1/A2/A3/unified over a regime grid against both stress adversaries.",
    "regime_table_line": "  d={d} eta={eta:g} |beta|={beta_norm:g}: predicted {predicted}, best {best}, interior={interior}  {result}",
    "calibrate_desc": "Measure the unspecified constants of the disagreement and error bounds.",
    "calibrate_line": "  {key:<22} {value:.4g}",
    "calibrate_constants_written": "Proposed constants written to {path}",

    # =========================================================================
    # mreg history
    # =========================================================================

    "history_desc": "Show recent runs from the run log.",
    "history_empty": "No runs recorded yet.",
    "history_line": "{timestamp}  {command:<14} seed={seed}  {result}  {output}",

    # =========================================================================
    # Main
    # =========================================================================

    "main_error_unknown_command": "Error: Unknown command '{cmd}'.",
    "main_error_available_commands": "  Available commands: generate, corrupt, estimate, couple-verify, forced-error, regime-table, calibrate, history, version, help",
    "main_error_help_hint": "  Run 'mreg help' for usage.",

    "help_text": """masked-regression - linear regression under coordinate-wise erasure

Usage:
  mreg generate --d D --n N (--beta-norm X | --beta b1,b2,...) [--sigma S]
  mreg corrupt --adversary oblivious|sign-flip --eta ETA --data FILE
  mreg corrupt --adversary coupling --eta ETA --n N --regime R [spec flags] [--mode erase|replace]
  mreg estimate --alg a1|a2|a3|unified|ols --data FILE [--eta ETA]
  mreg couple-verify [--regime R spec flags | --config FILE] [--marginal-n N] [--eta ETA]
  mreg forced-error --regime R [spec flags] --eta ETA --n N [--runs K] [--alg NAME ...]
  mreg regime-table [--config FILE] [--n N]
  mreg calibrate [--write-constants FILE]
  mreg history [--last N]
  mreg version

Spec flags: --d, --b, --s, --eps, --B, --E, --sigma, --r
Global flags: --seed, --out, --trials, --threads

Exit codes: 0 pass, 1 failed check, 2 usage or input error.

Environment:
  MREG_HOME     Run log and default output directory (default: ~/.mreg)
  MREG_THREADS  Default worker threads (results do not depend on it)
  MREG_LANG     Message language (en, ja)

Examples:
  mreg couple-verify --regime big-eta --d 100 --s 1 --trials 10000 --seed 7
  mreg forced-error --regime big-eta --d 100 --s 1 --eta 0.45 --n 1000 --runs 100
  mreg regime-table --threads 8 --out results/regime.csv
""",
}
