"""Command-line entry point.

Commands: generate | poison | scan | evaluate | report.

Exit codes: 0 success (and, for ``evaluate``, every bound check passed),
1 usage or configuration error, 2 bound-check failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .attack import (
    TriggerSpec,
    default_trigger,
    k_for_rate,
    label_selector,
    poison,
    split_first_k,
    split_score_guided,
    split_uniform,
)
from .harness import (
    REPORT_FORMATS,
    SweepConfig,
    SweepReport,
    emit_report,
    run_coverage_suite,
    run_dkw_suite,
    run_joint_bound_suite,
    run_poison_sweep,
    run_rarity_suite,
)
from .fileio import read_dataset, manifest_path, write_dataset, write_manifest
from .scores import SCORE_KINDS, make_score
from .septest import separability_batch
from .synth import MixtureSpec, derive_seed, sample_dataset

EXIT_OK, EXIT_USAGE, EXIT_BOUND, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("confsep")

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "dataset_id": "synthetic",
    "mixture": {
        "num_classes": 4,
        "dim": 16,
        "separation": 4.0,
        "noise_sigma": 1.0,
        "class_weights": None,
    },
    "generate": {"n": 1000},
    "trigger": {
        "coords": None,
        "values": None,
        "marker": 5.0,
        "target_label": 0,
        "placement": "fixed",
    },
    "sweep": {
        "enabled": True,
        "n_train": 1000,
        "n_holdout_clean": 500,
        "n_holdout_poison": 500,
        "poison_rates": [0.0, 0.002, 0.01, 0.1, 0.2, 0.5],
        "thresholds": [0.1, 0.05, 0.01],
        "score": "centroid",
        "beta": 4.0,
    },
    "coverage": {
        "enabled": True,
        "n": 200,
        "epsilons": [0.01, 0.05, 0.1],
        "repetitions": 2000,
        "min_coverage": None,
    },
    "joint": {"enabled": True, "n": 200, "epsilon": 0.1, "gamma": 0.1, "repetitions": 2000},
    "rarity": {"enabled": True, "n": 200, "epsilon": 0.1, "repetitions": 2000},
    "dkw": {
        "enabled": True,
        "n_calibration": 200,
        "trials": 500,
        "samples": 1000,
        "reference": 1_000_000,
        "alpha": 0.05,
    },
    "output": {"dir": "reports", "basename": "report"},
}


class ConfigError(ValueError):
    pass


def merge_config(user: dict, defaults: dict = DEFAULT_CONFIG, prefix: str = "") -> dict:
    """Overlay ``user`` on ``defaults``; any key not in the defaults is an error."""
    if not isinstance(user, dict):
        raise ConfigError(f"config section '{prefix or '<root>'}' must be an object")
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(defaults[key], dict):
            merged[key] = merge_config(value, defaults[key], path + ".")
        else:
            merged[key] = value
    return merged


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    text = Path(path).read_text(encoding="utf-8")
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    return merge_config(user)


def _keyed(section: str, build):
    """Re-raise construction errors with the offending config section named."""
    try:
        return build()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config section '{section}': {exc}") from None


def mixture_from(cfg: dict) -> MixtureSpec:
    m = cfg["mixture"]
    weights = m["class_weights"]
    return _keyed("mixture", lambda: MixtureSpec(
        int(m["num_classes"]), int(m["dim"]), float(m["separation"]), float(m["noise_sigma"]),
        None if weights is None else tuple(weights),
    ))


def trigger_from(cfg: dict, dim: int) -> TriggerSpec:
    t = cfg["trigger"]

    def build():
        if t["coords"] is None:
            base = default_trigger(dim, t["target_label"], t["marker"], t["placement"])
            if t["values"] is None:
                return base
            return TriggerSpec(base.patch_coords, tuple(t["values"]), t["target_label"], t["placement"])
        values = t["values"] if t["values"] is not None else [t["marker"]] * len(t["coords"])
        return TriggerSpec(tuple(t["coords"]), tuple(values), t["target_label"], t["placement"])

    return _keyed("trigger", build)


def sweep_config_from(cfg: dict) -> SweepConfig:
    s = cfg["sweep"]
    spec = mixture_from(cfg)
    return _keyed("sweep", lambda: SweepConfig(
        spec=spec,
        n_train=int(s["n_train"]),
        n_holdout_clean=int(s["n_holdout_clean"]),
        n_holdout_poison=int(s["n_holdout_poison"]),
        poison_rates=tuple(s["poison_rates"]),
        thresholds=tuple(s["thresholds"]),
        trigger=trigger_from(cfg, spec.dim),
        score_kind=s["score"],
        beta=float(s["beta"]),
        seed=int(cfg["seed"]),
        dataset_id=str(cfg["dataset_id"]),
    ))


def run_evaluation(cfg: dict) -> SweepReport:
    """Run every enabled suite and fold the suite checks into the sweep report."""
    spec = mixture_from(cfg)
    seed = int(cfg["seed"])
    checks = []
    c = cfg["coverage"]
    if c["enabled"]:
        for i, eps in enumerate(c["epsilons"]):
            checks.append(_keyed("coverage", lambda: run_coverage_suite(
                spec, int(c["n"]), float(eps), int(c["repetitions"]), derive_seed(seed, 10 + i),
                min_coverage=c["min_coverage"])))
    j = cfg["joint"]
    if j["enabled"]:
        checks.append(_keyed("joint", lambda: run_joint_bound_suite(
            spec, int(j["n"]), float(j["epsilon"]), float(j["gamma"]), int(j["repetitions"]),
            derive_seed(seed, 20))))
    r = cfg["rarity"]
    if r["enabled"]:
        checks.append(_keyed("rarity", lambda: run_rarity_suite(
            spec, int(r["n"]), float(r["epsilon"]), int(r["repetitions"]), derive_seed(seed, 30))))
    k = cfg["dkw"]
    if k["enabled"]:
        checks.append(_keyed("dkw", lambda: run_dkw_suite(
            spec, int(k["n_calibration"]), int(k["trials"]), int(k["samples"]),
            int(k["reference"]), float(k["alpha"]), derive_seed(seed, 40))))
    if cfg["sweep"]["enabled"]:
        report = run_poison_sweep(sweep_config_from(cfg))
    else:
        report = SweepReport(str(cfg["dataset_id"]), tuple(cfg["sweep"]["thresholds"]), [], [], {})
    report.bound_checks = checks + report.bound_checks
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="confsep", description="Conformal separability poison detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample a synthetic mixture dataset")
    g.add_argument("--config")
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)

    p = sub.add_parser("poison", help="apply a trigger attack to a dataset file")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config; its 'trigger' section is used")
    p.add_argument("--target", type=int, help="override trigger target label")
    p.add_argument("--placement", choices=("fixed", "random"))
    p.add_argument("--split", choices=("uniform", "first", "guided"), default="uniform")
    p.add_argument("--select-labels", type=int, nargs="+",
                   help="with --split first: only items carrying these labels")
    p.add_argument("--score", choices=SCORE_KINDS[:1] + SCORE_KINDS[2:], default="centroid",
                   help="score for --split guided")

    s = sub.add_parser("scan", help="run the separability test over a test file")
    s.add_argument("--clean", required=True)
    s.add_argument("--suspect", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--score", choices=SCORE_KINDS, default="centroid")
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--format", choices=REPORT_FORMATS, default="table")
    s.add_argument("--out")

    e = sub.add_parser("evaluate", help="run bound suites and the poison sweep")
    e.add_argument("--config")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", help="output directory (overrides output.dir)")
    e.add_argument("--format", choices=REPORT_FORMATS, default="table", help="format echoed to stdout")

    r = sub.add_parser("report", help="re-render a JSON report")
    r.add_argument("--in", dest="in_path", required=True)
    r.add_argument("--format", choices=REPORT_FORMATS, default="table")
    r.add_argument("--out")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    spec = mixture_from(cfg)
    n = args.n if args.n is not None else int(cfg["generate"]["n"])
    seed = args.seed if args.seed is not None else int(cfg["seed"])
    D = sample_dataset(spec, n, seed)
    write_dataset(D, args.out)
    counts = np.bincount(D.y, minlength=D.num_classes)
    print(f"n={len(D)} d={D.dim} class_counts=" + ",".join(f"{c}:{v}" for c, v in enumerate(counts)))
    return EXIT_OK


def cmd_poison(args) -> int:
    cfg = load_config(args.config)
    D = read_dataset(args.in_path)
    if args.target is not None:
        cfg["trigger"]["target_label"] = args.target
    if args.placement is not None:
        cfg["trigger"]["placement"] = args.placement
    spec = trigger_from(cfg, D.dim)
    if not 0 <= spec.target_label < D.num_classes:
        raise ConfigError(f"target label {spec.target_label} outside [0, {D.num_classes})")
    n = len(D)
    try:
        k = k_for_rate(args.rate, n)
    except ValueError:
        k = -1
    if not 0 < k < n:
        raise ConfigError(f"rate {args.rate} gives k outside 0 < k < n (n={n}); a splitting needs 0 < k < n")
    if args.split == "uniform":
        plan = split_uniform(n, k, derive_seed(args.seed, 0))
    elif args.split == "first":
        sel = None if args.select_labels is None else label_selector(D, args.select_labels)
        plan = split_first_k(n, k, sel)
    else:
        plan = split_score_guided(D, make_score(args.score), spec.target_label, k)
    P = poison(D, plan, spec, derive_seed(args.seed, 1))
    write_dataset(P.items, args.out)
    write_manifest(P, manifest_path(args.out), str(args.in_path), args.rate)
    print(f"n={n} k={k} rate={P.rate:.6g} manifest={manifest_path(args.out)}")
    return EXIT_OK


def cmd_scan(args) -> int:
    if not 0.0 < args.epsilon < 1.0:
        raise ConfigError(f"--epsilon must lie in (0, 1), got {args.epsilon}")
    clean, suspect, test = (read_dataset(p) for p in (args.clean, args.suspect, args.test))
    K = max(d.num_classes for d in (clean, suspect, test))
    clean, suspect, test = (read_dataset(p, K) for p in (args.clean, args.suspect, args.test))
    clean.check_compatible(suspect)
    clean.check_compatible(test)
    # inductive scoring freezes the model on the trusted clean file
    score = make_score(args.score, frozen=clean)
    p_cap = separability_batch(clean, suspect, score, test.X)
    flags = p_cap <= args.epsilon
    positives = int(flags.sum())
    bound = 1.0 - (1.0 - args.epsilon) ** 2
    summary = {"count": len(test), "positives": positives, "epsilon": args.epsilon,
               "rarity_bound": bound, "score": args.score}
    if args.format == "json":
        items = [{"index": i, "p_cap": float(p), "flag": "positive" if f else "negative"}
                 for i, (p, f) in enumerate(zip(p_cap, flags))]
        text = json.dumps({"items": items, "summary": summary}, indent=2, sort_keys=True) + "\n"
    else:
        sep = "," if args.format == "csv" else "  "
        lines = [sep.join(["index", "p_cap", "flag"])]
        lines += [sep.join([str(i), f"{p:.6f}", "positive" if f else "negative"])
                  for i, (p, f) in enumerate(zip(p_cap, flags))]
        lines.append(f"# positives={positives}/{len(test)} epsilon={args.epsilon:g} "
                     f"rarity_bound={bound:.4f}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    if args.out is not None:
        print(f"positives={positives}/{len(test)} epsilon={args.epsilon:g} rarity_bound={bound:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    report = run_evaluation(cfg)
    out_dir = Path(args.out or cfg["output"]["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    base = cfg["output"]["basename"]
    ext = {"table": "txt", "csv": "csv", "json": "json"}
    for fmt in REPORT_FORMATS:
        (out_dir / f"{base}.{ext[fmt]}").write_text(emit_report(report, fmt), encoding="utf-8", newline="\n")
    sys.stdout.write(emit_report(report, args.format))
    failed = [c.name for c in report.bound_checks if not c.passed]
    if failed:
        print(f"{len(failed)} bound check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.in_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.in_path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    report = SweepReport.from_dict(data)
    _emit(emit_report(report, args.format), args.out)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "poison": cmd_poison,
    "scan": cmd_scan,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"confsep: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"confsep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
