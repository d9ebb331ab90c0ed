"""Monte-Carlo bound suites, poison-rate sweeps and report rendering.

Every work unit draws from its own seed, ``derive_seed(parent, index)``,
so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .attack import TriggerSpec, apply_trigger_batch, default_trigger, k_for_rate, poison_at_rate
from .core import classify_from_expiry, expiry_batch_details, p_value
from .data import LabeledDataset
from .effectiveness import AttackInstance, is_empirically_effective
from .scores import DEFAULT_BETA, SCORE_KINDS, ScoreModel, make_score
from .septest import EmpiricalCdf, dkw_band, p_cap_from_expiries, separability_test
from .synth import MixtureSpec, derive_seed, sample_dataset, sample_points

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    bound: float
    observed: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "observed": self.observed,
            "pass": bool(self.passed),
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundCheck":
        return cls(d["name"], d["bound"], d["observed"], d["pass"], d.get("detail", {}))


def binomial_margin(q: float, repetitions: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(q * (1.0 - q) / repetitions)


def _suite_score(kind: str, spec: MixtureSpec, n: int, seed: int, beta: float) -> ScoreModel:
    frozen = sample_dataset(spec, n, derive_seed(seed, 0xF0)) if kind == "inductive" else None
    return make_score(kind, frozen, beta)


def run_coverage_suite(
    spec: MixtureSpec,
    n: int,
    epsilon: float,
    repetitions: int,
    seed: int,
    score_kind: str = "centroid",
    beta: float = DEFAULT_BETA,
    min_coverage: float | None = None,
) -> BoundCheck:
    """Frequency with which the true label of a fresh point lands in its prediction set.

    Passes iff coverage >= (1 - epsilon) - 3 sigma. ``min_coverage``
    replaces ``1 - epsilon`` as the claimed level (used to exercise the
    failure path).
    """
    if repetitions < 100:
        raise ValueError("coverage suite needs at least 100 repetitions")
    score = _suite_score(score_kind, spec, n, seed, beta)
    hits = 0
    for r in range(repetitions):
        Z = sample_dataset(spec, n + 1, derive_seed(seed, r))
        D = Z.take(np.arange(n))
        hits += p_value(D, score, Z.X[n], int(Z.y[n])) > epsilon
    coverage = hits / repetitions
    claimed = 1.0 - epsilon if min_coverage is None else float(min_coverage)
    bound = claimed - binomial_margin(1.0 - epsilon, repetitions)
    return BoundCheck(
        f"coverage[eps={epsilon:g}]", bound, coverage, coverage >= bound,
        {"n": n, "repetitions": repetitions, "claimed": claimed, "score": score_kind},
    )


def run_joint_bound_suite(
    spec: MixtureSpec,
    n: int,
    epsilon: float,
    gamma: float,
    repetitions: int,
    seed: int,
    score_kind: str = "centroid",
    beta: float = DEFAULT_BETA,
) -> BoundCheck:
    """Frequency with which a shared test point survives in both prediction sets.

    D1 and D2 come from separate seed streams each repetition, so they are
    independent; passes iff frequency >= (1-eps)(1-gamma) - 3 sigma.
    """
    if repetitions < 100:
        raise ValueError("joint-bound suite needs at least 100 repetitions")
    score = _suite_score(score_kind, spec, n, seed, beta)
    hits = 0
    for r in range(repetitions):
        unit = derive_seed(seed, r)
        D1 = sample_dataset(spec, n, derive_seed(unit, 1))
        D2 = sample_dataset(spec, n, derive_seed(unit, 2))
        z = sample_dataset(spec, 1, derive_seed(unit, 3))
        x, y = z.X[0], int(z.y[0])
        hits += p_value(D1, score, x, y) > epsilon and p_value(D2, score, x, y) > gamma
    freq = hits / repetitions
    q = (1.0 - epsilon) * (1.0 - gamma)
    bound = q - binomial_margin(q, repetitions)
    return BoundCheck(
        f"joint_coverage[eps={epsilon:g},gamma={gamma:g}]", bound, freq, freq >= bound,
        {"n": n, "repetitions": repetitions, "score": score_kind},
    )


def run_rarity_suite(
    spec: MixtureSpec,
    n: int,
    epsilon: float,
    repetitions: int,
    seed: int,
    score_kind: str = "centroid",
    beta: float = DEFAULT_BETA,
) -> BoundCheck:
    """False-alarm frequency of the separability test on independent clean pairs."""
    if repetitions < 100:
        raise ValueError("rarity suite needs at least 100 repetitions")
    score = _suite_score(score_kind, spec, n, seed, beta)
    positives = 0
    for r in range(repetitions):
        unit = derive_seed(seed, r)
        D1 = sample_dataset(spec, n, derive_seed(unit, 1))
        D2 = sample_dataset(spec, n, derive_seed(unit, 2))
        x = sample_dataset(spec, 1, derive_seed(unit, 3)).X[0]
        positives += separability_test(D1, D2, score, x).p_cap <= epsilon
    rate = positives / repetitions
    q = 1.0 - (1.0 - epsilon) ** 2
    bound = q + binomial_margin(q, repetitions)
    return BoundCheck(
        f"rarity[eps={epsilon:g}]", bound, rate, rate <= bound,
        {"n": n, "repetitions": repetitions, "score": score_kind},
    )


class PcapProcess:
    """IID source of ``p_cap`` values: fixed datasets, fresh mixture test inputs.

    Uses the inductive centroid score so a batch of values costs one binary
    search per label and dataset.
    """

    def __init__(self, spec: MixtureSpec, n: int, seed: int):
        self.spec = spec
        self.seed = seed
        frozen = sample_dataset(spec, n, derive_seed(seed, 0))
        self.score = make_score("inductive", frozen)
        self.D1 = sample_dataset(spec, n, derive_seed(seed, 1))
        self.D2 = sample_dataset(spec, n, derive_seed(seed, 2))

    def sample(self, m: int, stream: int, chunk: int = 100_000) -> np.ndarray:
        out = []
        for c, start in enumerate(range(0, m, chunk)):
            size = min(chunk, m - start)
            X, _ = sample_points(self.spec, size, derive_seed(derive_seed(self.seed, 3 + stream), c))
            p1, _ = expiry_batch_details(self.D1, self.score, X)
            p2, _ = expiry_batch_details(self.D2, self.score, X)
            out.append(p_cap_from_expiries(p1, p2))
        return np.concatenate(out)


def run_dkw_suite(
    spec: MixtureSpec,
    n_calibration: int,
    trials: int,
    samples: int,
    reference: int,
    alpha: float,
    seed: int,
    slack_sigmas: float = 2.0,
) -> BoundCheck:
    """Fraction of trials whose empirical ``p_cap`` CDF stays inside the DKW band.

    The true CDF is stood in for by a ``reference``-sample empirical CDF of
    the same process.
    """
    proc = PcapProcess(spec, n_calibration, seed)
    ref = EmpiricalCdf(proc.sample(reference, stream=0))
    radius = dkw_band(samples, alpha)
    devs = np.array([
        EmpiricalCdf(proc.sample(samples, stream=1 + t)).sup_distance(ref) for t in range(trials)
    ])
    inside = float(np.mean(devs <= radius))
    bound = (1.0 - alpha) - slack_sigmas * math.sqrt(alpha * (1.0 - alpha) / trials)
    return BoundCheck(
        f"dkw_band[n={samples},alpha={alpha:g}]", bound, inside, inside >= bound,
        {"radius": radius, "trials": trials, "reference": reference,
         "median_sup_deviation": float(np.median(devs))},
    )


@dataclass
class SweepConfig:
    spec: MixtureSpec = field(default_factory=MixtureSpec)
    n_train: int = 1000
    n_holdout_clean: int = 500
    n_holdout_poison: int = 500
    poison_rates: tuple[float, ...] = (0.0, 0.002, 0.01, 0.1, 0.2, 0.5)
    thresholds: tuple[float, ...] = (0.1, 0.05, 0.01)
    trigger: TriggerSpec | None = None
    score_kind: str = "centroid"
    beta: float = DEFAULT_BETA
    seed: int = 0
    dataset_id: str = "synthetic"

    def __post_init__(self) -> None:
        self.poison_rates = tuple(float(r) for r in self.poison_rates)
        self.thresholds = tuple(float(e) for e in self.thresholds)
        if self.trigger is None:
            self.trigger = default_trigger(self.spec.dim)
        if self.n_train < 2:
            raise ValueError("n_train must be >= 2")
        if self.n_holdout_clean < 1 or self.n_holdout_poison < 1:
            raise ValueError("holdout sizes must be >= 1")
        if not self.poison_rates:
            raise ValueError("poison_rates must be nonempty")
        if any(not 0.0 <= r < 1.0 for r in self.poison_rates):
            raise ValueError(f"poison_rates must lie in [0, 1), got {self.poison_rates}")
        if list(self.poison_rates) != sorted(self.poison_rates):
            raise ValueError("poison_rates must be sorted ascending")
        if not self.thresholds:
            raise ValueError("thresholds must be nonempty")
        if any(not 0.0 < e < 1.0 for e in self.thresholds):
            raise ValueError(f"thresholds must lie in (0, 1), got {self.thresholds}")
        if list(self.thresholds) != sorted(self.thresholds, reverse=True):
            raise ValueError("thresholds must be sorted descending")
        if max(self.trigger.patch_coords) >= self.spec.dim:
            raise ValueError("trigger coordinates exceed the feature dimension")
        if not 0 <= self.trigger.target_label < self.spec.num_classes:
            raise ValueError("trigger target label outside the label alphabet")
        if self.score_kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.score_kind!r}; expected one of {SCORE_KINDS}")


@dataclass
class SweepRow:
    poison_rate: float
    k: int
    eval_clean: float
    success_rate: float
    fnr: dict[float, float]
    fpr: dict[float, float]
    n_effective: dict[float, int]
    fnr_effective: dict[float, float]


@dataclass
class SweepReport:
    dataset_id: str
    thresholds: tuple[float, ...]
    rows: list[SweepRow]
    bound_checks: list[BoundCheck]
    meta: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.bound_checks)

    def to_dict(self) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            for key in ("fnr", "fpr", "n_effective", "fnr_effective"):
                d[key] = {f"{e:g}": v for e, v in d[key].items()}
            rows.append(d)
        return {
            "dataset_id": self.dataset_id,
            "thresholds": list(self.thresholds),
            "rows": rows,
            "bound_checks": [c.to_dict() for c in self.bound_checks],
            "all_pass": self.all_passed,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        thresholds = tuple(float(e) for e in d["thresholds"])
        rows = []
        for r in d["rows"]:
            per = {key: {float(e): v for e, v in r[key].items()}
                   for key in ("fnr", "fpr", "n_effective", "fnr_effective")}
            rows.append(SweepRow(r["poison_rate"], r["k"], r["eval_clean"], r["success_rate"], **per))
        checks = [BoundCheck.from_dict(c) for c in d["bound_checks"]]
        return cls(d["dataset_id"], thresholds, rows, checks, d.get("meta", {}))


def run_poison_sweep(cfg: SweepConfig) -> SweepReport:
    """Poison a clean training set at each rate and score detection on holdouts.

    For each rate: success rate of the trigger under the poisoned set,
    clean accuracy under the poisoned set, and FNR/FPR of the separability
    test at each threshold. Bound checks cover the FNR on items where the
    attack is empirically effective and the clean FPR.
    """
    spec, target = cfg.spec, cfg.trigger.target_label
    T = sample_dataset(spec, cfg.n_train, derive_seed(cfg.seed, 1))
    clean = sample_dataset(spec, cfg.n_holdout_clean, derive_seed(cfg.seed, 2))
    source = sample_dataset(spec, cfg.n_holdout_poison, derive_seed(cfg.seed, 3))
    X_trig, _ = apply_trigger_batch(source.X, cfg.trigger, derive_seed(cfg.seed, 4))
    frozen = sample_dataset(spec, cfg.n_train, derive_seed(cfg.seed, 5)) if cfg.score_kind == "inductive" else None
    score = make_score(cfg.score_kind, frozen, cfg.beta)

    tauT_clean, _ = expiry_batch_details(T, score, clean.X)
    tauT_trig, _ = expiry_batch_details(T, score, X_trig)

    rows, checks = [], []
    for i, rate in enumerate(cfg.poison_rates):
        poisoned = poison_at_rate(T, rate, cfg.trigger, derive_seed(cfg.seed, 100 + i))
        Tr = T if poisoned is None else poisoned.items
        tauR_clean, candR_clean = expiry_batch_details(Tr, score, clean.X)
        tauR_trig, candR_trig = expiry_batch_details(Tr, score, X_trig)

        pred_trig = np.array([classify_from_expiry(p, c) for p, c in zip(tauR_trig, candR_trig)])
        pred_clean = np.array([classify_from_expiry(p, c) for p, c in zip(tauR_clean, candR_clean)])
        success = float(np.mean(pred_trig == target))
        eval_clean = float(np.mean(pred_clean == clean.y))

        pcap_trig = p_cap_from_expiries(tauT_trig, tauR_trig)
        pcap_clean = p_cap_from_expiries(tauT_clean, tauR_clean)
        instances = [AttackInstance(tD, tP, int(y), target)
                     for tD, tP, y in zip(tauT_trig, tauR_trig, source.y)]

        fnr, fpr, n_eff, fnr_eff = {}, {}, {}, {}
        for eps in cfg.thresholds:
            fnr[eps] = float(np.mean(pcap_trig > eps))
            fpr[eps] = float(np.mean(pcap_clean <= eps))
            eff = np.array([is_empirically_effective(a, eps) for a in instances])
            n_eff[eps] = int(eff.sum())
            fnr_eff[eps] = float(np.mean(pcap_trig[eff] > eps)) if eff.any() else 0.0

            rare = 1.0 - (1.0 - eps) ** 2
            checks.append(BoundCheck(
                f"fnr_effective[rate={rate:g},eps={eps:g}]", rare, fnr_eff[eps],
                fnr_eff[eps] <= rare, {"n_effective": n_eff[eps]},
            ))
            fpr_bound = rare + dkw_band(cfg.n_holdout_clean, 0.05)
            checks.append(BoundCheck(
                f"fpr[rate={rate:g},eps={eps:g}]", fpr_bound, fpr[eps], fpr[eps] <= fpr_bound,
                {"raw_bound": rare, "dkw_alpha": 0.05},
            ))
        rows.append(SweepRow(rate, k_for_rate(rate, cfg.n_train), eval_clean, success,
                             fnr, fpr, n_eff, fnr_eff))
        log.info("rate %g: success %.4f, eval_clean %.4f", rate, success, eval_clean)

    meta = {
        "n_train": cfg.n_train,
        "n_holdout_clean": cfg.n_holdout_clean,
        "n_holdout_poison": cfg.n_holdout_poison,
        "score": cfg.score_kind,
        "seed": cfg.seed,
        "num_classes": spec.num_classes,
        "target_label": target,
    }
    return SweepReport(cfg.dataset_id, cfg.thresholds, rows, checks, meta)


REPORT_FORMATS = ("table", "csv", "json")


def _pct(v: float) -> str:
    return f"{100.0 * v:.2f}"


def report_columns(thresholds) -> list[str]:
    cols = ["dataset", "poison_rate_pct", "eval_clean_pct", "success_rate_pct"]
    cols += [f"fnr_pct@{e:g}" for e in thresholds]
    cols += [f"fpr_pct@{e:g}" for e in thresholds]
    return cols


def report_table_rows(report: SweepReport) -> list[list[str]]:
    out = []
    for r in report.rows:
        row = [report.dataset_id, _pct(r.poison_rate), _pct(r.eval_clean), _pct(r.success_rate)]
        row += [_pct(r.fnr[e]) for e in report.thresholds]
        row += [_pct(r.fpr[e]) for e in report.thresholds]
        out.append(row)
    return out


def emit_report(report: SweepReport, fmt: str = "table") -> str:
    """Render a sweep report as aligned text, CSV or JSON (deterministic)."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    cols = report_columns(report.thresholds)
    rows = report_table_rows(report)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")
    widths = [max([len(c)] + [len(r[j]) for r in rows]) for j, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
    if report.bound_checks:
        lines.append("")
        for c in report.bound_checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status}  {c.name}  observed={c.observed:.4f}  bound={c.bound:.4f}")
    return "\n".join(lines) + "\n"


def read_report_csv(text: str) -> tuple[list[str], list[dict]]:
    """Parse :func:`emit_report` CSV output back into typed rows."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for rec in reader:
        rows.append({h: (v if h == "dataset" else float(v)) for h, v in zip(header, rec)})
    return header, rows
