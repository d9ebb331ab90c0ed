"""Conformal separability testing for poisoned training data."""

from .attack import (
    PoisonedDataset,
    SplitPlan,
    TriggerSpec,
    apply_trigger,
    default_trigger,
    k_for_rate,
    poison,
    poison_at_rate,
    split_first_k,
    split_score_guided,
    split_uniform,
)
from .core import (
    PredictionSet,
    classify_batch,
    conformal_classify,
    expiry,
    expiry_batch,
    p_value,
    prediction_set,
)
from .data import LabeledDataset
from .effectiveness import AttackInstance, derive_r, effective_rate, is_empirically_effective
from .harness import BoundCheck, SweepConfig, SweepReport, emit_report, run_poison_sweep
from .scores import CentroidScore, EntropyRelativeScore, InductiveScore, ScoreModel, make_score
from .septest import EmpiricalCdf, detect, dkw_band, separability_batch, separability_test
from .synth import MixtureSpec, derive_seed, sample_dataset

__version__ = "0.1.0"
