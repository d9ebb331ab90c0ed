import numpy as np
import pytest
from hypothesis import given, strategies as st

from confsep.attack import (
    SplitPlan,
    TriggerSpec,
    apply_trigger,
    apply_trigger_batch,
    default_trigger,
    k_for_rate,
    label_selector,
    poison,
    poison_at_rate,
    split_first_k,
    split_score_guided,
    split_uniform,
)
from confsep.core import p_value
from confsep.data import LabeledDataset
from confsep.scores import CentroidScore
from confsep.synth import MixtureSpec, permutation, sample_dataset


def test_first_k_all_selector():
    assert split_first_k(10, 3).poison_indices == (0, 1, 2)


def test_first_k_with_selector():
    sel = np.zeros(10, dtype=bool)
    sel[[2, 5, 7, 8]] = True
    assert split_first_k(10, 2, sel).poison_indices == (2, 5)
    with pytest.raises(ValueError):
        split_first_k(10, 5, sel)


def test_label_selector():
    D = LabeledDataset(np.zeros((5, 1)), [0, 1, 1, 0, 1], 2)
    assert split_first_k(5, 2, label_selector(D, {1})).poison_indices == (1, 2)


@pytest.mark.parametrize("n, k", [(5, 5), (5, 0), (1, 1), (4, -1)])
def test_k_bounds(n, k):
    with pytest.raises(ValueError):
        split_first_k(n, k)
    with pytest.raises(ValueError):
        split_uniform(n, k, 0)


def test_plan_validation():
    with pytest.raises(ValueError):
        SplitPlan((0, 1), (1, 2))
    with pytest.raises(ValueError):
        SplitPlan((0, 3), (1,))
    plan = SplitPlan.from_poison(6, [4, 1])
    assert plan.poison_indices == (1, 4) and plan.clean_indices == (0, 2, 3, 5)
    assert (plan.n, plan.k) == (6, 2)


def test_uniform_deterministic_and_complement():
    assert split_uniform(50, 7, 42) == split_uniform(50, 7, 42)
    for seed in range(20):
        assert len(split_uniform(10, 9, seed).clean_indices) == 1


def test_uniform_selection_frequency():
    n, k, trials = 10, 3, 10_000
    counts = np.zeros(n)
    for seed in range(trials):
        counts[list(split_uniform(n, k, seed).poison_indices)] += 1
    q = k / n
    assert np.all(np.abs(counts / trials - q) <= 3 * np.sqrt(q * (1 - q) / trials))


def test_score_guided_picks_most_target_like():
    D = LabeledDataset([[-1.0], [1.0], [10.0], [0.1], [20.0]], [0, 0, 1, 1, 1], 2)
    assert split_score_guided(D, CentroidScore(), 0, 1).poison_indices == (3,)


def test_score_guided_ties_by_position():
    D = LabeledDataset(np.ones((6, 2)), [0, 1, 0, 1, 0, 1], 2)
    assert split_score_guided(D, CentroidScore(), 0, 3).poison_indices == (0, 1, 2)


def test_score_guided_follows_permutation():
    spec = MixtureSpec(num_classes=3, dim=2, separation=2.0)
    D = sample_dataset(spec, 30, 4)
    n, k = len(D), 4
    loo = np.array([p_value(D.take(np.delete(np.arange(n), i)), CentroidScore(), D.X[i], 0) for i in range(n)])
    top = np.sort(loo)[::-1]
    assert top[k - 1] > top[k], "fixture needs a strict cut at k"
    perm = permutation(n, 9)
    chosen = set(split_score_guided(D, CentroidScore(), 0, k).poison_indices)
    chosen_perm = set(split_score_guided(D.take(perm), CentroidScore(), 0, k).poison_indices)
    assert {int(perm[i]) for i in chosen_perm} == chosen


def test_fixed_trigger():
    spec = TriggerSpec((6, 7), (5.0, 5.0), target_label=2)
    x, y = apply_trigger((np.arange(8.0), 0), spec)
    assert list(x) == [0, 1, 2, 3, 4, 5, 5.0, 5.0] and y == 2


def test_identity_trigger_leaves_item():
    x0 = np.array([1.0, 2.0, 3.0])
    x, y = apply_trigger((x0, 1), TriggerSpec((1,), (2.0,), 1))
    assert np.array_equal(x, x0) and y == 1


def test_random_placement_deterministic_and_in_range():
    spec = TriggerSpec((0, 1), (9.0, 9.0), 0, "random")
    outs = set()
    for seed in range(50):
        a, _ = apply_trigger((np.zeros(8), 1), spec, seed)
        b, _ = apply_trigger((np.zeros(8), 1), spec, seed)
        assert np.array_equal(a, b)
        hit = np.flatnonzero(a == 9.0)
        assert len(hit) == 2 and hit[1] == hit[0] + 1
        outs.add(int(hit[0]))
    assert len(outs) > 1


def test_trigger_must_fit():
    with pytest.raises(ValueError):
        apply_trigger((np.zeros(4), 0), TriggerSpec((4,), (1.0,), 0))
    with pytest.raises(ValueError):
        TriggerSpec((0, 1), (1.0,), 0)
    with pytest.raises(ValueError):
        TriggerSpec((0,), (np.nan,), 0)
    with pytest.raises(ValueError):
        TriggerSpec((0,), (1.0,), 0, "diagonal")


def test_default_trigger_is_trailing_window():
    t = default_trigger(16)
    assert t.patch_coords == (14, 15) and t.patch_values == (5.0, 5.0)
    assert default_trigger(17).patch_coords == (14, 15, 16)


def test_batch_trigger_matches_items():
    X = np.zeros((4, 8))
    spec = TriggerSpec((0,), (1.0,), 1, "random")
    Xt, yt = apply_trigger_batch(X, spec, 3)
    assert np.all(yt == 1) and np.all((Xt == 1.0).sum(axis=1) == 1)


def test_poison_identity_is_noop():
    D = LabeledDataset(np.tile([1.0, 2.0], (10, 1)), np.zeros(10, dtype=int), 2)
    P = poison(D, split_first_k(10, 3), TriggerSpec((0,), (1.0,), 0), 0)
    assert P.items == D


def test_poison_rate_field():
    D = sample_dataset(MixtureSpec(dim=4), 10, 0)
    assert poison(D, split_first_k(10, 9), default_trigger(4), 0).rate == 0.9


@given(seed=st.integers(0, 2**32 - 1))
def test_poison_touches_only_plan(seed):
    D = sample_dataset(MixtureSpec(num_classes=2, dim=8), 50, seed)
    spec = default_trigger(8, target_label=1)
    P = poison_at_rate(D, 0.2, spec, seed)
    assert P.plan.k == 10
    idx = np.array(P.plan.poison_indices)
    rest = np.array(P.plan.clean_indices)
    assert np.all(P.items.y[idx] == 1)
    assert np.all(P.items.X[idx][:, list(spec.patch_coords)] == 5.0)
    assert np.array_equal(P.items.X[rest], D.X[rest]) and np.array_equal(P.items.y[rest], D.y[rest])
    assert np.array_equal(P.items.X[idx][:, :7], D.X[idx][:, :7])


@pytest.mark.parametrize("rate, n, k", [(0.1, 1000, 100), (0.0015, 1000, 2), (0.0001, 1000, 1), (0.9999, 10, 9), (0.0, 10, 0)])
def test_k_for_rate(rate, n, k):
    assert k_for_rate(rate, n) == k


def test_rate_bounds():
    with pytest.raises(ValueError):
        k_for_rate(1.0, 10)
    with pytest.raises(ValueError):
        k_for_rate(-0.1, 10)
    D = sample_dataset(MixtureSpec(dim=4), 10, 0)
    assert poison_at_rate(D, 0.0, default_trigger(4), 0) is None
