from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rai_scoring.errors import GroupingError, InputError
from rai_scoring.fairness import (Confusion, GroupedPredictions, fairness_report, group_confusion,
                                  read_predictions_csv)


@st.composite
def grouped(draw):
    n = draw(st.integers(2, 40))
    arr = lambda: np.array(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    y, p, g = arr(), arr(), arr()
    g[0], g[1] = 1, 0
    return GroupedPredictions(y, p, g)


def test_group_confusion_hand_example():
    c = group_confusion(GroupedPredictions([1, 0, 1, 0], [1, 1, 0, 0], [1, 1, 0, 0]))
    assert c["privileged"] == Confusion(tp=1, fp=1, tn=0, fn=0)
    assert c["unprivileged"] == Confusion(tp=0, fp=0, tn=1, fn=1)


@settings(max_examples=100, deadline=None)
@given(grouped())
def test_counts_sum_to_group_sizes(gp):
    c = group_confusion(gp)
    assert c["privileged"].size == int(gp.group.sum())
    assert c["unprivileged"].size == int((gp.group == 0).sum())


def test_perfect_predictions_have_no_errors():
    y = np.array([0, 1, 1, 0, 1, 0])
    c = group_confusion(GroupedPredictions(y, y, [1, 1, 1, 0, 0, 0]))
    assert all(v.fp == 0 and v.fn == 0 for v in c.values())


def test_missing_group_raises():
    with pytest.raises(GroupingError):
        group_confusion(GroupedPredictions([1, 0], [1, 0], [1, 1]))


def test_input_validation():
    with pytest.raises(InputError):
        GroupedPredictions([1, 2], [1, 0], [1, 0])
    with pytest.raises(InputError):
        GroupedPredictions([1, 0, 1], [1, 0], [1, 0])


def test_identical_group_behaviour_gives_zero_diffs():
    y = [1, 0, 1, 0]
    p = [1, 1, 0, 0]
    rep = fairness_report(GroupedPredictions(y + y, p + p, [1] * 4 + [0] * 4))
    assert all(v == 0 for v in rep.diffs().values())


def test_demographic_parity_hand_example():
    pred = [1] * 6 + [0] * 4 + [1] * 4 + [0] * 6
    rep = fairness_report(GroupedPredictions([0] * 20, pred, [1] * 10 + [0] * 10))
    assert rep.demographic_parity_diff == pytest.approx(0.2, abs=1e-12)


def test_equalized_odds_max_matches_table_example():
    # raw TPR diff 0, raw FPR diff 1/3 -> inverted EOd 1 - max = 0.6667
    y = [1, 1, 0, 0, 0, 1, 1, 0, 0, 0]
    p = [1, 0, 1, 0, 0, 1, 0, 0, 0, 0]
    g = [1] * 5 + [0] * 5
    rep = fairness_report(GroupedPredictions(y, p, g))
    assert rep.tpr_diff == 0.0
    assert rep.fpr_diff == pytest.approx(1 / 3)
    assert round(1 - rep.equalized_odds_diff, 4) == 0.6667


def test_zero_denominator_is_zero_and_flagged():
    # unprivileged group never predicts positive: precision undefined there
    rep = fairness_report(GroupedPredictions([1, 0, 1, 0], [1, 0, 0, 0], [1, 1, 0, 0]))
    assert rep.per_group["unprivileged"].precision == 0.0
    assert "precision" in rep.per_group["unprivileged"].undefined
    assert rep.precision_diff == 1.0


@settings(max_examples=200, deadline=None)
@given(grouped())
def test_report_invariants(gp):
    rep = fairness_report(gp)
    assert rep.equalized_odds_diff == max(rep.tpr_diff, rep.fpr_diff)
    assert all(0.0 <= v <= 1.0 for v in rep.diffs().values())
    swapped = fairness_report(GroupedPredictions(gp.y_true, gp.y_pred, 1 - gp.group))
    assert swapped.diffs() == pytest.approx(rep.diffs(), abs=1e-15)


def test_read_predictions_csv(tmp_path):
    p = tmp_path / "pred.csv"
    p.write_text("y_true,y_pred,group\n1,1,1\n0,1,1\n1,0,0\n0,0,0\n")
    gp = read_predictions_csv(p)
    assert gp.y_pred.tolist() == [1, 1, 0, 0]
    p.write_text("y_true,group\n1,1\n")
    with pytest.raises(InputError):
        read_predictions_csv(p)
