import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from hypermsg.metrics import accuracy, average_precision, macro_average_precision, macro_roc_auc, roc_auc


def test_perfect_separation():
    y = np.array([0, 0, 1, 1])
    s = np.array([0.1, 0.2, 0.8, 0.9])
    assert roc_auc(y, s) == 1.0
    assert average_precision(y, s) == 1.0


def test_random_scores_auc_half():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 500)
    assert abs(roc_auc(y, rng.random(1000)) - 0.5) < 0.05


def test_constant_prediction_accuracy():
    y = np.repeat(np.arange(4), 25)
    assert accuracy(y, np.zeros(100, dtype=int)) == 0.25


def test_single_class_nan():
    assert np.isnan(roc_auc([1, 1, 1], [0.1, 0.2, 0.3]))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 6)), min_size=2, max_size=40))
def test_against_sklearn(pairs):
    y = np.array([a for a, _ in pairs])
    s = np.array([b for _, b in pairs], dtype=float)  # small integer range forces ties
    if y.min() == y.max():
        return
    assert roc_auc(y, s) == pytest.approx(skm.roc_auc_score(y, s))
    assert average_precision(y, s) == pytest.approx(skm.average_precision_score(y, s))


def test_macro_against_sklearn():
    rng = np.random.default_rng(2)
    Y = rng.integers(0, 2, size=(60, 4))
    S = rng.normal(size=(60, 4)) + Y
    assert macro_roc_auc(Y, S) == pytest.approx(skm.roc_auc_score(Y, S, average="macro"))
    assert macro_average_precision(Y, S) == pytest.approx(skm.average_precision_score(Y, S, average="macro"))
