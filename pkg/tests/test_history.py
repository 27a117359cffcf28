"""History stack admission, replacement, and purge behavior."""

import numpy as np
import pytest

from oirl.errors import DimensionError
from oirl.history import HistoryStack


def test_empty_stack_accepts_any_finite_row():
    stack = HistoryStack(capacity=3, row_dim=2)
    assert stack.try_insert(np.array([1e-30, 0.0]), 0.0, t=0.0)
    assert len(stack) == 1


def test_fills_to_capacity_then_becomes_selective():
    stack = HistoryStack(capacity=2, row_dim=2)
    assert stack.try_insert(np.array([1.0, 0.0]), 1.0, t=0.0)
    assert stack.try_insert(np.array([1.0, 1e-6]), 2.0, t=1.0)
    assert len(stack) == 2
    # nearly collinear contents leave lambda_min tiny
    assert stack.rank_metric < 1e-10
    # an orthogonal direction is a strict improvement and must be taken
    assert stack.try_insert(np.array([0.0, 1.0]), 3.0, t=2.0)
    assert len(stack) == 2
    assert stack.rank_metric > 0.99


def test_duplicate_of_existing_row_is_rejected_when_full():
    stack = HistoryStack(capacity=2, row_dim=2)
    stack.try_insert(np.array([1.0, 0.0]), 0.0, t=0.0)
    stack.try_insert(np.array([0.0, 1.0]), 0.0, t=1.0)
    before = stack.rank_metric
    assert not stack.try_insert(np.array([1.0, 0.0]), 0.0, t=2.0)
    assert stack.rank_metric == before


def test_rank_metric_never_decreases_once_full():
    rng = np.random.default_rng(5)
    stack = HistoryStack(capacity=4, row_dim=3)
    for i in range(4):
        stack.try_insert(rng.normal(size=3), 0.0, t=float(i))
    metric = stack.rank_metric
    for i in range(200):
        stack.try_insert(rng.normal(size=3), 0.0, t=float(4 + i))
        assert stack.rank_metric >= metric * (1.0 - 1e-12)
        metric = stack.rank_metric


def test_normal_and_cross_match_contents():
    stack = HistoryStack(capacity=3, row_dim=2, target_dim=2)
    rows = [np.array([1.0, 2.0]), np.array([0.5, -1.0])]
    targets = [np.array([1.0, 0.0]), np.array([0.0, 3.0])]
    for i, (row, tgt) in enumerate(zip(rows, targets)):
        stack.try_insert(row, tgt, t=float(i))
    reg = np.vstack(rows)
    np.testing.assert_allclose(stack.normal_matrix(), reg.T @ reg)
    np.testing.assert_allclose(stack.cross_matrix(), reg.T @ np.vstack(targets))


def test_block_rows_are_inserted_and_counted_together():
    stack = HistoryStack(capacity=2, row_dim=3, block_rows=2, target_dim=1)
    block = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert stack.try_insert(block, np.array([1.0, 2.0]), t=0.0)
    assert len(stack) == 1
    np.testing.assert_allclose(stack.normal_matrix(), block.T @ block)


def test_insert_replays_deterministically():
    rng = np.random.default_rng(17)
    offers = [rng.normal(size=3) for _ in range(60)]

    def run():
        stack = HistoryStack(capacity=5, row_dim=3)
        for i, row in enumerate(offers):
            stack.try_insert(row, float(i), t=0.05 * i)
        return stack.regressor().copy(), stack.rank_metric

    reg1, m1 = run()
    reg2, m2 = run()
    np.testing.assert_array_equal(reg1, reg2)
    assert m1 == m2


def test_tags_and_oldest_tag():
    stack = HistoryStack(capacity=3, row_dim=2)
    assert stack.oldest_tag() is None
    stack.try_insert(np.array([1.0, 0.0]), 0.0, t=0.0, tag=3)
    stack.try_insert(np.array([0.0, 1.0]), 0.0, t=1.0, tag=1)
    assert stack.oldest_tag() == 1


def test_purge_clears_and_respects_dwell():
    stack = HistoryStack(capacity=2, row_dim=2)
    stack.try_insert(np.array([1.0, 0.0]), 0.0, t=0.0)
    stack.try_insert(np.array([0.0, 1.0]), 0.0, t=0.1)
    assert not stack.purge(t_now=1.0, dwell=2.0, last_purge=0.0)
    assert len(stack) == 2
    assert stack.purge(t_now=2.5, dwell=2.0, last_purge=0.0)
    assert len(stack) == 0
    assert stack.rank_metric == 0.0


def test_purge_rejects_nonpositive_dwell():
    stack = HistoryStack(capacity=2, row_dim=2)
    with pytest.raises(ValueError):
        stack.purge(t_now=1.0, dwell=0.0, last_purge=0.0)


def test_is_full_rank_threshold_validation():
    stack = HistoryStack(capacity=2, row_dim=2)
    with pytest.raises(ValueError):
        stack.is_full_rank(0.0)
    stack.try_insert(np.array([2.0, 0.0]), 0.0, t=0.0)
    stack.try_insert(np.array([0.0, 2.0]), 0.0, t=0.1)
    assert stack.is_full_rank(3.9)
    assert not stack.is_full_rank(4.1)


def test_non_finite_rows_are_rejected():
    stack = HistoryStack(capacity=2, row_dim=2)
    with pytest.raises(ValueError):
        stack.try_insert(np.array([np.inf, 0.0]), 0.0, t=0.0)
    with pytest.raises(ValueError):
        stack.try_insert(np.array([1.0, 0.0]), np.nan, t=0.0)


def test_wrong_row_dimension_is_rejected():
    stack = HistoryStack(capacity=2, row_dim=2)
    with pytest.raises(DimensionError):
        stack.try_insert(np.array([1.0, 0.0, 0.0]), 0.0, t=0.0)


def test_dump_rows_roundtrip():
    stack = HistoryStack(capacity=3, row_dim=2, target_dim=1)
    stack.try_insert(np.array([1.0, 2.0]), 5.0, t=0.3, tag=2)
    dumped = list(stack.dump_rows())
    assert len(dumped) == 1
    t, tag, row, target = dumped[0]
    assert (t, tag) == (0.3, 2)
    np.testing.assert_allclose(row, [1.0, 2.0])
    np.testing.assert_allclose(target, [5.0])
