"""Bounded history stacks with informativity bookkeeping.

A stack holds up to `capacity` entries, each a small block of regressor rows
with matching targets, a timestamp, and an integer tag identifying which
parameter-estimate generation produced it. The informativity metric is
lambda_min of the stacked normal matrix; admission maximizes it, purging
clears everything subject to a dwell-time guard owned by the caller.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

Matrix = np.ndarray


class HistoryStack:
    """Fixed-capacity regressor/target store with lambda_min-greedy admission.

    Entries are blocks of shape (block_rows, row_dim) with targets of shape
    (block_rows, target_dim). The normal matrix sum(block^T block) and the
    cross matrix sum(block^T target) are kept cached so owners can run their
    least-squares updates without restacking.
    """

    def __init__(self, capacity: int, row_dim: int, block_rows: int = 1,
                 target_dim: int = 1, margin: float = 1e-6):
        if capacity < 1 or row_dim < 1 or block_rows < 1 or target_dim < 1:
            raise ValueError("capacity and dimensions must be positive")
        self.capacity = int(capacity)
        self.row_dim = int(row_dim)
        self.block_rows = int(block_rows)
        self.target_dim = int(target_dim)
        self.margin = float(margin)
        self._rows = np.zeros((capacity, block_rows, row_dim))
        self._targets = np.zeros((capacity, block_rows, target_dim))
        self._times = np.zeros(capacity)
        self._tags = np.zeros(capacity, dtype=int)
        self._grams = np.zeros((capacity, row_dim, row_dim))
        self._count = 0
        self._normal = np.zeros((row_dim, row_dim))
        self._cross = np.zeros((row_dim, target_dim))
        self._rank_metric = 0.0

    # -- read side ----------------------------------------------------------

    def __len__(self) -> int:
        return self._count

    @property
    def rank_metric(self) -> float:
        """Cached lambda_min of the stacked normal matrix (0 when empty)."""
        return self._rank_metric

    def is_full_rank(self, threshold: float) -> bool:
        if threshold <= 0.0:
            raise ValueError("rank threshold must be positive")
        return self._rank_metric > threshold

    def normal_matrix(self) -> Matrix:
        """sum over entries of block^T block, shape (row_dim, row_dim)."""
        return self._normal.copy()

    def cross_matrix(self) -> Matrix:
        """sum over entries of block^T target, shape (row_dim, target_dim)."""
        return self._cross.copy()

    def regressor(self) -> Matrix:
        """All stored rows stacked, shape (count*block_rows, row_dim)."""
        return self._rows[:self._count].reshape(-1, self.row_dim).copy()

    def targets(self) -> Matrix:
        """All stored targets stacked, shape (count*block_rows, target_dim)."""
        return self._targets[:self._count].reshape(-1, self.target_dim).copy()

    def timestamps(self) -> np.ndarray:
        return self._times[:self._count].copy()

    def tags(self) -> np.ndarray:
        return self._tags[:self._count].copy()

    def oldest_tag(self) -> int | None:
        if self._count == 0:
            return None
        return int(self._tags[:self._count].min())

    # -- write side ----------------------------------------------------------

    def _coerce(self, row_block, target_block):
        rows = np.asarray(row_block, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.shape != (self.block_rows, self.row_dim):
            raise DimensionError(
                f"row block must be ({self.block_rows}, {self.row_dim}), "
                f"got {rows.shape}")
        targets = np.asarray(target_block, dtype=float)
        if targets.ndim == 0:
            targets = targets.reshape(1, 1)
        elif targets.ndim == 1:
            if self.target_dim == 1 and targets.shape == (self.block_rows,):
                targets = targets.reshape(-1, 1)
            elif self.block_rows == 1 and targets.shape == (self.target_dim,):
                targets = targets.reshape(1, -1)
        if targets.shape != (self.block_rows, self.target_dim):
            raise DimensionError(
                f"target block must be ({self.block_rows}, {self.target_dim}), "
                f"got shape {np.shape(target_block)}")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(targets))):
            raise ValueError("non-finite row or target offered to history stack")
        return rows, targets

    def _write_slot(self, i: int, rows, targets, t: float, tag: int) -> None:
        self._rows[i] = rows
        self._targets[i] = targets
        self._times[i] = t
        self._tags[i] = tag
        self._grams[i] = rows.T @ rows

    def _refresh(self) -> None:
        # rebuild the cached sums from stored entries; exact, and cheap at
        # these sizes, which keeps rank_metric consistent with the contents
        k = self._count
        if k == 0:
            self._normal = np.zeros((self.row_dim, self.row_dim))
            self._cross = np.zeros((self.row_dim, self.target_dim))
            self._rank_metric = 0.0
            return
        self._normal = self._grams[:k].sum(axis=0)
        flat_rows = self._rows[:k].reshape(-1, self.row_dim)
        flat_targets = self._targets[:k].reshape(-1, self.target_dim)
        self._cross = flat_rows.T @ flat_targets
        self._rank_metric = float(np.linalg.eigvalsh(self._normal)[0])

    def try_insert(self, row_block, target_block, t: float, tag: int = 0) -> bool:
        """Append when not full; otherwise replace the entry whose removal
        most improves lambda_min, and only on a strict relative improvement.

        Returns whether the stack changed.
        """
        rows, targets = self._coerce(row_block, target_block)
        if self._count < self.capacity:
            self._write_slot(self._count, rows, targets, t, tag)
            self._count += 1
            self._refresh()
            return True

        cand_gram = rows.T @ rows
        # lambda_min of the normal matrix with entry i swapped for the candidate
        trial = (self._normal + cand_gram)[None, :, :] - self._grams
        lam = np.linalg.eigvalsh(trial)[:, 0]
        best = int(np.argmax(lam))
        accept = lam[best] > self._rank_metric * (1.0 + self.margin) \
            if self._rank_metric > 0.0 else lam[best] > 0.0
        if not accept:
            return False
        self._write_slot(best, rows, targets, t, tag)
        self._refresh()
        return True

    def purge(self, t_now: float, dwell: float, last_purge: float) -> bool:
        """Clear all rows if at least `dwell` has elapsed since `last_purge`."""
        if dwell <= 0.0:
            raise ValueError("dwell must be positive")
        if t_now - last_purge < dwell:
            return False
        self._count = 0
        self._refresh()
        return True

    # -- debugging -----------------------------------------------------------

    def dump_rows(self):
        """Yield (timestamp, tag, row, target) per stored row, for CSV dumps."""
        for i in range(self._count):
            for j in range(self.block_rows):
                yield (float(self._times[i]), int(self._tags[i]),
                       self._rows[i, j].copy(), self._targets[i, j].copy())
