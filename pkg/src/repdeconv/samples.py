"""Containers for replicated measurements ``W_jk = X_j + U_jk``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ReplicatedSample:
    """``n`` groups of replicate observations.

    Parameters
    ----------
    groups : sequence of sequences of float
        ``groups[j]`` holds the ``N_j`` replicates of the j-th intrinsic value.
    """

    groups: tuple[np.ndarray, ...]

    def __init__(self, groups):
        arrays = tuple(np.asarray(g, dtype=float).ravel() for g in groups)
        if len(arrays) == 0:
            raise ValueError("a sample needs at least one group")
        for j, g in enumerate(arrays):
            if g.size == 0:
                raise ValueError(f"group {j} is empty")
            if not np.all(np.isfinite(g)):
                raise ValueError(f"group {j} contains non-finite values")
        object.__setattr__(self, "groups", arrays)

    @classmethod
    def from_array(cls, w):
        """Build from an ``(n, N)`` array with a constant replicate count."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return cls(list(w))

    @property
    def n(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    @property
    def M(self) -> int:
        return int(self.sizes.sum())

    @property
    def N(self) -> int:
        s = self.sizes
        return int((s * (s - 1)).sum() // 2)

    def pooled(self) -> np.ndarray:
        """All observations concatenated in group order."""
        return np.concatenate(self.groups)

    def group_index(self) -> np.ndarray:
        """Group label of each entry of :meth:`pooled`."""
        return np.repeat(np.arange(self.n), self.sizes)

    def scaled(self, s, shift=0.0):
        return ReplicatedSample([s * g + shift for g in self.groups])

    def __eq__(self, other):
        if not isinstance(other, ReplicatedSample) or other.n != self.n:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.groups, other.groups))

    def __hash__(self):
        return hash(tuple(g.tobytes() for g in self.groups))


@dataclass(frozen=True, eq=False)
class RegressionSample:
    """Replicated covariates plus one response per group."""

    base: ReplicatedSample
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size != self.base.n:
            raise ValueError(f"expected {self.base.n} responses, got {y.size}")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def groups(self):
        return self.base.groups

    def pooled_y(self) -> np.ndarray:
        """Each group's response repeated once per replicate."""
        return np.repeat(self.y, self.base.sizes)

    def __eq__(self, other):
        if not isinstance(other, RegressionSample):
            return NotImplemented
        return self.base == other.base and np.array_equal(self.y, other.y)
