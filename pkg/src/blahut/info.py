"""Probability/channel data model and the basic information quantities.

All logarithms are natural (nats). Conversion to bits happens only at
reporting boundaries, via :func:`nats_to_bits`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import entr, rel_entr

from .errors import (
    AbsoluteContinuityViolation,
    DimensionMismatch,
    InvalidChannel,
    InvalidDistribution,
)

# Inputs farther than this from the simplex are rejected rather than renormalized.
SIMPLEX_TOL = 1e-9


def _project(vec: np.ndarray, what: str, exc: type[Exception]) -> np.ndarray:
    if not np.all(np.isfinite(vec)):
        raise exc(f"{what} contains non-finite entries")
    if vec.min() < -SIMPLEX_TOL:
        raise exc(f"{what} has a negative entry {vec.min():.3g}")
    if vec.max() > 1.0 + SIMPLEX_TOL:
        raise exc(f"{what} has an entry above one ({vec.max():.17g})")
    vec = np.clip(vec, 0.0, None)
    total = vec.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise exc(f"{what} sums to {total:.17g}, not 1")
    # Sums already within round-off are kept as is, so file round trips are exact.
    if abs(total - 1.0) <= 4 * np.finfo(float).eps * vec.size:
        return vec
    return vec / total


@dataclass(frozen=True, eq=False)
class Distribution:
    """A point on the probability simplex.

    Inputs within ``SIMPLEX_TOL`` of a valid distribution are renormalized;
    anything farther away raises :class:`InvalidDistribution`. The stored
    array is read-only.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistribution(f"expected a non-empty vector, got shape {p.shape}")
        p = _project(p, "distribution", InvalidDistribution)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def _trusted(cls, probs: np.ndarray) -> "Distribution":
        # Skips validation; callers guarantee a normalized, non-negative vector.
        obj = object.__new__(cls)
        arr = np.array(probs, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(obj, "probs", arr)
        return obj

    @classmethod
    def uniform(cls, m: int) -> "Distribution":
        if m < 1:
            raise InvalidDistribution("alphabet size must be positive")
        return cls._trusted(np.full(m, 1.0 / m))

    @classmethod
    def random_interior(cls, m: int, rng: np.random.Generator) -> "Distribution":
        """Draw from the flat Dirichlet; entries are positive almost surely."""
        p = rng.dirichlet(np.ones(m))
        # Guard the measure-zero case of an underflowed coordinate.
        p = np.maximum(p, np.finfo(float).tiny)
        return cls._trusted(p / p.sum())

    @property
    def m(self) -> int:
        return self.probs.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.probs > 0))

    def __len__(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __repr__(self) -> str:
        return f"Distribution({np.array2string(self.probs, precision=6)})"


DistLike = Union[Distribution, ArrayLike]


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix of transition probabilities ``w[i, j] = P(y_j | x_i)``.

    Output columns that no input can produce are dropped on construction;
    ``column_map[k]`` gives the original index of kept column ``k``.
    """

    w: np.ndarray
    name: str | None = None
    column_map: tuple[int, ...] = field(init=False)
    n_original: int = field(init=False)

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] == 0 or w.shape[1] == 0:
            raise InvalidChannel(f"expected a non-empty matrix, got shape {w.shape}")
        rows = [_project(row, f"row {i}", InvalidChannel) for i, row in enumerate(w)]
        w = np.vstack(rows)
        keep = np.flatnonzero(w.max(axis=0) > 0)
        n_original = w.shape[1]
        w = np.ascontiguousarray(w[:, keep])
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "column_map", tuple(int(k) for k in keep))
        object.__setattr__(self, "n_original", n_original)

    @property
    def m(self) -> int:
        return self.w.shape[0]

    @property
    def n(self) -> int:
        return self.w.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.w[i]

    @cached_property
    def row_neg_entropy(self) -> np.ndarray:
        """Per-row ``sum_j w_ij ln w_ij`` (minus the row entropy)."""
        return -entr(self.w).sum(axis=1)

    def expand_output(self, q: DistLike) -> np.ndarray:
        """Map an output vector back onto the original (uncanonicalized) columns."""
        full = np.zeros(self.n_original)
        full[list(self.column_map)] = np.asarray(q, dtype=float)
        return full

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Channel{label}({self.m}x{self.n})"


def _vec(p: DistLike) -> np.ndarray:
    return np.asarray(p, dtype=float)


def entropy(p: DistLike) -> float:
    """Shannon entropy in nats, with ``0 ln 0 = 0``."""
    return float(entr(_vec(p)).sum())


def kl_divergence(p: DistLike, q: DistLike) -> float:
    """``D(p || q)`` in nats.

    Raises :class:`AbsoluteContinuityViolation` when ``p`` puts mass where
    ``q`` has none, since the divergence is then infinite.
    """
    p, q = _vec(p), _vec(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"distributions of size {p.size} and {q.size}")
    terms = rel_entr(p, q)
    if np.isinf(terms).any():
        bad = int(np.flatnonzero(np.isinf(terms))[0])
        raise AbsoluteContinuityViolation(f"p[{bad}] > 0 but q[{bad}] = 0")
    # Round-off can push D(p||p') slightly negative for p' within an ulp of p.
    return max(float(terms.sum()), 0.0)


def output_distribution(p: DistLike, channel: Channel) -> Distribution:
    """The output law ``q = p W``."""
    p = _vec(p)
    if p.shape != (channel.m,):
        raise DimensionMismatch(f"input of size {p.size} for a channel with {channel.m} inputs")
    q = p @ channel.w
    return Distribution._trusted(q / q.sum())


def row_divergence(channel: Channel, i: int, q: DistLike) -> float:
    """``D(W^i || q)`` for row ``i`` of the channel."""
    q = _vec(q)
    if q.shape != (channel.n,):
        raise DimensionMismatch(f"output law of size {q.size} for a channel with {channel.n} outputs")
    return kl_divergence(channel.w[i], q)


def row_divergences(channel: Channel, q: DistLike) -> np.ndarray:
    """All row divergences ``D(W^i || q)``; ``inf`` where a row escapes supp(q)."""
    q = _vec(q)
    return rel_entr(channel.w, q[None, :]).sum(axis=1)


def mutual_information(p: DistLike, channel: Channel) -> float:
    """``I(p, W) = sum_i p_i D(W^i || pW)`` in nats."""
    p = _vec(p)
    q = output_distribution(p, channel).probs
    support = p > 0
    d = row_divergences(channel, q)[support]
    return float(p[support] @ d)


def nats_to_bits(value: float) -> float:
    return value / math.log(2.0)
