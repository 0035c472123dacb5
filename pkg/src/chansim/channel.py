"""Composable, seeded error models that corrupt signal frames.

Each model is an immutable description of one disturbance: random bit
flips, bursts, additive noise, offsets, symbol remapping, omission of
whole vectors, or erasure of components. ``apply`` is a pure function of
(model, frame, seed, trial index); composition splits the random stream
per stage so that trials stay reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .codespace import Codebook, SignalVector

__all__ = [
    "SignalFrame",
    "TrialRng",
    "ErrorModel",
    "RandomFlip",
    "Burst",
    "Gaussian",
    "Offset",
    "Remap",
    "Omission",
    "Erasure",
    "Compose",
    "apply",
    "compose",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SignalFrame:
    """An ordered sequence of signal vectors sharing one dimension.

    Stored as a (length, D) value array plus a matching erasure mask;
    row order is transmission order.
    """

    values: np.ndarray
    erased: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        erased = np.ascontiguousarray(self.erased, dtype=bool)
        if values.ndim != 2 or erased.shape != values.shape:
            raise ValueError("frame needs matching (length, dimension) arrays")
        if erased.any():
            values = values.copy()
            values[erased] = 0.0
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "erased", _frozen(erased))

    @classmethod
    def from_vectors(cls, vectors: Sequence[SignalVector]) -> "SignalFrame":
        if not vectors:
            raise ValueError("cannot infer dimension of an empty frame; use empty()")
        return cls(
            np.stack([v.values for v in vectors]),
            np.stack([v.erased for v in vectors]),
        )

    @classmethod
    def from_array(cls, values, erased=None) -> "SignalFrame":
        values = np.asarray(values, dtype=np.float64)
        if erased is None:
            erased = np.zeros(values.shape, dtype=bool)
        return cls(values, np.asarray(erased, dtype=bool))

    @classmethod
    def from_bits(cls, text: str) -> "SignalFrame":
        """Parse whitespace-separated bit-vector literals, '?' = erased."""
        vectors = [SignalVector.from_bits(tok) for tok in text.split()]
        return cls.from_vectors(vectors)

    @classmethod
    def empty(cls, dimension: int) -> "SignalFrame":
        return cls(np.zeros((0, dimension)), np.zeros((0, dimension), dtype=bool))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, index: int) -> SignalVector:
        return SignalVector(self.values[index].copy(), self.erased[index].copy())

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, SignalFrame):
            return NotImplemented
        if self.values.shape != other.values.shape:
            return False
        if not np.array_equal(self.erased, other.erased):
            return False
        live = ~self.erased
        return bool(np.array_equal(self.values[live], other.values[live]))

    def __repr__(self):
        return f"SignalFrame(length={len(self)}, dimension={self.dimension})"


@dataclass(frozen=True)
class TrialRng:
    """Deterministic randomness addressed by (master seed, trial index).

    Composite models derive per-stage sub-streams via ``stage``; equal
    (seed, index) pairs reproduce corruption sequences bit for bit.
    """

    master_seed: int
    trial_index: int = 0
    path: tuple = ()

    def stage(self, index: int) -> "TrialRng":
        return TrialRng(self.master_seed, self.trial_index, self.path + (index,))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.trial_index, *self.path)
        )
        return np.random.default_rng(seq)


class ErrorModel:
    """Base class for disturbances; subclasses implement ``_corrupt``."""

    def _corrupt(self, frame: SignalFrame, rng: np.random.Generator) -> SignalFrame:
        raise NotImplementedError

    def apply(self, frame: SignalFrame, rng: TrialRng) -> SignalFrame:
        return self._corrupt(frame, rng.generator())


def _require_binary(values: np.ndarray, erased: np.ndarray, model: str) -> None:
    live = values[~erased]
    if not np.isin(live, (0.0, 1.0)).all():
        raise ValueError(f"{model} requires 0/1 components")


@dataclass(frozen=True)
class RandomFlip(ErrorModel):
    """Toggle each non-erased 0/1 component independently with probability p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("flip probability must be in [0, 1]")

    def _corrupt(self, frame, rng):
        _require_binary(frame.values, frame.erased, "RandomFlip")
        mask = (rng.random(frame.values.shape) < self.p) & ~frame.erased
        values = frame.values.copy()
        values[mask] = 1.0 - values[mask]
        return SignalFrame(values, frame.erased)


@dataclass(frozen=True)
class Burst(ErrorModel):
    """Flip runs of consecutive components, in transmission order.

    Each position starts a burst with probability ``p_start``; a burst
    toggles ``length`` consecutive 0/1 components (running across vector
    boundaries, clipped at the end of the frame). Overlapping bursts
    re-toggle.
    """

    p_start: float
    length: int

    def __post_init__(self):
        if not 0.0 <= self.p_start <= 1.0:
            raise ValueError("burst start probability must be in [0, 1]")
        if self.length < 1:
            raise ValueError("burst length must be positive")

    def _corrupt(self, frame, rng):
        _require_binary(frame.values, frame.erased, "Burst")
        n = frame.values.size
        starts = np.flatnonzero(rng.random(n) < self.p_start)
        flip = np.zeros(n, dtype=bool)
        for s in starts:
            flip[s : s + self.length] ^= True
        flip &= ~frame.erased.reshape(-1)
        values = frame.values.copy().reshape(-1)
        values[flip] = 1.0 - values[flip]
        return SignalFrame(values.reshape(frame.values.shape), frame.erased)


@dataclass(frozen=True)
class Gaussian(ErrorModel):
    """Add independent zero-mean noise of deviation sigma per component."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def _corrupt(self, frame, rng):
        noise = rng.normal(0.0, self.sigma, frame.values.shape)
        values = frame.values + np.where(frame.erased, 0.0, noise)
        return SignalFrame(values, frame.erased)


@dataclass(frozen=True)
class Offset(ErrorModel):
    """Add a constant to every non-erased component."""

    b: float

    def _corrupt(self, frame, rng):
        values = frame.values + np.where(frame.erased, 0.0, self.b)
        return SignalFrame(values, frame.erased)


@dataclass(frozen=True, eq=False)
class Remap(ErrorModel):
    """Substitute symbols through a bijection over a codebook's alphabet.

    Frame vectors must match prototypes exactly; each is replaced by the
    prototype of the mapped symbol.
    """

    codebook: Codebook
    mapping: Mapping

    def __post_init__(self):
        mapping = dict(self.mapping)
        alphabet = set(self.codebook.symbols)
        if set(mapping) != alphabet or set(mapping.values()) != alphabet:
            raise ValueError("mapping must be a bijection over the codebook's symbols")
        object.__setattr__(self, "mapping", mapping)

    def inverse(self) -> "Remap":
        return Remap(self.codebook, {v: k for k, v in self.mapping.items()})

    def _corrupt(self, frame, rng):
        if frame.erased.any():
            raise ValueError("Remap cannot decode frames with erasures")
        rows = []
        for row in frame.values:
            symbol = self.codebook.symbol_for_vector(row)
            rows.append(self.codebook.vector_for(self.mapping[symbol]))
        values = np.stack(rows) if rows else frame.values
        return SignalFrame(values, frame.erased)


@dataclass(frozen=True)
class Omission(ErrorModel):
    """Silently drop whole vectors with probability p_drop each."""

    p_drop: float

    def __post_init__(self):
        if not 0.0 <= self.p_drop <= 1.0:
            raise ValueError("drop probability must be in [0, 1]")

    def _corrupt(self, frame, rng):
        keep = rng.random(len(frame)) >= self.p_drop
        return SignalFrame(frame.values[keep], frame.erased[keep])


@dataclass(frozen=True)
class Erasure(ErrorModel):
    """Mark components erased with probability p_erase each."""

    p_erase: float

    def __post_init__(self):
        if not 0.0 <= self.p_erase <= 1.0:
            raise ValueError("erase probability must be in [0, 1]")

    def _corrupt(self, frame, rng):
        hit = rng.random(frame.values.shape) < self.p_erase
        return SignalFrame(frame.values, frame.erased | hit)


@dataclass(frozen=True)
class Compose(ErrorModel):
    """Apply stages left to right, each on its own random sub-stream."""

    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("compose needs at least one stage")
        object.__setattr__(self, "stages", stages)

    def apply(self, frame: SignalFrame, rng: TrialRng) -> SignalFrame:
        for i, stage in enumerate(self.stages):
            frame = stage.apply(frame, rng.stage(i))
        return frame

    def _corrupt(self, frame, rng):  # pragma: no cover - apply() is overridden
        raise TypeError("Compose corrupts via apply()")


def apply(model: ErrorModel, frame: SignalFrame, rng: TrialRng) -> SignalFrame:
    """Corrupt a frame; pure in (model, frame, rng)."""
    return model.apply(frame, rng)


def compose(models: Iterable[ErrorModel]) -> ErrorModel:
    """Combine models into one, applied left to right.

    A single-element list is returned as-is, so ``compose([m])`` is ``m``.
    """
    models = list(models)
    if not models:
        raise ValueError("cannot compose an empty model list")
    if len(models) == 1:
        return models[0]
    return Compose(tuple(models))
