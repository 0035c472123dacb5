"""Codebooks as prototype sets in signal space, decoded by classification.

A codebook is an ordered set of labeled prototype vectors. Decoding is
nearest-neighbor under summed squared difference over the non-erased
dimensions, optionally biased by per-symbol priors. For 0/1-valued
codebooks this distance coincides with the Hamming distance, so the same
machinery covers binary block codes and analog constellations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

__all__ = [
    "SignalVector",
    "Codebook",
    "DecodeStatus",
    "DecodeOutcome",
    "RedundancyBudget",
    "RecodePlan",
    "ReliabilityClass",
    "ReliabilityProfile",
    "UnprotectableSymbolError",
    "hamming74_codebook",
    "nn_decode",
    "nn_decode_batch",
    "distance_table",
    "map_decode",
    "redundancy_budget",
    "adaptive_recode",
    "majority_vote_residual",
    "reliability_profile",
    "parse_codebook",
    "format_codebook",
    "parse_signal",
    "format_signal",
]


def _frozen_array(data, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SignalVector:
    """One received point in signal space; entries may be erased.

    ``values`` holds a float per dimension (0.0 placeholder where erased),
    ``erased`` the per-dimension erasure flags. An erased entry carries no
    value and is skipped by every distance computation.
    """

    values: np.ndarray
    erased: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64)
        erased = _frozen_array(self.erased, bool)
        if values.ndim != 1 or erased.shape != values.shape:
            raise ValueError("values and erased must be 1-d arrays of equal length")
        if erased.any():
            cleared = values.copy()
            cleared[erased] = 0.0
            values = _frozen_array(cleared, np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "erased", erased)

    @classmethod
    def from_components(cls, components: Iterable) -> "SignalVector":
        """Build from a sequence of floats, with None marking erased entries."""
        comps = list(components)
        erased = [c is None for c in comps]
        values = [0.0 if e else float(c) for c, e in zip(comps, erased)]
        return cls(np.asarray(values), np.asarray(erased))

    @classmethod
    def from_bits(cls, text: str) -> "SignalVector":
        """Parse a compact bit literal such as ``"01100??"`` ('?' = erased)."""
        return parse_signal(text)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    @property
    def components(self) -> tuple:
        """Components as floats, with None at erased positions."""
        return tuple(None if e else float(v) for v, e in zip(self.values, self.erased))

    def __eq__(self, other):
        if not isinstance(other, SignalVector):
            return NotImplemented
        return self.components == other.components

    def __repr__(self):
        return f"SignalVector({format_signal(self)!r})"


class DecodeStatus(Enum):
    EXACT_MATCH = "exact-match"
    CORRECTED = "corrected"
    DETECTED_UNCORRECTABLE = "detected-uncorrectable"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of decoding one signal vector.

    ``symbol`` is set for exact matches and corrections; ``candidates``
    lists the tied symbols for ambiguous outcomes. ``distance`` is the
    squared distance between signal and the winning (or nearest) prototype.
    """

    status: DecodeStatus
    symbol: object = None
    distance: float = 0.0
    candidates: tuple = ()

    @classmethod
    def exact(cls, symbol) -> "DecodeOutcome":
        return cls(DecodeStatus.EXACT_MATCH, symbol=symbol, distance=0.0)

    @classmethod
    def corrected(cls, symbol, distance: float) -> "DecodeOutcome":
        if not distance > 0:
            raise ValueError("corrected outcomes require a positive distance")
        return cls(DecodeStatus.CORRECTED, symbol=symbol, distance=float(distance))

    @classmethod
    def uncorrectable(cls, distance: float) -> "DecodeOutcome":
        return cls(DecodeStatus.DETECTED_UNCORRECTABLE, distance=float(distance))

    @classmethod
    def ambiguous(cls, candidates: Sequence, distance: float) -> "DecodeOutcome":
        candidates = tuple(candidates)
        if len(candidates) < 2:
            raise ValueError("ambiguous outcomes require at least two candidates")
        return cls(DecodeStatus.AMBIGUOUS, distance=float(distance), candidates=candidates)

    @property
    def resolved(self) -> bool:
        """True when the decoder committed to a single symbol."""
        return self.status in (DecodeStatus.EXACT_MATCH, DecodeStatus.CORRECTED)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered prototype vectors labeled with symbols.

    The metric is fixed: summed squared difference over non-erased
    dimensions. Inputs whose minimum distance exceeds ``correction_radius``
    are only detected as faulty, never corrected.
    """

    dimension: int
    symbols: tuple
    vectors: np.ndarray
    correction_radius: float

    def __post_init__(self):
        vectors = _frozen_array(self.vectors, np.float64)
        symbols = tuple(self.symbols)
        if vectors.ndim != 2 or vectors.shape != (len(symbols), self.dimension):
            raise ValueError("prototype array must be (num_symbols, dimension)")
        if len(set(symbols)) != len(symbols):
            raise ValueError("duplicate symbol id in codebook")
        if len({v.tobytes() for v in vectors}) != len(symbols):
            raise ValueError("duplicate prototype vector in codebook")
        if not self.correction_radius >= 0:
            raise ValueError("correction radius must be non-negative")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def create(cls, prototypes: Iterable[tuple], correction_radius: float | None = None) -> "Codebook":
        """Build a codebook from (symbol, vector) pairs.

        When ``correction_radius`` is omitted it defaults to
        floor((d_min - 1) / 2) for binary codebooks and to unbounded for
        analog ones.
        """
        pairs = list(prototypes)
        if not pairs:
            raise ValueError("codebook needs at least one prototype")
        symbols = [s for s, _ in pairs]
        vectors = np.asarray([list(map(float, v)) for _, v in pairs], dtype=np.float64)
        dimension = vectors.shape[1]
        if correction_radius is None:
            if _is_binary(vectors) and len(pairs) > 1:
                dmin = _min_pairwise_hamming(vectors)
                correction_radius = float((dmin - 1) // 2)
            else:
                correction_radius = math.inf
        return cls(dimension, tuple(symbols), vectors, float(correction_radius))

    @property
    def is_binary(self) -> bool:
        return _is_binary(self.vectors)

    def index_of(self, symbol) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"unknown symbol: {symbol!r}") from None

    def vector_for(self, symbol) -> np.ndarray:
        return self.vectors[self.index_of(symbol)]

    def symbol_for_vector(self, vector: np.ndarray):
        """Exact reverse lookup of a prototype vector; KeyError if absent."""
        key = np.ascontiguousarray(vector, dtype=np.float64).tobytes()
        for sym, proto in zip(self.symbols, self.vectors):
            if proto.tobytes() == key:
                return sym
        raise KeyError("vector is not a prototype of this codebook")

    def __len__(self) -> int:
        return len(self.symbols)


def _is_binary(vectors: np.ndarray) -> bool:
    return bool(np.isin(vectors, (0.0, 1.0)).all())


def _min_pairwise_hamming(vectors: np.ndarray) -> int:
    diff = vectors[:, None, :] != vectors[None, :, :]
    counts = diff.sum(axis=2)
    np.fill_diagonal(counts, counts.max() + 1)
    return int(counts.min())


_HAMMING74_WORDS = (
    "0000000", "1110000", "1001100", "0111100",
    "0101010", "1011010", "1100110", "0010110",
    "1101001", "0011001", "0100101", "1010101",
    "1000011", "0110011", "0001111", "1111111",
)


@cache
def hamming74_codebook() -> Codebook:
    """The 16 legal 7-bit words of the Hamming(7,4) code, symbols 1..16."""
    pairs = [(i + 1, [float(b) for b in word]) for i, word in enumerate(_HAMMING74_WORDS)]
    return Codebook.create(pairs, correction_radius=1.0)


def _check_signal(book: Codebook, signal: SignalVector) -> None:
    if signal.dimension != book.dimension:
        raise ValueError(
            f"signal dimension {signal.dimension} does not match codebook dimension {book.dimension}"
        )
    if signal.erased.all():
        raise ValueError("cannot decode a fully erased signal")


def _distance_row(book: Codebook, signal: SignalVector) -> np.ndarray:
    values = signal.values.reshape(1, -1)
    erased = signal.erased.reshape(1, -1).astype(np.uint8)
    return kernels.distance_matrix(values, erased, book.vectors)[0]


def _decide(book: Codebook, row: np.ndarray) -> DecodeOutcome:
    best = float(row.min())
    if best > book.correction_radius:
        return DecodeOutcome.uncorrectable(best)
    tied = np.flatnonzero(row == best)
    if len(tied) > 1:
        return DecodeOutcome.ambiguous([book.symbols[i] for i in tied], best)
    symbol = book.symbols[int(tied[0])]
    if best == 0.0:
        return DecodeOutcome.exact(symbol)
    return DecodeOutcome.corrected(symbol, best)


def nn_decode(book: Codebook, signal: SignalVector) -> DecodeOutcome:
    """Decode one signal to its nearest prototype.

    Returns an exact match at distance 0, a correction otherwise; ties at
    the minimum are reported as ambiguous and inputs farther than the
    correction radius as detected-uncorrectable.
    """
    _check_signal(book, signal)
    return _decide(book, _distance_row(book, signal))


def nn_decode_batch(
    book: Codebook, values: np.ndarray, erased: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised nearest-prototype decode over (n, D) signal arrays.

    Returns (prototype index, distance, status code) with the status codes
    of :mod:`chansim.kernels`. Used by the trial runners; semantics match
    :func:`nn_decode` row for row.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if erased is None:
        erased = np.zeros(values.shape, dtype=np.uint8)
    else:
        erased = np.ascontiguousarray(erased, dtype=np.uint8)
    return kernels.decode_batch(values, erased, book.vectors, book.correction_radius)


def distance_table(book: Codebook, signal: SignalVector) -> list[tuple[object, float]]:
    """Distance from the signal to every prototype, in codebook order."""
    _check_signal(book, signal)
    row = _distance_row(book, signal)
    return [(sym, float(d)) for sym, d in zip(book.symbols, row)]


def map_decode(
    book: Codebook,
    signal: SignalVector,
    priors: Mapping,
    weight: float,
) -> DecodeOutcome:
    """Prior-biased decode minimising distance(s) - weight * log(prior(s)).

    With weight 0 the priors are ignored and the result is exactly
    :func:`nn_decode`. A prior of 0 excludes the symbol (for weight > 0).
    The correction radius is checked against the plain geometric minimum,
    so prior bias never turns a decodable signal into a rejection.
    """
    if weight < 0:
        raise ValueError("prior weight must be non-negative")
    _check_signal(book, signal)
    row = _distance_row(book, signal)

    geometric_min = float(row.min())
    if geometric_min > book.correction_radius:
        return DecodeOutcome.uncorrectable(geometric_min)
    if weight == 0.0:
        return _decide(book, row)

    prior_vec = np.asarray([float(priors.get(sym, 0.0)) for sym in book.symbols])
    if (prior_vec < 0).any():
        raise ValueError("priors must be non-negative")
    total = prior_vec.sum()
    if total == 0.0:
        raise ValueError("all symbols have prior 0")
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-6):
        raise ValueError(f"priors must sum to 1, got {total}")

    scores = np.where(prior_vec > 0, row - weight * np.log(np.where(prior_vec > 0, prior_vec, 1.0)), np.inf)
    best = float(scores.min())
    tied = np.flatnonzero(scores == best)
    if len(tied) > 1:
        distance = float(row[tied].min())
        return DecodeOutcome.ambiguous([book.symbols[i] for i in tied], distance)
    winner = int(tied[0])
    distance = float(row[winner])
    if distance == 0.0:
        return DecodeOutcome.exact(book.symbols[winner])
    return DecodeOutcome.corrected(book.symbols[winner], distance)


@dataclass(frozen=True)
class RedundancyBudget:
    """Gross/net bit accounting: how much loss the recoding can compensate."""

    net_bits: int
    gross_bits: int
    dilution: Fraction
    compensable: int


def redundancy_budget(net_bits: int, gross_bits: int) -> RedundancyBudget:
    """Budget for diluting ``net_bits`` of information into ``gross_bits``."""
    if net_bits < 1:
        raise ValueError("net bits must be positive")
    if gross_bits < net_bits:
        raise ValueError("gross bits must be at least the net bits")
    return RedundancyBudget(
        net_bits=net_bits,
        gross_bits=gross_bits,
        dilution=Fraction(net_bits, gross_bits),
        compensable=gross_bits - net_bits,
    )


def majority_vote_residual(rate: float, repetitions: int) -> float:
    """Probability that majority voting over ``repetitions`` copies fails."""
    if repetitions < 1 or repetitions % 2 == 0:
        raise ValueError("repetition count must be a positive odd integer")
    threshold = (repetitions + 1) // 2
    return sum(
        math.comb(repetitions, i) * rate**i * (1.0 - rate) ** (repetitions - i)
        for i in range(threshold, repetitions + 1)
    )


class UnprotectableSymbolError(ValueError):
    """Raised when a symbol's error rate is too high for majority voting."""

    def __init__(self, symbol, rate):
        super().__init__(f"symbol {symbol!r} has error rate {rate} >= 0.5; majority vote cannot converge")
        self.symbol = symbol
        self.rate = rate


@dataclass(frozen=True)
class RecodePlan:
    """Per-symbol repetition factors meeting a residual-error target."""

    repetitions: Mapping
    target_residual: float

    def __post_init__(self):
        object.__setattr__(self, "repetitions", MappingProxyType(dict(self.repetitions)))


def adaptive_recode(rates: Mapping, target: float, max_repetitions: int = 401) -> RecodePlan:
    """Lengthen codes for symbols observed to be disturbed more strongly.

    For each symbol, picks the smallest odd repetition count whose
    majority-vote residual error at the observed rate is at or below
    ``target``. Symbols with rate >= 0.5 are unprotectable.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target residual must be in (0, 1)")
    plan = {}
    for symbol, rate in rates.items():
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"rate for {symbol!r} must be in [0, 1)")
        if rate >= 0.5:
            raise UnprotectableSymbolError(symbol, rate)
        k = 1
        while majority_vote_residual(rate, k) > target:
            k += 2
            if k > max_repetitions:
                raise ValueError(
                    f"symbol {symbol!r} needs more than {max_repetitions} repetitions for target {target}"
                )
        plan[symbol] = k
    return RecodePlan(plan, target)


class ReliabilityClass(Enum):
    UNCONDITIONALLY_RELIABLE = "unconditionally-reliable"
    CONDITIONALLY_RELIABLE = "conditionally-reliable"
    CONDITIONALLY_UNRELIABLE = "conditionally-unreliable"
    UNCONDITIONALLY_UNRELIABLE = "unconditionally-unreliable"


@dataclass(frozen=True)
class ReliabilityProfile:
    """Observed per-dimension flip rates and their reliability classes."""

    rates: tuple
    classes: tuple
    thresholds: tuple


DEFAULT_RELIABILITY_THRESHOLDS = (0.001, 0.1, 0.4)


def reliability_profile(
    flip_counts: Sequence[int],
    trials: int,
    thresholds: tuple[float, float, float] = DEFAULT_RELIABILITY_THRESHOLDS,
) -> ReliabilityProfile:
    """Classify each dimension by its observed flip rate over ``trials``."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if not (0 < thresholds[0] < thresholds[1] < thresholds[2] < 0.5):
        raise ValueError("thresholds must be ascending and inside (0, 0.5)")
    rates = []
    classes = []
    for flips in flip_counts:
        if not 0 <= flips <= trials:
            raise ValueError("flip count outside [0, trials]")
        rate = flips / trials
        rates.append(rate)
        if rate <= thresholds[0]:
            classes.append(ReliabilityClass.UNCONDITIONALLY_RELIABLE)
        elif rate <= thresholds[1]:
            classes.append(ReliabilityClass.CONDITIONALLY_RELIABLE)
        elif rate <= thresholds[2]:
            classes.append(ReliabilityClass.CONDITIONALLY_UNRELIABLE)
        else:
            classes.append(ReliabilityClass.UNCONDITIONALLY_UNRELIABLE)
    return ReliabilityProfile(tuple(rates), tuple(classes), tuple(thresholds))


def parse_signal(text: str) -> SignalVector:
    """Parse a signal literal: whitespace-separated reals or a compact
    bit string, with '?' marking erased positions."""
    text = text.strip()
    if not text:
        raise ValueError("empty signal literal")
    if " " not in text and set(text) <= set("01?"):
        tokens = list(text)
    else:
        tokens = text.split()
    return SignalVector.from_components(None if t == "?" else float(t) for t in tokens)


def format_signal(signal: SignalVector) -> str:
    """Inverse of :func:`parse_signal` (compact form for pure bit vectors)."""
    comps = signal.components
    if all(c is None or c in (0.0, 1.0) for c in comps):
        return "".join("?" if c is None else str(int(c)) for c in comps)
    return " ".join("?" if c is None else repr(c) for c in comps)


def parse_codebook(text: str, correction_radius: float | None = None) -> Codebook:
    """Parse the one-prototype-per-line table: ``symbol-id: v1 v2 ... vD``."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'symbol-id: v1 v2 ...'")
        symbol: object = head.strip()
        if isinstance(symbol, str) and symbol.lstrip("-").isdigit():
            symbol = int(symbol)
        values = [float(t) for t in rest.split()]
        pairs.append((symbol, values))
    return Codebook.create(pairs, correction_radius)


def format_codebook(book: Codebook) -> str:
    lines = []
    for sym, vec in zip(book.symbols, book.vectors):
        rendered = " ".join(str(int(v)) if v in (0.0, 1.0) else repr(float(v)) for v in vec)
        lines.append(f"{sym}: {rendered}")
    return "\n".join(lines) + "\n"
