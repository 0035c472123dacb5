"""Backward error correction: feedback sessions over a two-way link.

The sender holds a reference value and an inverse model of the receiver's
error function; the receiver applies that error function to whatever
correction arrives and reports its plant value back. Corrections travel
in virtual message boxes whose fill shrinks to zero as the error
vanishes, so a converged link keeps exchanging boxes that carry nothing.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping

import numpy as np

__all__ = [
    "VirtualBox",
    "ErrorFunction",
    "Identity",
    "Affine",
    "SymbolRemap",
    "InverseModel",
    "Session",
    "RoundRecord",
    "Completed",
    "RequestMore",
    "delta",
    "modulate",
    "demodulate",
    "step",
    "identify_error_model",
    "ram_monitor",
    "RamPatch",
    "run_adapter_scenario",
    "resolve_ambiguity",
    "MAX_MAGNITUDE_BITS",
]

MAX_MAGNITUDE_BITS = 64


@dataclass(frozen=True)
class VirtualBox:
    """One transmission slot. An empty box still traverses the link.

    ``payload`` is a bit string of length ``fill``; ``value`` caches the
    decoded number for full-width report boxes.
    """

    capacity: int
    fill: int
    payload: str = ""
    value: float | None = None

    def __post_init__(self):
        if not 0 <= self.fill <= self.capacity:
            raise ValueError("fill must lie in [0, capacity]")
        if len(self.payload) != self.fill:
            raise ValueError("payload length must equal fill")

    @property
    def empty(self) -> bool:
        return self.fill == 0


class ErrorFunction:
    """Deterministic receiver-side distortion."""

    def apply(self, x):
        raise NotImplementedError

    def inverted(self) -> "ErrorFunction":
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(ErrorFunction):
    def apply(self, x):
        return x

    def inverted(self) -> "Identity":
        return Identity()


@dataclass(frozen=True)
class Affine(ErrorFunction):
    """x -> gain * x + offset; invertible for nonzero gain."""

    gain: float
    offset: float

    def __post_init__(self):
        if self.gain == 0:
            raise ValueError("affine error function needs a nonzero gain")

    def apply(self, x: float) -> float:
        return self.gain * x + self.offset

    def inverted(self) -> "Affine":
        return Affine(1.0 / self.gain, -self.offset / self.gain)


@dataclass(frozen=True, eq=False)
class SymbolRemap(ErrorFunction):
    """Bijection over a finite symbol alphabet."""

    mapping: Mapping

    def __post_init__(self):
        mapping = dict(self.mapping)
        if set(mapping) != set(mapping.values()):
            raise ValueError("remap must be a bijection over its alphabet")
        object.__setattr__(self, "mapping", mapping)

    @property
    def alphabet(self) -> tuple:
        return tuple(self.mapping)

    def apply(self, x):
        try:
            return self.mapping[x]
        except KeyError:
            raise ValueError(f"symbol {x!r} outside the remap alphabet") from None

    def inverted(self) -> "SymbolRemap":
        return SymbolRemap({v: k for k, v in self.mapping.items()})


UNIDENTIFIED = "unidentified"
IDENTIFIED = "identified"


@dataclass(frozen=True)
class InverseModel:
    """The sender's estimate of the receiver's inverse error function."""

    function: ErrorFunction | None = None
    status: str = UNIDENTIFIED

    @classmethod
    def identified(cls, function: ErrorFunction) -> "InverseModel":
        return cls(function, IDENTIFIED)

    def pre_distort(self, x):
        if self.status != IDENTIFIED or self.function is None:
            return x
        return self.function.apply(x)

    @property
    def gain(self) -> float:
        if isinstance(self.function, Affine):
            return self.function.gain
        return 1.0


def delta(reference: float, feedback: float) -> float:
    """The difference that decides how much needs to be transmitted."""
    return reference - feedback


def _quantize(value: float, q: float) -> int:
    return int(math.floor(abs(value) / q + 0.5))


def modulate(d: float, q: float, capacity: int = 1 + MAX_MAGNITUDE_BITS) -> VirtualBox:
    """Encode a correction into a box: sign bit plus minimal binary magnitude.

    A correction that quantizes to zero produces an empty box (zero error
    means zero bits). Raises OverflowError when |d|/q exceeds the
    configured magnitude width.
    """
    if q <= 0:
        raise ValueError("quantization step must be positive")
    magnitude = _quantize(d, q)
    if magnitude == 0:
        return VirtualBox(capacity, 0)
    if magnitude >= 2**MAX_MAGNITUDE_BITS:
        raise OverflowError(f"correction magnitude {magnitude} exceeds {MAX_MAGNITUDE_BITS} bits")
    payload = ("1" if d < 0 else "0") + format(magnitude, "b")
    if len(payload) > capacity:
        raise OverflowError("payload exceeds box capacity")
    return VirtualBox(capacity, len(payload), payload)


def demodulate(box: VirtualBox, q: float) -> float:
    """Inverse of :func:`modulate`, exact to within q/2."""
    if box.empty:
        return 0.0
    sign = -1.0 if box.payload[0] == "1" else 1.0
    return sign * int(box.payload[1:], 2) * q


def _report_box(value: float, capacity: int = 1 + MAX_MAGNITUDE_BITS) -> VirtualBox:
    """Backward boxes are always full width: the plant reports every round."""
    payload = "0" * min(MAX_MAGNITUDE_BITS, capacity)
    return VirtualBox(capacity, len(payload), payload, value=float(value))


@dataclass(frozen=True)
class RoundRecord:
    round: int
    delta: float | None
    fill_bits: int
    plant_value: float


class Session:
    """One sender/receiver pair joined by a delayed two-way link.

    The sender pushes quantized, pre-distorted corrections; the receiver
    applies its error function to whatever arrives, then reports its
    plant value. Boxes arrive exactly ``delay`` rounds after emission, in
    order. After emitting a correction the sender holds off for ``delay``
    rounds so stale reports do not trigger duplicate corrections.
    """

    def __init__(
        self,
        reference: float,
        error_function: ErrorFunction = Identity(),
        inverse: InverseModel | None = None,
        plant: float = 0.0,
        delay: int = 0,
        q: float = 1e-3,
    ):
        if delay < 0:
            raise ValueError("delay must be non-negative")
        if isinstance(error_function, SymbolRemap):
            raise TypeError("numeric sessions need a numeric error function")
        self.reference = float(reference)
        self.error_function = error_function
        self.inverse = inverse if inverse is not None else InverseModel.identified(error_function.inverted())
        self.plant = float(plant)
        self.delay = delay
        self.q = float(q)
        self.forward: deque = deque(VirtualBox(1 + MAX_MAGNITUDE_BITS, 0) for _ in range(delay))
        self.backward: deque = deque(_report_box(plant) for _ in range(delay))
        self.cooldown = 0
        self.log: list[RoundRecord] = []
        self.forward_boxes_sent = 0

    @property
    def rounds(self) -> int:
        return len(self.log)

    def probe(self, x):
        """Excite the receiver directly and observe its response (the
        identification maneuver; requires a noiseless, passive receiver)."""
        return self.error_function.apply(x)


def step(session: Session, disturbance: float | None = None) -> Session:
    """Advance one round; returns the same (mutated) session.

    Phases: the receiver consumes an arriving correction and suffers the
    optional disturbance, reports its plant value backward, then the
    sender evaluates the arriving report and emits the next (possibly
    empty) forward box.
    """
    # receiver: arriving correction, then external disturbance
    if session.delay > 0:
        arriving = session.forward.popleft()
        if not arriving.empty:
            value = demodulate(arriving, session.q * abs(session.inverse.gain))
            session.plant += session.error_function.apply(value)
    if disturbance is not None:
        session.plant += float(disturbance)

    # receiver: report the plant value backward (always full width)
    session.backward.append(_report_box(session.plant))
    report = session.backward.popleft()

    # sender: evaluate the report, pre-distort, modulate
    current_delta = None
    box = VirtualBox(1 + MAX_MAGNITUDE_BITS, 0)
    if session.cooldown > 0:
        session.cooldown -= 1
    elif report.value is not None:
        current_delta = delta(session.reference, report.value)
        if _quantize(current_delta, session.q) == 0:
            box = VirtualBox(1 + MAX_MAGNITUDE_BITS, 0)
        else:
            correction = session.inverse.pre_distort(current_delta)
            box = modulate(correction, session.q * abs(session.inverse.gain))
            # a correction needs delay rounds to land and delay more for its
            # report to return; evaluating sooner would act on stale reports
            session.cooldown = 2 * session.delay
    session.forward_boxes_sent += 1
    if session.delay > 0:
        session.forward.append(box)
    elif not box.empty:
        value = demodulate(box, session.q * abs(session.inverse.gain))
        session.plant += session.error_function.apply(value)

    session.log.append(
        RoundRecord(len(session.log) + 1, current_delta, box.fill, session.plant)
    )
    return session


def identify_error_model(session: Session | ErrorFunction, family: str) -> InverseModel:
    """Recover the receiver's inverse by probe excitation.

    family "affine": probe 0 and 1 (two probes: offset = e(0), gain =
    e(1) - e(0)); a zero gain is not invertible and identification fails.
    family "remap": probe every symbol once and invert the observed
    bijection.
    """
    probe = session.probe if isinstance(session, Session) else session.apply
    if family == "affine":
        at_zero = probe(0.0)
        at_one = probe(1.0)
        gain = at_one - at_zero
        if gain == 0:
            raise ValueError("error function is not invertible: e(1) == e(0)")
        return InverseModel.identified(Affine(gain, at_zero).inverted())
    if family == "remap":
        function = session.error_function if isinstance(session, Session) else session
        if not isinstance(function, SymbolRemap):
            raise TypeError("remap identification needs a symbol-remap error function")
        observed = {symbol: probe(symbol) for symbol in function.alphabet}
        return InverseModel.identified(SymbolRemap(observed).inverted())
    raise ValueError(f"unknown error-function family {family!r}")


@dataclass(frozen=True)
class RamPatch:
    """Positions to flip, plus the information cost of saying so."""

    positions: tuple
    flip_bits: int
    address_bits: int


def ram_monitor(memory, backup) -> RamPatch:
    """Positions where memory deviates from its backup.

    Flipping exactly those bits restores the backup; the corrective
    information is one bit per flip plus the addresses naming them.
    """
    mem = np.asarray(memory, dtype=np.uint8)
    ref = np.asarray(backup, dtype=np.uint8)
    if mem.shape != ref.shape or mem.ndim != 1:
        raise ValueError("memory and backup must be equal-length bit vectors")
    positions = tuple(int(i) for i in np.flatnonzero(mem != ref))
    address_width = max(1, math.ceil(math.log2(len(mem)))) if len(mem) else 0
    return RamPatch(positions, len(positions), len(positions) * address_width)


_CYCLE = ("a", "b", "c", "d")


def run_adapter_scenario(mapping: Mapping, rounds: int, install_at: int) -> list[int]:
    """Driver/driven automata with a mis-mapped channel between them.

    The driver cycles a->b->c->d->a and transmits its state through the
    mapping; the driven system adopts what it receives. From round
    ``install_at`` + 1 on, the inverse mapping is prepended at the
    receiver, which must pull the phase lag to zero immediately. Returns
    the per-round lag trace (minimal cyclic distance driver vs driven).
    """
    if rounds < 1:
        raise ValueError("need at least one round")
    remap = SymbolRemap(dict(mapping))
    if set(remap.alphabet) != set(_CYCLE):
        raise ValueError("mapping must permute exactly the driver states a, b, c, d")
    adapter = remap.inverted()
    trace = []
    for t in range(1, rounds + 1):
        driver = _CYCLE[t % 4]
        received = remap.apply(driver)
        if t > install_at:
            received = adapter.apply(received)
        driven = received
        d = abs(_CYCLE.index(driver) - _CYCLE.index(driven))
        trace.append(min(d, 4 - d))
    return trace


@dataclass(frozen=True)
class Completed:
    symbol: str


@dataclass(frozen=True)
class RequestMore:
    suffixes: tuple


def resolve_ambiguity(partial: str, pool, threshold: float = 0.9):
    """Complete an ambiguous prefix from context, or ask for the rest.

    If the pool's prior (given its last symbol) concentrates at least
    ``threshold`` of the completion mass on one candidate, that candidate
    is returned; otherwise the missing suffixes are requested backward.
    """
    completions = [s for s in pool.alphabet if isinstance(s, str) and s.startswith(partial)]
    if not completions:
        raise ValueError(f"no completion of {partial!r} in the alphabet")
    if len(completions) == 1:
        return Completed(completions[0])
    if pool.last is not None:
        priors = pool.priors(pool.last)
    else:
        priors = {s: 1.0 / len(pool.alphabet) for s in pool.alphabet}
    mass = {s: priors.get(s, 0.0) for s in completions}
    total = sum(mass.values())
    if total > 0:
        best = max(completions, key=lambda s: mass[s])
        if mass[best] / total >= threshold:
            return Completed(best)
    return RequestMore(tuple(s[len(partial) :] for s in completions))
