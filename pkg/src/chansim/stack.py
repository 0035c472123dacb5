"""Nested channel layers with configurable allocation of corrective strength.

A stack encodes top (most abstract) to bottom (physical), corrupts the
bottom frame through an error model, then decodes bottom to top. Every
layer reports how many of its output symbols arrived corrupted, how many
incoming errors it absorbed, and how many errors its own decoding left
or produced, so miscorrections surface as introduced errors visible to
the layer above (errors_out = errors_in - corrected + introduced holds
at every layer).
"""

from __future__ import annotations

import math
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import codespace
from .channel import ErrorModel, SignalFrame, TrialRng, apply
from .codespace import Codebook, DecodeOutcome, DecodeStatus
from .framing import Close, Open, Text, UnrepairableStreamError, format_tag_stream, repair_tags

__all__ = [
    "Tolerance",
    "FAIL_FAST",
    "PASS_RESIDUAL",
    "Layer",
    "Stack",
    "LayerReport",
    "ResidualReport",
    "TransmissionAborted",
    "ContextPool",
    "ContextualCodebook",
    "BitBlockCodeLayer",
    "CodebookSymbolLayer",
    "TokenTextLayer",
    "TagRepairLayer",
    "SemanticBooleanLayer",
    "ChecksumLayer",
    "raw_bit_codebook",
    "repetition_codebook",
    "transmit",
    "scenario_case1",
    "allocation_stack",
    "decode_boolean_token",
    "octagon_codebook",
    "contextual_decode",
    "cascade_priors",
    "update_pool",
    "TRUE_SYNONYMS",
    "FALSE_SYNONYMS",
]

FAIL_FAST = "fail-fast"
PASS_RESIDUAL = "pass-residual"
Tolerance = str


class Layer(ABC):
    """One protocol layer: encode to the level below, decode back up.

    ``units`` splits a message of this layer into its accountable symbols;
    ``regions`` maps each output unit to the range of lower-level units
    that carry it (computed on the noiseless reference encoding).
    """

    name: str
    tolerance: Tolerance

    def __init__(self, name: str, tolerance: Tolerance = PASS_RESIDUAL):
        if tolerance not in (FAIL_FAST, PASS_RESIDUAL):
            raise ValueError(f"unknown tolerance policy {tolerance!r}")
        self.name = name
        self.tolerance = tolerance

    @abstractmethod
    def encode(self, message):
        """Message of this layer -> message of the layer below."""

    @abstractmethod
    def decode(self, received) -> tuple[object, list[DecodeOutcome]]:
        """Lower-level message -> (message, outcome per output unit)."""

    def units(self, message) -> list:
        return list(message)

    @abstractmethod
    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        """Per output unit, the (start, end) range of lower units carrying it."""


@dataclass(frozen=True)
class LayerReport:
    """Per-layer error accounting for one transmission."""

    layer: str
    errors_in: int
    corrected: int
    introduced: int
    errors_out: int


@dataclass(frozen=True)
class ResidualReport:
    rows: tuple

    def row(self, layer_name: str) -> LayerReport:
        for row in self.rows:
            if row.layer == layer_name:
                return row
        raise KeyError(layer_name)

    @property
    def delivered_clean(self) -> bool:
        return self.rows[0].errors_out == 0 if self.rows else True


class TransmissionAborted(RuntimeError):
    """A fail-fast layer refused to pass an unresolved symbol upward."""

    def __init__(self, layer_name: str, report: ResidualReport):
        super().__init__(f"layer {layer_name!r} aborted: unresolved input")
        self.layer_name = layer_name
        self.report = report


@dataclass(frozen=True, eq=False)
class Stack:
    """Ordered layers, top (most abstract) first; the bottom layer's
    encoding is the SignalFrame that the error model corrupts."""

    layers: tuple
    allocation: str = "custom"

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a stack needs at least one layer")
        object.__setattr__(self, "layers", layers)

    @property
    def bottom(self) -> Layer:
        return self.layers[-1]


def _raw_units(obj) -> list:
    """Elementwise view of a lower-level message: frame rows, string
    characters, or sequence items. Layer ``regions`` index into this."""
    if isinstance(obj, SignalFrame):
        return [
            (tuple(v), tuple(e))
            for v, e in zip(obj.values.tolist(), obj.erased.tolist())
        ]
    return list(obj)


@dataclass(frozen=True)
class TransmitTrace:
    """Full record of one transmission, for metric collection."""

    received: object
    report: "ResidualReport"
    sent_frame: SignalFrame
    corrupted_frame: SignalFrame


def transmit(
    stack: Stack, message, model: ErrorModel, rng: TrialRng, trace: bool = False
):
    """Send a message through the stack under an error model.

    Returns the received top-level message and the per-layer report (or a
    :class:`TransmitTrace` when ``trace`` is set). Raises
    :class:`TransmissionAborted` when a fail-fast layer sees an unresolved
    (uncorrectable or ambiguous) symbol.
    """
    references = [message]
    for layer in stack.layers:
        references.append(layer.encode(references[-1]))
    frame = references[-1]
    if not isinstance(frame, SignalFrame):
        raise TypeError("the bottom layer must encode to a SignalFrame")

    current = apply(model, frame, rng)
    corrupted = current
    rows: list[LayerReport] = []
    for index in range(len(stack.layers) - 1, -1, -1):
        layer = stack.layers[index]
        ref_in, ref_out = references[index + 1], references[index]
        ref_in_units = _raw_units(ref_in)
        got_in_units = _raw_units(current)

        output, outcomes = layer.decode(current)
        out_units = layer.units(output)
        ref_out_units = layer.units(ref_out)
        spans = layer.regions(ref_out, ref_in)

        errors_in = corrected = introduced = errors_out = 0
        for j in range(len(ref_out_units)):
            start, end = spans[j] if j < len(spans) else (0, len(ref_in_units))
            in_err = any(
                k >= len(got_in_units) or got_in_units[k] != ref_in_units[k]
                for k in range(start, end)
            )
            out_err = j >= len(out_units) or out_units[j] != ref_out_units[j]
            resolved = outcomes[j].resolved if j < len(outcomes) else False
            errors_in += in_err
            errors_out += out_err
            if in_err and (resolved or not out_err):
                corrected += 1
            if out_err and (resolved or not in_err):
                introduced += 1

        rows.insert(0, LayerReport(layer.name, errors_in, corrected, introduced, errors_out))
        if layer.tolerance == FAIL_FAST and (
            any(not o.resolved for o in outcomes) or len(out_units) != len(ref_out_units)
        ):
            # losing (or inventing) output units is as unresolvable as a
            # flagged symbol; fail-fast refuses either way
            raise TransmissionAborted(layer.name, ResidualReport(tuple(rows)))
        current = output
    report = ResidualReport(tuple(rows))
    if trace:
        return TransmitTrace(current, report, frame, corrupted)
    return current, report


def repetition_codebook(repetitions: int) -> Codebook:
    """Two-word repetition code; nearest-neighbor decode = majority vote."""
    if repetitions < 1 or repetitions % 2 == 0:
        raise ValueError("repetition count must be odd")
    return Codebook.create(
        [(0, [0.0] * repetitions), (1, [1.0] * repetitions)],
        correction_radius=(repetitions - 1) // 2,
    )


def raw_bit_codebook() -> Codebook:
    """Single-dimension 0/1 book: a bit pipe with no corrective strength."""
    return Codebook.create([(0, [0.0]), (1, [1.0])], correction_radius=0)


def _batch_outcome(book: Codebook, index: int, distance: float, status: int) -> DecodeOutcome:
    symbol = book.symbols[index]
    if status == 0:
        return DecodeOutcome.exact(symbol)
    if status == 1:
        return DecodeOutcome.corrected(symbol, distance)
    if status == 2:
        return DecodeOutcome.uncorrectable(distance)
    return DecodeOutcome(DecodeStatus.AMBIGUOUS, distance=distance, candidates=(symbol, symbol))


def _full_outcome(book: Codebook, vector: codespace.SignalVector) -> DecodeOutcome:
    return codespace.nn_decode(book, vector)


class BitBlockCodeLayer(Layer):
    """Blocks of bits encoded as codebook prototypes (one vector per block).

    Message: a '0'/'1' string whose length is a multiple of the block
    size; block j maps to prototype index int(block, 2). Accounting is per
    block. Unresolved decodes emit the nearest prototype's bits anyway and
    carry their unresolved outcome up.
    """

    def __init__(self, name: str, book: Codebook, tolerance: Tolerance = PASS_RESIDUAL):
        super().__init__(name, tolerance)
        bits = math.log2(len(book))
        if len(book) < 2 or bits != int(bits):
            raise ValueError("codebook size must be a power of two, at least 2")
        self.book = book
        self.block_bits = int(bits)

    def encode(self, message: str) -> SignalFrame:
        if len(message) % self.block_bits:
            raise ValueError(f"message length must be a multiple of {self.block_bits}")
        indices = [
            int(message[i : i + self.block_bits], 2)
            for i in range(0, len(message), self.block_bits)
        ]
        if not indices:
            return SignalFrame.empty(self.book.dimension)
        return SignalFrame.from_array(self.book.vectors[indices])

    def decode(self, received: SignalFrame) -> tuple[str, list[DecodeOutcome]]:
        if len(received) == 0:
            return "", []
        idx, dist, status = codespace.nn_decode_batch(self.book, received.values, received.erased)
        bits = []
        outcomes = []
        for row, (i, d, s) in enumerate(zip(idx, dist, status)):
            bits.append(format(int(i), f"0{self.block_bits}b"))
            if s == 3:
                outcomes.append(_full_outcome(self.book, received[row]))
            else:
                outcomes.append(_batch_outcome(self.book, int(i), float(d), int(s)))
        return "".join(bits), outcomes

    def units(self, message: str) -> list:
        return [message[i : i + self.block_bits] for i in range(0, len(message), self.block_bits)]

    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        return [(j, j + 1) for j in range(len(reference_message) // self.block_bits)]


class CodebookSymbolLayer(Layer):
    """Symbols transmitted as their prototype vectors, one per symbol.

    With a context pool attached, decoding biases toward the pool's
    first-order priors given the previously decoded symbol (MAP decode);
    without one it is plain nearest-neighbor.
    """

    def __init__(
        self,
        name: str,
        book: Codebook,
        tolerance: Tolerance = PASS_RESIDUAL,
        pool: "ContextPool | None" = None,
        prior_weight: float = 1.0,
    ):
        super().__init__(name, tolerance)
        self.book = book
        self.pool = pool
        self.prior_weight = prior_weight

    def encode(self, message) -> SignalFrame:
        symbols = list(message)
        if not symbols:
            return SignalFrame.empty(self.book.dimension)
        rows = [self.book.vector_for(s) for s in symbols]
        return SignalFrame.from_array(np.stack(rows))

    def decode(self, received: SignalFrame) -> tuple[tuple, list[DecodeOutcome]]:
        symbols = []
        outcomes = []
        previous = None
        for i in range(len(received)):
            vector = received[i]
            if self.pool is not None and previous is not None:
                priors = self.pool.priors(previous)
                outcome = codespace.map_decode(self.book, vector, priors, self.prior_weight)
            else:
                outcome = codespace.nn_decode(self.book, vector)
            if outcome.symbol is not None:
                symbol = outcome.symbol
            elif outcome.candidates:
                symbol = outcome.candidates[0]
            else:
                row = codespace.distance_table(self.book, vector)
                symbol = min(row, key=lambda item: item[1])[0]
            symbols.append(symbol)
            outcomes.append(outcome)
            previous = symbol
        return tuple(symbols), outcomes

    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        return [(j, j + 1) for j in range(len(list(reference_message)))]


def _text_to_bits(text: str) -> str:
    return "".join(format(b, "08b") for b in text.encode("latin-1"))


def _bits_to_text(bits: str) -> str:
    data = bytes(int(bits[i : i + 8], 2) for i in range(0, len(bits) - len(bits) % 8, 8))
    return data.decode("latin-1")


class TokenTextLayer(Layer):
    """Tokens joined by newlines and shipped as latin-1 bits; no repair."""

    def __init__(self, name: str, tolerance: Tolerance = PASS_RESIDUAL):
        super().__init__(name, tolerance)

    def encode(self, message) -> str:
        tokens = list(message)
        for t in tokens:
            if "\n" in t:
                raise ValueError("tokens must not contain newlines")
        return _text_to_bits("\n".join(tokens))

    def decode(self, received: str) -> tuple[tuple, list[DecodeOutcome]]:
        text = _bits_to_text(received)
        tokens = tuple(text.split("\n")) if text else ()
        return tokens, [DecodeOutcome.exact(t) for t in tokens]

    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        spans = []
        offset = 0
        for i, token in enumerate(list(reference_message)):
            width = len(token) + (1 if i else 0)  # leading newline from the join
            spans.append((offset * 8, (offset + width) * 8))
            offset += width
        return spans


class TagRepairLayer(Layer):
    """Tokens wrapped in open/close tags, with structural repair on decode.

    Each token travels as the line triple ``open NAME`` / ``text token`` /
    ``close NAME``. Decoding re-parses the (possibly corrupted) line
    stream, repairs the tag structure by minimum edit distance, and
    extracts one token per top-level tag pair. Unparseable lines become
    opaque text so payload corruption cannot break the framing.
    """

    def __init__(
        self,
        name: str,
        tag: str = "v",
        max_edits: int = 6,
        tolerance: Tolerance = PASS_RESIDUAL,
    ):
        super().__init__(name, tolerance)
        self.tag = tag
        self.max_edits = max_edits

    def _stream_for(self, tokens) -> tuple:
        stream = []
        for token in tokens:
            stream.extend((Open(self.tag), Text(token), Close(self.tag)))
        return tuple(stream)

    def encode(self, message) -> str:
        tokens = list(message)
        for t in tokens:
            if "\n" in t:
                raise ValueError("tokens must not contain newlines")
        return _text_to_bits(format_tag_stream(self._stream_for(tokens)))

    def _parse_lenient(self, text: str) -> tuple:
        tokens = []
        for line in text.split("\n"):
            if not line:
                continue
            word, _, rest = line.partition(" ")
            if word == "open" and rest == self.tag:
                tokens.append(Open(self.tag))
            elif word == "close" and rest == self.tag:
                tokens.append(Close(self.tag))
            elif word == "text":
                tokens.append(Text(rest))
            else:
                tokens.append(Text(line))
        return tuple(tokens)

    @staticmethod
    def _extract(stream) -> tuple:
        tokens = []
        depth = 0
        content: str | None = None
        for token in stream:
            if isinstance(token, Open):
                depth += 1
                if depth == 1:
                    content = None
            elif isinstance(token, Close):
                if depth == 1:
                    tokens.append(content if content is not None else "")
                depth = max(0, depth - 1)
            elif depth >= 1 and content is None:
                content = token.content
        return tuple(tokens)

    def decode(self, received: str) -> tuple[tuple, list[DecodeOutcome]]:
        parsed = self._parse_lenient(_bits_to_text(received))
        try:
            repaired, script, cost = repair_tags(parsed, {self.tag}, self.max_edits)
        except UnrepairableStreamError as err:
            tokens = tuple(t.content for t in parsed if isinstance(t, Text))
            return tokens, [DecodeOutcome.uncorrectable(float(err.best_cost)) for _ in tokens]
        tokens = self._extract(repaired)
        if cost == 0:
            outcomes = [DecodeOutcome.exact(t) for t in tokens]
        else:
            outcomes = [DecodeOutcome.corrected(t, float(cost)) for t in tokens]
        return tokens, outcomes

    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        spans = []
        offset = 0
        for token in list(reference_message):
            width = len(format_tag_stream(self._stream_for([token])))
            spans.append((offset * 8, (offset + width) * 8))
            offset += width
        return spans


TRUE_SYNONYMS = ("ye", "YES", "es", "yess", "ja")
FALSE_SYNONYMS = ("no", "NO", "nope", "nein")


def _edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        row = [i]
        for j, cb in enumerate(b, start=1):
            row.append(min(prev[j] + 1, row[-1] + 1, prev[j - 1] + (ca != cb)))
        prev = row
    return prev[-1]


def decode_boolean_token(token: str) -> DecodeOutcome:
    """Map a token to boolean 1/0 via the synonym tables.

    Exact members decode exactly; otherwise the nearer synonym set wins if
    it is within edit distance 1 and strictly nearer than the other set.
    """
    if token in TRUE_SYNONYMS:
        return DecodeOutcome.exact(1)
    if token in FALSE_SYNONYMS:
        return DecodeOutcome.exact(0)
    d_true = min(_edit_distance(token, s) for s in TRUE_SYNONYMS)
    d_false = min(_edit_distance(token, s) for s in FALSE_SYNONYMS)
    if min(d_true, d_false) > 1:
        return DecodeOutcome.uncorrectable(float(min(d_true, d_false)))
    if d_true == d_false:
        return DecodeOutcome.ambiguous((1, 0), float(d_true))
    winner = 1 if d_true < d_false else 0
    return DecodeOutcome.corrected(winner, float(min(d_true, d_false)))


class SemanticBooleanLayer(Layer):
    """Booleans as yes/no tokens; decode tolerates synonyms and typos.

    With ``fallback`` off the layer accepts only exact synonym-table
    members (the no-upper-correction configuration).
    """

    def __init__(self, name: str, tolerance: Tolerance = PASS_RESIDUAL, fallback: bool = True):
        super().__init__(name, tolerance)
        self.fallback = fallback

    def encode(self, message) -> tuple:
        return tuple("ye" if bool(b) else "no" for b in message)

    def decode(self, received) -> tuple[tuple, list[DecodeOutcome]]:
        values = []
        outcomes = []
        for token in received:
            outcome = decode_boolean_token(token)
            if not self.fallback and outcome.status is not DecodeStatus.EXACT_MATCH:
                outcome = DecodeOutcome.uncorrectable(outcome.distance)
            values.append(outcome.symbol if outcome.symbol is not None else 0)
            outcomes.append(outcome)
        return tuple(values), outcomes

    def units(self, message) -> list:
        return [bool(b) for b in message]

    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        return [(j, j + 1) for j in range(len(list(reference_message)))]


class ChecksumLayer(Layer):
    """Whole-message CRC-32 guard: verify on decode, one accounting unit.

    Message: bytes. The lower message is the payload plus a 4-byte CRC,
    rendered as bits. A mismatch makes the single output unit unresolved,
    which aborts fail-fast stacks.
    """

    def __init__(self, name: str, tolerance: Tolerance = FAIL_FAST):
        super().__init__(name, tolerance)

    def encode(self, message: bytes) -> str:
        crc = zlib.crc32(message)
        framed = message + crc.to_bytes(4, "big")
        return "".join(format(b, "08b") for b in framed)

    def decode(self, received: str) -> tuple[bytes, list[DecodeOutcome]]:
        data = bytes(int(received[i : i + 8], 2) for i in range(0, len(received) - len(received) % 8, 8))
        payload, stored = data[:-4], data[-4:]
        if len(data) >= 4 and zlib.crc32(payload) == int.from_bytes(stored, "big"):
            return payload, [DecodeOutcome.exact(payload)]
        return payload, [DecodeOutcome.uncorrectable(1.0)]

    def units(self, message: bytes) -> list:
        return [message]

    def regions(self, reference_message, reference_below) -> list[tuple[int, int]]:
        return [(0, len(reference_below))]


def _case1_layers(tolerance: Tolerance) -> tuple:
    return (
        SemanticBooleanLayer("semantic", tolerance),
        TagRepairLayer("tags", tolerance=tolerance),
        BitBlockCodeLayer("bits", codespace.hamming74_codebook(), tolerance),
    )


def allocation_stack(profile: str, tolerance: Tolerance = PASS_RESIDUAL) -> Stack:
    """Preset stacks realizing the correction-allocation profiles.

    bottom-heavy: all corrective strength in the bit code; top-heavy: raw
    bits, correction only in the semantic layer; balanced: bit code, tag
    repair and semantic correction each handle their own error class.
    """
    if profile == "bottom-heavy":
        layers = (
            SemanticBooleanLayer("semantic", tolerance, fallback=False),
            TokenTextLayer("tokens", tolerance),
            BitBlockCodeLayer("bits", codespace.hamming74_codebook(), tolerance),
        )
    elif profile == "top-heavy":
        layers = (
            SemanticBooleanLayer("semantic", tolerance),
            TokenTextLayer("tokens", tolerance),
            BitBlockCodeLayer("bits", raw_bit_codebook(), tolerance),
        )
    elif profile == "balanced":
        layers = _case1_layers(tolerance)
    else:
        raise ValueError(f"unknown allocation profile {profile!r}")
    return Stack(layers, allocation=profile)


def scenario_case1(
    seed: int = 0, message: tuple = (1, 0, 1, 1, 0, 1, 0, 0), flip_p: float = 0.012
) -> tuple[Stack, dict]:
    """The three-layer balanced stack plus a seeded demonstration run.

    Bottom: Hamming(7,4) bits; middle: tag repair; top: boolean synonyms.
    The demo decodes the token-variant table and transmits a boolean
    message under seeded bit flips.
    """
    from .channel import RandomFlip

    stack = allocation_stack("balanced")
    variants = ("yess", "no", "YES", "nein", "ja", "es", "nope", "ye")
    token_demo = [(tok, decode_boolean_token(tok).symbol) for tok in variants]
    received, report = transmit(stack, tuple(message), RandomFlip(flip_p), TrialRng(seed))
    demo = {
        "token_demo": token_demo,
        "message": tuple(message),
        "received": tuple(received),
        "report": report,
        "seed": seed,
        "flip_p": flip_p,
    }
    return stack, demo


# --- contextual codes -------------------------------------------------------

OCTAGON_STATES = ("a", "b", "c", "d", "e", "f", "g", "h")


@dataclass(frozen=True, eq=False)
class ContextualCodebook:
    """Eight states on the unit circle; legal followers depend on context.

    From context k the legal follow-up states are k+2 (bit 0) and k+5
    (bit 1) counterclockwise, so context and followers are pairwise
    non-adjacent and roughly equidistant; an illegal winner snaps to the
    angularly nearest legal follower.
    """

    base: Codebook
    followers: dict

    def legal_followers(self, context: str) -> tuple[str, str]:
        return self.followers[context]


def octagon_codebook() -> ContextualCodebook:
    states = OCTAGON_STATES
    prototypes = []
    for i, state in enumerate(states):
        angle = 2.0 * math.pi * i / 8.0
        prototypes.append((state, [math.cos(angle), math.sin(angle)]))
    base = Codebook.create(prototypes, correction_radius=math.inf)
    followers = {states[k]: (states[(k + 2) % 8], states[(k + 5) % 8]) for k in range(8)}
    return ContextualCodebook(base, followers)


def _octagon_steps(a: str, b: str) -> int:
    i, j = OCTAGON_STATES.index(a), OCTAGON_STATES.index(b)
    d = abs(i - j)
    return min(d, 8 - d)


def contextual_decode(
    book: ContextualCodebook, context: str, signal: codespace.SignalVector
) -> tuple[int | None, str | None, DecodeOutcome]:
    """Decode one step of the contextual code.

    Nearest-neighbor over all eight prototypes first; a legal winner emits
    its bit label, an illegal one snaps to the angularly nearest legal
    follower (ties between the two followers are ambiguous).
    """
    if context not in book.followers:
        raise ValueError(f"unknown context state {context!r}")
    legal = book.legal_followers(context)
    outcome = codespace.nn_decode(book.base, signal)
    if outcome.status is DecodeStatus.AMBIGUOUS:
        winners = [c for c in outcome.candidates if c in legal]
        if len(winners) != 1:
            ambiguous = DecodeOutcome.ambiguous(legal, outcome.distance)
            return None, None, ambiguous
        state = winners[0]
        if outcome.distance == 0.0:
            result = DecodeOutcome.exact(state)
        else:
            result = DecodeOutcome.corrected(state, outcome.distance)
        return legal.index(state), state, result
    winner = outcome.symbol
    if winner in legal:
        return legal.index(winner), winner, outcome
    steps = [_octagon_steps(winner, s) for s in legal]
    if steps[0] == steps[1]:
        return None, None, DecodeOutcome.ambiguous(legal, outcome.distance)
    state = legal[0] if steps[0] < steps[1] else legal[1]
    proto = book.base.vector_for(state)
    live = ~signal.erased
    distance = float(((signal.values[live] - proto[live]) ** 2).sum())
    result = DecodeOutcome.corrected(state, distance)
    return legal.index(state), state, result


# --- context pools ----------------------------------------------------------


class ContextPool:
    """First-order transition counts over a symbol alphabet.

    Priors use add-one smoothing, so an empty pool is uniform. Pools are
    the one mutable piece of session state; merge combines worker pools by
    count addition. ``upstream`` links to the pool one layer up, the
    source of the cascade that feeds :func:`cascade_priors`.
    """

    def __init__(self, alphabet, encoding: dict | None = None, upstream: "ContextPool | None" = None):
        self.alphabet = tuple(alphabet)
        if not self.alphabet:
            raise ValueError("alphabet must not be empty")
        self.counts = {s: {t: 0 for t in self.alphabet} for s in self.alphabet}
        self.last = None
        self.encoding = dict(encoding) if encoding else None
        self.upstream = upstream

    def observe(self, symbol) -> "ContextPool":
        if symbol not in self.counts:
            raise ValueError(f"symbol {symbol!r} not in the pool alphabet")
        if self.last is not None:
            self.counts[self.last][symbol] += 1
        self.last = symbol
        return self

    def priors(self, context) -> dict:
        row = self.counts[context]
        total = sum(row.values()) + len(self.alphabet)
        return {s: (row[s] + 1) / total for s in self.alphabet}

    def merge(self, other: "ContextPool") -> "ContextPool":
        if other.alphabet != self.alphabet:
            raise ValueError("cannot merge pools over different alphabets")
        for s in self.alphabet:
            for t in self.alphabet:
                self.counts[s][t] += other.counts[s][t]
        return self


def update_pool(pool: ContextPool, observed) -> ContextPool:
    """Record one observed symbol (increments the transition from the
    previously observed one)."""
    return pool.observe(observed)


def cascade_priors(pool: ContextPool, received_prefix: str) -> dict:
    """Prior over the next bit of the current symbol's encoding.

    Uses the pool's Markov priors given its last observed symbol, restricted
    to symbols whose encoding continues the received bit prefix. With no
    information (empty pool, no context, or no candidates) the prior is
    uniform.
    """
    if pool.encoding is None:
        raise ValueError("pool has no symbol-to-bits encoding attached")
    weights = {0: 0.0, 1: 0.0}
    if pool.last is not None:
        priors = pool.priors(pool.last)
    else:
        priors = {s: 1.0 / len(pool.alphabet) for s in pool.alphabet}
    for symbol, bits in pool.encoding.items():
        if len(bits) > len(received_prefix) and bits.startswith(received_prefix):
            weights[int(bits[len(received_prefix)])] += priors.get(symbol, 0.0)
    total = weights[0] + weights[1]
    if total == 0.0:
        return {0: 0.5, 1: 0.5}
    return {0: weights[0] / total, 1: weights[1] / total}
