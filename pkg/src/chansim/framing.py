"""Omission detection and repair: chunk enumeration, chained CRCs, and
minimum-edit structural repair of tag streams.

The chunk chain accumulates per-chunk CRC-32 values through carry-less
multiplication reduced modulo the CRC-32 polynomial. That polynomial is
irreducible over GF(2), so the reduction yields a true field GF(2^32)
with no zero divisors; chaining as c_i = c_{i-1} * B + crc_i (a
polynomial MAC over that field) is therefore guaranteed to change under
any adjacent transposition of chunks with distinct CRCs.

Tag repair searches the edit graph over (position, open-tag stack) states
for the cheapest sequence of token edits that makes the stream
well-formed. Text tokens are opaque and never edited.
"""

from __future__ import annotations

import heapq
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "Chunk",
    "ChainTag",
    "Open",
    "Close",
    "Text",
    "Token",
    "Edit",
    "UnrepairableStreamError",
    "split_chunks",
    "join_chunks",
    "chain_crc",
    "detect_omission",
    "repair_tags",
    "apply_edit_script",
    "is_well_formed",
    "write_chunks",
    "read_chunks",
    "parse_tag_stream",
    "format_tag_stream",
]

CRC32_POLY = 0x104C11DB7


@dataclass(frozen=True)
class Chunk:
    """One enumerated slice of a message with its CRC-32.

    ``crc`` defaults to the CRC-32 of the payload; pass the wire value
    explicitly when parsing received data and check ``intact``.
    """

    index: int
    payload: bytes
    crc: int = -1

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("chunk index must be non-negative")
        if self.crc == -1:
            object.__setattr__(self, "crc", zlib.crc32(self.payload))

    @property
    def intact(self) -> bool:
        return self.crc == zlib.crc32(self.payload)


@dataclass(frozen=True)
class ChainTag:
    """Order-sensitive accumulator over a chunk list's CRCs."""

    value: int


def split_chunks(message: bytes, chunk_size: int) -> list[Chunk]:
    """Slice a message into enumerated chunks; the last one may be short."""
    if chunk_size < 1:
        raise ValueError("chunk size must be positive")
    return [
        Chunk(i, message[start : start + chunk_size])
        for i, start in enumerate(range(0, len(message), chunk_size))
    ]


def join_chunks(chunks: Iterable[Chunk]) -> bytes:
    """Reassemble payloads in index order."""
    return b"".join(c.payload for c in sorted(chunks, key=lambda c: c.index))


def _gf32_mul(a: int, b: int) -> int:
    """Carry-less multiply of two 32-bit values mod the CRC-32 polynomial."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & 0x100000000:
            a ^= CRC32_POLY
    return result


CHAIN_BASE = 0x04C11DB7


def chain_crc(chunks: Sequence[Chunk]) -> ChainTag:
    """Combine chunk CRCs into one order-sensitive tag.

    c_0 = crc(chunk_0); c_i = c_{i-1} * B + crc(chunk_i) in GF(2^32),
    with the fixed base B = CHAIN_BASE. A chain of one chunk is that
    chunk's own CRC. Because GF(2^32) has no zero divisors, swapping two
    adjacent chunks with different CRCs always changes the tag; omissions
    change it up to a ~2^-32 polynomial coincidence.
    """
    if not chunks:
        raise ValueError("cannot chain an empty chunk list")
    value = chunks[0].crc
    for chunk in chunks[1:]:
        value = _gf32_mul(value, CHAIN_BASE) ^ chunk.crc
    return ChainTag(value)


def detect_omission(received: Iterable[Chunk], declared_count: int) -> list[int]:
    """Indices in 0..declared_count-1 absent from the received chunks."""
    if declared_count < 0:
        raise ValueError("declared count must be non-negative")
    seen: set[int] = set()
    for chunk in received:
        if chunk.index >= declared_count:
            raise ValueError(f"chunk index {chunk.index} beyond declared count {declared_count}")
        if chunk.index in seen:
            raise ValueError(f"duplicate chunk index {chunk.index}")
        seen.add(chunk.index)
    return [i for i in range(declared_count) if i not in seen]


_RECORD_HEAD = struct.Struct(">II")
_RECORD_CRC = struct.Struct(">I")


def write_chunks(chunks: Iterable[Chunk]) -> bytes:
    """Length-prefixed binary records: index, length, payload, CRC (big-endian)."""
    parts = []
    for c in chunks:
        parts.append(_RECORD_HEAD.pack(c.index, len(c.payload)))
        parts.append(c.payload)
        parts.append(_RECORD_CRC.pack(c.crc))
    return b"".join(parts)


def read_chunks(data: bytes) -> list[Chunk]:
    """Inverse of :func:`write_chunks`; keeps the stored CRC values."""
    chunks = []
    offset = 0
    while offset < len(data):
        if offset + _RECORD_HEAD.size > len(data):
            raise ValueError("truncated chunk record header")
        index, length = _RECORD_HEAD.unpack_from(data, offset)
        offset += _RECORD_HEAD.size
        if offset + length + _RECORD_CRC.size > len(data):
            raise ValueError("truncated chunk record payload")
        payload = data[offset : offset + length]
        offset += length
        (crc,) = _RECORD_CRC.unpack_from(data, offset)
        offset += _RECORD_CRC.size
        chunks.append(Chunk(index, payload, crc))
    return chunks


@dataclass(frozen=True)
class Open:
    name: str


@dataclass(frozen=True)
class Close:
    name: str


@dataclass(frozen=True)
class Text:
    content: str = ""


Token = Open | Close | Text


@dataclass(frozen=True)
class Edit:
    """One token edit: kind is 'substitute', 'insert' or 'delete'.

    ``position`` indexes the original stream (inserts go before it);
    ``token`` is the written token, None for deletions.
    """

    kind: str
    position: int
    token: Token | None = None


class UnrepairableStreamError(ValueError):
    """No well-formed stream is reachable within the edit budget."""

    def __init__(self, best_cost: int, max_edits: int):
        super().__init__(f"cheapest repair needs {best_cost} edits, budget is {max_edits}")
        self.best_cost = best_cost
        self.max_edits = max_edits


def is_well_formed(stream: Sequence[Token]) -> bool:
    """Every Open matched by a later Close of the same name, properly nested."""
    stack: list[str] = []
    for token in stream:
        if isinstance(token, Open):
            stack.append(token.name)
        elif isinstance(token, Close):
            if not stack or stack[-1] != token.name:
                return False
            stack.pop()
    return not stack


_KIND_NAMES = ("substitute", "insert", "delete")


def _decode_script(flat: tuple, names: list) -> tuple:
    """Rebuild Edit objects from the search's flat (rank, pos, rank) triples."""
    num = len(names)
    edits = []
    for i in range(0, len(flat), 3):
        rank, pos, tok = flat[i], flat[i + 1], flat[i + 2]
        kind = _KIND_NAMES[rank]
        if kind == "insert":
            pos = -pos
        token: Token | None
        if tok >= 2 * num:
            token = None
        elif tok >= num:
            token = Close(names[tok - num])
        else:
            token = Open(names[tok])
        edits.append(Edit(kind, pos, token))
    return tuple(edits)


def repair_tags(
    stream: Sequence[Token],
    alphabet: Iterable[str],
    max_edits: int,
    max_depth: int | None = None,
) -> tuple[tuple, tuple, int]:
    """Cheapest token-edit repair making the stream well-formed.

    Returns (repaired stream, edit script, cost). Edits are insertion or
    deletion of Open/Close tokens and substitution of one Open/Close by
    another; Text tokens are never touched. Minimal-cost ties are broken
    by preferring substitution over insertion over deletion, then by edit
    position (earliest for substitutions and deletions, latest for
    insertions). Raises :class:`UnrepairableStreamError` (with the best
    cost found) when no repair fits the budget.
    """
    if max_edits < 0:
        raise ValueError("max_edits must be non-negative")
    tokens = tuple(stream)
    names = sorted(set(alphabet))
    if not names:
        raise ValueError("alphabet must not be empty")
    for token in tokens:
        if isinstance(token, (Open, Close)) and token.name not in names:
            raise ValueError(f"token name {token.name!r} not in the declared alphabet")
    if is_well_formed(tokens):
        return tokens, (), 0
    n = len(tokens)
    if max_depth is None:
        max_depth = n + max_edits + 1

    # Search encoding, chosen for speed: token kinds 0=open/1=close/2=text
    # with a name index, stacks as base-(num+1) integers (top = low digit),
    # edits as (kind rank, position, token rank) int triples that double as
    # the tie-break key, scripts as flat concatenations of those triples.
    num = len(names)
    name_index = {name: i for i, name in enumerate(names)}
    base = num + 1
    enc = []
    for token in tokens:
        if isinstance(token, Open):
            enc.append((0, name_index[token.name]))
        elif isinstance(token, Close):
            enc.append((1, name_index[token.name]))
        else:
            enc.append((2, -1))
    # suffix counts of open/close tokens, for the A* lower bounds
    opens_rem = [0] * (n + 1)
    closes_rem = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        opens_rem[i] = opens_rem[i + 1] + (enc[i][0] == 0)
        closes_rem[i] = closes_rem[i + 1] + (enc[i][0] == 1)

    # A* over (position, stack) states with priority (cost + bound, script
    # key). The bound is the larger of: edits to fix the open/close balance
    # (a substitution moves it by 2, a delete or insert by 1) and inserts
    # forced when the stack outnumbers the remaining tokens. Both are
    # consistent, so the first settle of a state carries the minimal cost
    # and the tie-break-minimal script.
    def bound(pos: int, depth: int) -> int:
        balance = depth + opens_rem[pos] - closes_rem[pos]
        if balance < 0:
            balance = -balance
        h = (balance + 1) // 2
        slack = depth - opens_rem[pos] - closes_rem[pos]
        return h if h >= slack else slack

    # a concrete valid repair bounds the optimum from above: substitute
    # mismatched closes, delete excess ones, append closes for leftover
    # opens; pushes whose f-value exceeds it are pointless
    walk: list = []
    upper = 0
    for kind, name in enc:
        if kind == 0:
            walk.append(name)
        elif kind == 1:
            if not walk:
                upper += 1  # delete the stray close
            else:
                if walk[-1] != name:
                    upper += 1  # substitute to the matching close
                walk.pop()
    upper += len(walk)

    heap: list = [(bound(0, 0), (), 0, 0, 0, 0, 0, ())]
    settled: set = set()
    push = heapq.heappush
    pop = heapq.heappop
    counter = 1
    while heap:
        entry = pop(heap)
        cost, pos, stack, depth, script = entry[3], entry[4], entry[5], entry[6], entry[7]
        state = stack * (n + 2) + pos
        if state in settled:
            continue
        settled.add(state)

        if pos == n and stack == 0:
            if cost > max_edits:
                raise UnrepairableStreamError(cost, max_edits)
            edits = _decode_script(script, names)
            return apply_edit_script(tokens, edits), edits, cost

        key = entry[1]
        top = stack % base - 1  # -1 when empty
        # (edit triple or 0 for keeps, next pos, next stack, next depth)
        moves: list = []
        depth_ok = depth < max_depth
        if pos < n:
            kind, name = enc[pos]
            if kind == 2:
                moves.append((0, pos + 1, stack, depth))
            else:
                if kind == 0:
                    if depth_ok:
                        moves.append((0, pos + 1, stack * base + name + 1, depth + 1))
                elif top == name:
                    moves.append((0, pos + 1, stack // base, depth - 1))
                if depth_ok:
                    for c in range(num):
                        if kind != 0 or c != name:
                            moves.append(((0, pos, c), pos + 1, stack * base + c + 1, depth + 1))
                if top >= 0 and (kind != 1 or top != name):
                    moves.append(((0, pos, num + top), pos + 1, stack // base, depth - 1))
                moves.append(((2, pos, 2 * num), pos + 1, stack, depth))
            if depth_ok:
                for c in range(num):
                    moves.append(((1, -pos, c), pos, stack * base + c + 1, depth + 1))
        if top >= 0:
            moves.append(((1, -pos, num + top), pos, stack // base, depth - 1))

        for edit_key, npos, nstack, ndepth in moves:
            if nstack * (n + 2) + npos in settled:
                continue
            ncost = cost if edit_key == 0 else cost + 1
            f = ncost + bound(npos, ndepth)
            if f > upper:
                continue
            if edit_key == 0:
                push(heap, (f, key, counter, ncost, npos, nstack, ndepth, script))
            else:
                push(
                    heap,
                    (f, key + edit_key, counter, ncost, npos, nstack, ndepth, script + edit_key),
                )
            counter += 1

    raise UnrepairableStreamError(n + 1, max_edits)  # pragma: no cover - goal always reachable


def apply_edit_script(stream: Sequence[Token], script: Sequence[Edit]) -> tuple:
    """Apply a script produced by :func:`repair_tags` to the original stream."""
    out: list[Token] = []
    edits = list(script)
    e = 0
    for pos, token in enumerate(list(stream) + [None]):
        while e < len(edits) and edits[e].position == pos and edits[e].kind == "insert":
            out.append(edits[e].token)
            e += 1
        if token is None:
            break
        if e < len(edits) and edits[e].position == pos and edits[e].kind != "insert":
            edit = edits[e]
            e += 1
            if edit.kind == "substitute":
                out.append(edit.token)
            # deletions emit nothing
        else:
            out.append(token)
    if e != len(edits):
        raise ValueError("edit script does not fit the stream")
    return tuple(out)


def parse_tag_stream(text: str) -> tuple:
    """Line format: 'open NAME' / 'close NAME' / 'text [content]'."""
    tokens: list[Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        if word == "open" and rest:
            tokens.append(Open(rest.strip()))
        elif word == "close" and rest:
            tokens.append(Close(rest.strip()))
        elif word == "text":
            tokens.append(Text(rest))
        else:
            raise ValueError(f"line {lineno}: unrecognized token line {line!r}")
    return tuple(tokens)


def format_tag_stream(stream: Sequence[Token]) -> str:
    lines = []
    for token in stream:
        if isinstance(token, Open):
            lines.append(f"open {token.name}")
        elif isinstance(token, Close):
            lines.append(f"close {token.name}")
        else:
            lines.append(f"text {token.content}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")
