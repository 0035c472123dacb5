"""Independent reference implementations used to check production code.

These deliberately take different algorithmic routes than the library:
the repair-cost oracle pairs brackets over intervals (CKY style) instead
of searching the edit graph, and the exhaustive oracle literally tries
every edit sequence of increasing cost.
"""

from functools import lru_cache

from chansim.framing import Close, Open, Text, is_well_formed

_TEXT = -1


def _encode(stream, names):
    """Tokens as ints: Open(name_i) -> i, Close(name_i) -> num + i, Text -> -1."""
    index = {name: i for i, name in enumerate(names)}
    num = len(names)
    out = []
    for tok in stream:
        if isinstance(tok, Open):
            out.append(index[tok.name])
        elif isinstance(tok, Close):
            out.append(num + index[tok.name])
        else:
            out.append(_TEXT)
    return tuple(out)


def make_interval_cost_oracle(names):
    """Minimum repair cost via interval dynamic programming.

    cost(seg): the head token is either deleted, or acts (possibly via
    substitution) as the opener of a pair whose closer is an existing
    token or an inserted one; Text tokens are transparent. The cache is
    keyed by token content, so it is shared across calls.
    """
    names = tuple(sorted(names))
    num = len(names)

    @lru_cache(maxsize=None)
    def cost(seg):
        if not seg:
            return 0
        head = seg[0]
        if head == _TEXT:
            return cost(seg[1:])
        best = 1 + cost(seg[1:])
        length = len(seg)
        for n in range(num):
            open_cost = 0 if head == n else 1
            if open_cost >= best:
                continue
            closer = num + n
            for k in range(1, length):
                tk = seg[k]
                if tk == _TEXT:
                    continue
                total = open_cost + (0 if tk == closer else 1) + cost(seg[1:k]) + cost(seg[k + 1 :])
                if total < best:
                    best = total
            for m in range(1, length + 1):
                total = open_cost + 1 + cost(seg[1:m]) + cost(seg[m:])
                if total < best:
                    best = total
        return best

    return lambda stream: cost(_encode(stream, names))


def _single_edits(stream, tokens):
    """All streams one token edit away (Text tokens untouched)."""
    stream = tuple(stream)
    for i, tok in enumerate(stream):
        if isinstance(tok, Text):
            continue
        yield stream[:i] + stream[i + 1 :]
        for replacement in tokens:
            if replacement != tok:
                yield stream[:i] + (replacement,) + stream[i + 1 :]
    for i in range(len(stream) + 1):
        for inserted in tokens:
            yield stream[:i] + (inserted,) + stream[i:]


def exhaustive_repair_cost(stream, names, cost_cap=6):
    """Smallest number of edits to a well-formed stream, by brute force.

    Explores every edit sequence outcome of cost 0, 1, 2, ... (breadth
    first over streams, deduplicated) up to ``cost_cap``.
    """
    tokens = tuple(Open(n) for n in sorted(names)) + tuple(Close(n) for n in sorted(names))
    stream = tuple(stream)
    if is_well_formed(stream):
        return 0
    seen = {stream}
    frontier = [stream]
    for budget in range(1, cost_cap + 1):
        nxt = []
        for s in frontier:
            for t in _single_edits(s, tokens):
                if t in seen:
                    continue
                if is_well_formed(t):
                    return budget
                seen.add(t)
                nxt.append(t)
        frontier = nxt
    return None
