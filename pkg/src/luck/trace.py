"""Choice traces, rational probabilities, and replayable choice sources.

Every random decision a generator makes is recorded as a (index, arity)
pair; the product of 1/arity-weighted branch probabilities is carried as
an exact Fraction.  A recorded trace doubles as a script: replaying it
through ReplaySource reproduces the identical run, and the enumeration
source drives systematic exploration of every trace prefix.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .predsem import EvalTimeout


@dataclass(frozen=True)
class Choice:
    """One random decision: which of `arity` branches was taken."""

    index: int
    arity: int

    def __str__(self) -> str:
        return f"({self.index},{self.arity})"


def format_trace(seed: Optional[int], choices: list[Choice], q: Fraction,
                 result: Optional[str] = None) -> str:
    body = "[" + ",".join(str(c) for c in choices) + "]"
    parts = []
    if seed is not None:
        parts.append(f"seed={seed}")
    parts.append(f"choices={body}")
    parts.append(f"q={q.numerator}/{q.denominator}")
    if result is not None:
        parts.append(f"result={result}")
    return " ".join(parts)


_TRACE_RE = re.compile(
    r"(?:seed=(\d+)\s+)?choices=\[([^\]]*)\]\s+q=(-?\d+)/(\d+)"
    r"(?:\s+result=(.+))?$")


def parse_trace(line: str):
    """Parse a formatted trace line back into (seed, choices, q, result)."""
    m = _TRACE_RE.search(line.strip())
    if not m:
        raise ValueError(f"not a trace line: {line!r}")
    seed = int(m.group(1)) if m.group(1) else None
    choices = []
    body = m.group(2).strip()
    if body:
        for part in re.findall(r"\((-?\d+),(-?\d+)\)", body):
            choices.append(Choice(int(part[0]), int(part[1])))
    q = Fraction(int(m.group(3)), int(m.group(4)))
    return seed, choices, q, m.group(5)


def derive_seed(seed: int, index: int) -> int:
    """A well-mixed child seed for parallel or per-attempt streams."""
    x = (seed ^ (index * 0x9E3779B97F4A7C15)) & (2**64 - 1)
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & (2**64 - 1)
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & (2**64 - 1)
    return x ^ (x >> 31)


class ReplayExhausted(Exception):
    """The replay script ran out of recorded choices."""


class ReplayMismatch(Exception):
    """A replayed choice's arity differs from the recorded one."""


class RandomSource:
    """Draws from a seeded PRNG."""

    def __init__(self, seed: int) -> None:
        import random

        self.seed = seed
        self._rng = random.Random(seed)

    def pick(self, arity: int) -> int:
        return self._rng.randrange(arity)

    def pick_weighted(self, w_left: int, w_right: int) -> int:
        return 0 if self._rng.randrange(w_left + w_right) < w_left else 1


class ReplaySource:
    """Feeds back a recorded list of choices, checking arities."""

    def __init__(self, choices: list[Choice]) -> None:
        self._choices = list(choices)
        self._pos = 0

    def pick(self, arity: int) -> int:
        if self._pos >= len(self._choices):
            raise ReplayExhausted()
        c = self._choices[self._pos]
        self._pos += 1
        if c.arity != arity:
            raise ReplayMismatch(f"recorded arity {c.arity}, run wants {arity}")
        if not (0 <= c.index < arity):
            raise ReplayMismatch(f"index {c.index} out of range 0..{arity-1}")
        return c.index

    def pick_weighted(self, w_left: int, w_right: int) -> int:
        return self.pick(2)


class ScriptedSource:
    """Follows a fixed prefix, then always takes branch 0.

    Used by the exhaustive enumerator: the choices made after the prefix
    are visible on the context's trace, which tells the enumerator where
    the next unexplored sibling lies.
    """

    def __init__(self, prefix: list[Choice]) -> None:
        self._prefix = list(prefix)
        self._pos = 0

    def pick(self, arity: int) -> int:
        if self._pos < len(self._prefix):
            c = self._prefix[self._pos]
            self._pos += 1
            if c.arity != arity:
                raise ReplayMismatch(
                    f"scripted arity {c.arity}, run wants {arity}")
            return c.index
        return 0

    def pick_weighted(self, w_left: int, w_right: int) -> int:
        return self.pick(2)


class RunCtx:
    """Mutable state threaded through one generation attempt."""

    def __init__(self, source, fuel: int = 1_000_000,
                 local_backtracking: bool = True) -> None:
        self.source = source
        self.trace: list[Choice] = []
        self.q: Fraction = Fraction(1)
        self.fuel = fuel
        self.local_backtracking = local_backtracking
        self.local_backtracks = 0

    def tick(self) -> None:
        self.fuel -= 1
        if self.fuel < 0:
            raise EvalTimeout()

    def record(self, index: int, arity: int, q_factor: Fraction) -> None:
        self.trace.append(Choice(index, arity))
        self.q *= q_factor

    def pick(self, arity: int) -> int:
        return self.source.pick(arity)

    def pick_weighted(self, w_left: int, w_right: int) -> int:
        return self.source.pick_weighted(w_left, w_right)

    def mark(self):
        """A rollback point: (trace length, probability so far)."""
        return len(self.trace), self.q

    def rollback(self, mark) -> None:
        length, q = mark
        del self.trace[length:]
        self.q = q


def enumerate_traces(run):
    """Systematically explore every choice sequence of a randomized run.

    `run(source)` must execute one attempt drawing from `source` and return
    a pair (trace, payload), where the trace lists every recorded choice.
    Yields (trace, payload) for each distinct complete sequence, depth-first.
    The choice tree must be finite.
    """
    stack: list[list[Choice]] = [[]]
    while stack:
        prefix = stack.pop()
        trace, payload = run(ScriptedSource(prefix))
        yield trace, payload
        for i in range(len(trace) - 1, len(prefix) - 1, -1):
            c = trace[i]
            for idx in range(c.arity - 1, c.index, -1):
                stack.append(list(trace[:i]) + [Choice(idx, c.arity)])
