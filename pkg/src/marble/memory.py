"""Shared and per-agent memory with a FIFO-bounded short-term segment.

Short-term memory holds at most `short_term_capacity` items; overflow demotes
the oldest item into the unbounded long-term segment instead of discarding it.
Retrieval ranks by query-token overlap with recency as the tiebreaker, via a
pluggable scorer so an embedding backend can replace token overlap later.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import UnknownAgentError

DEFAULT_SHORT_TERM_CAPACITY = 16

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


def overlap_score(query: str, item: "MemoryItem") -> float:
    """Count of distinct query tokens present in the item's text or tags."""
    item_tokens = tokenize(item.text) | {t.lower() for t in item.tags}
    return float(len(tokenize(query) & item_tokens))


@dataclass
class MemoryItem:
    index: int
    author: str
    text: str
    tags: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.text:
            raise ValueError("memory item text must be non-empty")


@dataclass
class _AgentMemory:
    short_term: list[MemoryItem] = field(default_factory=list)
    long_term: list[MemoryItem] = field(default_factory=list)


class MemoryStore:
    """One store per run: a shared segment plus per-agent short/long segments."""

    def __init__(
        self,
        agents: list[str],
        short_term_capacity: int = DEFAULT_SHORT_TERM_CAPACITY,
        scorer: Callable[[str, MemoryItem], float] = overlap_score,
    ):
        if short_term_capacity < 1:
            raise ValueError("short_term_capacity must be positive")
        self.short_term_capacity = short_term_capacity
        self.shared: list[MemoryItem] = []
        self.individual: dict[str, _AgentMemory] = {a: _AgentMemory() for a in agents}
        self._scorer = scorer
        self._counter = 0

    def _next_index(self) -> int:
        index = self._counter
        self._counter += 1
        return index

    def _agent(self, agent: str) -> _AgentMemory:
        try:
            return self.individual[agent]
        except KeyError:
            raise UnknownAgentError(agent) from None

    def remember(self, agent: Optional[str], text: str, segment: str = "short", tags=()) -> MemoryItem:
        """Append one item. segment is 'short', 'long', or 'shared'.

        Short-term overflow evicts the oldest short item into long_term.
        """
        item = MemoryItem(self._next_index(), agent or "shared", text, frozenset(tags))
        if segment == "shared":
            self.shared.append(item)
            return item
        bank = self._agent(agent)
        if segment == "long":
            bank.long_term.append(item)
        elif segment == "short":
            bank.short_term.append(item)
            while len(bank.short_term) > self.short_term_capacity:
                bank.long_term.append(bank.short_term.pop(0))
        else:
            raise ValueError(f"unknown memory segment {segment!r}")
        return item

    def retrieve(self, agent: str, query: str, k: int) -> list[MemoryItem]:
        """Up to k items from shared + the agent's own segments, best first.

        Never surfaces another agent's individual items.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        bank = self._agent(agent)
        pool = list(self.shared) + list(bank.short_term) + list(bank.long_term)
        ranked = sorted(pool, key=lambda it: (-self._scorer(query, it), -it.index))
        return ranked[:k]
