"""Bounded-depth frequency trie over interned symbols.

Each ingested symbol bumps the terminal node of every window suffix ending at
it, so the count stored at a path equals the number of occurrences of that
path as a substring of the input. Paths are capped at ``max_context + 1``
symbols: up to ``max_context`` conditioning symbols plus the one predicted.
"""

from __future__ import annotations

from collections import deque

from .core import ConfigError, SymbolId


class TrieNode:
    __slots__ = ("count", "children")

    def __init__(self) -> None:
        self.count: int = 0
        self.children: dict[SymbolId, TrieNode] = {}


class ContextTrie:
    """Frequency trie shared by all context orders 0..max_context."""

    def __init__(self, max_context: int):
        if max_context < 0:
            raise ConfigError(f"max_context must be >= 0, got {max_context}")
        self.max_context = max_context
        self.root = TrieNode()
        # One more than the longest conditioning context: the deepest path is
        # max_context history symbols plus the newly observed one.
        self.window: deque[SymbolId] = deque(maxlen=max_context + 1)

    @property
    def size(self) -> int:
        """Number of symbols ingested so far."""
        return self.root.count

    def ingest(self, symbol: SymbolId) -> None:
        """Record one symbol: increment every window suffix ending at it."""
        self.window.append(symbol)
        self.root.count += 1
        syms = list(self.window)
        for start in range(len(syms)):
            node = self.root
            for s in syms[start:]:
                child = node.children.get(s)
                if child is None:
                    child = node.children[s] = TrieNode()
                node = child
            node.count += 1

    def lookup(self, context) -> TrieNode | None:
        """Node reached by walking ``context`` from the root, if present."""
        node = self.root
        for s in context:
            node = node.children.get(s)
            if node is None:
                return None
        return node

    def current_context(self, k: int) -> list[SymbolId]:
        """The min(k, n) most recently ingested symbols, oldest first."""
        if k > self.max_context:
            raise ConfigError(f"order {k} exceeds max_context {self.max_context}")
        syms = list(self.window)
        m = min(k, len(syms))
        return syms[len(syms) - m:]

    def snapshot(self) -> str:
        """Serialize as ``path<TAB>count`` lines, one node per line.

        Paths are comma-joined ids (the root is the empty path), emitted in
        lexicographic id-path order; output is bit-exact for golden tests.
        """
        lines: list[str] = []

        def visit(node: TrieNode, path: tuple[SymbolId, ...]) -> None:
            lines.append(f"{','.join(map(str, path))}\t{node.count}")
            for sid in sorted(node.children):
                visit(node.children[sid], path + (sid,))

        visit(self.root, ())
        return "\n".join(lines) + "\n"
