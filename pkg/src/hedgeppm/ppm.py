"""Escape-blended conditional symbol distributions over trie contexts.

A context node predicts each continuation with (child count / node count) and
reserves the leftover mass, (node count - sum of child counts) / node count,
for falling back to the next shorter context. Blending accumulates the
per-order conditionals weighted by the product of all longer orders' fallback
masses. The root reserves nothing once a symbol has been seen (its children
always sum to its count), so every blend is a proper distribution.

Probabilities are floats by default; pass ``exact=True`` for Fraction
arithmetic when bit-exact golden comparisons matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import NO_PREDICTION, SymbolId
from .trie import ContextTrie, TrieNode


class UndefinedDistributionError(ValueError):
    """Asked for a distribution of a node or trie with no observations."""


@dataclass
class NodeDistribution:
    """Conditional distribution at one context node plus its fallback mass."""

    probs: dict[SymbolId, float | Fraction]
    escape: float | Fraction


@dataclass
class BlendedDistribution:
    """Full next-symbol distribution for one expert (context order ``order``)."""

    probs: dict[SymbolId, float | Fraction]
    order: int

    def total(self) -> float | Fraction:
        return sum(self.probs.values())


def node_distribution(node: TrieNode, exact: bool = False) -> NodeDistribution:
    """Per-child conditional probabilities and the escape mass of ``node``."""
    if node.count == 0:
        raise UndefinedDistributionError("node has no observations")
    count = node.count
    if exact:
        probs = {s: Fraction(c.count, count) for s, c in node.children.items()}
        escape = 1 - sum(probs.values())
    else:
        inv = 1.0 / count
        probs = {s: c.count * inv for s, c in node.children.items()}
        escape = (count - sum(c.count for c in node.children.values())) * inv
    return NodeDistribution(probs, escape)


def blend_for_context(
    trie: ContextTrie, context, order: int, exact: bool = False
) -> BlendedDistribution:
    """Blend the conditionals of ``context``'s suffixes, longest order first.

    Order j conditions on the last j symbols of ``context``. A context whose
    node is absent (or whose length exceeds the available history) contributes
    no mass and passes its full weight down to the next shorter order.
    """
    if trie.root.count == 0:
        raise UndefinedDistributionError("empty trie")
    ctx = list(context)
    probs: dict[SymbolId, float | Fraction] = {}
    carry = Fraction(1) if exact else 1.0
    for j in range(min(order, len(ctx)), -1, -1):
        node = trie.lookup(ctx[len(ctx) - j:])
        if node is None:
            continue
        dist = node_distribution(node, exact)
        for s, p in dist.probs.items():
            probs[s] = probs.get(s, 0) + carry * p
        carry = carry * dist.escape
        if not carry:
            break
    return BlendedDistribution(probs, order)


def blended_distribution(trie: ContextTrie, k: int, exact: bool = False) -> BlendedDistribution:
    """Expert distribution of order ``k`` at the trie's current context."""
    return blend_for_context(trie, trie.current_context(k), k, exact)


def all_order_distributions(
    trie: ContextTrie, max_order: int, exact: bool = False
) -> list[BlendedDistribution]:
    """Blends for every order 0..max_order in one shared pass.

    Builds each blend from the next lower one (blend_k = conditionals_k +
    escape_k * blend_{k-1}), so the chain of escape products is computed once
    instead of per order. Element k equals ``blended_distribution(trie, k)``.
    """
    if trie.root.count == 0:
        raise UndefinedDistributionError("empty trie")
    ctx = trie.current_context(max_order)
    root_dist = node_distribution(trie.root, exact)
    blends = [BlendedDistribution(dict(root_dist.probs), 0)]
    prev = root_dist.probs
    for j in range(1, max_order + 1):
        node = trie.lookup(ctx[len(ctx) - j:]) if j <= len(ctx) else None
        if node is None:
            cur = dict(prev)
        else:
            dist = node_distribution(node, exact)
            esc = dist.escape
            cur = {s: esc * p for s, p in prev.items()}
            for s, p in dist.probs.items():
                cur[s] = cur.get(s, 0) + p
        blends.append(BlendedDistribution(cur, j))
        prev = cur
    return blends


def argmax_symbol(probs: dict[SymbolId, float | Fraction]) -> SymbolId:
    """Highest-probability symbol; exact ties go to the smallest id."""
    if not probs:
        return NO_PREDICTION
    best_s = NO_PREDICTION
    best_p = None
    for s, p in probs.items():
        if best_p is None or p > best_p or (p == best_p and s < best_s):
            best_s, best_p = s, p
    return best_s


def expert_predict(trie: ContextTrie, k: int, exact: bool = False) -> SymbolId:
    """Argmax prediction of the order-``k`` expert (NO_PREDICTION when empty)."""
    if trie.root.count == 0:
        return NO_PREDICTION
    return argmax_symbol(blended_distribution(trie, k, exact).probs)
