"""Seedable synthetic sequence generators for experiments.

Three source kinds share one sampling interface (``order``, ``alphabet``,
``next_distribution``): explicit fixed-order Markov chains, procedurally
seeded random chains whose rows are materialized lazily, and samplers trained
on an existing sequence via the shared trie/blending machinery.

All randomness flows through numpy's PCG64 generator seeded explicitly, so a
(source, seed, n) triple fully determines the output everywhere.
"""

from __future__ import annotations

import configparser
import os
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Alphabet, ConfigError
from .ppm import blend_for_context
from .trie import ContextTrie

ROW_TOLERANCE = 1e-9


class MarkovSource:
    """Fixed-order Markov chain defined by an explicit transition table.

    Rows must sum to 1 (within 1e-9; they are renormalized exactly). Contexts
    shorter than the order (the first draws of a stream) and contexts unknown
    to the table fall back to a uniform draw over the alphabet.
    """

    def __init__(self, table: dict):
        if not table:
            raise ConfigError("transition table is empty")
        orders = {len(ctx) for ctx in table}
        if len(orders) != 1:
            raise ConfigError(f"inconsistent context lengths in table: {sorted(orders)}")
        self.order = orders.pop()
        alphabet: list[str] = []
        seen = set()

        def register(token: str) -> None:
            if not token:
                raise ConfigError("empty token in transition table")
            if token not in seen:
                seen.add(token)
                alphabet.append(token)

        self.table: dict[tuple[str, ...], dict[str, float]] = {}
        for ctx, row in table.items():
            for t in ctx:
                register(t)
            if not row:
                raise ConfigError(f"context {ctx} has an empty row")
            total = 0.0
            for t, p in row.items():
                register(t)
                if p < 0:
                    raise ConfigError(f"negative probability for {ctx} -> {t}")
                total += p
            if abs(total - 1.0) > ROW_TOLERANCE:
                raise ConfigError(f"row for context {ctx} sums to {total}, expected 1")
            self.table[tuple(ctx)] = {t: p / total for t, p in row.items()}
        self.alphabet = alphabet
        self._cum_cache: dict[tuple[str, ...], tuple[list[str], np.ndarray]] = {}

    def next_distribution(self, context: Sequence[str]) -> dict[str, float]:
        ctx = tuple(context)[-self.order:] if self.order else ()
        if len(ctx) < self.order or ctx not in self.table:
            u = 1.0 / len(self.alphabet)
            return {t: u for t in self.alphabet}
        return self.table[ctx]


class RandomMarkovSource:
    """Random fixed-order chain with rows derived deterministically on demand.

    The row for each context is drawn from a Dirichlet(concentration)
    distribution seeded by (seed, context), so the full transition table never
    needs materializing; low concentration values give peaked, predictable
    rows. Identical (seed, order, alphabet, concentration) always yields the
    identical chain.
    """

    def __init__(self, order: int, alphabet: Sequence[str], seed: int, concentration: float = 0.35):
        if order < 0:
            raise ConfigError(f"order must be >= 0, got {order}")
        if seed < 0:
            raise ConfigError(f"seed must be >= 0, got {seed}")
        if concentration <= 0:
            raise ConfigError(f"concentration must be > 0, got {concentration}")
        alphabet = list(alphabet)
        if not alphabet or len(set(alphabet)) != len(alphabet) or not all(alphabet):
            raise ConfigError("alphabet must be distinct non-empty tokens")
        self.order = order
        self.alphabet = alphabet
        self.seed = seed
        self.concentration = concentration
        self._index = {t: i for i, t in enumerate(alphabet)}
        self._rows: dict[tuple[str, ...], dict[str, float]] = {}
        self._cum_cache: dict[tuple[str, ...], tuple[list[str], np.ndarray]] = {}

    def next_distribution(self, context: Sequence[str]) -> dict[str, float]:
        ctx = tuple(context)[-self.order:] if self.order else ()
        if len(ctx) < self.order or any(t not in self._index for t in ctx):
            u = 1.0 / len(self.alphabet)
            return {t: u for t in self.alphabet}
        row = self._rows.get(ctx)
        if row is None:
            entropy = [self.seed] + [self._index[t] for t in ctx]
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
            probs = rng.dirichlet(np.full(len(self.alphabet), self.concentration))
            row = self._rows[ctx] = dict(zip(self.alphabet, probs.tolist()))
        return row


class TrainedSampler:
    """Markov source whose rows are the blended distributions of a trained trie."""

    def __init__(self, trie: ContextTrie, alphabet: Alphabet, order: int):
        self.trie = trie
        self._alpha = alphabet
        self.order = order
        self.alphabet = alphabet.tokens()
        self._cum_cache: dict[tuple[str, ...], tuple[list[str], np.ndarray]] = {}

    def next_distribution(self, context: Sequence[str]) -> dict[str, float]:
        ctx = tuple(context)[-self.order:] if self.order else ()
        # Unknown tokens get an id no trie path contains, so the blend falls
        # back through shorter contexts exactly as it would online.
        ids = [self._alpha.id_of(t) if t in self._alpha else -2 for t in ctx]
        blend = blend_for_context(self.trie, ids, self.order)
        return {self._alpha.token(s): p for s, p in blend.probs.items()}


def explicit_markov(table: dict) -> MarkovSource:
    """Source sampling from an explicit, row-normalized transition table."""
    return MarkovSource(table)


def random_markov(order: int, alphabet: Sequence[str], seed: int,
                  concentration: float = 0.35) -> RandomMarkovSource:
    """Deterministic random chain of the given order over ``alphabet``."""
    return RandomMarkovSource(order, alphabet, seed, concentration)


def train_sampler(tokens: Sequence[str], order: int) -> TrainedSampler:
    """Fit a sampler to ``tokens``: trie counts plus escape blending as rows."""
    tokens = list(tokens)
    if len(tokens) <= order:
        raise ConfigError(f"need more than {order} symbols to train, got {len(tokens)}")
    alphabet = Alphabet()
    trie = ContextTrie(order)
    for t in tokens:
        trie.ingest(alphabet.intern(t))
    return TrainedSampler(trie, alphabet, order)


def _cum_row(source, context: tuple[str, ...]) -> tuple[list[str], np.ndarray]:
    ctx = tuple(context)[-source.order:] if source.order else ()
    cached = source._cum_cache.get(ctx)
    if cached is None:
        dist = source.next_distribution(ctx)
        tokens = list(dist)
        cum = np.cumsum(np.fromiter(dist.values(), dtype=float, count=len(dist)))
        cached = source._cum_cache[ctx] = (tokens, cum)
    return cached


def draw_next(source, context: Sequence[str], rng: np.random.Generator) -> str:
    """One next-symbol draw given ``context`` (inverse-CDF over the row)."""
    tokens, cum = _cum_row(source, tuple(context))
    i = int(np.searchsorted(cum, rng.random(), side="right"))
    return tokens[min(i, len(tokens) - 1)]


def sample(source, n: int, seed: int) -> list[str]:
    """Length-``n`` sequence from ``source``, fully determined by ``seed``."""
    if n < 0:
        raise ConfigError(f"sample length must be >= 0, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    hist: deque[str] = deque(maxlen=max(source.order, 1))
    out: list[str] = []
    for _ in range(n):
        tok = draw_next(source, tuple(hist), rng)
        out.append(tok)
        hist.append(tok)
    return out


def regime_switch(sources: Sequence, schedule: Sequence[tuple[int, int]], seed: int) -> list[str]:
    """Concatenate regime samples; the context window carries across switches."""
    if not schedule:
        raise ConfigError("schedule is empty")
    for idx, duration in schedule:
        if not 0 <= idx < len(sources):
            raise ConfigError(f"regime index {idx} out of range for {len(sources)} sources")
        if duration <= 0:
            raise ConfigError(f"regime duration must be positive, got {duration}")
    rng = np.random.Generator(np.random.PCG64(seed))
    hist: deque[str] = deque(maxlen=max(max(s.order for s in sources), 1))
    out: list[str] = []
    for idx, duration in schedule:
        src = sources[idx]
        for _ in range(duration):
            tok = draw_next(src, tuple(hist), rng)
            out.append(tok)
            hist.append(tok)
    return out


def load_transition_table(path: str) -> dict:
    """Parse a table file: per line, context tokens, next token, probability.

    ``#`` starts a comment; blank lines are skipped. Order-0 rows are lines
    with just a next token and a probability.
    """
    table: dict[tuple[str, ...], dict[str, float]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            body = raw.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) < 2:
                raise ConfigError(f"{path}:{lineno}: expected 'context... next prob'")
            try:
                prob = float(parts[-1])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad probability {parts[-1]!r}") from None
            ctx, nxt = tuple(parts[:-2]), parts[-2]
            row = table.setdefault(ctx, {})
            if nxt in row:
                raise ConfigError(f"{path}:{lineno}: duplicate entry for {ctx} -> {nxt}")
            row[nxt] = prob
    if not table:
        raise ConfigError(f"{path}: no table rows found")
    return table


@dataclass
class SourceSpec:
    """Parsed source description: a single chain or a schedule of regimes."""

    sources: list
    schedule: Optional[list[tuple[int, int]]] = None

    def total_length(self) -> Optional[int]:
        if self.schedule is None:
            return None
        return sum(d for _, d in self.schedule)

    def generate(self, length: Optional[int], seed: int) -> list[str]:
        """Realize one sequence; regime specs fix their own total length."""
        if self.schedule is not None:
            total = self.total_length()
            if length is not None and length != total:
                raise ConfigError(f"requested length {length} != schedule total {total}")
            return regime_switch(self.sources, self.schedule, seed)
        if length is None:
            raise ConfigError("length is required for a non-regime source")
        return sample(self.sources[0], length, seed)


def _build_chain(section, where: str, base_dir: str):
    kind = section.get("type", "").strip()
    if kind == "table":
        table_file = section.get("table-file", "").strip()
        if not table_file:
            raise ConfigError(f"{where}: 'table-file' is required for type=table")
        return explicit_markov(load_transition_table(os.path.join(base_dir, table_file)))
    if kind == "random":
        try:
            order = int(section.get("order", ""))
            seed = int(section.get("table-seed", ""))
        except ValueError:
            raise ConfigError(f"{where}: 'order' and 'table-seed' must be integers") from None
        alphabet = section.get("alphabet", "").split()
        concentration = float(section.get("concentration", "0.35"))
        return random_markov(order, alphabet, seed, concentration)
    raise ConfigError(f"{where}: unknown source type {kind!r}")


def load_source_spec(path: str) -> SourceSpec:
    """Read a ``[source]`` spec file (INI syntax; see README for the schema)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read source spec {path!r}")
    if "source" not in parser:
        raise ConfigError(f"{path}: missing [source] section")
    base_dir = os.path.dirname(os.path.abspath(path))
    main = parser["source"]
    if main.get("type", "").strip() != "regimes":
        return SourceSpec(sources=[_build_chain(main, f"{path} [source]", base_dir)])

    entries = main.get("schedule", "").split()
    if not entries:
        raise ConfigError(f"{path}: type=regimes needs a 'schedule'")
    names: list[str] = []
    schedule: list[tuple[int, int]] = []
    for entry in entries:
        name, _, dur = entry.partition(":")
        if not name or not dur.isdigit() or int(dur) < 1:
            raise ConfigError(f"{path}: bad schedule entry {entry!r}, expected NAME:STEPS")
        if name not in names:
            names.append(name)
        schedule.append((names.index(name), int(dur)))
    sources = []
    for name in names:
        section = f"chain {name}"
        if section not in parser:
            raise ConfigError(f"{path}: missing [{section}] for schedule entry {name!r}")
        sources.append(_build_chain(parser[section], f"{path} [{section}]", base_dir))
    return SourceSpec(sources=sources, schedule=schedule)
