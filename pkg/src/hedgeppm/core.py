"""Symbol interning and token stream ingestion.

Tokens are opaque non-empty strings. Each distinct token is assigned a dense
integer id in first-seen order; ids double as the deterministic tie-break
order used by every predictor downstream (smaller id = seen earlier).
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

SymbolId = int

#: Prediction emitted when a model has nothing to go on; always scores loss 1.
NO_PREDICTION: SymbolId = -1


class ConfigError(ValueError):
    """Invalid parameter value or malformed configuration input."""


class StreamError(ValueError):
    """Malformed record in an input stream; the message names the line."""


@dataclass
class Alphabet:
    """Bijection between registered tokens and dense ids 0..n-1."""

    _ids: dict[str, SymbolId] = field(default_factory=dict)
    _tokens: list[str] = field(default_factory=list)

    def intern(self, token: str) -> SymbolId:
        """Return the id for ``token``, assigning the next dense id if new."""
        if not token:
            raise ConfigError("cannot intern an empty token")
        sid = self._ids.get(token)
        if sid is None:
            sid = len(self._tokens)
            self._ids[token] = sid
            self._tokens.append(token)
        return sid

    def id_of(self, token: str) -> Optional[SymbolId]:
        """Id of a registered token, or None if never seen."""
        return self._ids.get(token)

    def token(self, sid: SymbolId) -> str:
        if not 0 <= sid < len(self._tokens):
            raise KeyError(f"unknown symbol id {sid}")
        return self._tokens[sid]

    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __len__(self) -> int:
        return len(self._tokens)


@dataclass
class SequenceStream:
    """Ordered source of tokens; ``length`` is known for in-memory sources."""

    source: Iterable[str]
    length: Optional[int] = None

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "SequenceStream":
        toks = list(tokens)
        return cls(toks, len(toks))

    def __iter__(self) -> Iterator[str]:
        return iter(self.source)


def open_stream(path: str, fmt: str = "lines") -> SequenceStream:
    """Open a token stream from ``path`` ("-" for stdin).

    Formats:
      * ``lines``        one token per line; the newline is the separator
      * ``csv:<col>``    1-based column of a CSV file; the header row is skipped
      * ``jsonl:<field>``named field of one JSON object per line

    Raises OSError if the source cannot be opened and StreamError (naming the
    offending line) for malformed records while iterating.
    """
    kind, _, arg = fmt.partition(":")
    if kind == "lines":
        if arg:
            raise ConfigError("format 'lines' takes no argument")
        reader = _read_lines
    elif kind == "csv":
        if not arg.isdigit() or int(arg) < 1:
            raise ConfigError(f"format 'csv:<col>' needs a 1-based column, got {fmt!r}")
        reader = lambda f: _read_csv(f, int(arg))  # noqa: E731
    elif kind == "jsonl":
        if not arg:
            raise ConfigError(f"format 'jsonl:<field>' needs a field name, got {fmt!r}")
        reader = lambda f: _read_jsonl(f, arg)  # noqa: E731
    else:
        raise ConfigError(f"unknown stream format {fmt!r}")

    if path == "-":
        return SequenceStream(reader(sys.stdin))
    handle = open(path, "r", encoding="utf-8", newline="")
    return SequenceStream(_closing(reader(handle), handle))


def _closing(it: Iterator[str], handle) -> Iterator[str]:
    try:
        yield from it
    finally:
        handle.close()


def _read_lines(f) -> Iterator[str]:
    for lineno, line in enumerate(f, start=1):
        token = line.rstrip("\r\n")
        if not token:
            raise StreamError(f"line {lineno}: empty token")
        yield token


def _read_csv(f, column: int) -> Iterator[str]:
    reader = csv.reader(f)
    header = next(reader, None)
    if header is None:
        return
    for row in reader:
        lineno = reader.line_num
        if len(row) < column:
            raise StreamError(f"line {lineno}: expected at least {column} columns, got {len(row)}")
        token = row[column - 1]
        if not token:
            raise StreamError(f"line {lineno}: empty token in column {column}")
        yield token


def _read_jsonl(f, fieldname: str) -> Iterator[str]:
    for lineno, line in enumerate(f, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict) or fieldname not in record:
            raise StreamError(f"line {lineno}: missing field {fieldname!r}")
        token = str(record[fieldname])
        if not token:
            raise StreamError(f"line {lineno}: empty token in field {fieldname!r}")
        yield token
