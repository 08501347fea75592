"""Domain types: phones, sememes, lexicon entries, utterances and the dictionary.

Phones and sememes are plain strings, validated on construction of the
containers that hold them.  A lexicon entry is identified by its canonical id,
``phones joined by '.' | sorted sememes joined by ','``.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

Phone = str
Sememe = str

# '.', '|' and ',' are separators inside canonical ids; forbidding them in
# phone tokens keeps the id injective.
_PHONE_RE = re.compile(r"^[^\s.|,]+$")
_SEMEME_RE = re.compile(r"^[A-Z0-9_]+$")


class LexiconError(ValueError):
    """Raised for malformed phones, sememes, entries or lexicon files."""


def check_phone(symbol: str) -> Phone:
    if not isinstance(symbol, str) or not _PHONE_RE.match(symbol) or not symbol.isprintable():
        raise LexiconError(f"invalid phone token {symbol!r}")
    return symbol


def check_sememe(symbol: str) -> Sememe:
    if not isinstance(symbol, str) or not _SEMEME_RE.match(symbol):
        raise LexiconError(f"invalid sememe {symbol!r}")
    return symbol


def canonical_id(phones: Iterable[Phone], sememes: Iterable[Sememe]) -> str:
    """Return ``"p.h.o.n.e.s|SEM1,SEM2"`` with sememes sorted."""
    return ".".join(phones) + "|" + ",".join(sorted(sememes))


def split_id(entry_id: str) -> tuple[tuple[Phone, ...], frozenset[Sememe]]:
    """Inverse of :func:`canonical_id`."""
    phones, sep, sems = entry_id.partition("|")
    if not sep or not phones:
        raise LexiconError(f"malformed canonical id {entry_id!r}")
    sememes = frozenset(sems.split(",")) if sems else frozenset()
    return tuple(phones.split(".")), sememes


@dataclass
class LexEntry:
    """A word: a phone sequence, a sememe set and usage counters."""

    phones: tuple[Phone, ...]
    sememes: frozenset[Sememe] = frozenset()
    use_count: int = 0
    window_use_count: int = 0
    created_at: int = 0

    def __post_init__(self) -> None:
        self.phones = tuple(check_phone(p) for p in self.phones)
        self.sememes = frozenset(check_sememe(s) for s in self.sememes)
        if not self.phones:
            raise LexiconError("a lexicon entry needs at least one phone")
        if min(self.use_count, self.window_use_count, self.created_at) < 0:
            raise LexiconError("entry counters must be non-negative")
        if self.window_use_count > self.use_count:
            raise LexiconError(
                f"window_use_count {self.window_use_count} exceeds use_count {self.use_count}"
            )

    @property
    def id(self) -> str:
        return canonical_id(self.phones, self.sememes)

    @classmethod
    def from_id(cls, entry_id: str, **counters: int) -> "LexEntry":
        phones, sememes = split_id(entry_id)
        return cls(phones, sememes, **counters)

    def __len__(self) -> int:
        return len(self.phones)


@dataclass(frozen=True)
class Utterance:
    """An unsegmented phone sequence paired with an unordered sememe set."""

    phones: tuple[Phone, ...] = ()
    sememes: frozenset[Sememe] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "phones", tuple(check_phone(p) for p in self.phones))
        object.__setattr__(self, "sememes", frozenset(check_sememe(s) for s in self.sememes))

    @classmethod
    def parse(cls, phones: str, sememes: str = "") -> "Utterance":
        """Build from whitespace-separated strings, e.g. ``Utterance.parse("n i n a", "NINA")``."""
        return cls(tuple(phones.split()), frozenset(sememes.split()))

    def __len__(self) -> int:
        return len(self.phones)


@dataclass
class Dictionary:
    """The evolving lexicon.  Single writer; parsers work on :meth:`snapshot`."""

    entries: dict[str, LexEntry] = field(default_factory=dict)
    utterances_seen: int = 0
    maintenance_interval: int = 1000

    def __post_init__(self) -> None:
        if self.maintenance_interval < 1:
            raise LexiconError("maintenance_interval must be positive")
        self.version = 0
        self._snapshot = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entry_id: object) -> bool:
        return entry_id in self.entries

    def __iter__(self) -> Iterator[LexEntry]:
        for key in sorted(self.entries):
            yield self.entries[key]

    def __getitem__(self, entry_id: str) -> LexEntry:
        return self.entries[entry_id]

    def add(self, entry: LexEntry, gate_on: bool = True) -> bool:
        """Insert ``entry``; return False if the empty-semantics gate rejected it.

        Re-adding an existing id keeps the stored entry and its counters.
        """
        if gate_on and not entry.sememes:
            logger.debug("gate rejected %s", entry.id)
            return False
        key = entry.id
        if key not in self.entries:
            self.entries[key] = entry
            self.version += 1
        return True

    def remove(self, entry_id: str) -> LexEntry:
        self.version += 1
        return self.entries.pop(entry_id)

    def snapshot(self):
        """Immutable parse index of the current entries (cached per version)."""
        from .parser import LexiconIndex

        if self._snapshot is None or self._snapshot[0] != self.version:
            self._snapshot = (self.version, LexiconIndex(self.entries.values()))
        return self._snapshot[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dictionary):
            return NotImplemented
        return (
            self.entries == other.entries
            and self.utterances_seen == other.utterances_seen
        )

    # -- persistence -------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"#utterances_seen\t{self.utterances_seen}"]
        for e in self:
            lines.append(
                "\t".join(
                    [
                        ".".join(e.phones),
                        ",".join(sorted(e.sememes)),
                        str(e.use_count),
                        str(e.window_use_count),
                        str(e.created_at),
                    ]
                )
            )
        return "".join(line + "\n" for line in lines)

    def save(self, path: str | Path) -> None:
        """Write the lexicon TSV, one entry per line in canonical-id order."""
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(
        cls,
        text: str,
        gate_on: bool = False,
        maintenance_interval: int = 1000,
        utterances_seen: int = 0,
    ) -> "Dictionary":
        d = cls(maintenance_interval=maintenance_interval, utterances_seen=utterances_seen)
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.startswith("#utterances_seen\t"):
                try:
                    d.utterances_seen = int(line.split("\t")[1])
                except ValueError:
                    raise LexiconError(f"line {lineno}: bad utterances_seen header") from None
                continue
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise LexiconError(f"line {lineno}: expected 5 tab-separated fields, got {len(fields)}")
            phones, sems, use, window, created = fields
            try:
                entry = LexEntry(
                    tuple(phones.split(".")) if phones else (),
                    frozenset(sems.split(",")) if sems else frozenset(),
                    int(use),
                    int(window),
                    int(created),
                )
            except (ValueError, LexiconError) as exc:
                raise LexiconError(f"line {lineno}: {exc}") from None
            if gate_on and not entry.sememes:
                raise LexiconError(f"line {lineno}: empty sememe set for {entry.id!r} with the gate on")
            if entry.id in d.entries:
                raise LexiconError(f"line {lineno}: duplicate canonical id {entry.id!r}")
            d.entries[entry.id] = entry
        return d

    @classmethod
    def load(cls, path: str | Path, gate_on: bool = False, **kwargs) -> "Dictionary":
        """Read a lexicon TSV written by :meth:`save`.

        A leading ``#utterances_seen<TAB>N`` comment restores the counter;
        other ``#`` lines and blank lines are skipped.
        """
        return cls.loads(Path(path).read_text(encoding="utf-8"), gate_on=gate_on, **kwargs)
