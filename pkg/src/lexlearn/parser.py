"""Minimum-cost cover parsing of an utterance by dictionary words.

A parse places dictionary entries at offsets of the utterance.  Placements
may overlap and may disagree with the utterance phones (substitution
mismatches).  Its cost is

    w_unparsed * |positions covered by no placement|
  + w_mismatch * (mismatches summed over placements)
  + w_missing_sem * |utterance sememes covered by no placement|
  + w_extra_sem * (sum over placements of sememes not in the utterance)
  + w_word * (number of placements)

:func:`best_parse` minimises it exactly with a layered dynamic program over
``(offset, candidate index, coverage frontier, covered-sememe mask)`` and
falls back to a beam over the same states for long utterances or large
sememe sets.  :func:`brute_force_parse` is an independent exhaustive
branch-and-bound search used as a test oracle.

Ties are broken by fewer placements, then by the lexicographically smaller
list of ``(offset, entry_id)`` pairs, so every result is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import LexEntry, Phone, Sememe, Utterance

__all__ = [
    "CostWeights",
    "SearchLimits",
    "Placement",
    "Parse",
    "LexiconIndex",
    "InstanceTooLarge",
    "parse_cost",
    "best_parse",
    "brute_force_parse",
    "segment_phones",
]


def _frac(x) -> Fraction:
    # str() round-trips floats like 0.01 to their decimal value, not the binary one
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class CostWeights:
    w_unparsed: float = 1.0
    w_mismatch: float = 1.0
    w_missing_sem: float = 1.0
    w_extra_sem: float = 1.0
    w_word: float = 0.01

    def __post_init__(self) -> None:
        vals = self.as_fractions()
        if min(vals) < 0:
            raise ValueError("cost weights must be non-negative")
        if vals[4] >= min(vals[0], vals[1]):
            raise ValueError("w_word must be below both w_unparsed and w_mismatch")

    def as_fractions(self) -> tuple[Fraction, ...]:
        return tuple(
            _frac(w)
            for w in (self.w_unparsed, self.w_mismatch, self.w_missing_sem, self.w_extra_sem, self.w_word)
        )

    def scaled(self) -> tuple[int, tuple[int, int, int, int, int]]:
        """Common denominator and the weights as integers over it."""
        fr = self.as_fractions()
        scale = math.lcm(*(f.denominator for f in fr))
        return scale, tuple(int(f * scale) for f in fr)

    def phones_only(self) -> "CostWeights":
        return replace(self, w_missing_sem=0.0, w_extra_sem=0.0)


@dataclass(frozen=True)
class SearchLimits:
    exact_sememe_max: int = 12
    exact_length_max: int = 64
    beam_width: int = 64

    def __post_init__(self) -> None:
        if min(self.exact_sememe_max, self.exact_length_max, self.beam_width) < 1:
            raise ValueError("search limits must be >= 1")


@dataclass(frozen=True, order=True)
class Placement:
    offset: int
    entry_id: str
    length: int = field(compare=False)
    mismatch_positions: frozenset[int] = field(default=frozenset(), compare=False)

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclass(frozen=True)
class Parse:
    utterance: Utterance
    placements: tuple[Placement, ...]
    unparsed_positions: frozenset[int]
    mismatched_count: int
    covered_sememes: frozenset[Sememe]
    missing_sememes: frozenset[Sememe]
    extra_sememe_count: int
    cost: Fraction

    @property
    def used_ids(self) -> list[str]:
        return [p.entry_id for p in self.placements]

    @property
    def is_perfect(self) -> bool:
        return not self.unparsed_positions and not self.mismatched_count and not self.missing_sememes

    def key(self) -> tuple:
        """Total order used for tie-breaking."""
        return (self.cost, len(self.placements), tuple((p.offset, p.entry_id) for p in self.placements))

    def unparsed_runs(self) -> list[tuple[int, int]]:
        """Maximal ``[start, end)`` runs of unparsed positions, left to right."""
        runs: list[tuple[int, int]] = []
        for pos in sorted(self.unparsed_positions):
            if runs and runs[-1][1] == pos:
                runs[-1] = (runs[-1][0], pos + 1)
            else:
                runs.append((pos, pos + 1))
        return runs


def parse_cost(
    unparsed: int,
    mismatched: int,
    missing_sem: int,
    extra_sem: int,
    n_placements: int,
    weights: CostWeights = CostWeights(),
) -> Fraction:
    wu, wm, wmiss, wx, ww = weights.as_fractions()
    return wu * unparsed + wm * mismatched + wmiss * missing_sem + wx * extra_sem + ww * n_placements


def recompute_cost(parse: Parse, weights: CostWeights = CostWeights()) -> Fraction:
    return parse_cost(
        len(parse.unparsed_positions),
        parse.mismatched_count,
        len(parse.missing_sememes),
        parse.extra_sememe_count,
        len(parse.placements),
        weights,
    )


class LexiconIndex:
    """Immutable, numpy-backed view of a set of entries for candidate search.

    Entries are grouped by length; each group stores integer-coded phones so
    that mismatch counts for every (window, entry) pair come from one
    vectorised comparison.
    """

    def __init__(self, entries: Iterable[LexEntry] = ()) -> None:
        items = sorted({e.id: (e.phones, e.sememes) for e in entries}.items())
        self.ids: tuple[str, ...] = tuple(k for k, _ in items)
        self.phones: tuple[tuple[Phone, ...], ...] = tuple(v[0] for _, v in items)
        self.sememes: tuple[frozenset[Sememe], ...] = tuple(v[1] for _, v in items)
        self.position = {k: i for i, k in enumerate(self.ids)}
        self._build()

    def _build(self) -> None:
        codes: dict[Phone, int] = {}
        for ph in self.phones:
            for p in ph:
                codes.setdefault(p, len(codes))
        self.codes = codes
        by_len: dict[int, list[int]] = {}
        for i, ph in enumerate(self.phones):
            by_len.setdefault(len(ph), []).append(i)
        self.groups = {
            L: (
                np.array([[codes[p] for p in self.phones[i]] for i in idx], dtype=np.int32),
                np.array(idx, dtype=np.int64),
            )
            for L, idx in sorted(by_len.items())
        }
        self.sem_size = np.array([len(s) for s in self.sememes], dtype=np.int64)
        sem_index: dict[Sememe, list[int]] = {}
        for i, sems in enumerate(self.sememes):
            for s in sems:
                sem_index.setdefault(s, []).append(i)
        self.sem_index = sem_index

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, entry_id: object) -> bool:
        return entry_id in self.position

    def entry(self, entry_id: str) -> tuple[tuple[Phone, ...], frozenset[Sememe]]:
        i = self.position[entry_id]
        return self.phones[i], self.sememes[i]

    def extended(self, extra: Iterable[LexEntry]) -> "LexiconIndex":
        """A new index holding these entries plus ``extra``."""
        merged = {k: LexEntry(p, s) for k, p, s in zip(self.ids, self.phones, self.sememes)}
        for e in extra:
            merged.setdefault(e.id, e)
        return LexiconIndex(merged.values())

    def __getstate__(self):
        return {"ids": self.ids, "phones": self.phones, "sememes": self.sememes}

    def __setstate__(self, state) -> None:
        self.ids, self.phones, self.sememes = state["ids"], state["phones"], state["sememes"]
        self.position = {k: i for i, k in enumerate(self.ids)}
        self._build()


def _as_index(lexicon) -> LexiconIndex:
    if isinstance(lexicon, LexiconIndex):
        return lexicon
    if hasattr(lexicon, "snapshot"):
        return lexicon.snapshot()
    return LexiconIndex(lexicon)


@dataclass(frozen=True)
class _Cand:
    offset: int
    entry_id: str
    end: int
    mask: int
    cost: int  # scaled integer cost of the placement itself


def _candidates(
    index: LexiconIndex,
    utt: Utterance,
    sem_order: Sequence[Sememe],
    w: tuple[int, int, int, int, int],
    exclude: frozenset[str],
) -> list[list[_Cand]]:
    """Per-offset placements that can appear in an optimal parse.

    A placement whose own cost is at least the most it could ever save
    (all its positions and all its in-utterance sememes) is dropped: deleting
    it from any parse never raises the cost and removes one placement.
    """
    wu, wm, wmiss, wx, ww = w
    n = len(utt.phones)
    per_offset: list[list[_Cand]] = [[] for _ in range(n)]
    if n == 0 or len(index) == 0:
        return per_offset
    inter = np.zeros(len(index), dtype=np.int64)
    mask = np.zeros(len(index), dtype=np.int64)
    for bit, s in enumerate(sem_order):
        for i in index.sem_index.get(s, ()):
            inter[i] += 1
            mask[i] |= 1 << bit
    ucodes = np.array([index.codes.get(p, -1) for p in utt.phones], dtype=np.int32)
    for L, (codes, idx) in index.groups.items():
        if L > n:
            break
        windows = sliding_window_view(ucodes, L)
        mm = (windows[:, None, :] != codes[None, :, :]).sum(axis=2)
        s_in = inter[idx]
        own = ww + wm * mm + wx * (index.sem_size[idx] - s_in)[None, :]
        gain = wu * L + wmiss * s_in[None, :]
        for off, j in zip(*np.nonzero(own < gain)):
            e = int(idx[j])
            eid = index.ids[e]
            if eid in exclude:
                continue
            per_offset[int(off)].append(_Cand(int(off), eid, int(off) + L, int(mask[e]), int(own[off, j])))
    for cands in per_offset:
        cands.sort(key=lambda c: c.entry_id)
    return per_offset


def _build_parse(
    index: LexiconIndex,
    utt: Utterance,
    chosen: Iterable[tuple[int, str]],
    cost: Fraction,
) -> Parse:
    placements = []
    covered = [False] * len(utt.phones)
    sems: set[Sememe] = set()
    mismatched = 0
    extra = 0
    for off, eid in sorted(chosen):
        phones, esems = index.entry(eid)
        mm = frozenset(off + k for k, p in enumerate(phones) if utt.phones[off + k] != p)
        placements.append(Placement(off, eid, len(phones), mm))
        for k in range(off, off + len(phones)):
            covered[k] = True
        mismatched += len(mm)
        extra += len(esems - utt.sememes)
        sems |= esems
    covered_sems = frozenset(sems)
    return Parse(
        utterance=utt,
        placements=tuple(placements),
        unparsed_positions=frozenset(i for i, c in enumerate(covered) if not c),
        mismatched_count=mismatched,
        covered_sememes=covered_sems,
        missing_sememes=frozenset(utt.sememes - covered_sems),
        extra_sememe_count=extra,
        cost=cost,
    )


def best_parse(
    lexicon,
    utt: Utterance,
    weights: CostWeights = CostWeights(),
    limits: SearchLimits = SearchLimits(),
    exclude: Iterable[str] = (),
) -> Parse:
    """Minimum-cost cover of ``utt`` by entries of ``lexicon``.

    ``lexicon`` may be a :class:`LexiconIndex`, a ``Dictionary`` or an
    iterable of entries.  Entries whose ids are in ``exclude`` are ignored.
    Exact when the utterance is within ``limits``; otherwise a beam search
    whose cost is never below the optimum.
    """
    index = _as_index(lexicon)
    scale, w = weights.scaled()
    wu, _, wmiss, _, _ = w
    n = len(utt.phones)
    sem_order = sorted(utt.sememes)
    k_sem = len(sem_order)
    exact = k_sem <= limits.exact_sememe_max and n <= limits.exact_length_max
    cands = _candidates(index, utt, sem_order, w, frozenset(exclude))

    # state (frontier, mask) -> (cost, n_placements, placements); the frontier is
    # the largest placement end so far, clamped to at least the current offset
    layer: dict[tuple[int, int], tuple[int, int, tuple]] = {(0, 0): (0, 0, ())}
    for i in range(n):
        for c in cands[i]:
            nxt = dict(layer)
            for (r, m), (cost, cnt, pl) in layer.items():
                nm = m | c.mask
                if c.end <= r and nm == m:
                    continue  # covers nothing new: never optimal
                key = (max(r, c.end), nm)
                val = (cost + c.cost, cnt + 1, pl + ((i, c.entry_id),))
                old = nxt.get(key)
                if old is None or val < old:
                    nxt[key] = val
            layer = nxt if exact else _prune(nxt, limits.beam_width, i, wu, wmiss)
        advanced: dict[tuple[int, int], tuple[int, int, tuple]] = {}
        for (r, m), (cost, cnt, pl) in layer.items():
            key = (max(r, i + 1), m)
            val = (cost + (wu if r <= i else 0), cnt, pl)
            old = advanced.get(key)
            if old is None or val < old:
                advanced[key] = val
        layer = advanced if exact else _prune(advanced, limits.beam_width, i + 1, wu, wmiss)

    best = None
    for (_, m), (cost, cnt, pl) in layer.items():
        val = (cost + wmiss * (k_sem - bin(m).count("1")), cnt, pl)
        if best is None or val < best:
            best = val
    total, _, chosen = best
    return _build_parse(index, utt, chosen, Fraction(total, scale))


def _prune(layer: dict, width: int, pos: int, wu: int, wmiss: int) -> dict:
    if len(layer) <= width:
        return layer
    # credit coverage already paid for beyond the current offset
    def score(item):
        (r, m), (cost, cnt, pl) = item
        return (cost - wu * max(0, r - pos) - wmiss * bin(m).count("1"), cnt, pl)

    return dict(sorted(layer.items(), key=score)[:width])


class InstanceTooLarge(RuntimeError):
    """The exhaustive oracle would visit more nodes than its guard allows."""


def brute_force_parse(
    lexicon,
    utt: Utterance,
    weights: CostWeights = CostWeights(),
    max_placements: int | None = None,
    max_nodes: int = 10**7,
) -> Parse:
    """Globally optimal parse by exhaustive search over placement sets.

    Every (entry, offset) pair that fits inside the utterance is considered,
    with no cost-based filtering.  Only sets are enumerated, since repeating
    an identical placement adds cost and changes nothing else.  Branches are
    cut only when a sound lower bound (cost of placements so far plus the
    positions and sememes that no remaining pair can cover) already exceeds
    the incumbent.  ``max_placements`` caps set size (default: unbounded);
    more than ``max_nodes`` search nodes raises :class:`InstanceTooLarge`.
    """
    index = _as_index(lexicon)
    n = len(utt.phones)
    wu, wm, wmiss, wx, ww = weights.as_fractions()
    pairs = []
    for eid in index.ids:
        phones, sems = index.entry(eid)
        for off in range(0, n - len(phones) + 1):
            mm = sum(1 for k, p in enumerate(phones) if utt.phones[off + k] != p)
            own = ww + wm * mm + wx * len(sems - utt.sememes)
            pairs.append((off, eid, set(range(off, off + len(phones))), sems & utt.sememes, own))
    pairs.sort(key=lambda t: (t[0], t[1]))
    cap = len(pairs) if max_placements is None else max_placements

    suffix_pos: list[set[int]] = [set() for _ in range(len(pairs) + 1)]
    suffix_sem: list[set[Sememe]] = [set() for _ in range(len(pairs) + 1)]
    for t in range(len(pairs) - 1, -1, -1):
        suffix_pos[t] = suffix_pos[t + 1] | pairs[t][2]
        suffix_sem[t] = suffix_sem[t + 1] | pairs[t][3]

    all_pos = set(range(n))
    best: list = [None]
    nodes = [0]

    def full_key(chosen, own_total, pos, sems):
        cost = own_total + wu * len(all_pos - pos) + wmiss * len(utt.sememes - sems)
        return (cost, len(chosen), tuple(chosen))

    def visit(t, chosen, own_total, pos, sems):
        nodes[0] += 1
        if nodes[0] > max_nodes:
            raise InstanceTooLarge(f"more than {max_nodes} search nodes")
        key = full_key(chosen, own_total, pos, sems)
        if best[0] is None or key < best[0]:
            best[0] = key
        if t == len(pairs) or len(chosen) >= cap:
            return
        bound = (
            own_total
            + wu * len(all_pos - pos - suffix_pos[t])
            + wmiss * len(utt.sememes - sems - suffix_sem[t])
        )
        if (bound, len(chosen)) > best[0][:2]:
            return
        for u in range(t, len(pairs)):
            off, eid, span, s_in, own = pairs[u]
            chosen.append((off, eid))
            visit(u + 1, chosen, own_total + own, pos | span, sems | s_in)
            chosen.pop()

    visit(0, [], Fraction(0), set(), set())
    cost, _, chosen = best[0]
    return _build_parse(index, utt, chosen, cost)


def segment_phones(
    lexicon,
    phones: Sequence[Phone],
    weights: CostWeights = CostWeights(),
    limits: SearchLimits = SearchLimits(),
) -> list[tuple[str, int]]:
    """Segment a bare phone sequence; returns ``(entry_id, offset)`` in offset order."""
    parse = best_parse(lexicon, Utterance(tuple(phones)), weights.phones_only(), limits)
    return [(p.entry_id, p.offset) for p in parse.placements]
