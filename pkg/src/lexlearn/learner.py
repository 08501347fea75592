"""Online lexicon acquisition by hard (best-parse) EM.

For each utterance the learner parses it with the current dictionary,
hypothesizes new words for the unparsed stretches and repaired variants of
mismatching words, reparses with those candidates added, and keeps the
candidates the reparse actually used if it covers the utterance well.
Every ``maintenance_interval`` utterances it drops words that were rarely
used and words that other words can reproduce exactly.
"""
from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TextIO

from .core import Dictionary, LexEntry, Phone, Sememe, Utterance, canonical_id, split_id
from .parser import CostWeights, Parse, SearchLimits, best_parse

logger = logging.getLogger(__name__)

GAP = "gap"
ADJUSTMENT = "adjustment"


@dataclass(frozen=True)
class TrainConfig:
    weights: CostWeights = CostWeights()
    limits: SearchLimits = SearchLimits()
    gate_on: bool = True
    max_unparsed: int = 0
    max_mismatch: int = 0
    require_all_sememes: bool = True
    maintenance_interval: int = 1000
    min_window_uses: int = 3
    min_age: int | None = None  # None: same as maintenance_interval
    epochs: int = 1
    seed: int = 0
    shuffle: bool = False
    max_extra_sem: int | None = 0
    fit_sememes: bool = True
    absorb_empty_gaps: bool = True

    def __post_init__(self) -> None:
        if self.maintenance_interval < 1:
            raise ValueError("maintenance_interval must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if min(self.max_unparsed, self.max_mismatch, self.min_window_uses) < 0:
            raise ValueError("thresholds must be non-negative")

    @property
    def effective_min_age(self) -> int:
        return self.maintenance_interval if self.min_age is None else self.min_age

    def accepts(self, parse: Parse) -> bool:
        return (
            len(parse.unparsed_positions) <= self.max_unparsed
            and parse.mismatched_count <= self.max_mismatch
            and not (self.require_all_sememes and parse.missing_sememes)
            and (self.max_extra_sem is None or parse.extra_sememe_count <= self.max_extra_sem)
        )


@dataclass(frozen=True, order=True)
class Hypothesis:
    phones: tuple[Phone, ...]
    sememes: frozenset[Sememe]
    origin: str

    @property
    def id(self) -> str:
        return canonical_id(self.phones, self.sememes)

    def entry(self, created_at: int = 0) -> LexEntry:
        return LexEntry(self.phones, self.sememes, created_at=created_at)


def _unique(hyps: Iterable[Hypothesis]) -> list[Hypothesis]:
    seen: dict[str, Hypothesis] = {}
    for h in sorted(hyps, key=lambda h: (h.id, h.origin)):
        seen.setdefault(h.id, h)
    return list(seen.values())


def hypothesize_gap_words(utt: Utterance, parse: Parse) -> list[Hypothesis]:
    """One new word per maximal unparsed run, carrying the uncovered sememes.

    With several runs each one gets the whole uncovered set; there is no
    way to tell which run carries which sememe.
    """
    runs = parse.unparsed_runs()
    return _unique(Hypothesis(utt.phones[a:b], parse.missing_sememes, GAP) for a, b in runs)


def hypothesize_adjustments(utt: Utterance, parse: Parse) -> list[Hypothesis]:
    """Repair each mismatching placement to fit the utterance.

    Mismatches at either edge are trimmed off; interior mismatches take the
    utterance phone.  Sememes are kept.
    """
    out = []
    for p in parse.placements:
        if not p.mismatch_positions:
            continue
        start, end = p.offset, p.end
        while start < end and start in p.mismatch_positions:
            start += 1
        while end > start and end - 1 in p.mismatch_positions:
            end -= 1
        if start < end:
            out.append(Hypothesis(utt.phones[start:end], split_id(p.entry_id)[1], ADJUSTMENT))
    return _unique(out)


def hypothesize_sememe_fits(utt: Utterance, parse: Parse) -> list[Hypothesis]:
    """Drop sememes absent from the utterance from each placed word."""
    out = []
    for p in parse.placements:
        phones, sems = split_id(p.entry_id)
        kept = sems & utt.sememes
        if kept and kept != sems:
            out.append(Hypothesis(phones, frozenset(kept), ADJUSTMENT))
    return _unique(out)


def hypothesize_absorptions(utt: Utterance, parse: Parse) -> list[Hypothesis]:
    """Stretch words over adjacent unparsed runs that carry no sememes.

    A run left over once every sememe is covered would otherwise become a
    semantically empty word; the neighbouring word extended over it keeps
    its own sememes (``dog`` + ``s`` gives ``dogs`` meaning DOG).
    """
    if parse.missing_sememes:
        return []
    out = []
    for a, b in parse.unparsed_runs():
        for p in parse.placements:
            sems = split_id(p.entry_id)[1]
            if p.end == a:
                out.append(Hypothesis(utt.phones[p.offset:b], sems, ADJUSTMENT))
            elif p.offset == b:
                out.append(Hypothesis(utt.phones[a:p.end], sems, ADJUSTMENT))
    return _unique(out)


def propose(utt: Utterance, parse: Parse, cfg: TrainConfig) -> list[Hypothesis]:
    hyps = hypothesize_gap_words(utt, parse) + hypothesize_adjustments(utt, parse)
    if cfg.fit_sememes:
        hyps += hypothesize_sememe_fits(utt, parse)
    if cfg.absorb_empty_gaps and cfg.gate_on:
        hyps += hypothesize_absorptions(utt, parse)
    return _unique(hyps)


@dataclass
class AcceptResult:
    reparse: Parse
    good: bool
    accepted: list[str] = field(default_factory=list)
    gate_rejected: list[str] = field(default_factory=list)


def accept_step(
    dictionary: Dictionary,
    utt: Utterance,
    hyps: Sequence[Hypothesis],
    cfg: TrainConfig,
    reparse: Parse | None = None,
) -> AcceptResult:
    """Reparse with the hypotheses added; commit the used ones if the parse is good.

    ``reparse`` may be supplied when there are no hypotheses and the first
    parse can be reused.  Counters of every dictionary word in a good parse
    go up by its number of placements.
    """
    index = dictionary.snapshot()
    if reparse is None:
        if hyps:
            index = index.extended(h.entry() for h in hyps)
        reparse = best_parse(index, utt, cfg.weights, cfg.limits)
    result = AcceptResult(reparse, cfg.accepts(reparse))
    if not result.good:
        return result
    by_id = {h.id: h for h in hyps}
    for eid in dict.fromkeys(reparse.used_ids):
        h = by_id.get(eid)
        if h is None:
            continue
        if dictionary.add(h.entry(created_at=dictionary.utterances_seen), cfg.gate_on):
            result.accepted.append(eid)
        else:
            result.gate_rejected.append(eid)
    for eid in reparse.used_ids:
        entry = dictionary.entries.get(eid)
        if entry is not None:
            entry.use_count += 1
            entry.window_use_count += 1
    return result


@dataclass
class MaintenanceResult:
    at: int
    removed_unused: list[str] = field(default_factory=list)
    removed_decomposable: list[str] = field(default_factory=list)


def is_decomposable(index, entry_id: str, cfg: TrainConfig, exclude: Iterable[str] = ()) -> bool:
    """Whether other words reproduce this entry's phones and sememes exactly."""
    phones, sems = split_id(entry_id)
    parse = best_parse(index, Utterance(phones, sems), cfg.weights, cfg.limits, exclude={entry_id, *exclude})
    return (
        len(parse.placements) >= 2
        and not parse.unparsed_positions
        and not parse.mismatched_count
        and parse.covered_sememes == sems
        and not parse.extra_sememe_count
    )


def maintain(dictionary: Dictionary, cfg: TrainConfig) -> MaintenanceResult:
    """Prune rarely-used words, then words decomposable into other words.

    Both passes run in canonical-id order and window counters are reset.
    """
    result = MaintenanceResult(dictionary.utterances_seen)
    min_age = cfg.effective_min_age
    for entry in list(dictionary):
        age = dictionary.utterances_seen - entry.created_at
        if entry.window_use_count < cfg.min_window_uses and age >= min_age:
            dictionary.remove(entry.id)
            result.removed_unused.append(entry.id)
    index = dictionary.snapshot()
    gone: set[str] = set()
    for eid in index.ids:
        if is_decomposable(index, eid, cfg, exclude=gone):
            gone.add(eid)
            result.removed_decomposable.append(eid)
    for eid in result.removed_decomposable:
        dictionary.remove(eid)
    for entry in dictionary.entries.values():
        entry.window_use_count = 0
    return result


@dataclass
class TraceRecord:
    index: int
    utterance: Utterance
    parse: Parse
    hypotheses: list[Hypothesis] = field(default_factory=list)
    reparse: Parse | None = None
    good: bool = False
    accepted: list[str] = field(default_factory=list)
    gate_rejected: list[str] = field(default_factory=list)
    maintenance: MaintenanceResult | None = None


def process_utterance(
    dictionary: Dictionary,
    utt: Utterance,
    cfg: TrainConfig,
    first_parse: Parse | None = None,
) -> TraceRecord:
    """Parse, hypothesize, reparse-and-accept, and maintain when due."""
    idx = dictionary.utterances_seen
    parse = first_parse or best_parse(dictionary.snapshot(), utt, cfg.weights, cfg.limits)
    hyps = propose(utt, parse, cfg)
    res = accept_step(dictionary, utt, hyps, cfg, reparse=None if hyps else parse)
    rec = TraceRecord(idx, utt, parse, hyps, res.reparse, res.good, res.accepted, res.gate_rejected)
    dictionary.utterances_seen += 1
    if dictionary.utterances_seen % cfg.maintenance_interval == 0:
        rec.maintenance = maintain(dictionary, cfg)
    return rec


@dataclass
class TrainingReport:
    utterances: int = 0
    good_parses: int = 0
    accepted: int = 0
    gate_rejections: int = 0
    pruned_unused: int = 0
    pruned_decomposable: int = 0
    never_used: int = 0
    final_size: int = 0
    entry_counts: list[tuple[int, int]] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [
            f"report\t-1\t{name}\t{getattr(self, name)}"
            for name in (
                "utterances",
                "good_parses",
                "accepted",
                "gate_rejections",
                "pruned_unused",
                "pruned_decomposable",
                "never_used",
                "final_size",
            )
        ]
        out += [f"report\t-1\tentries_at\t{seen}\t{size}" for seen, size in self.entry_counts]
        return out


def _prefetch(index, utts, cfg, jobs):
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda u: best_parse(index, u, cfg.weights, cfg.limits), utts))


def train(
    dictionary: Dictionary,
    corpus: Sequence[Utterance],
    cfg: TrainConfig = TrainConfig(),
    jobs: int = 1,
    on_record: Callable[[TraceRecord], None] | None = None,
) -> TrainingReport:
    """Run ``cfg.epochs`` passes over ``corpus``, then a final maintenance pass.

    With ``jobs > 1`` first parses are computed ahead, in parallel, against
    a shared snapshot and reused only while the dictionary is unchanged, so
    the result is identical to the sequential run.
    """
    dictionary.maintenance_interval = cfg.maintenance_interval
    report = TrainingReport()
    rng = random.Random(cfg.seed)
    window = max(1, jobs) * 4

    def account(rec: TraceRecord) -> None:
        report.utterances += 1
        report.good_parses += rec.good
        report.accepted += len(rec.accepted)
        report.gate_rejections += len(rec.gate_rejected)
        if rec.maintenance is not None:
            _account_maintenance(report, rec.maintenance, len(dictionary))
        if on_record is not None:
            on_record(rec)

    for epoch in range(cfg.epochs):
        order = list(corpus)
        if cfg.shuffle:
            rng.shuffle(order)
        logger.info("epoch %d: %d utterances, %d entries", epoch, len(order), len(dictionary))
        if jobs <= 1:
            for utt in order:
                account(process_utterance(dictionary, utt, cfg))
            continue
        for start in range(0, len(order), window):
            chunk = order[start:start + window]
            version = dictionary.version
            ahead = _prefetch(dictionary.snapshot(), chunk, cfg, jobs)
            for utt, parse in zip(chunk, ahead):
                fresh = parse if dictionary.version == version else None
                account(process_utterance(dictionary, utt, cfg, first_parse=fresh))

    # a pass right after a scheduled one would see all-zero window counters
    if dictionary.utterances_seen % cfg.maintenance_interval:
        final = maintain(dictionary, cfg)
        _account_maintenance(report, final, len(dictionary))
        if on_record is not None:
            on_record(TraceRecord(-1, Utterance(), best_parse((), Utterance()), maintenance=final))
    report.never_used = sum(1 for e in dictionary.entries.values() if e.use_count == 0)
    report.final_size = len(dictionary)
    return report


def _account_maintenance(report: TrainingReport, m: MaintenanceResult, size: int) -> None:
    report.pruned_unused += len(m.removed_unused)
    report.pruned_decomposable += len(m.removed_decomposable)
    report.entry_counts.append((m.at, size))


# -- trace log ---------------------------------------------------------------


def _fmt_parse(kind: str, idx: int, p: Parse) -> str:
    return "\t".join(
        [
            kind,
            str(idx),
            " ".join(f"{pl.offset}:{pl.entry_id}" for pl in p.placements),
            " ".join(map(str, sorted(p.unparsed_positions))),
            " ".join(str(i) for pl in p.placements for i in sorted(pl.mismatch_positions)),
            " ".join(sorted(p.missing_sememes)),
            str(p.cost),
        ]
    )


def trace_lines(rec: TraceRecord) -> list[str]:
    """Serialize a record as tab-separated ``kind, index, payload...`` lines."""
    i = rec.index
    lines = []
    if i >= 0:
        lines.append(f"utt\t{i}\t{' '.join(rec.utterance.phones)}\t{' '.join(sorted(rec.utterance.sememes))}")
        lines.append(_fmt_parse("parse", i, rec.parse))
        lines += [f"hyp\t{i}\t{h.origin}\t{h.id}" for h in rec.hypotheses]
        if rec.reparse is not None and rec.hypotheses:
            lines.append(_fmt_parse("reparse", i, rec.reparse))
        lines.append(f"good\t{i}\t{int(rec.good)}")
        lines += [f"accept\t{i}\t{eid}" for eid in rec.accepted]
        lines += [f"gate\t{i}\t{eid}" for eid in rec.gate_rejected]
    if rec.maintenance is not None:
        m = rec.maintenance
        lines += [f"prune\t{m.at}\tunused\t{eid}" for eid in m.removed_unused]
        lines += [f"prune\t{m.at}\tdecomposable\t{eid}" for eid in m.removed_decomposable]
    return lines


class TraceWriter:
    """Callback for :func:`train` that appends trace lines to a stream."""

    def __init__(self, stream: TextIO) -> None:
        self.stream = stream

    def __call__(self, rec: TraceRecord) -> None:
        for line in trace_lines(rec):
            self.stream.write(line + "\n")


class TraceFormatError(ValueError):
    pass


_FIELDS = {"utt": 4, "parse": 7, "reparse": 7, "hyp": 4, "good": 3, "accept": 3, "gate": 3, "prune": 4}


def read_trace(path: str | Path) -> list[list[str]]:
    """Parse a trace log into field lists, validating each line's shape."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            kind = fields[0]
            if kind == "report":
                if len(fields) < 4:
                    raise TraceFormatError(f"line {lineno}: short report line")
            elif kind not in _FIELDS or len(fields) != _FIELDS[kind]:
                raise TraceFormatError(f"line {lineno}: malformed {kind!r} event")
            try:
                int(fields[1])
            except ValueError:
                raise TraceFormatError(f"line {lineno}: bad utterance index {fields[1]!r}") from None
            events.append(fields)
    return events
