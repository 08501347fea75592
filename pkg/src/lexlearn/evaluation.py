"""Scoring of segmentations against gold spans and of lexicons against gold lexicons.

Predictions are per-utterance lists of ``(offset, canonical_id)`` pairs; gold
is per-utterance lists of ``(start, end, canonical_id)`` spans.  All values
are exact fractions.  A metric whose denominator is zero is reported as 0
and its name is added to ``Metrics.undefined``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .core import Dictionary, LexEntry, split_id

Prediction = Sequence[tuple[int, str]]
GoldSpans = Sequence[tuple[int, int, str]]


class EvalError(ValueError):
    pass


@dataclass
class Metrics:
    boundary_precision: Fraction = Fraction(0)
    boundary_recall: Fraction = Fraction(0)
    boundary_f1: Fraction = Fraction(0)
    token_accuracy: Fraction = Fraction(0)
    lexicon_precision: Fraction = Fraction(0)
    lexicon_recall: Fraction = Fraction(0)
    error_listing: set[str] = field(default_factory=set)
    undefined: set[str] = field(default_factory=set)

    def report_lines(self, lexicon: bool = True) -> list[str]:
        names = [f.name for f in fields(self) if f.name not in ("error_listing", "undefined")]
        if not lexicon:
            names = [n for n in names if not n.startswith("lexicon_")]
        lines = [f"{n}\t{float(getattr(self, n)):.6f}" for n in names]
        if self.undefined:
            lines.append("undefined\t" + ",".join(sorted(self.undefined)))
        if lexicon:
            lines.append("# errors")
            lines += sorted(self.error_listing)
        return lines

    def dumps(self, lexicon: bool = True) -> str:
        return "".join(line + "\n" for line in self.report_lines(lexicon))


def _ratio(num: int, den: int, name: str, undefined: set[str]) -> Fraction:
    if den == 0:
        undefined.add(name)
        return Fraction(0)
    return Fraction(num, den)


def f1_score(p: Fraction, r: Fraction) -> Fraction:
    return 2 * p * r / (p + r) if p + r > 0 else Fraction(0)


def _spans(pred: Prediction) -> list[tuple[int, int, str]]:
    return [(off, off + len(split_id(eid)[0]), eid) for off, eid in pred]


def _check(predicted: Sequence[Prediction], gold: Sequence[GoldSpans]) -> None:
    if len(predicted) != len(gold):
        raise EvalError(f"{len(predicted)} predicted utterances but {len(gold)} gold utterances")
    for k, (pred, spans) in enumerate(zip(predicted, gold)):
        n = max((b for _, b, _ in spans), default=0)
        for a, b, eid in _spans(pred):
            if a < 0 or b > n:
                raise EvalError(f"utterance {k}: placement {a}:{eid} runs past the {n} gold phones")


def _interior(spans: Iterable[tuple[int, int, str]], n: int) -> set[int]:
    return {x for a, b, _ in spans for x in (a, b) if 0 < x < n}


def boundary_metrics(
    predicted: Sequence[Prediction], gold: Sequence[GoldSpans], undefined: set[str] | None = None
) -> tuple[Fraction, Fraction, Fraction]:
    """Micro-averaged precision, recall and F1 over interior boundary positions."""
    _check(predicted, gold)
    undefined = set() if undefined is None else undefined
    hit = n_pred = n_gold = 0
    for pred, spans in zip(predicted, gold):
        n = max((b for _, b, _ in spans), default=0)
        pb, gb = _interior(_spans(pred), n), _interior(spans, n)
        hit += len(pb & gb)
        n_pred += len(pb)
        n_gold += len(gb)
    p = _ratio(hit, n_pred, "boundary_precision", undefined)
    r = _ratio(hit, n_gold, "boundary_recall", undefined)
    return p, r, f1_score(p, r)


def token_metrics(
    predicted: Sequence[Prediction], gold: Sequence[GoldSpans], undefined: set[str] | None = None
) -> Fraction:
    """Share of gold tokens whose span and sememe set some predicted token matches."""
    _check(predicted, gold)
    undefined = set() if undefined is None else undefined
    correct = total = 0
    for pred, spans in zip(predicted, gold):
        got = {(a, b, split_id(eid)[1]) for a, b, eid in _spans(pred)}
        total += len(spans)
        correct += sum((a, b, split_id(eid)[1]) in got for a, b, eid in spans)
    return _ratio(correct, total, "token_accuracy", undefined)


def _ids(lexicon: Dictionary | Iterable[LexEntry | str]) -> set[str]:
    if isinstance(lexicon, Dictionary):
        return set(lexicon.entries)
    return {e if isinstance(e, str) else e.id for e in lexicon}


def lexicon_metrics(
    learned: Dictionary | Iterable[LexEntry | str],
    gold: Dictionary | Iterable[LexEntry | str],
    undefined: set[str] | None = None,
) -> tuple[Fraction, Fraction, set[str]]:
    """Exact (phones, sememes) matching; returns precision, recall and the wrong learned ids."""
    undefined = set() if undefined is None else undefined
    got, want = _ids(learned), _ids(gold)
    correct = len(got & want)
    p = _ratio(correct, len(got), "lexicon_precision", undefined)
    r = _ratio(correct, len(want), "lexicon_recall", undefined)
    return p, r, got - want


def evaluate(
    predicted: Sequence[Prediction],
    gold: Sequence[GoldSpans],
    learned: Dictionary | Iterable[LexEntry | str] | None = None,
    gold_lexicon: Dictionary | Iterable[LexEntry | str] | None = None,
) -> Metrics:
    m = Metrics()
    m.boundary_precision, m.boundary_recall, m.boundary_f1 = boundary_metrics(predicted, gold, m.undefined)
    m.token_accuracy = token_metrics(predicted, gold, m.undefined)
    if learned is not None and gold_lexicon is not None:
        m.lexicon_precision, m.lexicon_recall, m.error_listing = lexicon_metrics(learned, gold_lexicon, m.undefined)
    return m


# -- files ---------------------------------------------------------------------


def format_segmentation(pred: Prediction) -> str:
    return " ".join(f"{off}:{eid}" for off, eid in pred)


def parse_segmentation(line: str) -> list[tuple[int, str]]:
    out = []
    for item in line.split():
        off, sep, eid = item.partition(":")
        if not sep or not off.isdigit():
            raise EvalError(f"bad placement {item!r}; expected offset:id")
        split_id(eid)
        out.append((int(off), eid))
    return out


def read_segmentation(path: str | Path) -> list[list[tuple[int, str]]]:
    """One utterance per line; blank lines are empty segmentations."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                out.append(parse_segmentation(line.rstrip("\n")))
            except (EvalError, ValueError) as exc:
                raise EvalError(f"{path}:{lineno}: {exc}") from None
    return out
