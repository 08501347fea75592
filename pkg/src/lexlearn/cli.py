"""Command-line front end: ``gen``, ``train``, ``segment``, ``eval`` and ``inspect``.

Exit status is 0 on success, 1 when a scripted threshold check fails
(``eval --min-f1``) and 2 on usage, input or format errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence, TextIO

from .core import Dictionary, LexiconError
from .evaluation import EvalError, evaluate, format_segmentation, read_segmentation
from .learner import TraceFormatError, TraceWriter, TrainConfig, read_trace, train
from .parser import CostWeights, SearchLimits, segment_phones
from .pipeline import (
    DEFAULT_ALPHABET,
    GeneratorConfig,
    PipelineError,
    corpus_from_text,
    demo_tables,
    generate_synthetic,
    read_corpus,
    read_pronunciations,
    read_stem_map,
    write_corpus,
    write_pronunciations,
    write_stem_map,
)

logger = logging.getLogger("lexlearn")

_ERRORS = (OSError, LexiconError, PipelineError, EvalError, TraceFormatError, ValueError)
_TC = TrainConfig()
_SL = SearchLimits()
_GC = GeneratorConfig()


class UsageError(ValueError):
    pass


def _kv(text: str) -> dict[str, str]:
    out = {}
    for item in filter(None, text.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"expected key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def parse_weights(text: str) -> CostWeights:
    names = {f.name for f in fields(CostWeights)}
    kv = _kv(text)
    bad = set(kv) - names
    if bad:
        raise UsageError(f"unknown weight(s): {', '.join(sorted(bad))}")
    return replace(CostWeights(), **{k: float(v) for k, v in kv.items()})


def parse_accept(text: str) -> dict:
    out: dict = {}
    for key, val in _kv(text).items():
        if key in ("max_unparsed", "max_mismatch"):
            out[key] = int(val)
        elif key == "max_extra_sem":
            out[key] = None if val.lower() == "none" else int(val)
        elif key == "require_all_sememes":
            out[key] = val.lower() in ("1", "true", "yes")
        else:
            raise UsageError(f"unknown accept option {key!r}")
    return out


def _fmt_weights(w: CostWeights) -> str:
    return ",".join(f"{f.name}={getattr(w, f.name):g}" for f in fields(w))


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", default=_fmt_weights(CostWeights()), help="cost weights as key=value pairs")
    p.add_argument("--beam", type=int, default=_SL.beam_width, help="beam width above the exact limits")
    p.add_argument("--exact-sememe-max", type=int, default=_SL.exact_sememe_max, help="exact search up to this many sememes")
    p.add_argument("--exact-length-max", type=int, default=_SL.exact_length_max, help="exact search up to this many phones")


def _search(args) -> tuple[CostWeights, SearchLimits]:
    return parse_weights(args.weights), SearchLimits(args.exact_sememe_max, args.exact_length_max, args.beam)


def _open_out(path: str | None):
    return open(path, "w", encoding="utf-8") if path and path != "-" else nullcontext(sys.stdout)


# -- gen -----------------------------------------------------------------------


def cmd_gen(args) -> int:
    suffixes = tuple(tuple(s.split()) for s in args.suffixes.split(";") if s.strip())
    cfg = GeneratorConfig(
        vocab_size=args.vocab_size,
        phone_alphabet=tuple(args.alphabet.split()),
        word_length_range=(args.word_length_min, args.word_length_max),
        utterance_length_range=(args.utterance_length_min, args.utterance_length_max),
        zipf_exponent=args.zipf_exponent,
        suffix_inventory=suffixes,
        suffix_rate=args.suffix_rate,
        substitution_noise_rate=args.noise,
        homophone_pairs=args.homophone_pairs,
        seed=args.seed,
    )
    syn = generate_synthetic(cfg, args.utterances + args.heldout)
    train_recs, held = syn.records[: args.utterances], syn.records[args.utterances :]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(train_recs, out / "corpus.tsv")
    write_corpus(held, out / "heldout.tsv")
    write_pronunciations(syn.table, out / "pronunciations.tsv")
    write_stem_map(syn.stem_map, out / "stems.tsv", out / "suffixes.tsv")
    gold = Dictionary()
    for e in syn.gold_lexicon(train_recs):
        gold.entries[e.id] = e
    gold.save(out / "gold_lexicon.tsv")
    logger.info("wrote %d + %d utterances and %d gold entries to %s", len(train_recs), len(held), len(gold), out)
    return 0


# -- train ---------------------------------------------------------------------


def _load_training_corpus(args):
    if not args.text:
        return [r.utterance for r in read_corpus(args.corpus)]
    table, stems = demo_tables()
    if args.pronunciations:
        table = read_pronunciations(args.pronunciations)
    if args.stems:
        stems = read_stem_map(args.stems, args.suffix_rules)
    if args.zero_function_words:
        words = Path(args.zero_function_words).read_text(encoding="utf-8").split()
        stems = replace(stems, function_words=frozenset(w.lower() for w in words), zero_function_words=True)
    sentences = Path(args.corpus).read_text(encoding="utf-8").splitlines()
    return [r.utterance for r in corpus_from_text(sentences, table, stems)]


def cmd_train(args) -> int:
    weights, limits = _search(args)
    cfg = TrainConfig(
        weights=weights,
        limits=limits,
        gate_on=not args.allow_empty_sememes,
        maintenance_interval=args.maintenance_interval,
        min_window_uses=args.min_window_uses,
        min_age=args.min_age,
        epochs=args.epochs,
        seed=args.seed,
        shuffle=args.shuffle,
        fit_sememes=not args.no_fit_sememes,
        absorb_empty_gaps=not args.no_absorb,
        **parse_accept(args.accept),
    )
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    corpus = _load_training_corpus(args)
    if args.init_lexicon:
        dictionary = Dictionary.load(args.init_lexicon, gate_on=cfg.gate_on, maintenance_interval=cfg.maintenance_interval)
    else:
        dictionary = Dictionary(maintenance_interval=cfg.maintenance_interval)
    trace_cm = open(args.trace, "w", encoding="utf-8") if args.trace else nullcontext(None)
    with trace_cm as trace_fh:
        report = train(dictionary, corpus, cfg, jobs=args.jobs, on_record=TraceWriter(trace_fh) if trace_fh else None)
        if trace_fh:
            trace_fh.writelines(line + "\n" for line in report.lines())
    dictionary.save(args.output)
    if args.report:
        Path(args.report).write_text(
            "".join(line.split("\t", 2)[2] + "\n" for line in report.lines()), encoding="utf-8"
        )
    logger.info(
        "%d utterances, %d good parses, %d entries (%d gate rejections)",
        report.utterances, report.good_parses, report.final_size, report.gate_rejections,
    )
    return 0


# -- segment -------------------------------------------------------------------


def _phone_lines(args) -> list[list[str]]:
    if args.phones is not None:
        return [args.phones.split()]
    if args.input in (None, "-"):
        text = sys.stdin.read()
    else:
        text = Path(args.input).read_text(encoding="utf-8")
    # corpus files carry sememes and gold after a tab; only the phones are used
    return [line.split("\t", 1)[0].split() for line in text.splitlines()]


def cmd_segment(args) -> int:
    weights, limits = _search(args)
    lexicon = Dictionary.load(args.lexicon).snapshot()
    lines = _phone_lines(args)
    with _open_out(args.output) as out:
        for phones in lines:
            seg = segment_phones(lexicon, phones, weights, limits) if phones else []
            out.write(format_segmentation([(off, eid) for eid, off in seg]) + "\n")
    return 0


# -- eval ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    if (args.lexicon is None) != (args.gold_lexicon is None):
        raise UsageError("--lexicon and --gold-lexicon go together")
    predicted = read_segmentation(args.prediction)
    records = read_corpus(args.gold)
    gold = []
    for k, rec in enumerate(records, 1):
        if rec.gold is None:
            raise EvalError(f"{args.gold}: record {k} has no gold spans")
        gold.append(rec.gold)
    learned = Dictionary.load(args.lexicon) if args.lexicon else None
    gold_lex = Dictionary.load(args.gold_lexicon) if args.gold_lexicon else None
    m = evaluate(predicted, gold, learned, gold_lex)
    with _open_out(args.output) as out:
        out.write(m.dumps(lexicon=learned is not None))
    if args.min_f1 is not None and m.boundary_f1 < args.min_f1:
        print(f"boundary F1 {float(m.boundary_f1):.6f} below {args.min_f1}", file=sys.stderr)
        return 1
    return 0


# -- inspect -------------------------------------------------------------------


def _grid(label: str, cells: dict[int, str], n: int, width: int) -> str:
    return (f"{label:<11}" + "".join(f"{cells.get(i, ''):<{width}}" for i in range(n))).rstrip()


def render_parse(phones: list[str], fields_: list[str], out: TextIO) -> None:
    placements, unparsed, mismatched, missing, cost = fields_[2:7]
    n = len(phones)
    width = max((len(p) for p in phones), default=1) + 1
    out.write(f"  cost {cost}\n")
    out.write("  " + _grid("Utterance", dict(enumerate(phones)), n, width) + "\n")
    words = [item.partition(":")[::2] for item in placements.split()]
    if not words:
        out.write("  Words\n")
    for k, (off, eid) in enumerate(words):
        ph, _, sems = eid.partition("|")
        cells = {int(off) + j: p for j, p in enumerate(ph.split("."))}
        line = _grid("Words" if k == 0 else "", cells, n, width)
        out.write(f"  {line}{'':<{max(0, 11 + n * width - len(line))}}  {{{sems.replace(',', ' ')}}}\n")
    for label, pos in (("Unparsed", unparsed), ("Mismatched", mismatched)):
        marks = {int(i): "^" for i in pos.split()}
        out.write("  " + _grid(label, marks, n, width) + "\n")
    if missing:
        out.write(f"  Missing    {missing}\n")


def render_trace(events: list[list[str]], out: TextIO, only: set[int] | None = None, accepting: bool = False) -> None:
    groups: dict[int, list[list[str]]] = {}
    order: list[int] = []
    prunes: dict[int, list[list[str]]] = {}
    for ev in events:
        if ev[0] == "report":
            continue
        if ev[0] == "prune":
            prunes.setdefault(int(ev[1]), []).append(ev)
            continue
        idx = int(ev[1])
        if idx not in groups:
            groups[idx] = []
            order.append(idx)
        groups[idx].append(ev)
    for idx in order:
        evs = groups[idx]
        if only is not None and idx not in only:
            continue
        if accepting and not any(e[0] == "accept" for e in evs):
            continue
        phones: list[str] = []
        for ev in evs:
            kind = ev[0]
            if kind == "utt":
                phones = ev[2].split()
                out.write(f"== utterance {idx}: {ev[2]}  {{{ev[3]}}}\n")
            elif kind in ("parse", "reparse"):
                out.write(f"{'first parse' if kind == 'parse' else 'reparse'}\n")
                render_parse(phones, ev, out)
            elif kind == "hyp":
                out.write(f"hypothesis ({ev[2]}) {ev[3]}\n")
            elif kind == "good":
                out.write(f"good parse: {'yes' if ev[2] == '1' else 'no'}\n")
            elif kind == "accept":
                out.write(f"accepted {ev[2]}\n")
            elif kind == "gate":
                out.write(f"gate rejected {ev[2]}\n")
        out.write("\n")
    if only is None and not accepting:
        for at in sorted(prunes):
            out.write(f"== maintenance after {at} utterances\n")
            for ev in prunes[at]:
                out.write(f"removed ({ev[2]}) {ev[3]}\n")
            out.write("\n")


def cmd_inspect(args) -> int:
    events = read_trace(args.trace)
    only = set(args.utterance) if args.utterance else None
    with _open_out(args.output) as out:
        render_trace(events, out, only, args.accepting)
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    ap = argparse.ArgumentParser(prog="lexlearn", description=__doc__.splitlines()[0], formatter_class=fmt)
    ap.add_argument("-v", "--verbose", action="count", default=0, help="repeat for more detail")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic corpus with gold segmentations", formatter_class=fmt)
    g.add_argument("out_dir", help="output directory")
    g.add_argument("--utterances", type=int, default=3000, help="training utterances")
    g.add_argument("--heldout", type=int, default=500, help="held-out utterances")
    g.add_argument("--vocab-size", type=int, default=_GC.vocab_size, help="number of stems")
    g.add_argument("--alphabet", default=" ".join(DEFAULT_ALPHABET), help="space-separated phones")
    g.add_argument("--word-length-min", type=int, default=_GC.word_length_range[0], help="shortest stem, in phones")
    g.add_argument("--word-length-max", type=int, default=_GC.word_length_range[1], help="longest stem, in phones")
    g.add_argument("--utterance-length-min", type=int, default=_GC.utterance_length_range[0], help="fewest words per utterance")
    g.add_argument("--utterance-length-max", type=int, default=_GC.utterance_length_range[1], help="most words per utterance")
    g.add_argument("--zipf-exponent", type=float, default=_GC.zipf_exponent, help="word frequency ~ 1/rank^s")
    g.add_argument(
        "--suffixes",
        default=";".join(" ".join(s) for s in _GC.suffix_inventory),
        help="';'-separated suffixes, phones space-separated",
    )
    g.add_argument("--suffix-rate", type=float, default=_GC.suffix_rate, help="chance a token carries a suffix")
    g.add_argument("--noise", type=float, default=_GC.substitution_noise_rate, help="phone substitution rate")
    g.add_argument("--homophone-pairs", type=int, default=_GC.homophone_pairs, help="stem pairs sharing phones")
    g.add_argument("--seed", type=int, default=_GC.seed, help="generator seed")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="learn a lexicon from a corpus", formatter_class=fmt)
    t.add_argument("corpus", help="corpus TSV, or plain sentences with --text")
    t.add_argument("-o", "--output", required=True, help="lexicon TSV to write")
    t.add_argument("--text", action="store_true", help="corpus holds plain sentences")
    t.add_argument("--pronunciations", help="word<TAB>phones table for --text; None uses the demo table")
    t.add_argument("--stems", help="word<TAB>SEMEME map for --text; None uses the demo map")
    t.add_argument("--suffix-rules", help="suffix<TAB>replacement rules for --stems")
    t.add_argument("--zero-function-words", metavar="FILE", help="give these words no sememes (--text)")
    t.add_argument("--init-lexicon", help="start from this lexicon instead of an empty one")
    _add_search_flags(t)
    t.add_argument(
        "--accept",
        default=f"max_unparsed={_TC.max_unparsed},max_mismatch={_TC.max_mismatch},max_extra_sem={_TC.max_extra_sem}",
        help="good-parse thresholds; require_all_sememes=0 relaxes sememe coverage",
    )
    t.add_argument("--maintenance-interval", type=int, default=_TC.maintenance_interval, help="prune every N utterances")
    t.add_argument("--min-window-uses", type=int, default=_TC.min_window_uses, help="fewer uses per window gets a word pruned")
    t.add_argument("--min-age", type=int, default=_TC.min_age, help="minimum entry age for pruning; None uses the maintenance interval")
    t.add_argument("--allow-empty-sememes", action="store_true", help="turn the empty-semantics gate off")
    t.add_argument("--no-fit-sememes", action="store_true", help="skip sememe-trimming hypotheses")
    t.add_argument("--no-absorb", action="store_true", help="skip stretching words over empty gaps")
    t.add_argument("--epochs", type=int, default=_TC.epochs, help="passes over the corpus")
    t.add_argument("--seed", type=int, default=_TC.seed, help="shuffle seed")
    t.add_argument("--shuffle", action="store_true", help="shuffle utterances each epoch")
    t.add_argument("--jobs", type=int, default=1, help="parallel first-parse workers")
    t.add_argument("--trace", help="write the trace log here")
    t.add_argument("--report", help="write the training report here")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("segment", help="segment phone sequences with a lexicon", formatter_class=fmt)
    s.add_argument("lexicon", help="lexicon TSV")
    s.add_argument("input", nargs="?", help="phone lines or a corpus TSV ('-' or absent: stdin)")
    s.add_argument("--phones", help="segment this inline phone string instead")
    s.add_argument("-o", "--output", help="write here instead of stdout")
    _add_search_flags(s)
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("eval", help="score a segmentation (and a lexicon)", formatter_class=fmt)
    e.add_argument("prediction", help="output of segment")
    e.add_argument("gold", help="corpus TSV with gold spans")
    e.add_argument("--lexicon", help="learned lexicon to score")
    e.add_argument("--gold-lexicon", help="gold lexicon TSV")
    e.add_argument("--min-f1", type=float, help="exit 1 if boundary F1 is below this")
    e.add_argument("-o", "--output", help="write the report here instead of stdout")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("inspect", help="render a trace log as tables", formatter_class=fmt)
    i.add_argument("trace", help="trace log written by train --trace")
    i.add_argument("--utterance", type=int, action="append", help="only this utterance index (repeatable)")
    i.add_argument("--accepting", action="store_true", help="only utterances that added words")
    i.add_argument("-o", "--output", help="write here instead of stdout")
    i.set_defaults(func=cmd_inspect)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"lexlearn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except _ERRORS as exc:
        print(f"lexlearn {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
