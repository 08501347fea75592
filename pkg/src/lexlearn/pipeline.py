"""Corpus construction: table-driven transcription, stem semantics, corpus files,
and a synthetic corpus generator with gold segmentations.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources
from itertools import accumulate
from pathlib import Path
from typing import Iterable, Sequence

from .core import LexEntry, LexiconError, Phone, Sememe, Utterance, canonical_id, check_phone, check_sememe

PronunciationTable = dict[str, tuple[Phone, ...]]

_STRIP = ".,?!'\""


class PipelineError(ValueError):
    pass


def normalize(sentence: str) -> list[str]:
    """Lowercase and strip edge punctuation; intra-word apostrophes stay."""
    tokens = (t.strip(_STRIP) for t in sentence.lower().split())
    return [t for t in tokens if t]


def g2p_transcribe(table: PronunciationTable, sentence: str) -> list[Phone]:
    phones: list[Phone] = []
    for pos, tok in enumerate(normalize(sentence)):
        try:
            phones.extend(table[tok])
        except KeyError:
            raise PipelineError(f"no pronunciation for token {tok!r} at position {pos}") from None
    return phones


@dataclass
class StemMap:
    """Surface word -> sememe, with suffix stripping and function-word zeroing.

    ``words`` holds roots, irregular forms (``saw -> SEE``) and clitic forms
    (``rabbit's -> RABBIT BE``); a value may be one sememe or a set of them.
    Suffix rules are tried longest suffix first.
    """

    words: dict[str, frozenset[Sememe]] = field(default_factory=dict)
    suffix_rules: list[tuple[str, str]] = field(default_factory=list)
    function_words: frozenset[str] = frozenset()
    zero_function_words: bool = False

    def __post_init__(self) -> None:
        words = {}
        for w, s in self.words.items():
            if not w or any(c.isspace() for c in w):
                raise PipelineError(f"bad stem-map key {w!r}")
            sems = frozenset(s.split()) if isinstance(s, str) else frozenset(s)
            if not sems:
                raise PipelineError(f"no sememe for {w!r}")
            words[w] = frozenset(check_sememe(x) for x in sems)
        self.words = words
        self.suffix_rules = sorted(self.suffix_rules, key=lambda r: -len(r[0]))

    def resolve(self, word: str) -> frozenset[Sememe]:
        if self.zero_function_words and word in self.function_words:
            return frozenset()
        if word in self.words:
            return self.words[word]
        for suffix, repl in self.suffix_rules:
            if word.endswith(suffix) and len(word) > len(suffix):
                stem = word[: len(word) - len(suffix)] + repl
                if stem in self.words:
                    return self.words[stem]
        raise PipelineError(f"cannot resolve a sememe for {word!r}")


def utterance_semantics(stem_map: StemMap, sentence: str) -> frozenset[Sememe]:
    """Union of the sememes of every word in the sentence."""
    out: set[Sememe] = set()
    for tok in normalize(sentence):
        out |= stem_map.resolve(tok)
    return frozenset(out)


# -- table files ---------------------------------------------------------------


def _rows(path: str | Path, ncols: int) -> Iterable[tuple[int, list[str]]]:
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != ncols:
            raise PipelineError(f"{path}:{lineno}: expected {ncols} tab-separated fields")
        yield lineno, fields


def read_pronunciations(path: str | Path) -> PronunciationTable:
    table: PronunciationTable = {}
    for lineno, (word, phones) in _rows(path, 2):
        try:
            seq = tuple(check_phone(p) for p in phones.split())
        except LexiconError as exc:
            raise PipelineError(f"{path}:{lineno}: {exc}") from None
        if not seq or any(c.isspace() for c in word):
            raise PipelineError(f"{path}:{lineno}: bad entry for {word!r}")
        table[word.lower()] = seq
    return table


def write_pronunciations(table: PronunciationTable, path: str | Path) -> None:
    Path(path).write_text("".join(f"{w}\t{' '.join(p)}\n" for w, p in sorted(table.items())), encoding="utf-8")


def read_stem_map(
    path: str | Path,
    suffix_path: str | Path | None = None,
    function_words_path: str | Path | None = None,
    zero_function_words: bool = False,
) -> StemMap:
    words = {w.lower(): s for _, (w, s) in _rows(path, 2)}
    rules = [(a, b) for _, (a, b) in _rows(suffix_path, 2)] if suffix_path else []
    fwords: frozenset[str] = frozenset()
    if function_words_path:
        fwords = frozenset(
            ln.strip().lower() for ln in Path(function_words_path).read_text(encoding="utf-8").splitlines() if ln.strip()
        )
    try:
        return StemMap(words, rules, fwords, zero_function_words)
    except LexiconError as exc:
        raise PipelineError(f"{path}: {exc}") from None


def write_stem_map(stem_map: StemMap, path: str | Path, suffix_path: str | Path | None = None) -> None:
    Path(path).write_text(
        "".join(f"{w}\t{' '.join(sorted(s))}\n" for w, s in sorted(stem_map.words.items())), encoding="utf-8"
    )
    if suffix_path is not None:
        Path(suffix_path).write_text("".join(f"{a}\t{b}\n" for a, b in stem_map.suffix_rules), encoding="utf-8")


def demo_tables() -> tuple[PronunciationTable, StemMap]:
    """Small hand-made tables covering the worked examples (ASCII phones)."""
    data = resources.files("lexlearn") / "data"
    with resources.as_file(data) as d:
        table = read_pronunciations(d / "demo_pronunciations.tsv")
        stems = read_stem_map(d / "demo_stems.tsv", d / "demo_suffixes.tsv", d / "function_words.txt")
    return table, stems


# -- corpus files --------------------------------------------------------------

GoldSpan = tuple[int, int, str]


@dataclass(frozen=True)
class CorpusRecord:
    phones: tuple[Phone, ...]
    sememes: frozenset[Sememe]
    gold: tuple[GoldSpan, ...] | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        Utterance(self.phones, self.sememes)  # validates the symbols
        if self.gold is not None:
            check_tiling(self.gold, len(self.phones))

    @property
    def utterance(self) -> Utterance:
        return Utterance(self.phones, self.sememes)


def check_tiling(spans: Sequence[GoldSpan], n: int) -> None:
    pos = 0
    for start, end, _ in spans:
        if start != pos or end <= start:
            raise PipelineError(f"gold spans do not tile the utterance at position {pos}")
        pos = end
    if pos != n:
        raise PipelineError(f"gold spans cover {pos} of {n} phones")


def format_record(rec: CorpusRecord) -> str:
    fields = [" ".join(rec.phones), " ".join(sorted(rec.sememes))]
    if rec.gold is not None or rec.text is not None:
        fields.append(",".join(f"{a}:{b}:{eid}" for a, b, eid in rec.gold or ()))
    if rec.text is not None:
        fields.append(rec.text)
    return "\t".join(fields)


def parse_record(line: str) -> CorpusRecord:
    fields = line.split("\t")
    if not 2 <= len(fields) <= 4:
        raise PipelineError(f"expected 2-4 tab-separated fields, got {len(fields)}")
    gold = None
    if len(fields) >= 3 and fields[2]:
        spans = []
        for item in fields[2].split(","):
            # the id itself holds ',' between sememes; rejoin pieces without a span prefix
            parts = item.split(":", 2)
            if len(parts) != 3 or not (parts[0].isdigit() and parts[1].isdigit()):
                if not spans:
                    raise PipelineError(f"bad gold span {item!r}")
                a, b, eid = spans.pop()
                spans.append((a, b, eid + "," + item))
                continue
            spans.append((int(parts[0]), int(parts[1]), parts[2]))
        gold = tuple(spans)
    try:
        return CorpusRecord(
            tuple(fields[0].split()),
            frozenset(fields[1].split()),
            gold,
            fields[3] if len(fields) == 4 else None,
        )
    except LexiconError as exc:
        raise PipelineError(str(exc)) from None


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line == "":
                continue
            try:
                records.append(parse_record(line))
            except (PipelineError, LexiconError) as exc:
                raise PipelineError(f"{path}:{lineno}: {exc}") from None
    return records


def write_corpus(records: Iterable[CorpusRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(format_record(rec) + "\n")


def corpus_from_text(
    sentences: Iterable[str], table: PronunciationTable, stem_map: StemMap
) -> list[CorpusRecord]:
    return [
        CorpusRecord(tuple(g2p_transcribe(table, s)), utterance_semantics(stem_map, s), text=s.strip())
        for s in sentences
        if s.strip()
    ]


# -- synthetic corpora -----------------------------------------------------------

DEFAULT_ALPHABET = tuple("p t k b d g m n f v s z l r w h a e i o u I E A O U @".split())
SUFFIX_LABELS = ("s", "ing", "ed", "er", "ly", "ish")


@dataclass(frozen=True)
class GeneratorConfig:
    vocab_size: int = 60
    phone_alphabet: tuple[Phone, ...] = DEFAULT_ALPHABET
    word_length_range: tuple[int, int] = (2, 5)
    utterance_length_range: tuple[int, int] = (2, 5)
    zipf_exponent: float = 1.0
    suffix_inventory: tuple[tuple[Phone, ...], ...] = (("z",), ("I", "N"))
    suffix_rate: float = 0.3
    substitution_noise_rate: float = 0.0
    homophone_pairs: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.substitution_noise_rate <= 1.0:
            raise ValueError("substitution_noise_rate must lie in [0, 1]")
        if not 0.0 <= self.suffix_rate <= 1.0:
            raise ValueError("suffix_rate must lie in [0, 1]")
        if self.vocab_size < 1 or 2 * self.homophone_pairs > self.vocab_size:
            raise ValueError("need vocab_size >= 1 and at most vocab_size/2 homophone pairs")
        if len(self.suffix_inventory) > len(SUFFIX_LABELS):
            raise ValueError(f"at most {len(SUFFIX_LABELS)} suffixes")
        lo, hi = self.word_length_range
        ulo, uhi = self.utterance_length_range
        if not (1 <= lo <= hi and 1 <= ulo <= uhi):
            raise ValueError("length ranges must be positive and ordered")
        if len(set(self.phone_alphabet)) < 2:
            raise ValueError("need at least two phones")
        for p in self.phone_alphabet:
            check_phone(p)
        for sfx in self.suffix_inventory:
            if not sfx:
                raise ValueError("empty suffix")
            for p in sfx:
                check_phone(p)


@dataclass
class SyntheticCorpus:
    table: PronunciationTable
    stem_map: StemMap
    records: list[CorpusRecord]

    def gold_lexicon(self, records: Iterable[CorpusRecord] | None = None) -> list[LexEntry]:
        """Every word form attested in ``records`` (default: all), with token counts."""
        counts: dict[str, int] = {}
        for rec in self.records if records is None else records:
            for _, _, eid in rec.gold or ():
                counts[eid] = counts.get(eid, 0) + 1
        return [LexEntry.from_id(eid, use_count=c) for eid, c in sorted(counts.items())]


def generate_synthetic(cfg: GeneratorConfig, n_utterances: int, max_retries: int = 1000) -> SyntheticCorpus:
    """Sample a vocabulary and a corpus of utterances with gold segmentations.

    Stems are random phone strings; each suffixed form is the stem plus a
    suffix and means the same as the stem.  Words are drawn with Zipfian
    frequencies.  Noise, if any, substitutes phones after the gold spans
    are fixed.  The output depends only on ``cfg`` and ``n_utterances``.
    """
    rng = random.Random(cfg.seed)
    alphabet = list(cfg.phone_alphabet)
    width = len(str(cfg.vocab_size))
    names = [f"w{i:0{width}d}" for i in range(cfg.vocab_size)]
    sememes = [f"W{i:0{width}d}" for i in range(cfg.vocab_size)]

    forms: set[tuple[Phone, ...]] = set()
    stems: list[tuple[Phone, ...]] = []
    for i in range(cfg.vocab_size):
        if i % 2 == 1 and i // 2 < cfg.homophone_pairs:
            stems.append(stems[-1])
            continue
        for _ in range(max_retries):
            k = rng.randint(*cfg.word_length_range)
            cand = tuple(rng.choice(alphabet) for _ in range(k))
            new = [cand] + [cand + sfx for sfx in cfg.suffix_inventory]
            if not any(f in forms for f in new):
                break
        else:
            raise PipelineError(f"could not draw a distinct word form after {max_retries} tries")
        forms.update(new)
        stems.append(cand)

    table: PronunciationTable = {}
    for name, ph in zip(names, stems):
        table[name] = ph
        for label, sfx in zip(SUFFIX_LABELS, cfg.suffix_inventory):
            table[name + label] = ph + sfx
    stem_map = StemMap(
        dict(zip(names, sememes)),
        [(label, "") for label in SUFFIX_LABELS[: len(cfg.suffix_inventory)]],
    )

    weights = [1.0 / (r + 1) ** cfg.zipf_exponent for r in range(cfg.vocab_size)]
    cum = list(accumulate(weights))
    # separate stream: the noisy corpus is the clean one plus substitutions
    noise_rng = random.Random(f"noise:{cfg.seed}")
    records = []
    for _ in range(n_utterances):
        n_words = rng.randint(*cfg.utterance_length_range)
        phones: list[Phone] = []
        gold: list[GoldSpan] = []
        words = []
        sems: set[Sememe] = set()
        for w in rng.choices(range(cfg.vocab_size), cum_weights=cum, k=n_words):
            surface = names[w]
            if cfg.suffix_inventory and rng.random() < cfg.suffix_rate:
                j = rng.randrange(len(cfg.suffix_inventory))
                surface += SUFFIX_LABELS[j]
            ph = table[surface]
            gold.append((len(phones), len(phones) + len(ph), canonical_id(ph, [sememes[w]])))
            phones.extend(ph)
            words.append(surface)
            sems.add(sememes[w])
        if cfg.substitution_noise_rate > 0:
            for k, p in enumerate(phones):
                if noise_rng.random() < cfg.substitution_noise_rate:
                    phones[k] = noise_rng.choice([q for q in alphabet if q != p])
        records.append(CorpusRecord(tuple(phones), frozenset(sems), tuple(gold), " ".join(words)))
    return SyntheticCorpus(table, stem_map, records)
