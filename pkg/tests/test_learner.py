import io

import pytest
from hypothesis import given, settings, strategies as st

from lexlearn import Dictionary, LexEntry, TrainConfig, Utterance, best_parse, maintain, process_utterance, train
from lexlearn.learner import (
    ADJUSTMENT,
    GAP,
    Hypothesis,
    TraceFormatError,
    TraceWriter,
    accept_step,
    hypothesize_absorptions,
    hypothesize_adjustments,
    hypothesize_gap_words,
    hypothesize_sememe_fits,
    is_decomposable,
    read_trace,
)
from lexlearn.pipeline import GeneratorConfig, generate_synthetic

from conftest import NINA, SOCK, make_dict


def ids(hyps):
    return sorted(h.id for h in hyps)


def layout(parse):
    return [(p.entry_id, p.offset) for p in parse.placements]


# -- hypothesis generators ---------------------------------------------------------


def test_gap_word_nina():
    hyps = hypothesize_gap_words(NINA, best_parse((), NINA))
    assert hyps == [Hypothesis(tuple("nina"), frozenset({"NINA"}), GAP)]


def test_gap_word_and_adjustment_sock(sock_dict):
    parse = best_parse(sock_dict, SOCK)
    assert ids(hypothesize_gap_words(SOCK, parse)) == ["k.I.k.t.O.f|KICK,OFF"]
    assert ids(hypothesize_adjustments(SOCK, parse)) == ["s.A.k|SOCK"]
    assert {h.origin for h in hypothesize_adjustments(SOCK, parse)} == {ADJUSTMENT}


def test_perfect_parse_gives_nothing():
    lex = make_dict("n.i.n.a|NINA")
    parse = best_parse(lex, NINA)
    assert hypothesize_gap_words(NINA, parse) == []
    assert hypothesize_adjustments(NINA, parse) == []


def test_interior_mismatch_substituted():
    utt = Utterance.parse("b e t", "BAT")
    parse = best_parse(make_dict("b.a.t|BAT"), utt)
    assert parse.placements[0].mismatch_positions == {1}
    assert ids(hypothesize_adjustments(utt, parse)) == ["b.e.t|BAT"]
    better = best_parse(make_dict("b.a.t|BAT", "b.e.t|BAT"), utt)
    assert better.cost < parse.cost


def test_all_mismatch_adjustment_trims_to_nothing():
    utt = Utterance.parse("x y z w", "BAT")
    parse = best_parse(make_dict("b.a.t|BAT"), utt)
    assert hypothesize_adjustments(utt, parse) == []


def test_multi_gap_gets_full_missing_set():
    utt = Utterance.parse("a b m c d", "A B C")
    parse = best_parse(make_dict("m|B"), utt)
    assert ids(hypothesize_gap_words(utt, parse)) == ["a.b|A,C", "c.d|A,C"]


def test_sememe_fit_drops_absent_sememes():
    utt = Utterance.parse("d O g", "DOG")
    parse = best_parse(make_dict("d.O.g|CAT,DOG"), utt)
    assert ids(hypothesize_sememe_fits(utt, parse)) == ["d.O.g|DOG"]


def test_absorption_only_when_nothing_missing():
    utt = Utterance.parse("d O g z", "DOG")
    parse = best_parse(make_dict("d.O.g|DOG"), utt)
    assert ids(hypothesize_absorptions(utt, parse)) == ["d.O.g.z|DOG"]
    utt2 = Utterance.parse("d O g z", "DOG CAT")
    assert hypothesize_absorptions(utt2, best_parse(make_dict("d.O.g|DOG"), utt2)) == []


# -- acceptance --------------------------------------------------------------------


def test_golden_trace_nina():
    d = Dictionary()
    rec = process_utterance(d, NINA, TrainConfig())
    assert rec.parse.placements == () and rec.parse.unparsed_positions == {0, 1, 2, 3}
    assert ids(rec.hypotheses) == ["n.i.n.a|NINA"]
    assert rec.reparse.is_perfect and layout(rec.reparse) == [("n.i.n.a|NINA", 0)]
    assert rec.good and rec.accepted == ["n.i.n.a|NINA"]
    assert list(d.entries) == ["n.i.n.a|NINA"] and d.utterances_seen == 1
    assert d["n.i.n.a|NINA"].use_count == 1


def test_golden_trace_sock(sock_dict):
    rec = process_utterance(sock_dict, SOCK, TrainConfig())
    assert layout(rec.parse) == [("y.u|YOU", 0), ("D.@|THE", 8), ("r.s.A.k|SOCK", 9)]
    assert rec.parse.unparsed_positions == set(range(2, 8)) and rec.parse.mismatched_count == 1
    assert ids(rec.hypotheses) == ["k.I.k.t.O.f|KICK,OFF", "s.A.k|SOCK"]
    assert layout(rec.reparse) == [("y.u|YOU", 0), ("k.I.k.t.O.f|KICK,OFF", 2), ("D.@|THE", 8), ("s.A.k|SOCK", 10)]
    assert rec.reparse.is_perfect and rec.good
    assert sorted(rec.accepted) == ["k.I.k.t.O.f|KICK,OFF", "s.A.k|SOCK"]
    assert sock_dict["r.s.A.k|SOCK"].use_count == 0
    assert sock_dict["y.u|YOU"].use_count == 1 and sock_dict["s.A.k|SOCK"].use_count == 1


def test_gate_rejects_empty_hypothesis():
    utt = Utterance.parse("D @ d O g", "DOG")
    d = make_dict("d.O.g|DOG")
    hyps = [Hypothesis(("D", "@"), frozenset(), GAP)]
    res = accept_step(d, utt, hyps, TrainConfig())
    assert res.good and res.accepted == [] and res.gate_rejected == ["D.@|"]
    assert "D.@|" not in d
    res = accept_step(d, utt, hyps, TrainConfig(gate_on=False))
    assert res.accepted == ["D.@|"] and "D.@|" in d


def test_rejected_parse_adds_nothing_and_counts_nothing():
    utt = Utterance.parse("d O g", "DOG CAT")
    d = make_dict("d.O.g|DOG")
    res = accept_step(d, utt, [Hypothesis(("q",), frozenset({"CAT"}), GAP)], TrainConfig())
    assert not res.good and res.accepted == [] and d["d.O.g|DOG"].use_count == 0


def test_counter_increments_per_placement():
    d = make_dict("b.a|X")
    res = accept_step(d, Utterance.parse("b a b a", "X"), [], TrainConfig())
    assert res.good and d["b.a|X"].use_count == 2 and d["b.a|X"].window_use_count == 2


def test_empty_utterance_trivial():
    d = make_dict("a|A")
    rec = process_utterance(d, Utterance(), TrainConfig())
    assert rec.hypotheses == [] and rec.accepted == [] and list(d.entries) == ["a|A"]


# -- maintenance -------------------------------------------------------------------


def test_unused_entry_pruned_at_boundary(sock_dict):
    cfg = TrainConfig(maintenance_interval=2)
    process_utterance(sock_dict, SOCK, cfg)
    rec = process_utterance(sock_dict, SOCK, cfg)
    assert rec.maintenance is not None and "r.s.A.k|SOCK" in rec.maintenance.removed_unused
    assert "r.s.A.k|SOCK" not in sock_dict
    assert all(e.window_use_count == 0 for e in sock_dict)


def test_decomposable_entry_pruned():
    d = make_dict("k.I.k.t.O.f|KICK,OFF", "k.I.k.t|KICK", "O.f|OFF", use_count=5, window_use_count=5)
    res = maintain(d, TrainConfig(min_age=0))
    assert res.removed_decomposable == ["k.I.k.t.O.f|KICK,OFF"] and res.removed_unused == []
    assert sorted(d.entries) == ["O.f|OFF", "k.I.k.t|KICK"]


@pytest.mark.parametrize(
    "entry",
    [
        "k.I.k.t.O.f|KICK,OFF,UP",  # sememes not reproduced
        "k.I.k.t.O.f.f|KICK,OFF",  # phones not reproduced
        "k.I.k.t.O|KICK",  # nothing parses O alone
    ],
)
def test_not_decomposable(entry):
    d = make_dict(entry, "k.I.k.t|KICK", "O.f|OFF", use_count=5, window_use_count=5)
    assert maintain(d, TrainConfig(min_age=0)).removed_decomposable == []
    assert entry in d


def test_extra_sememes_block_decomposition():
    d = make_dict("k.I.k.t.O.f|KICK", "k.I.k.t|KICK", "O.f|OFF", use_count=5, window_use_count=5)
    assert not is_decomposable(d.snapshot(), "k.I.k.t.O.f|KICK", TrainConfig())


def test_unused_rule_needs_age_and_low_window():
    d = Dictionary(utterances_seen=1000)
    d.add(LexEntry.from_id("a.a|A", use_count=9, window_use_count=3))
    d.add(LexEntry.from_id("b.b|B", use_count=9, window_use_count=2))
    d.add(LexEntry.from_id("c.c|C", created_at=500))
    res = maintain(d, TrainConfig())
    assert res.removed_unused == ["b.b|B"]
    assert sorted(d.entries) == ["a.a|A", "c.c|C"]


def test_mutually_decomposable_entries_keep_one():
    # a.b|A,B splits into a|A + b|B and a|A,B... each removal is checked against survivors
    d = make_dict("a.b|A,B", "a|A", "b|B", "a.b.a.b|A,B", use_count=5, window_use_count=5)
    res = maintain(d, TrainConfig(min_age=0))
    assert sorted(res.removed_decomposable) == ["a.b.a.b|A,B", "a.b|A,B"]
    for eid in res.removed_decomposable:
        assert is_decomposable(d.snapshot(), eid, TrainConfig())


# -- training ----------------------------------------------------------------------


def test_train_small_cases():
    d = Dictionary()
    rep = train(d, [NINA], TrainConfig())
    assert list(d.entries) == ["n.i.n.a|NINA"] and rep.final_size == 1 and rep.utterances == 1
    d2 = Dictionary()
    assert train(d2, [], TrainConfig()).final_size == 0 and len(d2) == 0


def _corpus(n=400, seed=3):
    syn = generate_synthetic(GeneratorConfig(vocab_size=15, seed=seed), n)
    return [r.utterance for r in syn.records]


def test_training_invariants_and_replay():
    corpus = _corpus()
    cfg = TrainConfig(maintenance_interval=150)
    records = []
    d1 = Dictionary()
    rep = train(d1, corpus, cfg, on_record=records.append)
    for rec in records:
        if rec.accepted:
            assert cfg.accepts(rec.reparse)
    assert all(e.sememes for e in d1)
    assert all(e.window_use_count <= e.use_count for e in d1)
    assert rep.utterances == len(corpus) and rep.final_size == len(d1)
    assert [at for at, _ in rep.entry_counts][:2] == [150, 300]
    d2 = Dictionary()
    train(d2, corpus, cfg)
    assert d1.dumps() == d2.dumps()


def test_batch_mode_matches_sequential():
    corpus = _corpus(300, seed=5)
    cfg = TrainConfig(maintenance_interval=100)
    seq, par = Dictionary(), Dictionary()
    r1, r2 = train(seq, corpus, cfg), train(par, corpus, cfg, jobs=4)
    assert seq.dumps() == par.dumps() and r1.lines() == r2.lines()


def test_gate_off_learns_empty_words():
    corpus = _corpus(300, seed=5)
    d = Dictionary()
    train(d, corpus, TrainConfig(gate_on=False))
    assert any(not e.sememes for e in d)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.text("abc", min_size=1, max_size=6), st.sets(st.sampled_from("XYZ"), max_size=2)), max_size=12))
def test_property_counters_and_gate(items):
    d = Dictionary()
    cfg = TrainConfig(maintenance_interval=5, min_window_uses=1)
    for phones, sems in items:
        before = {e.id: e.use_count for e in d}
        rec = process_utterance(d, Utterance(tuple(phones), frozenset(sems)), cfg)
        if rec.good and not rec.gate_rejected and rec.maintenance is None:
            gained = sum(e.use_count - before.get(e.id, 0) for e in d)
            assert gained == len(rec.reparse.placements)
        assert all(e.sememes for e in d)


# -- trace log ---------------------------------------------------------------------


def test_trace_round_trip(tmp_path, sock_dict):
    buf = io.StringIO()
    writer = TraceWriter(buf)
    writer(process_utterance(sock_dict, SOCK, TrainConfig()))
    path = tmp_path / "t.log"
    path.write_text(buf.getvalue())
    events = read_trace(path)
    kinds = [e[0] for e in events]
    assert kinds == ["utt", "parse", "hyp", "hyp", "reparse", "good", "accept", "accept"]
    assert events[1][2] == "0:y.u|YOU 8:D.@|THE 9:r.s.A.k|SOCK"
    assert events[1][3] == "2 3 4 5 6 7" and events[1][4] == "9" and events[1][6] == "903/100"


@pytest.mark.parametrize("line", ["utt\t0\tn i", "bogus\t0\tx", "good\tx\t1"])
def test_trace_malformed(tmp_path, line):
    p = tmp_path / "t.log"
    p.write_text(line + "\n")
    with pytest.raises(TraceFormatError):
        read_trace(p)
