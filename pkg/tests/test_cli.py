import pytest

from lexlearn import Dictionary
from lexlearn.cli import build_parser, main
from lexlearn.parser import CostWeights, SearchLimits
from lexlearn.learner import TrainConfig


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def golden(tmp_path):
    corpus = tmp_path / "golden.tsv"
    corpus.write_text("n i n a\tNINA\ny u k I k t O f D @ s A k\tKICK YOU OFF SOCK THE\n")
    init = tmp_path / "init.tsv"
    init.write_text("D.@\tTHE\t0\t0\t0\nr.s.A.k\tSOCK\t0\t0\t0\ny.u\tYOU\t0\t0\t0\n")
    return corpus, init


def test_train_golden_corpus(tmp_path, golden):
    corpus, init = golden
    out = tmp_path / "lex.tsv"
    assert run("train", corpus, "-o", out, "--init-lexicon", init, "--trace", tmp_path / "t.log",
               "--report", tmp_path / "r.txt") == 0
    lex = Dictionary.load(out)
    assert {"n.i.n.a|NINA", "k.I.k.t.O.f|KICK,OFF", "s.A.k|SOCK", "r.s.A.k|SOCK"} <= set(lex.entries)
    assert lex.utterances_seen == 2
    assert "utterances\t2" in (tmp_path / "r.txt").read_text()


def test_train_from_text(tmp_path):
    text = tmp_path / "s.txt"
    text.write_text("Nina.\nyou kicked off the sock\n")
    fw = tmp_path / "fw.txt"
    fw.write_text("the\n")
    out = tmp_path / "lex.tsv"
    assert run("train", text, "--text", "-o", out, "--zero-function-words", fw) == 0
    assert "n.i.n.a|NINA" in Dictionary.load(out)


def test_train_empty_and_missing(tmp_path, capsys):
    (tmp_path / "e.tsv").write_text("")
    assert run("train", tmp_path / "e.tsv", "-o", tmp_path / "l.tsv") == 0
    assert len(Dictionary.load(tmp_path / "l.tsv")) == 0
    assert run("train", tmp_path / "nope.tsv", "-o", tmp_path / "l.tsv") == 2
    assert "nope.tsv" in capsys.readouterr().err


def test_train_bad_corpus_line(tmp_path, capsys):
    (tmp_path / "c.tsv").write_text("a\tA\nb\tlower\n")
    assert run("train", tmp_path / "c.tsv", "-o", tmp_path / "l.tsv") == 2
    assert ":2:" in capsys.readouterr().err


def test_segment_examples(tmp_path, capsys):
    lex = tmp_path / "l.tsv"
    lex.write_text("n.i.n.a\tNINA\t0\t0\t0\ny.u\tYOU\t0\t0\t0\n")
    (tmp_path / "in.txt").write_text("y u n i n a\n\nq q\n")
    assert run("segment", lex, tmp_path / "in.txt") == 0
    assert capsys.readouterr().out == "0:y.u|YOU 2:n.i.n.a|NINA\n\n\n"
    assert run("segment", lex, "--phones", "n i n a") == 0
    assert capsys.readouterr().out == "0:n.i.n.a|NINA\n"
    assert run("segment", tmp_path / "missing.tsv", "--phones", "a") == 2


def test_eval_commands(tmp_path, capsys):
    gold = tmp_path / "g.tsv"
    gold.write_text("a b c d\tAB CD\t0:2:a.b|AB,2:4:c.d|CD\n")
    pred = tmp_path / "p.txt"
    pred.write_text("0:a.b|AB 2:c.d|CD\n")
    assert run("eval", pred, gold) == 0
    out = capsys.readouterr().out
    assert "boundary_f1\t1.000000" in out and "token_accuracy\t1.000000" in out
    lex = tmp_path / "l.tsv"
    lex.write_text("a.b\tAB\t1\t0\t0\nz\tZ\t1\t0\t0\n")
    assert run("eval", pred, gold, "--lexicon", lex, "--gold-lexicon", lex) == 0
    assert "lexicon_precision\t1.000000" in capsys.readouterr().out
    (tmp_path / "bad.txt").write_text("0:a.b|AB\n0:a|A\n")
    assert run("eval", tmp_path / "bad.txt", gold) == 2
    pred.write_text("0:a.b.c.d|AB\n")
    assert run("eval", pred, gold, "--min-f1", "0.5") == 1
    assert run("eval", pred, gold, "--lexicon", lex) == 2


def test_gen_outputs(tmp_path):
    out = tmp_path / "g"
    assert run("gen", out, "--utterances", 40, "--heldout", 7, "--seed", 3) == 0
    assert len((out / "corpus.tsv").read_text().splitlines()) == 40
    assert len((out / "heldout.tsv").read_text().splitlines()) == 7
    gold = Dictionary.load(out / "gold_lexicon.tsv")
    assert 0 < len(gold) <= 180
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run("gen", out, "--utterances", 40, "--heldout", 7, "--seed", 3) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_inspect_renders_tables(tmp_path, capsys):
    corpus = tmp_path / "c.tsv"
    corpus.write_text("n i n a\tNINA\nn i n a\tNINA\n")
    log = tmp_path / "t.log"
    assert run("train", corpus, "-o", tmp_path / "l.tsv", "--trace", log) == 0
    assert run("inspect", log) == 0
    text = capsys.readouterr().out
    first, second = text.split("== utterance 1")
    assert "Unparsed   ^ ^ ^ ^" in first and "accepted n.i.n.a|NINA" in first
    assert "Unparsed\n" in second and "Mismatched\n" in second and "good parse: yes" in second
    assert run("inspect", log, "--utterance", 1) == 0
    assert "utterance 0" not in capsys.readouterr().out
    (tmp_path / "empty.log").write_text("")
    assert run("inspect", tmp_path / "empty.log") == 0
    assert capsys.readouterr().out == ""
    (tmp_path / "bad.log").write_text("utt\t0\n")
    assert run("inspect", tmp_path / "bad.log") == 2


def test_help_shows_module_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        run("train", "--help")
    assert exc.value.code == 0
    text = "".join(capsys.readouterr().out.split())
    w = CostWeights()
    assert f"w_unparsed={w.w_unparsed:g}" in text and f"w_word={w.w_word:g}" in text
    assert f"(default:{TrainConfig().maintenance_interval})" in text
    assert f"(default:{SearchLimits().beam_width})" in text


def test_unknown_flags_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("train", "x", "-o", "y", "--bogus")
    assert exc.value.code == 2
    assert run("train", "x", "-o", "y", "--weights", "w_bogus=1") == 2


def test_parser_defaults_match_modules():
    ap = build_parser()
    args = ap.parse_args(["train", "c", "-o", "l"])
    cfg = TrainConfig()
    assert args.min_window_uses == cfg.min_window_uses and args.epochs == cfg.epochs
    assert args.exact_sememe_max == SearchLimits().exact_sememe_max
