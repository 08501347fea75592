import pytest

from lexlearn import Dictionary, LexEntry, Utterance

ACCEPTANCE: list[str] = []


def record(name: str, ok: bool, detail: str = "") -> None:
    """Remember one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def make_dict(*ids: str, **counters) -> Dictionary:
    d = Dictionary()
    for eid in ids:
        d.add(LexEntry.from_id(eid, **counters), gate_on=False)
    return d


NINA = Utterance.parse("n i n a", "NINA")
SOCK = Utterance.parse("y u k I k t O f D @ s A k", "KICK YOU OFF SOCK THE")
SOCK_DICT_IDS = ("y.u|YOU", "D.@|THE", "r.s.A.k|SOCK")


@pytest.fixture
def sock_dict() -> Dictionary:
    return make_dict(*SOCK_DICT_IDS)
