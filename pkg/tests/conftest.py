import os
import sys
import random

import pytest

from lexrec.corpus import read_conllulex
from lexrec.synthetic import random_corpus

DATA = os.path.join(os.path.dirname(__file__), "data")

FIG2_TAGS = ["O-PRON", "B-V.VPC.full-v.Motion", "o-PRON.POSS", "o-N-n.ARTIFACT", "I_",
             "O-P-p.Purpose", "O-DET", "O-N-n.ACT", "O-P-p.Theme", "O-DET", "B-N-n.ARTIFACT", "I_"]


@pytest.fixture(scope="session")
def fig2_path():
    return os.path.join(DATA, "fig2.conllulex")


@pytest.fixture(scope="session")
def fig2(fig2_path):
    return read_conllulex(fig2_path)[0]


@pytest.fixture(scope="session")
def synth():
    return random_corpus(300, seed=11)


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda l: int(l.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
