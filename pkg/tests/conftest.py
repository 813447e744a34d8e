import itertools
import os
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from bbim.model import IsingInstance

LONGRUN = os.environ.get("BBIM_LONGRUN") == "1"
ACCEPTANCE_KEY = pytest.StashKey[dict]()
N_CRITERIA = 13
OPTIONAL = {13}


def pytest_collection_modifyitems(config, items):
    if LONGRUN:
        return
    skip = pytest.mark.skip(reason="set BBIM_LONGRUN=1 to run")
    for item in items:
        if "longrun" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, None)
    if lines is None:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        tag = f"{k:2d}{' (optional)' if k in OPTIONAL else ''}"
        terminalreporter.write_line(f"{tag}: {lines.get(k, 'NOT RUN')}")


def random_instance(rng, n, density=0.6, weights=(-2, -1, 1, 2), triples=0, fields=True):
    """Small random instance with integer couplings."""
    pairs = [(i, j, int(rng.choice(weights)))
             for i, j in itertools.combinations(range(n), 2) if rng.random() < density]
    h = [int(rng.choice((-2, -1, 0, 1, 2))) for _ in range(n)] if fields else None
    tri = []
    if triples and n >= 3:
        combos = list(itertools.combinations(range(n), 3))
        pick = rng.choice(len(combos), size=min(triples, len(combos)), replace=False)
        tri = [(*combos[k], int(rng.choice(weights))) for k in pick]
    return IsingInstance.build(n, pairs, h, tri)


def naive_energy(inst, m):
    """Energy straight from the rational coupling lists, no shared code with the package."""
    e = Fraction(0)
    for i, j, k, w in inst.triples:
        e -= w * m[i] * m[j] * m[k]
    for i, j, w in inst.pairs:
        e -= w * m[i] * m[j]
    for i, h in enumerate(inst.fields):
        e -= h * m[i]
    return e


def all_states(n):
    return [np.array(s) for s in itertools.product((-1, 1), repeat=n)]


@st.composite
def instances(draw, max_n=7, triples=True, rational=False):
    n = draw(st.integers(1, max_n))
    w = st.integers(-3, 3)
    if rational:
        w = st.fractions(min_value=-3, max_value=3, max_denominator=4)
    pairs = [(i, j, draw(w)) for i, j in itertools.combinations(range(n), 2)
             if draw(st.booleans())]
    pairs = [p for p in pairs if p[2] != 0]
    h = [draw(w) for _ in range(n)]
    tri = []
    if triples and n >= 3:
        tri = [(i, j, k, draw(w)) for i, j, k in itertools.combinations(range(n), 3)
               if draw(st.integers(0, 3)) == 0]
        tri = [t for t in tri if t[3] != 0]
    return IsingInstance.build(n, pairs, h, tri)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
