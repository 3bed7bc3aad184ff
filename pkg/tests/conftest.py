import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from moatforge.families import (bipartite_fan, cycle, gap_gadget, potential_gadget,  # noqa: E402
                                random_instance, spider, subdiv_triangle)
from moatforge.instance import metric_closure  # noqa: E402

DEFAULT_DELTA = Fraction(429, 50000)


def fixtures():
    """Every named fixture at small parameters."""
    return [subdiv_triangle(), gap_gadget(), spider(2, 2), spider(2, 5), spider(3, 5),
            bipartite_fan(2, 3), cycle(12, 4), potential_gadget(DEFAULT_DELTA)]


def random_small(seed, n_max=8, k_max=5):
    import random
    rng = random.Random(seed)
    n = rng.randint(3, n_max)
    return random_instance(n, rng.randint(2, min(k_max, n)), seed)


@pytest.fixture
def triangle():
    return metric_closure(subdiv_triangle())


@pytest.fixture
def gadget():
    return metric_closure(gap_gadget())


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for text in acceptance.summary_lines():
        terminalreporter.write_line(text)
