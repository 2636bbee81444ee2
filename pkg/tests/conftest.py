import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ddbounds.newton import NewtonConfig  # noqa: E402
from ddbounds.scenarios import lbic_scenario, psc_scenario, rebuild, solve_scenario  # noqa: E402

G_LADDER = [1e-2, 1e-1, 1.0, 10.0, 100.0]


class Timed(list):
    """A list of results that remembers how long it took to compute."""

    elapsed = 0.0


def _g_matrix(template):
    """Converged chains for each G0 of the ladder, warm-started in order."""
    t0 = time.perf_counter()
    out = Timed()
    prev = None
    for g in G_LADDER:
        sc = rebuild(template, G0=g)
        chain = solve_scenario(sc, NewtonConfig(), initial=prev)
        out.append((g, chain))
        prev = chain.state
    out.elapsed = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def psc2_matrix():
    return _g_matrix(psc_scenario(2, voltage=2.0, G0=1e-2))


@pytest.fixture(scope="session")
def psc3_matrix():
    return _g_matrix(psc_scenario(3, voltage=1.0, G0=1e-2))


@pytest.fixture(scope="session")
def lbic_chain():
    t0 = time.perf_counter()
    chain = solve_scenario(lbic_scenario())
    chain.elapsed = time.perf_counter() - t0
    return chain


@pytest.fixture(scope="session")
def fd_spline():
    from oracles import SplineFD

    return SplineFD()


@pytest.fixture
def criterion(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert."""

    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return report
