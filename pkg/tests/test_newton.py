import json
from pathlib import Path

import numpy as np
import pytest

from ddbounds.fvm import DiscreteSystem
from ddbounds.newton import (
    MaxIterations,
    NewtonConfig,
    NewtonError,
    continuation_solve,
    decade_ladder,
    newton_solve,
    voltage_ladder,
)
from ddbounds.scenarios import ScenarioError, psc_scenario, rebuild

FIXTURE = json.loads((Path(__file__).parent / "fixtures/psc2_voltage_ladder.json").read_text())


def test_config_validation():
    for bad in ({"max_iter": 0}, {"atol": 0.0}, {"damping_initial": 0.0},
                {"damping_min": 1.5}, {"damping_growth": 0.5}):
        with pytest.raises(ValueError):
            NewtonConfig(**bad)


def test_ladders():
    assert voltage_ladder(2.0) == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    assert decade_ladder(100.0) == [0.01, 0.1, 1.0, 10.0, 100.0]
    assert decade_ladder(0.5) == [0.01, 0.1, 0.5]
    assert decade_ladder(0.0) == []
    assert decade_ladder(1e-3) == [1e-3]


def test_equilibrium_needs_at_most_one_iteration():
    sys = DiscreteSystem(psc_scenario(3))
    rep = newton_solve(sys, sys.equilibrium_state())
    assert rep.converged and rep.iterations <= 1


def test_voltage_ladder_regression():
    template = psc_scenario(2)
    reps = continuation_solve(lambda v: DiscreteSystem(rebuild(template, voltage=v)),
                              FIXTURE["ladder"])
    its = [r.iterations for r in reps]
    assert all(r.converged for r in reps)
    assert max(its) <= 25
    assert its == FIXTURE["iterations"]


def test_residual_history_is_monotone_and_quadratic():
    template = psc_scenario(2)
    reps = continuation_solve(lambda v: DiscreteSystem(rebuild(template, voltage=v)),
                              [0.0, 0.25])
    r = np.array(reps[-1].residual_norms)
    assert np.all(np.diff(r) <= 0)
    logs = np.log(r[-3:])
    # log-residual curvature is negative near the solution
    assert (logs[2] - logs[1]) < (logs[1] - logs[0])


def test_infeasible_mass_is_caught_before_iterating():
    with pytest.raises(ScenarioError, match="mass compatibility"):
        psc_scenario(3, ion_mass=40.0)


def test_continuation_empty_and_single_rung():
    template = psc_scenario(2)
    build = lambda v: DiscreteSystem(rebuild(template, voltage=v))  # noqa: E731
    assert continuation_solve(build, []) == []
    (single,) = continuation_solve(build, [0.0])
    sys = build(0.0)
    direct = newton_solve(sys, sys.equilibrium_state())
    assert np.array_equal(single.state.psi, direct.state.psi)


def test_max_iterations_carries_best_iterate():
    template = psc_scenario(2)
    sys0 = DiscreteSystem(template)
    sys = DiscreteSystem(rebuild(template, voltage=1.0))
    with pytest.raises(MaxIterations) as info:
        newton_solve(sys, sys0.equilibrium_state(), NewtonConfig(max_iter=2))
    rep = info.value.report
    assert not rep.converged and rep.iterations == 2
    assert rep.residual_norms[-1] < rep.residual_norms[0]


def test_continuation_failure_reports_rung():
    template = psc_scenario(2)
    build = lambda v: DiscreteSystem(rebuild(template, voltage=v))  # noqa: E731
    with pytest.raises(NewtonError) as info:
        continuation_solve(build, [0.0, 2.0], NewtonConfig(max_iter=3))
    assert info.value.value == 2.0 and len(info.value.reports) == 1


def test_warm_start_dominates_cold_start(psc2_matrix):
    """Each G0 rung needs no more iterations than a cold start from equilibrium."""
    for g, chain in psc2_matrix[1:]:
        warm = chain.reports[-1].iterations
        sys = chain.system
        try:
            cold = newton_solve(sys, DiscreteSystem(rebuild(chain.scenario, voltage=0.0, G0=0.0))
                                .equilibrium_state()).iterations
        except NewtonError:
            cold = np.inf
        assert warm <= cold


def test_solves_are_bitwise_deterministic():
    template = psc_scenario(2)
    build = lambda v: DiscreteSystem(rebuild(template, voltage=v, G0=1.0))  # noqa: E731
    a = continuation_solve(build, [0.0, 0.5])[-1].state
    b = continuation_solve(build, [0.0, 0.5])[-1].state
    assert a.to_array().tobytes() == b.to_array().tobytes()
