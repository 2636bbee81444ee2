import numpy as np
import pytest

from ddbounds.fvm import DiscreteSystem
from ddbounds.newton import NewtonConfig
from ddbounds.scenarios import (
    CurrentMethod,
    NonOhmicContact,
    ScenarioError,
    build_scenario,
    contact_current,
    current_report,
    lbic_scan,
    lbic_scenario,
    line_positions,
    neutral_potential,
    parameter_sweep,
    psc_scenario,
    rebuild,
    solve_scenario,
)
from ddbounds.statistics import Boltzmann


def test_default_three_species_mass_is_admissible():
    sc = psc_scenario(3)
    assert sc.species.mass == 30.0
    # |PVK| S_a = 40 is the saturation limit
    with pytest.raises(ScenarioError):
        psc_scenario(3, ion_mass=40.0)


def test_scenario_parameter_errors():
    with pytest.raises(ScenarioError):
        psc_scenario(4)
    with pytest.raises(ScenarioError):
        psc_scenario(2, colour="red")
    with pytest.raises(ScenarioError):
        psc_scenario(2, voltage=float("nan"))
    with pytest.raises(ScenarioError):
        lbic_scenario(center=(9.0, 2.0))
    with pytest.raises(ScenarioError):
        build_scenario({"family": "diode"})


def test_beam_on_device_corner_is_valid():
    sc = lbic_scenario(center=(0.0, 0.0))
    sys = DiscreteSystem(sc)
    assert np.all(sys.gvol >= 0) and sys.gvol.sum() > 0


def test_zero_amplitude_means_zero_generation():
    for sc in (psc_scenario(2, G0=0.0), lbic_scenario(G0=0.0)):
        assert not np.any(DiscreteSystem(sc).gvol)


def test_rebuild_round_trips_parameters():
    sc = psc_scenario(3, voltage=0.5, G0=2.0)
    assert build_scenario(sc.params).params == sc.params
    assert rebuild(sc, G0=3.0).params["G0"] == 3.0


def test_neutral_potential_boltzmann():
    # 2 sinh(psi) = C
    psi = neutral_potential(Boltzmann(), Boltzmann(), 10.0)
    assert psi == pytest.approx(np.arcsinh(5.0), rel=1e-14)


def test_equilibrium_currents_vanish():
    sys = DiscreteSystem(psc_scenario(3))
    cur = current_report(sys, sys.equilibrium_state())
    for tag in cur.boundary:
        assert abs(cur.boundary[tag]) < 1e-10
        assert abs(cur.volume[tag]) < 1e-10


def test_unknown_contact_is_not_ohmic():
    sys = DiscreteSystem(psc_scenario(2))
    with pytest.raises(NonOhmicContact):
        contact_current(sys.equilibrium_state(), sys, "side")


def test_shared_contact_vertices_are_rejected():
    sys = DiscreteSystem(psc_scenario(2))
    nodes = dict(sys.contact_nodes)
    nodes["contact2"] = np.concatenate([nodes["contact2"], nodes["contact1"]])
    sys.contact_nodes = nodes
    with pytest.raises(NonOhmicContact, match="share"):
        contact_current(sys.equilibrium_state(), sys, "contact1")


def test_both_current_methods_agree_under_bias():
    chain = solve_scenario(psc_scenario(2, voltage=0.5, G0=1.0))
    a = contact_current(chain.state, chain.system, "contact2", CurrentMethod.BOUNDARY_FLUX_SUM)
    b = contact_current(chain.state, chain.system, "contact2", "VolumeTestFunction")
    assert b.value == pytest.approx(a.value, rel=1e-8)


def test_forward_dark_current_leaves_through_contact1():
    chain = solve_scenario(psc_scenario(2, voltage=1.0))
    cur = current_report(chain.system, chain.state)
    assert cur.boundary["contact1"] > 0 > cur.boundary["contact2"]


def test_solve_chain_ladders():
    chain = solve_scenario(psc_scenario(2, voltage=1.0, G0=1.0), voltage_steps=5)
    assert chain.voltage_ladder == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert chain.generation_ladder == [0.01, 0.1, 1.0]
    assert len(chain.reports) == 8
    assert chain.system.scenario.params["G0"] == 1.0


def test_scan_needs_positions():
    with pytest.raises(ScenarioError):
        lbic_scan([], lbic_scenario())


def test_dark_scan_gives_identical_currents():
    sig = lbic_scan(line_positions()[:3], lbic_scenario(G0=0.0))
    vals = sig.values()
    assert sig.ok and np.all(vals == vals[0])
    assert abs(vals[0]) < 1e-10


def test_centered_beam_current_is_small(lbic_chain):
    cur = current_report(lbic_chain.system, lbic_chain.state)
    # the beam sits on the symmetry line between the contacts
    assert abs(cur.boundary["contact2"]) < 1e-8 * cur.scale


def test_single_value_sweep_matches_direct_solve():
    template = psc_scenario(2, voltage=0.5)
    (row,) = parameter_sweep(template, "G0", [1.0])
    direct = solve_scenario(rebuild(template, G0=1.0))
    cur = current_report(direct.system, direct.state)
    assert row.ok
    assert row.currents == cur.boundary


def test_sweep_records_failures_per_row():
    template = psc_scenario(2)
    rows = parameter_sweep(template, "V", [0.0, 3.0], NewtonConfig(max_iter=2))
    assert rows[0].ok
    assert rows[1].error and "MaxIterations" in rows[1].error
    with pytest.raises(ScenarioError):
        parameter_sweep(template, "T", [1.0])
