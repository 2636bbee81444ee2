"""Perovskite cell under forward bias: how densities respond to light.

Solves the two-species cell at V = 2 for a decade ladder of generation
amplitudes and prints the max-norms of the densities together with the
explicit upper bound N_bar for each amplitude.
"""
from ddbounds import bounds as B
from ddbounds.fvm import DiscreteSystem
from ddbounds.scenarios import parameter_sweep, psc_scenario

template = psc_scenario(2, voltage=2.0)
rows = parameter_sweep(template, "G0", [1e-2, 1e-1, 1.0, 10.0, 100.0])

print(f"{'G0':>8} {'max n_n':>12} {'max n_p':>12} {'N_bar':>12} {'I(contact2)':>14}")
for row in rows:
    cert = B.system_certificate(DiscreteSystem(psc_scenario(2, voltage=2.0, G0=row.value)))
    print(f"{row.value:8.2g} {row.norms['n_n']:12.5g} {row.norms['n_p']:12.5g} "
          f"{cert.N_bar:12.5g} {row.currents['contact2']:14.6g}")
