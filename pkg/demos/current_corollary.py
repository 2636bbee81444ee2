"""Contact currents by boundary flux sum and by harmonic test function,
compared with the discrete bound K."""
from ddbounds.scenarios import current_report, psc_scenario, solve_scenario

for V in (0.0, 0.5, 1.0, 2.0):
    chain = solve_scenario(psc_scenario(2, voltage=V, G0=1.0))
    cur = current_report(chain.system, chain.state)
    for tag in sorted(cur.boundary):
        print(f"V={V:3.1f} {tag}: flux sum {cur.boundary[tag]:+.10e}  "
              f"test function {cur.volume[tag]:+.10e}  K {cur.k_bound[tag]:.4e}")
