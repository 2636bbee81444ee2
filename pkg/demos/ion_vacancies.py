"""Three-species cell: mobile vacancies confined to the absorber.

The vacancy density stays strictly below its saturation S_a = 10 for every
illumination level, and the total ion mass (n_a integrated over the absorber part
of each control volume) is conserved.
"""
import numpy as np

from ddbounds.newton import NewtonConfig
from ddbounds.scenarios import psc_scenario, rebuild, solve_scenario

template = psc_scenario(3, voltage=1.0, G0=1e-2)
prev = None
for g in (1e-2, 1e-1, 1.0, 10.0, 100.0):
    chain = solve_scenario(rebuild(template, G0=g), NewtonConfig(), initial=prev)
    prev = chain.state
    sys, state = chain.system, chain.state
    n_a = sys.densities(state)[2]
    mass = float(np.dot(sys.ion_vol, n_a))
    print(f"G0={g:<6g} max n_a={n_a.max():.6f}  mass={mass:.12f}  v_a={state.v_a:+.6f}")
