"""Print the explicit a-priori bounds for each bundled configuration and
check a converged solution against them."""
from ddbounds import bounds as B
from ddbounds.config import bundled_configs, load_config
from ddbounds.scenarios import solve_scenario

for name in bundled_configs():
    cfg = load_config(name)
    chain = solve_scenario(cfg.build_scenario(), cfg.newton())
    cert = B.system_certificate(chain.system, **cfg.bound_kw())
    verdict = B.verify_solution_bounds(chain.state, cert, chain.system)
    norms = B.linf_norms(chain.state, chain.system)
    print(f"== {name}")
    print(f"   N_bar={cert.N_bar:.6g}  max n_n={norms['n_n']:.6g}  max n_p={norms['n_p']:.6g}")
    print(f"   M_psi={cert.M_psi:.6g}  max |psi|={norms['psi']:.6g}")
    print(f"   hard_ok={verdict.hard_ok}  certificate_ok={verdict.certificate_ok}")
