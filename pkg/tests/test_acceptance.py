"""The eleven acceptance criteria, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the CRITERION lines are
printed even when output is captured.
"""
import time

import numpy as np
import pytest

from oracles import dense_equilibrium_psi, minimal_zeta, synthetic_energy

from ddbounds import bounds as B
from ddbounds.cli import main as cli_main
from ddbounds.fvm import DiscreteSystem, StateVector, bernoulli, classical_sg_flux, species_edge_flux
from ddbounds.scenarios import (
    current_report,
    lbic_scan,
    lbic_scenario,
    line_positions,
    psc_scenario,
)
from ddbounds.statistics import Boltzmann


# ----------------------------------------------------------------------
# 1. thermodynamic consistency


def test_criterion_01_thermodynamic_consistency(criterion):
    worst_res, worst_cur, worst_time = 0.0, 0.0, 0.0
    for make in (lambda: psc_scenario(2), lambda: psc_scenario(3),
                 lambda: lbic_scenario(G0=0.0)):
        sc = make()
        t0 = time.perf_counter()
        sys = DiscreteSystem(sc)
        state = sys.equilibrium_state()
        x = sys.pack(state)
        res = sys.residual(x)
        N = sys.N
        free = np.concatenate([~sys.is_dirichlet, ~sys.is_dirichlet])
        cont = res[N:3 * N][free]
        cur = current_report(sys, x)
        currents = list(cur.boundary.values()) + list(cur.volume.values())
        worst_time = max(worst_time, time.perf_counter() - t0)
        worst_res = max(worst_res, float(np.max(np.abs(cont))))
        worst_cur = max(worst_cur, float(np.max(np.abs(currents))))
    ok = worst_res <= 1e-12 and worst_cur <= 1e-12 and worst_time < 1.0
    criterion(1, ok, f"max continuity residual {worst_res:.2e}, max |I| {worst_cur:.2e}, "
                     f"slowest {worst_time:.2f} s")


# ----------------------------------------------------------------------
# 2. Jacobian correctness


def _random_states(sys, base, rng, count):
    out = []
    while len(out) < count:
        psi = base.psi + 0.5 * rng.standard_normal(sys.N)
        vn = 0.5 * rng.standard_normal(sys.N)
        vp = 0.5 * rng.standard_normal(sys.N)
        va = base.v_a + 0.2 * rng.standard_normal() if sys.ions else None
        st = StateVector(psi, vn, vp, va)
        try:
            sys.densities(st)
        except ValueError:
            continue
        out.append(sys.pack(st))
    return out


def test_criterion_02_jacobian(criterion):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    cases = (psc_scenario(2, voltage=1.0, G0=1.0), psc_scenario(3, voltage=1.0, G0=1.0),
             lbic_scenario())
    for sc in cases:
        sys = DiscreteSystem(sc)
        base = sys.equilibrium_state()
        for x in _random_states(sys, base, rng, 20):
            J = sys.jacobian(x)
            for _ in range(2):
                w = rng.standard_normal(x.size)
                eps = 1e-6
                fd = (sys.residual(x + eps * w) - sys.residual(x - eps * w)) / (2 * eps)
                jw = J @ w
                worst = max(worst, float(np.max(np.abs(jw - fd)) / np.max(np.abs(jw))))
    elapsed = time.perf_counter() - t0
    criterion(2, worst <= 1e-5 and elapsed < 30.0,
              f"worst relative FD mismatch {worst:.2e} over 60 states, {elapsed:.1f} s")


# ----------------------------------------------------------------------
# 3. flux degeneration


def test_criterion_03_sg_degeneration(criterion):
    rng = np.random.default_rng(3)
    n = 10_000
    F = Boltzmann()
    worst = 0.0
    for z in (-1, 1):
        psi_K, psi_L, v_K, v_L = rng.uniform(-10, 10, (4, n))
        T = rng.uniform(0.1, 10.0, n)
        j = species_edge_flux(F, z, psi_K, psi_L, v_K, v_L, T).value
        n_K, n_L = np.exp(v_K - z * psi_K), np.exp(v_L - z * psi_L)
        ref = classical_sg_flux(z, psi_K, psi_L, n_K, n_L, T)
        d = z * (psi_L - psi_K)
        scale = T * (bernoulli(d) * n_K + bernoulli(-d) * n_L)
        worst = max(worst, float(np.max(np.abs(j - ref) / scale)))
    criterion(3, worst <= 1e-14, f"max relative deviation {worst:.2e} on 2 x 1e4 edges")


# ----------------------------------------------------------------------
# 4-7. runs of the scenario matrix


def _all_runs(psc2_matrix, psc3_matrix, lbic_chain):
    runs = [(f"psc2 G0={g:g}", c) for g, c in psc2_matrix]
    runs += [(f"psc3 G0={g:g}", c) for g, c in psc3_matrix]
    runs.append(("lbic", lbic_chain))
    return runs


def test_criterion_04_discrete_current_corollary(criterion, psc2_matrix, psc3_matrix, lbic_chain):
    cons, gap, kfail = 0.0, 0.0, []
    for label, chain in _all_runs(psc2_matrix, psc3_matrix, lbic_chain):
        cur = current_report(chain.system, chain.state)
        cons = max(cons, cur.conservation_error / cur.scale)
        for tag in cur.boundary:
            gap = max(gap, cur.relative_gap(tag))
            if abs(cur.boundary[tag]) > cur.k_bound[tag]:
                kfail.append(f"{label}:{tag}")
    elapsed = psc2_matrix.elapsed + psc3_matrix.elapsed + lbic_chain.elapsed
    ok = cons <= 1e-10 and gap <= 1e-8 and not kfail and elapsed < 300.0
    criterion(4, ok, f"(a) max |I1+I2|/scale {cons:.2e}, (b) max method gap {gap:.2e}, "
                     f"(c) K violations {kfail or 'none'}, runs {elapsed:.1f} s")


def test_criterion_05_saturation(criterion, psc3_matrix):
    margins = []
    for g, chain in psc3_matrix:
        _, _, na = chain.system.densities(chain.state)
        margins.append(10.0 - float(np.max(na[chain.system.ion_nodes])))
    criterion(5, min(margins) > 0, f"smallest margin S_a - max n_a = {min(margins):.6f}")


def test_criterion_06_mass(criterion, psc3_matrix):
    worst = 0.0
    for g, chain in psc3_matrix:
        sys = chain.system
        _, _, na = sys.densities(chain.state)
        worst = max(worst, abs(float(sys.ion_vol @ na) - 30.0))
    criterion(6, worst <= 1e-10 * 30.0, f"max |int n_a - 30| = {worst:.2e}")


def test_criterion_07_fig3_trend(criterion, psc2_matrix):
    nn = np.array([B.linf_norms(c.state, c.system)["n_n"] for _, c in psc2_matrix])
    npp = np.array([B.linf_norms(c.state, c.system)["n_p"] for _, c in psc2_matrix])
    gs = np.array([g for g, _ in psc2_matrix])
    mono = bool(np.all(np.diff(nn) >= 0) and np.all(np.diff(npp) >= 0))
    low = gs <= 1.0
    within = bool(np.all(nn[low] <= 3 * nn[0]) and np.all(npp[low] <= 3 * npp[0]))
    pvk = []
    for _, c in psc2_matrix:
        inside = c.system.mesh.region_volumes[:, c.system.mesh.region_index("PVK")] == c.system.vol
        dens = c.system.densities(c.state)
        pvk.append(round(float(max(dens[0][inside].max(), dens[1][inside].max())), 4))
    last = psc2_matrix[-1][1].state
    finite = all(np.all(np.isfinite(a)) for a in (last.psi, last.v_n, last.v_p))
    criterion(7, mono and within and finite,
              f"|n_n| {nn.round(6).tolist()}, |n_p| {npp.round(6).tolist()}, "
              f"monotone {mono}, factor-3 {within}, finite at 1e2 {finite}; "
              f"absorber-only max density {pvk}")


# ----------------------------------------------------------------------
# 8. LBIC trends


@pytest.fixture(scope="module")
def lbic_scans():
    t0 = time.perf_counter()
    pos = line_positions(2.0)
    scans = {("base", None): lbic_scan(pos, lbic_scenario())}
    for key, vals in (("debye_length", (0.5, 2.0)), ("doping", (5.0, 20.0)), ("G0", (0.5, 2.0))):
        for v in vals:
            scans[(key, v)] = lbic_scan(pos, lbic_scenario(**{key: v}))
    return scans, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_08_lbic_trends(criterion, lbic_scans):
    scans, elapsed = lbic_scans
    base = scans[("base", None)]
    xs = np.array([p[0] for p in base.positions])
    I = base.values()
    imin, imax = int(np.argmin(I)), int(np.argmax(I))
    unique = np.sum(I == I[imin]) == 1 and np.sum(I == I[imax]) == 1
    order = xs[imin] < xs[imax]
    # informational: the same ordering for the opposite orientation (-I)
    mirrored = xs[int(np.argmin(-I))] < xs[int(np.argmax(-I))]

    def peak(key, v):
        s = base if v is None else scans[(key, v)]
        return float(np.max(np.abs(s.values())))

    lam = [peak("debye_length", 0.5), peak("base", None), peak("debye_length", 2.0)]
    dop = [peak("doping", 5.0), peak("base", None), peak("doping", 20.0)]
    gen = [peak("G0", 0.5), peak("base", None), peak("G0", 2.0)]
    trends = (lam[0] > lam[1] > lam[2]) and (dop[0] < dop[1] < dop[2]) and (gen[0] < gen[1] < gen[2])
    failures = sum(len(s.failures) for s in scans.values())
    ok = bool(unique and order and trends and failures == 0 and elapsed < 600.0)
    criterion(8, ok,
              f"min at x={xs[imin]:g}, max at x={xs[imax]:g} (min left of max: {order}; "
              f"with reversed sign: {mirrored}); "
              f"peak|I| lambda 0.5/1/2 {np.round(lam, 4).tolist()}, C 5/10/20 "
              f"{np.round(dop, 4).tolist()}, G0 0.5/1/2 {np.round(gen, 4).tolist()}; "
              f"trends {trends}; failed positions {failures}; {elapsed:.0f} s")


# ----------------------------------------------------------------------
# 9. Stampacchia


def test_criterion_09_stampacchia(criterion):
    exact = B.stampacchia_root(0.0, 1.0, 1.0, 2.0, 1.0) == 4.0
    trivial = B.stampacchia_root(1.5, 2.0, 3.0, 1.5, 0.0) == 1.5
    rng = np.random.default_rng(9)
    misses = 0
    for _ in range(100):
        beta = rng.uniform(1.1, 4.0)
        alpha = rng.uniform(0.5, 6.0)
        m = rng.uniform(0.2, 1.0) * alpha / (beta - 1.0)
        x0 = rng.uniform(-3.0, 3.0)
        d = rng.uniform(0.1, 5.0)
        E = synthetic_energy(x0, d, m)
        zeta = 1.05 * minimal_zeta(E, x0, d, alpha, beta)
        x_star = B.stampacchia_root(x0, zeta, alpha, beta, float(E(x0)))
        beyond = x_star + np.linspace(0.0, 10.0, 50)
        if np.any(E(beyond) != 0.0):
            misses += 1
    criterion(9, exact and trivial and misses == 0,
              f"(0,1,1,2,1) -> 4: {exact}; E0=0 -> x0: {trivial}; "
              f"{misses}/100 synthetic energies nonzero beyond x*")


# ----------------------------------------------------------------------
# 10. dense oracle


def test_criterion_10_dense_oracle(criterion, fd_spline):
    sc = psc_scenario(2)
    sys = DiscreteSystem(sc)
    psi = sys.equilibrium_state().psi
    ref = dense_equilibrium_psi(sc.mesh.nodes[:, 0], [(0, 1), (1, 5), (5, 7)], [10.0, 0.0, -10.0],
                                fd_spline)
    err = float(np.max(np.abs(psi - ref)))
    criterion(10, err <= 1e-8, f"max |psi - psi_oracle| = {err:.2e} on {sys.N} nodes")


# ----------------------------------------------------------------------
# 11. determinism


def test_criterion_11_determinism(criterion, tmp_path):
    rc = [cli_main(["solve", "psc_two_species", "--out", str(tmp_path / f"s{i}")]) for i in (1, 2)]
    same_solve = (tmp_path / "s1/profile.csv").read_bytes() == (tmp_path / "s2/profile.csv").read_bytes()
    rc += [cli_main(["lbic", "lbic", "--threads", str(t), "--out", str(tmp_path / f"l{t}")])
           for t in (4, 1)]
    same_lbic = (tmp_path / "l4/lbic.csv").read_bytes() == (tmp_path / "l1/lbic.csv").read_bytes()
    criterion(11, rc == [0, 0, 0, 0] and same_solve and same_lbic,
              f"exit codes {rc}; solve CSVs identical {same_solve}; "
              f"lbic threads 4 vs 1 identical {same_lbic}")
