"""Canned device scenarios, contact currents and sweep drivers.

Two families are provided:

* ``psc``: the one-dimensional three-layer perovskite cell on (0, 7) with
  ETL (0, 1), PVK (1, 5) and HTL (5, 7), optionally with mobile ionic
  vacancies confined to the PVK layer;
* ``lbic``: the two-dimensional p-n structure on (0, 8) x (0, 4) with a
  p-island (2, 6) x (1, 3) illuminated by a Gaussian beam.

Each scenario keeps the keyword parameters it was built from in
``scenario.params`` so that sweeps can rebuild it with one value changed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from . import bounds as _bounds
from .fvm import DiscreteSystem, StateVector
from .mesh import build_interval_mesh, lbic_fixture_mesh
from .model import (
    Z_N,
    Z_P,
    Contact,
    DeviceScenario,
    ExponentialDecay,
    GaussianBeam,
    RecombinationModel,
    SpeciesConfig,
    ZeroGeneration,
    validate_assumptions,
)
from .newton import NewtonConfig, NewtonError, decade_ladder, newton_solve, voltage_ladder
from .statistics import Blakemore, make_statistics

__all__ = [
    "ScenarioError",
    "NonOhmicContact",
    "CurrentMethod",
    "ContactCurrent",
    "CurrentReport",
    "SolveChain",
    "LbicSignal",
    "SweepRow",
    "PSC_DEFAULTS",
    "LBIC_DEFAULTS",
    "psc_scenario",
    "lbic_scenario",
    "build_scenario",
    "rebuild",
    "neutral_potential",
    "solve_scenario",
    "contact_current",
    "current_report",
    "lbic_scan",
    "line_positions",
    "parameter_sweep",
]


class ScenarioError(ValueError):
    """Invalid scenario parameters or failed hypothesis checks."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonOhmicContact(ValueError):
    pass


PSC_DEFAULTS = {
    "family": "psc",
    "species": 2,
    "voltage": 0.0,
    "G0": 0.0,
    "debye_length": 1.0,
    "doping": 10.0,
    "ion_doping": 7.5,
    "ion_mass": None,
    "saturation": 10.0,
    "statistics": "fermi_dirac_half",
    "r0_rad": 1.0,
    "tau": 1.0,
    "n_tau": 0.0,
    "spacing": 1.26e-2,
}

LBIC_DEFAULTS = {
    "family": "lbic",
    "center": (4.0, 2.0),
    "G0": 1.0,
    "voltage": 0.0,
    "debye_length": 1.0,
    "doping": 10.0,
    "width": 0.5,
    "statistics": "fermi_dirac_half",
    "r0_rad": 0.0,
    "tau": 1.0,
    "n_tau": 0.0,
}

# sweep parameter names -> scenario keywords
SWEEP_PARAMETERS = {"lambda": "debye_length", "C": "doping", "G0": "G0", "V": "voltage"}


def neutral_potential(stat_n, stat_p, doping):
    """psi with F_p(-psi) - F_n(psi) + C = 0 (local charge neutrality, v = 0)."""
    f = lambda psi: float(stat_p(-psi)) - float(stat_n(psi)) + doping
    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


@lru_cache(maxsize=8)
def _psc_mesh(spacing):
    return build_interval_mesh([("ETL", 0.0, 1.0), ("PVK", 1.0, 5.0), ("HTL", 5.0, 7.0)], spacing)


def _contacts(stat_n, stat_p, c_left, c_right, voltage):
    psi_l = neutral_potential(stat_n, stat_p, c_left)
    psi_r = neutral_potential(stat_n, stat_p, c_right)
    return {
        "contact1": Contact(psi_l, 0.0, 0.0),
        "contact2": Contact(psi_r + voltage, -voltage, voltage),
    }


def _recombination(p):
    return RecombinationModel(
        r0_rad=float(p["r0_rad"]), srh=True, tau_n=float(p["tau"]), tau_p=float(p["tau"]),
        n_ntau=float(p["n_tau"]), n_ptau=float(p["n_tau"]),
    )


def _merge(defaults, kw):
    unknown = set(kw) - set(defaults)
    if unknown:
        raise ScenarioError(f"unknown scenario parameters {sorted(unknown)}")
    p = dict(defaults)
    p.update(kw)
    return p


def _finalize(sc, validate):
    if validate:
        rep = validate_assumptions(sc)
        if not rep.ok:
            msg = "; ".join(f"{c['name']}: {c['message']}" for c in rep.failures)
            raise ScenarioError(f"scenario {sc.name!r} invalid: {msg}", rep)
    return sc


def psc_scenario(species=2, voltage=0.0, G0=0.0, *, validate=True, **kw):
    """Three-layer perovskite cell with two (n, p) or three (n, p, a) species.

    Parameters
    ----------
    species : {2, 3}
        Three species add vacancies (z_a = 1, Blakemore with ``saturation``)
        in PVK with background doping -ion_doping and mass |PVK| ion_doping.
    voltage : float
        Applied voltage at x = 7: -v_n = v_p = V, psi = psi_0 + V.
    G0 : float
        Amplitude of G = G0 exp(-(x - 1)) on PVK.
    """
    p = _merge(PSC_DEFAULTS, dict(kw, species=species, voltage=voltage, G0=G0))
    if p["species"] not in (2, 3):
        raise ScenarioError(f"species must be 2 or 3, got {p['species']!r}")
    for key in ("voltage", "G0", "debye_length", "doping"):
        if not math.isfinite(float(p[key])):
            raise ScenarioError(f"{key} must be finite")
    mesh = _psc_mesh(float(p["spacing"]))
    stat = make_statistics(p["statistics"])
    C = float(p["doping"])
    doping = {"ETL": C, "PVK": 0.0, "HTL": -C}
    spc = SpeciesConfig()
    if p["species"] == 3:
        ca = float(p["ion_doping"])
        doping["PVK"] = -ca
        mass = 4.0 * ca if p["ion_mass"] is None else float(p["ion_mass"])
        spc = SpeciesConfig(1, mass, ("PVK",), Blakemore(float(p["saturation"])))
    G0 = float(p["G0"])
    gen = (ExponentialDecay(G0, (1.0,), (1.0,), ("PVK",), ((1.0,), (5.0,)))
           if G0 != 0 else ZeroGeneration())
    sc = DeviceScenario(
        name=f"psc{p['species']}",
        mesh=mesh,
        doping=doping,
        stat_n=stat,
        stat_p=stat,
        recombination=_recombination(p),
        generation=gen,
        contacts=_contacts(stat, stat, C, -C, float(p["voltage"])),
        debye_length=float(p["debye_length"]),
        species=spc,
        params=p,
    )
    return _finalize(sc, validate)


def lbic_scenario(center=(4.0, 2.0), G0=1.0, debye_length=1.0, doping=10.0, *,
                  validate=True, **kw):
    """Two-dimensional p-n structure with a Gaussian beam at ``center``."""
    p = _merge(LBIC_DEFAULTS, dict(kw, center=tuple(float(c) for c in center), G0=G0,
                                   debye_length=debye_length, doping=doping))
    cx, cy = p["center"]
    if not (0.0 <= cx <= 8.0 and 0.0 <= cy <= 4.0):
        raise ScenarioError(f"beam center {p['center']} outside the device")
    mesh = lbic_fixture_mesh()
    stat = make_statistics(p["statistics"])
    C = float(p["doping"])
    G0 = float(p["G0"])
    gen = GaussianBeam(G0, p["center"], float(p["width"])) if G0 != 0 else ZeroGeneration()
    sc = DeviceScenario(
        name="lbic",
        mesh=mesh,
        doping={"n": C, "p": -C},
        stat_n=stat,
        stat_p=stat,
        recombination=_recombination(p),
        generation=gen,
        contacts=_contacts(stat, stat, C, C, float(p["voltage"])),
        debye_length=float(p["debye_length"]),
        params=p,
    )
    return _finalize(sc, validate)


def build_scenario(params):
    """Build a scenario from a parameter mapping carrying ``family``."""
    p = dict(params)
    family = p.pop("family", None)
    if family == "psc":
        return psc_scenario(**p)
    if family == "lbic":
        return lbic_scenario(**p)
    raise ScenarioError(f"unknown scenario family {family!r}")


def rebuild(scenario, **overrides):
    return build_scenario({**scenario.params, **overrides})


# ----------------------------------------------------------------------
# solving


@dataclass
class SolveChain:
    """Result of the voltage-then-generation continuation for one scenario."""

    scenario: DeviceScenario
    system: DiscreteSystem
    state: StateVector
    reports: list
    voltage_ladder: list
    generation_ladder: list

    @property
    def iterations(self):
        return sum(r.iterations for r in self.reports)


def solve_scenario(scenario, cfg=NewtonConfig(), voltage_steps=9, g_start=1e-2,
                   initial=None):
    """Solve by continuation: equilibrium, then voltage at G0 = 0, then G0 decades.

    With ``initial`` (a converged state for the same mesh and species) the
    ladders are skipped and Newton starts from it directly.
    """
    p = scenario.params
    V, G0 = float(p["voltage"]), float(p["G0"])
    if initial is not None:
        sys = DiscreteSystem(scenario)
        rep = newton_solve(sys, initial, cfg, label="direct")
        return SolveChain(scenario, sys, rep.state, [rep], [V], [G0])
    vl = voltage_ladder(V, voltage_steps) if V != 0 else [0.0]
    gl = decade_ladder(G0, g_start) if G0 != 0 else []
    reports = []
    base = rebuild(scenario, voltage=0.0, G0=0.0)
    sys = DiscreteSystem(base)
    state = sys.equilibrium_state()
    try:
        for v in vl:
            sys = DiscreteSystem(base if v == 0 else rebuild(scenario, voltage=v, G0=0.0))
            rep = newton_solve(sys, state, cfg, label=f"V={v!r}")
            reports.append(rep)
            state = rep.state
        for g in gl:
            sc = scenario if g == G0 else rebuild(scenario, G0=g)
            sys = DiscreteSystem(sc)
            rep = newton_solve(sys, state, cfg, label=f"G0={g!r}")
            reports.append(rep)
            state = rep.state
    except NewtonError as exc:
        exc.reports = reports
        raise
    if not gl and V != 0 and sys.scenario is not scenario:
        sys = DiscreteSystem(scenario)
    return SolveChain(scenario, sys, state, reports, vl, gl)


# ----------------------------------------------------------------------
# contact currents


class CurrentMethod(str, Enum):
    BOUNDARY_FLUX_SUM = "BoundaryFluxSum"
    VOLUME_TEST_FUNCTION = "VolumeTestFunction"


@dataclass(frozen=True)
class ContactCurrent:
    tag: str
    value: float
    method: CurrentMethod


def _check_ohmic(sys, tag):
    if tag not in sys.contact_nodes:
        raise NonOhmicContact(f"{tag!r} is not a Dirichlet contact")
    mine = set(sys.contact_nodes[tag].tolist())
    for other, nodes in sys.contact_nodes.items():
        if other != tag and mine.intersection(nodes.tolist()):
            raise NonOhmicContact(f"contacts {tag!r} and {other!r} share boundary vertices")


def harmonic_lift(sys, tag):
    """Discrete harmonic u: 1 on the contact, 0 on other Dirichlet nodes."""
    N = sys.N
    u = np.zeros(N)
    u[sys.contact_nodes[tag]] = 1.0
    free = ~sys.is_dirichlet
    if free.any():
        A = sys.mesh.stiffness(1.0)
        fi = np.nonzero(free)[0]
        rhs = -(A[fi] @ u)
        u[fi] = spla.spsolve(A[fi][:, fi].tocsc(), rhs)
    return u


def _state_array(sys, state):
    if isinstance(state, StateVector):
        return sys.pack(state)
    return np.asarray(state, dtype=float)


def contact_current(state, sys, tag, method=CurrentMethod.BOUNDARY_FLUX_SUM):
    """Outward current sum_alpha z_alpha j_alpha . nu through contact ``tag``."""
    _check_ohmic(sys, tag)
    x = _state_array(sys, state)
    method = CurrentMethod(method)
    if method is CurrentMethod.BOUNDARY_FLUX_SUM:
        bal_n, bal_p = sys.node_balances(x)
        nodes = sys.contact_nodes[tag]
        value = -float(np.sum(Z_P * bal_p[nodes] + Z_N * bal_n[nodes]))
    else:
        j_n, j_p = sys.edge_fluxes(x)
        u = harmonic_lift(sys, tag)
        J = Z_P * j_p + Z_N * j_n
        value = float(np.sum(J * (u[sys.L] - u[sys.K])))
    return ContactCurrent(tag, value, method)


@dataclass
class CurrentReport:
    """Both contact currents by both methods, plus conservation diagnostics."""

    boundary: dict
    volume: dict
    k_bound: dict
    scale: float

    @property
    def conservation_error(self):
        return abs(sum(self.boundary.values()))

    def method_gap(self, tag):
        return abs(self.boundary[tag] - self.volume[tag])

    def relative_gap(self, tag):
        return self.method_gap(tag) / max(abs(self.boundary[tag]), self.scale)


def current_report(sys, state):
    """Currents through every contact with the discrete bound K."""
    x = _state_array(sys, state)
    j_n, j_p = sys.edge_fluxes(x)
    T = sys.T
    norm_j = math.sqrt(float(np.sum(j_n**2 / T))) + math.sqrt(float(np.sum(j_p**2 / T)))
    b, v, k = {}, {}, {}
    for tag in sys.contact_nodes:
        b[tag] = contact_current(x, sys, tag, CurrentMethod.BOUNDARY_FLUX_SUM).value
        v[tag] = contact_current(x, sys, tag, CurrentMethod.VOLUME_TEST_FUNCTION).value
        u = harmonic_lift(sys, tag)
        k[tag] = norm_j * math.sqrt(float(np.sum(T * (u[sys.K] - u[sys.L]) ** 2)))
    gmax = float(np.sum(np.abs(sys.gvol)))
    scale = max(float(np.max(np.abs(j_n))) if j_n.size else 0.0,
                float(np.max(np.abs(j_p))) if j_p.size else 0.0, gmax)
    return CurrentReport(b, v, k, scale)


# ----------------------------------------------------------------------
# LBIC scans


@dataclass
class LbicSignal:
    positions: list
    currents: list
    failures: list = field(default_factory=list)
    contact: str = "contact2"

    def values(self):
        return np.array([c.value if c is not None else np.nan for c in self.currents])

    @property
    def ok(self):
        return not self.failures


def line_positions(y=2.0, mesh=None):
    """Beam positions at the node abscissae of the fixture mesh along a line."""
    mesh = lbic_fixture_mesh() if mesh is None else mesh
    xs = np.asarray(mesh.grid_lines[0], dtype=float)
    return [(float(x), float(y)) for x in xs]


def lbic_scan(positions, template, cfg=NewtonConfig(), threads=1, contact="contact2"):
    """Current through ``contact`` for each beam position.

    Every position starts from the same dark state (the template at G0 = 0),
    so results do not depend on scheduling; output follows input order.
    """
    positions = [tuple(float(c) for c in pos) for pos in positions]
    if not positions:
        raise ScenarioError("lbic_scan needs at least one position")
    dark = solve_scenario(rebuild(template, G0=0.0), cfg)
    G0 = float(template.params["G0"])

    def job(pos):
        sc = rebuild(template, center=pos)
        if G0 == 0:
            return contact_current(dark.state, DiscreteSystem(sc), contact)
        sys = DiscreteSystem(sc)
        try:
            state = newton_solve(sys, dark.state, cfg, label=f"beam {pos}").state
        except NewtonError:
            state = dark.state
            for g in decade_ladder(G0, 1e-2):
                sys = DiscreteSystem(rebuild(sc, G0=g))
                state = newton_solve(sys, state, cfg, label=f"beam {pos} G0={g!r}").state
        return contact_current(state, sys, contact)

    def safe(pos):
        try:
            return job(pos), None
        except (NewtonError, ValueError) as exc:
            return None, f"{pos}: {type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            results = list(ex.map(safe, positions))
    else:
        results = [safe(p) for p in positions]
    currents = [r[0] for r in results]
    failures = [r[1] for r in results if r[1] is not None]
    return LbicSignal(positions, currents, failures, contact)


# ----------------------------------------------------------------------
# parameter sweeps


@dataclass
class SweepRow:
    value: float
    norms: dict = None
    currents: dict = None
    verdict: object = None
    error: str = None

    @property
    def ok(self):
        return self.error is None and self.verdict is not None and self.verdict.hard_ok


def parameter_sweep(template, parameter, values, cfg=NewtonConfig(), bound_kw=None):
    """Solve ``template`` for each value of ``parameter`` (lambda, C, G0 or V).

    G0 and V rows warm-start from the previous converged row; lambda and C
    change the equilibrium and are solved from scratch.  Failures are
    recorded per row.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ScenarioError(f"unknown sweep parameter {parameter!r}")
    key = SWEEP_PARAMETERS[parameter]
    warm = parameter in ("G0", "V")
    rows = []
    prev = None
    for value in values:
        value = float(value)
        try:
            sc = rebuild(template, **{key: value})
            chain = solve_scenario(sc, cfg, initial=prev if warm else None)
        except (NewtonError, ValueError) as exc:
            rows.append(SweepRow(value, error=f"{type(exc).__name__}: {exc}"))
            prev = None
            continue
        prev = chain.state
        rows.append(evaluate_row(value, chain, bound_kw))
    return rows


def evaluate_row(value, chain, bound_kw=None):
    sys, state = chain.system, chain.state
    cert = _bounds.system_certificate(sys, **(bound_kw or {}))
    verdict = _bounds.verify_solution_bounds(state, cert, sys)
    cur = current_report(sys, state)
    return SweepRow(value, _bounds.linf_norms(state, sys), dict(cur.boundary), verdict)
