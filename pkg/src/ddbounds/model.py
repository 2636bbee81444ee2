"""Physical ingredients of the stationary model: recombination, photogeneration,
species configuration, the device scenario container and the validation of the
model hypotheses against a mesh.

Nothing here knows about assembly or solvers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .statistics import Blakemore, Boltzmann, FermiDiracHalf, StatisticsError

__all__ = [
    "RecombinationModel",
    "ZeroGeneration",
    "ExponentialDecay",
    "GaussianBeam",
    "SpeciesConfig",
    "Contact",
    "DeviceScenario",
    "ValidationReport",
    "eval_statistics",
    "eval_statistics_inverse",
    "diffusion_enhancement",
    "recombination",
    "eval_generation",
    "validate_assumptions",
]

Z_N = -1
Z_P = 1


def eval_statistics(F, eta):
    """Density F(eta).  Raises StatisticsError on overflow or non-finite input."""
    return F(eta)


def eval_statistics_inverse(F, n):
    return F.inverse(n)


def diffusion_enhancement(F, n):
    """D(n) = n (F^{-1})'(n), at least 1 for admissible statistics."""
    return F.diffusion_enhancement(n)


@dataclass(frozen=True)
class RecombinationModel:
    """Radiative plus (optional) Shockley-Read-Hall rate prefactor.

    The total rate is R = r(n_n, n_p) n_n n_p (1 - exp(-s)) with
    s = F_n^{-1}(n_n) + F_p^{-1}(n_p) and

        r = r0_rad + 1 / (tau_n (n_n + n_ntau) + tau_p (n_p + n_ptau)).
    """

    r0_rad: float = 0.0
    srh: bool = True
    tau_n: float = 1.0
    tau_p: float = 1.0
    n_ntau: float = 1.0
    n_ptau: float = 1.0

    def rate(self, n_n, n_p):
        """Prefactor r and its partial derivatives (r, dr/dn_n, dr/dn_p)."""
        n_n = np.asarray(n_n, dtype=float)
        n_p = np.asarray(n_p, dtype=float)
        r = np.full(np.broadcast(n_n, n_p).shape, float(self.r0_rad))
        dr_n = np.zeros_like(r)
        dr_p = np.zeros_like(r)
        if self.srh:
            den = self.tau_n * (n_n + self.n_ntau) + self.tau_p * (n_p + self.n_ptau)
            r = r + 1.0 / den
            dr_n = -self.tau_n / den**2
            dr_p = -self.tau_p / den**2
        return r, dr_n, dr_p

    def rate_bound(self):
        """Upper bound r0 on the prefactor for positive densities."""
        if not self.srh:
            return float(self.r0_rad)
        floor = self.tau_n * self.n_ntau + self.tau_p * self.n_ptau
        return float(self.r0_rad) + (np.inf if floor <= 0 else 1.0 / floor)

    def evaluate(self, n_n, n_p, s):
        """R and partials (dR/dn_n, dR/dn_p, dR/ds) given the splitting s."""
        n_n = np.asarray(n_n, dtype=float)
        n_p = np.asarray(n_p, dtype=float)
        s = np.asarray(s, dtype=float)
        r, dr_n, dr_p = self.rate(n_n, n_p)
        one_minus = -np.expm1(-s)
        prod = n_n * n_p
        R = r * prod * one_minus
        dR_n = (dr_n * prod + r * n_p) * one_minus
        dR_p = (dr_p * prod + r * n_n) * one_minus
        dR_s = r * prod * np.exp(-s)
        return R, dR_n, dR_p, dR_s


def recombination(model, F_n, F_p, n_n, n_p):
    """Recombination-generation rate R(n_n, n_p) for the given statistics."""
    s = F_n.inverse(n_n) + F_p.inverse(n_p)
    return model.evaluate(n_n, n_p, s)[0]


# --------------------------------------------------------------------------
# photogeneration


@dataclass(frozen=True)
class ZeroGeneration:
    kind: str = field(default="zero", init=False)
    amplitude: float = 0.0

    def __call__(self, x, regions=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.zeros(x.shape[0])

    def scaled(self, amplitude):
        return self


@dataclass(frozen=True)
class ExponentialDecay:
    """G(x) = G0 exp(-(x - origin).direction) on the support region only.

    The support is given both as region tags (used with mesh-aware
    evaluation) and as a closed box used when only a position is known.
    """

    amplitude: float
    direction: tuple
    origin: tuple
    support: tuple = ()
    support_box: Optional[tuple] = None
    kind: str = field(default="exponential", init=False)

    def __call__(self, x, regions=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = np.asarray(self.direction, dtype=float)
        d = d / np.linalg.norm(d)
        g = self.amplitude * np.exp(-(x - np.asarray(self.origin, dtype=float)) @ d)
        if regions is not None:
            inside = np.isin(np.asarray(regions), list(self.support))
        elif self.support_box is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.support_box)
            inside = np.all((x >= lo) & (x <= hi), axis=1)
        else:
            inside = np.ones(x.shape[0], dtype=bool)
        return np.where(inside, g, 0.0)

    def scaled(self, amplitude):
        return ExponentialDecay(
            amplitude, self.direction, self.origin, self.support, self.support_box
        )


@dataclass(frozen=True)
class GaussianBeam:
    """G(x) = G0 exp(-|x - center|^2 / (2 width^2))."""

    amplitude: float
    center: tuple
    width: float = 0.5
    kind: str = field(default="gaussian", init=False)

    def __call__(self, x, regions=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = np.sum((x - np.asarray(self.center, dtype=float)) ** 2, axis=1)
        return self.amplitude * np.exp(-r2 / (2.0 * self.width**2))

    def scaled(self, amplitude):
        return GaussianBeam(amplitude, self.center, self.width)


def eval_generation(g, x, regions=None):
    """Evaluate a generation profile.

    A scalar, or a 1-D array of length d for a d-dimensional profile, is a
    single point and yields a float; anything else is a batch of points.
    """
    x = np.asarray(x, dtype=float)
    dim = _dim_of(g)
    if x.ndim == 0:
        return float(g(x.reshape(1, 1), regions)[0])
    if x.ndim == 1 and dim is not None and dim > 1 and x.shape[0] == dim:
        return float(g(x.reshape(1, dim), regions)[0])
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return g(x, regions)


def _dim_of(g):
    for attr in ("center", "origin"):
        if hasattr(g, attr):
            return len(getattr(g, attr))
    return None


# --------------------------------------------------------------------------
# species and scenario


@dataclass(frozen=True)
class SpeciesConfig:
    """Ionic species data.  z_a = 0 switches the ions off entirely."""

    z_a: int = 0
    mass: float = 0.0
    regions: tuple = ()
    statistics: object = None

    @property
    def active(self):
        return self.z_a != 0


@dataclass(frozen=True)
class Contact:
    """Dirichlet data (psi, v_n, v_p) on one tagged boundary part."""

    psi: float
    v_n: float
    v_p: float


@dataclass
class DeviceScenario:
    """Everything the discrete system needs, mesh included."""

    name: str
    mesh: object
    doping: Mapping[str, float]
    stat_n: object
    stat_p: object
    recombination: RecombinationModel
    generation: object
    contacts: Mapping[str, Contact]
    debye_length: float = 1.0
    species: SpeciesConfig = field(default_factory=SpeciesConfig)
    params: dict = field(default_factory=dict)

    @property
    def ions_active(self):
        return self.species.active

    def with_contacts(self, contacts):
        return _replace(self, contacts=dict(contacts))

    def with_generation(self, generation):
        return _replace(self, generation=generation)


def _replace(sc, **kw):
    import dataclasses

    return dataclasses.replace(sc, **kw)


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    """Outcome of the hypothesis checks.  Failures never raise here."""

    checks: list = field(default_factory=list)

    def add(self, name, passed, message="", severity="error"):
        self.checks.append(
            {"name": name, "passed": bool(passed), "message": message, "severity": severity}
        )

    @property
    def ok(self):
        return all(c["passed"] for c in self.checks if c["severity"] == "error")

    @property
    def failures(self):
        return [c for c in self.checks if not c["passed"] and c["severity"] == "error"]

    @property
    def warnings(self):
        return [c for c in self.checks if not c["passed"] and c["severity"] == "warning"]

    def failed(self, name):
        return any(c["name"] == name and not c["passed"] for c in self.checks)

    def __str__(self):
        lines = []
        for c in self.checks:
            mark = "ok" if c["passed"] else ("WARN" if c["severity"] == "warning" else "FAIL")
            lines.append(f"[{mark}] {c['name']}: {c['message']}")
        return "\n".join(lines)


def _sandwich_ok(F, eta):
    """0 < F' <= F <= exp on the sample (relative tolerance 1e-6)."""
    f = F(eta)
    df = F.derivative(eta)
    tol = 1e-6
    return bool(
        np.all(df > 0)
        and np.all(df <= f * (1 + tol))
        and np.all(f <= np.exp(eta) * (1 + tol))
    )


def validate_assumptions(scenario, mesh=None):
    """Check the model hypotheses for a scenario on its mesh.

    Reports mass compatibility, nonnegative generation at the nodes, finite
    Dirichlet data and a Dirichlet boundary of positive measure.  The
    statistics sandwich F' <= F <= exp is checked as an advisory warning
    for the ion statistics, which violates it for saturations above 1.
    """
    mesh = scenario.mesh if mesh is None else mesh
    rep = ValidationReport()

    sp = scenario.species
    if sp.active:
        try:
            omega_ion = sum(mesh.region_measure(tag) for tag in sp.regions)
        except KeyError as exc:
            rep.add("mass compatibility", False, f"unknown ion region {exc}")
        else:
            S = getattr(sp.statistics, "saturation", np.inf)
            ok = 0.0 < sp.mass < omega_ion * S
            rep.add(
                "mass compatibility",
                ok,
                f"0 < M_a={sp.mass:g} < |Omega_ion| S_a={omega_ion * S:g}",
            )
    else:
        rep.add("mass compatibility", True, "no ionic species")

    try:
        g = scenario.generation(mesh.nodes)
        rep.add("generation nonnegative", bool(np.all(g >= 0)), f"min G = {np.min(g):g}")
    except Exception as exc:  # noqa: BLE001 - report, never abort
        rep.add("generation nonnegative", False, f"evaluation failed: {exc}")

    finite = all(
        np.isfinite([c.psi, c.v_n, c.v_p]).all() for c in scenario.contacts.values()
    )
    rep.add("dirichlet data finite", finite, "")

    measure = 0.0
    unknown = []
    for tag in scenario.contacts:
        try:
            measure += mesh.boundary_measure(tag)
        except KeyError:
            unknown.append(tag)
    rep.add(
        "dirichlet measure positive",
        measure > 0 and not unknown,
        f"|Gamma_D| = {measure:g}" + (f", unknown tags {unknown}" if unknown else ""),
    )

    rep.add("debye length positive", scenario.debye_length > 0, f"lambda={scenario.debye_length:g}")

    eta = np.linspace(-30.0, 30.0, 121)
    for label, F in (("n", scenario.stat_n), ("p", scenario.stat_p)):
        rep.add(f"statistics sandwich ({label})", _sandwich_ok(F, eta), getattr(F, "kind", ""))
    if sp.active:
        rep.add(
            "statistics sandwich (a)",
            _sandwich_ok(sp.statistics, eta),
            "F_a <= exp fails near eta=0 when S_a > 1",
            severity="warning",
        )
    return rep
