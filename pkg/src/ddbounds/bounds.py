"""A-priori L-infinity bounds and their runtime verification.

``density_upper_bound`` is the closed-form density ceiling with a
user-supplied structural constant K; ``stampacchia_root`` is the level at
which a non-increasing energy obeying the iterative inequality

    E(y) <= zeta E(x)^beta / (y - x)^alpha,   y > x >= x0

must vanish.  Certificates built from heuristic constants are advisory:
``verify_solution_bounds`` reports a missed certificate as a warning, while
positivity of the densities and n_a < S_a are hard requirements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundInputs",
    "BoundCertificate",
    "BoundsVerdict",
    "stampacchia_root",
    "density_upper_bound",
    "lp_norm",
    "bound_inputs",
    "certificate",
    "system_certificate",
    "verify_solution_bounds",
    "linf_norms",
]


def stampacchia_root(x0, zeta, alpha, beta, E0):
    """x0 + zeta^(1/alpha) beta^(beta/(beta-1)) / (beta-1) * E0^((beta-1)/alpha)."""
    if not (zeta > 0 and alpha > 0):
        raise ValueError("zeta and alpha must be positive")
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    if not E0 >= 0:
        raise ValueError("E0 must be nonnegative")
    if E0 == 0:
        return float(x0)
    c = beta ** (beta / (beta - 1.0)) / (beta - 1.0)
    return float(x0 + zeta ** (1.0 / alpha) * c * E0 ** ((beta - 1.0) / alpha))


def lp_norm(values, volumes, p):
    """Midpoint-rule L^p norm of nodal values over boxes of given volume."""
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(values.max()) if values.size else 0.0
    return float(np.sum(np.asarray(volumes) * values**p) ** (1.0 / p))


@dataclass(frozen=True)
class BoundInputs:
    """Data entering the explicit bounds.

    ``K`` is the structural constant of the density bound; ``K_q`` and
    ``K_r`` are embedding constants used only by the Stampacchia
    diagnostics; ``K_psi`` scales the potential bound.
    """

    N_D: float
    G_norm: float
    C_norm: float
    p: float
    r0: float
    debye_length: float
    z_a: int = 0
    S_a: float = 0.0
    dim: int = 1
    K: float = 1.0
    K_q: float = 1.0
    K_r: float = 1.0
    K_psi: float = 1.0
    omega_measure: float = 1.0
    psi_D_norm: float = 0.0
    v_D_norm: float = 0.0
    r: float = float("nan")

    def __post_init__(self):
        if not self.p > self.dim / 2.0:
            raise ValueError(f"p={self.p} must exceed d/2={self.dim / 2}")
        if not self.debye_length > 0:
            raise ValueError("debye length must be positive")
        if not self.N_D > 0:
            raise ValueError("N^D must be positive")
        for name in ("G_norm", "C_norm", "r0", "S_a", "K", "K_q", "K_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def q(self):
        return 2.0 if math.isinf(self.p) else 2.0 * self.p / (self.p - 1.0)

    @property
    def r_exp(self):
        """Embedding exponent r > q; defaults to 2q."""
        return 2.0 * self.q if math.isnan(self.r) else self.r


def density_upper_bound(inp: BoundInputs) -> float:
    """N_bar = N^D exp(K ((|C| + |z_a| S_a)/lam^2 + (|G|^.5 + r0^.5)/(N^D)^.5))."""
    ion = abs(inp.z_a) * inp.S_a
    expo = (inp.C_norm + ion) / inp.debye_length**2 + (
        math.sqrt(inp.G_norm) + math.sqrt(inp.r0)
    ) / math.sqrt(inp.N_D)
    return float(inp.N_D * math.exp(inp.K * expo))


@dataclass(frozen=True)
class BoundCertificate:
    N_bar: float
    M_psi: float
    M_v: float
    M_a: float
    zeta: float
    alpha: float
    beta: float
    x0: float
    E0: float
    N_stampacchia: float
    inputs: BoundInputs = None

    def as_dict(self):
        return {k: getattr(self, k) for k in (
            "N_bar", "M_psi", "M_v", "M_a", "zeta", "alpha", "beta", "x0", "E0",
            "N_stampacchia")}


def certificate(inp: BoundInputs, stat_n=None, stat_p=None, stat_a=None,
                mass=None, ion_measure=None) -> BoundCertificate:
    """Assemble all bounds from the inputs (and statistics, for potentials)."""
    N_bar = density_upper_bound(inp)
    q, r = inp.q, inp.r_exp
    alpha, beta = 2.0 * r / q, r / q
    ion = abs(inp.z_a) * inp.S_a
    g_plus = inp.G_norm + inp.r0 * (
        inp.omega_measure ** (1.0 / inp.p) if not math.isinf(inp.p) else 1.0)
    zeta = inp.K_r ** (2.0 * r / q) * (
        inp.K_q**2 / inp.debye_length**4 * (inp.C_norm + ion * (
            inp.omega_measure ** (1.0 / inp.p) if not math.isinf(inp.p) else 1.0)) ** 2
        + 2.0 / inp.N_D * g_plus
    )
    E0 = 2.0 * zeta * inp.omega_measure ** (2.0 / q) / inp.K_r ** (2.0 * r / q)
    x0 = math.log(inp.N_D)
    x_star = stampacchia_root(x0, zeta, alpha, beta, E0) if zeta > 0 else x0
    N_st = math.exp(min(x_star, 700.0))

    rhs = inp.C_norm + 2.0 * N_bar + ion
    M_psi = inp.psi_D_norm + inp.K_psi * rhs / inp.debye_length**2
    cands = [inp.v_D_norm]
    for F in (stat_n, stat_p):
        if F is not None:
            cands.append(float(F.inverse(N_bar)) + M_psi)
    M_v = max(cands)
    M_a = 0.0
    if stat_a is not None and mass is not None and ion_measure:
        M_a = abs(float(stat_a.inverse(mass / ion_measure))) + abs(inp.z_a) * M_psi
    return BoundCertificate(N_bar, M_psi, M_v, M_a, zeta, alpha, beta, x0, E0, N_st, inp)


def bound_inputs(sys, p=math.inf, K=1.0, K_q=1.0, K_r=1.0, K_psi=None):
    """Compute BoundInputs for a discrete system (norms by midpoint quadrature).

    With n_tau = 0 the SRH prefactor has no finite supremum; r0 then falls
    back to the radiative constant, one more reason the certificate is
    advisory.
    """
    sc = sys.scenario
    mesh = sys.mesh
    vol = mesh.volumes
    nD = []
    for c in sc.contacts.values():
        nD.append(float(sc.stat_n(c.v_n + c.psi)))
        nD.append(float(sc.stat_p(c.v_p - c.psi)))
    N_D = max(nD)
    g_nodal = np.where(vol > 0, sys.gvol / np.where(vol > 0, vol, 1.0), 0.0)
    doping = np.array([abs(float(sc.doping.get(r, 0.0))) for r in mesh.region_names])
    if math.isinf(p):
        G_norm = float(np.max(g_nodal)) if g_nodal.size else 0.0
        C_norm = float(np.max(doping)) if doping.size else 0.0
    else:
        G_norm = lp_norm(g_nodal, vol, p)
        C_norm = float(np.sum(mesh.region_volumes @ doping**p) ** (1.0 / p))
    if K_psi is None:
        lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
        K_psi = float(np.sum((hi - lo) ** 2)) / 2.0
    r0 = sc.recombination.rate_bound()
    if not np.isfinite(r0):
        r0 = float(sc.recombination.r0_rad)
    S_a = float(sc.species.statistics.saturation) if sys.ions else 0.0
    psi_D = float(np.max(np.abs(sys.dir_psi))) if sys.dir_psi.size else 0.0
    v_D = float(max(np.max(np.abs(sys.dir_vn)), np.max(np.abs(sys.dir_vp)))) if sys.dir_vn.size else 0.0
    return BoundInputs(
        N_D=N_D, G_norm=G_norm, C_norm=C_norm, p=p, r0=r0,
        debye_length=sc.debye_length, z_a=sys.z_a, S_a=S_a, dim=mesh.dim, K=K,
        K_q=K_q, K_r=K_r, K_psi=K_psi, omega_measure=mesh.measure,
        psi_D_norm=psi_D, v_D_norm=v_D,
    )


def system_certificate(sys, **kw):
    inp = bound_inputs(sys, **kw)
    return certificate(
        inp, sys.stat_n, sys.stat_p, sys.stat_a if sys.ions else None,
        sys.mass if sys.ions else None, sys.ion_measure if sys.ions else None,
    )


@dataclass
class BoundsVerdict:
    hard_ok: bool
    certificate_ok: bool
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    margins: dict = field(default_factory=dict)

    def lines(self):
        out = [f"hard_ok {self.hard_ok}", f"certificate_ok {self.certificate_ok}"]
        out += [f"margin {k} {v!r}" for k, v in sorted(self.margins.items())]
        out += [f"failure {m}" for m in self.failures]
        out += [f"warning {m}" for m in self.warnings]
        return out


def verify_solution_bounds(state, cert: BoundCertificate, sys, densities=None) -> BoundsVerdict:
    """Check a state cellwise against positivity, S_a and the certificate.

    ``densities`` (n_n, n_p, n_a) replaces the densities computed from the
    state; this is how externally modified fields are checked.
    """
    nn, np_, na = _raw_densities(sys, state) if densities is None else (
        np.asarray(d, dtype=float) for d in densities)
    v = BoundsVerdict(True, True)
    for label, n in (("n_n", nn), ("n_p", np_)):
        bad = ~(n > 0) | ~np.isfinite(n)
        if bad.any():
            v.hard_ok = False
            v.failures.append(f"{label} not positive at node {int(np.argmax(bad))}")
        v.margins[f"{label}_min"] = float(np.min(n))
        v.margins[f"{label}_to_Nbar"] = float(cert.N_bar - np.max(n))
        if np.max(n) > cert.N_bar:
            v.certificate_ok = False
            v.warnings.append(f"{label} exceeds N_bar={cert.N_bar:g} at node {int(np.argmax(n))}")
    if sys.ions:
        S = sys.stat_a.saturation
        ion = sys.ion_nodes
        nai = na[ion]
        bad = np.zeros(sys.N, dtype=bool)
        bad[ion] = ~(nai > 0) | ~(nai < S)
        if bad.any():
            v.hard_ok = False
            v.failures.append(f"n_a outside (0, S_a) at node {int(np.argmax(bad))}")
        v.margins["n_a_to_Sa"] = float(S - np.max(nai))
        v.margins["n_a_min"] = float(np.min(nai))
        if abs(state.v_a) > cert.M_a:
            v.certificate_ok = False
            v.warnings.append(f"|v_a|={abs(state.v_a):g} exceeds M_a={cert.M_a:g}")
    psi_max = float(np.max(np.abs(state.psi)))
    v.margins["psi_to_Mpsi"] = cert.M_psi - psi_max
    if psi_max > cert.M_psi:
        v.certificate_ok = False
        v.warnings.append(f"|psi| exceeds M_psi={cert.M_psi:g}")
    vmax = float(max(np.max(np.abs(state.v_n)), np.max(np.abs(state.v_p))))
    v.margins["v_to_Mv"] = cert.M_v - vmax
    if vmax > cert.M_v:
        v.certificate_ok = False
        v.warnings.append(f"|v| exceeds M_v={cert.M_v:g}")
    return v


def _raw_densities(sys, state):
    """Densities without range validation, so corrupt states can be reported."""
    psi = np.asarray(state.psi, dtype=float)
    with np.errstate(all="ignore"):
        nn = np.asarray(sys.stat_n(np.asarray(state.v_n) + psi), dtype=float)
        np_ = np.asarray(sys.stat_p(np.asarray(state.v_p) - psi), dtype=float)
        if sys.ions:
            na = np.where(sys.ion_nodes, sys.stat_a(state.v_a - sys.z_a * psi), 0.0)
        else:
            na = np.zeros_like(psi)
    return nn, np_, na


def linf_norms(state, sys=None, densities=None):
    """Max-norms of densities and potentials of a state."""
    if densities is None:
        densities = _raw_densities(sys, state)
    nn, np_, na = densities
    out = {
        "n_n": float(np.max(nn)),
        "n_p": float(np.max(np_)),
        "n_a": float(np.max(na)) if np.size(na) else 0.0,
        "psi": float(np.max(np.abs(state.psi))),
        "v_n": float(np.max(np.abs(state.v_n))),
        "v_p": float(np.max(np.abs(state.v_p))),
        "v_a": float(abs(state.v_a)) if state.v_a is not None else 0.0,
    }
    if sys is not None:
        K, L, T = sys.K, sys.L, sys.T
        for name, f in (("grad_v_n", state.v_n), ("grad_v_p", state.v_p)):
            f = np.asarray(f)
            out[name] = float(np.sqrt(np.sum(T * (f[K] - f[L]) ** 2)))
    return out
