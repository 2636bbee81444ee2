"""Two-point finite-volume discretisation of the stationary system.

Unknowns are the node values of (psi, v_n, v_p) plus one scalar v_a when
the ionic species is active, stored blockwise::

    x = [psi_0..psi_{N-1}, v_n_0.., v_p_0.., (v_a)]

Species fluxes use the excess-chemical-potential Scharfetter-Gummel flux:
with phi = v - log n the flux n grad v = grad n + n grad phi is discretised as

    j_KL = T_KL (B(d) n_K - B(-d) n_L),  d = phi_L - phi_K,

which vanishes identically when v_K = v_L and reduces to the classical
scheme (d = z (psi_L - psi_K)) for Boltzmann statistics.  ``j_KL > 0`` is a
flow of ``-n grad v`` from K to L and enters the balance of K with a plus
sign.

Dirichlet nodes keep their box but their equations are replaced by
``u - u_D = 0``; their raw balances are what the contact currents read.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import Z_N, Z_P
from .statistics import StatisticsError

__all__ = [
    "bernoulli",
    "bernoulli_derivative",
    "species_edge_flux",
    "classical_sg_flux",
    "StateVector",
    "DiscreteSystem",
    "DensityRangeError",
    "PoissonSolveError",
    "assemble_residual",
    "assemble_jacobian",
    "solve_constrained_poisson",
]

_SMALL = 1e-2


class DensityRangeError(ValueError):
    """A state maps to densities outside the statistics range."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class PoissonSolveError(RuntimeError):
    def __init__(self, message, gradient_norm=np.nan):
        super().__init__(message)
        self.gradient_norm = gradient_norm


def bernoulli(x):
    """B(x) = x / (exp(x) - 1), B(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        big = x / np.expm1(x)
    x2 = x * x
    series = 1.0 - x / 2.0 + x2 / 12.0 * (1.0 - x2 / 60.0 * (1.0 - x2 / 42.0))
    out = np.where(small, series, big)
    # x/expm1(x) is 0 for large positive x and -x for large negative x
    out = np.where(x > 745.0, 0.0, out)
    return out


def bernoulli_derivative(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        q = 1.0 / np.expm1(x)
        big = q - x * q * (1.0 + q)
    x2 = x * x
    series = -0.5 + x / 6.0 - x * x2 / 180.0 + x * x2 * x2 / 5040.0
    out = np.where(small, series, big)
    out = np.where(x > 700.0, 0.0, out)
    return out


def classical_sg_flux(z, psi_K, psi_L, n_K, n_L, T):
    """Textbook Scharfetter-Gummel flux for Boltzmann statistics."""
    d = z * (np.asarray(psi_L) - np.asarray(psi_K))
    return T * (bernoulli(d) * n_K - bernoulli(-d) * n_L)


@dataclass
class EdgeFlux:
    """Flux values and partials w.r.t. (psi_K, psi_L, v_K, v_L)."""

    value: np.ndarray
    d_psi_K: np.ndarray
    d_psi_L: np.ndarray
    d_v_K: np.ndarray
    d_v_L: np.ndarray


def _flux_from_eval(z, vK, vL, evK, evL, T):
    nK, dnK, lK, gK = evK
    nL, dnL, lL, gL = evL
    d = (vL - vK) - (lL - lK)
    Bp, Bm = bernoulli(d), bernoulli(-d)
    j = T * (Bp * nK - Bm * nL)
    j_d = T * (bernoulli_derivative(d) * nK + bernoulli_derivative(-d) * nL)
    a_K = T * Bp * dnK + j_d * gK   # d j / d eta_K at fixed v
    a_L = -T * Bm * dnL - j_d * gL  # d j / d eta_L at fixed v
    return EdgeFlux(
        value=j,
        d_psi_K=-z * a_K,
        d_psi_L=-z * a_L,
        d_v_K=a_K - j_d,
        d_v_L=a_L + j_d,
    )


def species_edge_flux(F, z, psi_K, psi_L, v_K, v_L, T=1.0):
    """Excess-chemical-potential flux of one species across a face."""
    psi_K, psi_L, v_K, v_L = (np.asarray(a, dtype=float) for a in (psi_K, psi_L, v_K, v_L))
    evK = F.evaluate(v_K - z * psi_K)
    evL = F.evaluate(v_L - z * psi_L)
    return _flux_from_eval(z, v_K, v_L, evK, evL, np.asarray(T, dtype=float))


@dataclass
class StateVector:
    psi: np.ndarray
    v_n: np.ndarray
    v_p: np.ndarray
    v_a: Optional[float] = None

    def to_array(self):
        parts = [self.psi, self.v_n, self.v_p]
        if self.v_a is not None:
            parts.append([self.v_a])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def copy(self):
        return StateVector(self.psi.copy(), self.v_n.copy(), self.v_p.copy(), self.v_a)


class DiscreteSystem:
    """Residual and Jacobian of the discrete system for one scenario."""

    def __init__(self, scenario):
        self.scenario = scenario
        mesh = scenario.mesh
        self.mesh = mesh
        N = mesh.n_nodes
        self.N = N
        self.ions = scenario.ions_active
        self.size = 3 * N + (1 if self.ions else 0)
        self.vol = mesh.volumes
        self.T = mesh.transmissibility
        self.K = mesh.edges[:, 0]
        self.L = mesh.edges[:, 1]
        self.lam2 = float(scenario.debye_length) ** 2
        self.stat_n = scenario.stat_n
        self.stat_p = scenario.stat_p
        self.rec = scenario.recombination

        doping = np.array([float(scenario.doping.get(r, 0.0)) for r in mesh.region_names])
        self.cvol = mesh.region_volumes @ doping
        self.gvol = self._generation_volume(scenario.generation)

        sp_ = scenario.species
        self.z_a = int(sp_.z_a)
        if self.ions:
            self.stat_a = sp_.statistics
            self.ion_vol = mesh.region_volume(sp_.regions)
            self.ion_measure = float(self.ion_vol.sum())
            self.mass = float(sp_.mass)
            self.ion_nodes = self.ion_vol > 0
        else:
            self.stat_a = None
            self.ion_vol = np.zeros(N)
            self.ion_measure = 0.0
            self.mass = 0.0
            self.ion_nodes = np.zeros(N, dtype=bool)

        self._setup_dirichlet(scenario.contacts)

    # ------------------------------------------------------------------
    def _generation_volume(self, generation):
        mesh = self.mesh
        g = np.zeros(mesh.n_nodes)
        for r, name in enumerate(mesh.region_names):
            part = mesh.region_volumes[:, r]
            idx = np.nonzero(part > 0)[0]
            if idx.size:
                g[idx] += part[idx] * generation(mesh.nodes[idx], [name] * idx.size)
        return g

    def _setup_dirichlet(self, contacts):
        mesh = self.mesh
        values = {}
        self.contact_nodes = {}
        for tag, c in contacts.items():
            nodes = mesh.boundary_nodes(tag)
            self.contact_nodes[tag] = nodes
            for k in nodes:
                val = (c.psi, c.v_n, c.v_p)
                if k in values and not np.allclose(values[k], val, rtol=0, atol=0):
                    raise ValueError(f"node {k} carries conflicting Dirichlet data")
                values[k] = val
        nodes = np.array(sorted(values), dtype=int)
        self.dir_nodes = nodes
        vals = np.array([values[k] for k in nodes]).reshape(-1, 3)
        self.dir_psi, self.dir_vn, self.dir_vp = vals[:, 0], vals[:, 1], vals[:, 2]
        self.is_dirichlet = np.zeros(self.N, dtype=bool)
        self.is_dirichlet[nodes] = True
        N = self.N
        self.dir_rows = np.concatenate([nodes, N + nodes, 2 * N + nodes])
        self.dir_values = np.concatenate([self.dir_psi, self.dir_vn, self.dir_vp])

    # ------------------------------------------------------------------
    def split(self, x):
        N = self.N
        va = float(x[3 * N]) if self.ions else None
        return x[:N], x[N:2 * N], x[2 * N:3 * N], va

    def state(self, x):
        psi, vn, vp, va = self.split(np.asarray(x, dtype=float))
        st = StateVector(psi.copy(), vn.copy(), vp.copy(), va)
        self.densities(st)  # validates
        return st

    def pack(self, state):
        x = state.to_array()
        if x.size != self.size:
            raise ValueError(f"state has {x.size} entries, system expects {self.size}")
        return x

    def apply_dirichlet(self, x):
        x = np.array(x, dtype=float)
        x[self.dir_rows] = self.dir_values
        return x

    # ------------------------------------------------------------------
    def _evaluate_species(self, psi, vn, vp, va):
        try:
            ev_n = self.stat_n.evaluate(vn - Z_N * psi)
            ev_p = self.stat_p.evaluate(vp - Z_P * psi)
            ev_a = self.stat_a.evaluate(va - self.z_a * psi) if self.ions else None
        except StatisticsError as exc:
            raise DensityRangeError(str(exc)) from exc
        for label, ev in (("n_n", ev_n), ("n_p", ev_p)):
            bad = ~(ev[0] > 0) | ~np.isfinite(ev[0])
            if bad.any():
                k = int(np.argmax(bad))
                raise DensityRangeError(f"{label} out of range at node {k}", node=k)
        if self.ions:
            na = ev_a[0]
            bad = self.ion_nodes & (~(na > 0) | ~(na < self.stat_a.saturation))
            if bad.any():
                k = int(np.argmax(bad))
                raise DensityRangeError(f"n_a out of range at node {k}", node=k)
        return ev_n, ev_p, ev_a

    def densities(self, state):
        """(n_n, n_p, n_a) for a state; n_a is zero outside the ion region."""
        psi, vn, vp = (np.asarray(a, dtype=float) for a in (state.psi, state.v_n, state.v_p))
        va = state.v_a if self.ions else 0.0
        ev_n, ev_p, ev_a = self._evaluate_species(psi, vn, vp, va)
        na = np.where(self.ion_nodes, ev_a[0], 0.0) if self.ions else np.zeros(self.N)
        return ev_n[0], ev_p[0], na

    def edge_fluxes(self, x):
        """Per-edge fluxes (j_n, j_p) of -n grad v for a flat state."""
        psi, vn, vp, va = self.split(np.asarray(x, dtype=float))
        ev_n, ev_p, _ = self._evaluate_species(psi, vn, vp, va)
        out = []
        for z, v, ev in ((Z_N, vn, ev_n), (Z_P, vp, ev_p)):
            evK = tuple(a[self.K] for a in ev)
            evL = tuple(a[self.L] for a in ev)
            out.append(_flux_from_eval(z, v[self.K], v[self.L], evK, evL, self.T).value)
        return out[0], out[1]

    def node_balances(self, x):
        """Raw continuity balances sum_L j_KL - (G - R)|K| for both species.

        At Dirichlet nodes the balance equals minus the outflow through
        the boundary part of the box.
        """
        res = self._assemble(np.asarray(x, dtype=float), jacobian=False, raw=True)[0]
        N = self.N
        return res[N:2 * N], res[2 * N:3 * N]

    def recombination_rate(self, x):
        psi, vn, vp, va = self.split(np.asarray(x, dtype=float))
        ev_n, ev_p, _ = self._evaluate_species(psi, vn, vp, va)
        return self.rec.evaluate(ev_n[0], ev_p[0], vn + vp)[0]

    # ------------------------------------------------------------------
    def residual(self, x):
        return self._assemble(np.asarray(x, dtype=float), jacobian=False)[0]

    def residual_and_jacobian(self, x):
        return self._assemble(np.asarray(x, dtype=float), jacobian=True)

    def jacobian(self, x):
        return self._assemble(np.asarray(x, dtype=float), jacobian=True)[1]

    def _assemble(self, x, jacobian=True, raw=False):
        N = self.N
        psi, vn, vp, va = self.split(x)
        ev_n, ev_p, ev_a = self._evaluate_species(psi, vn, vp, va)
        K, L, T, vol = self.K, self.L, self.T, self.vol
        res = np.zeros(self.size)
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        # Poisson: lam^2 sum T (psi_K - psi_L) - (vol (n_p - n_n) + z_a vol_ion n_a + C vol)
        lt = self.lam2 * T
        flow = lt * (psi[K] - psi[L])
        np.add.at(res, K, flow)
        np.add.at(res, L, -flow)
        nn, dnn = ev_n[0], ev_n[1]
        npp, dnp = ev_p[0], ev_p[1]
        res[:N] -= vol * (npp - nn) + self.cvol
        if jacobian:
            add(K, K, lt)
            add(L, L, lt)
            add(K, L, -lt)
            add(L, K, -lt)
            idx = np.arange(N)
            add(idx, idx, vol * (dnn + dnp))
            add(idx, N + idx, vol * dnn)
            add(idx, 2 * N + idx, -vol * dnp)
        if self.ions:
            za = self.z_a
            na, dna = ev_a[0], ev_a[1]
            res[:N] -= za * self.ion_vol * na
            res[3 * N] = (np.dot(self.ion_vol, na) - self.mass) / self.ion_measure
            if jacobian:
                idx = np.arange(N)
                add(idx, idx, za * za * self.ion_vol * dna)
                add(idx, np.full(N, 3 * N), -za * self.ion_vol * dna)
                add(np.full(N, 3 * N), idx, -za * self.ion_vol * dna / self.ion_measure)
                add(np.array([3 * N]), np.array([3 * N]),
                    np.array([np.dot(self.ion_vol, dna) / self.ion_measure]))

        # continuity equations
        R, dR_n, dR_p, dR_s = self.rec.evaluate(nn, npp, vn + vp)
        src = vol * R - self.gvol
        for off, z, v, ev in ((N, Z_N, vn, ev_n), (2 * N, Z_P, vp, ev_p)):
            evK = tuple(a[K] for a in ev)
            evL = tuple(a[L] for a in ev)
            fl = _flux_from_eval(z, v[K], v[L], evK, evL, T)
            np.add.at(res, off + K, fl.value)
            np.add.at(res, off + L, -fl.value)
            res[off:off + N] += src
            if jacobian:
                for sign, r in ((1.0, off + K), (-1.0, off + L)):
                    add(r, K, sign * fl.d_psi_K)
                    add(r, L, sign * fl.d_psi_L)
                    add(r, off + K, sign * fl.d_v_K)
                    add(r, off + L, sign * fl.d_v_L)
                idx = np.arange(N)
                # eta_n = v_n + psi, eta_p = v_p - psi
                add(off + idx, idx, vol * (dR_n * dnn - dR_p * dnp))
                add(off + idx, N + idx, vol * (dR_n * dnn + dR_s))
                add(off + idx, 2 * N + idx, vol * (dR_p * dnp + dR_s))

        if not raw:
            res[self.dir_rows] = x[self.dir_rows] - self.dir_values
        if not jacobian:
            return res, None
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        keep = np.ones(self.size, dtype=bool)
        keep[self.dir_rows] = False
        m = keep[r]
        r = np.concatenate([r[m], self.dir_rows])
        c = np.concatenate([c[m], self.dir_rows])
        v = np.concatenate([v[m], np.ones(self.dir_rows.size)])
        J = sp.csr_matrix((v, (r, c)), shape=(self.size, self.size))
        return res, J

    # ------------------------------------------------------------------
    def equilibrium_state(self, **kwargs):
        """psi from the constrained nonlinear Poisson problem with v_n = v_p = 0."""
        zeros = np.zeros(self.N)
        psi, va, _ = solve_constrained_poisson(self, quasi_fermi=(zeros, zeros), **kwargs)
        return StateVector(psi, zeros.copy(), zeros.copy(), va if self.ions else None)


def assemble_residual(sys, state):
    return sys.residual(sys.pack(state))


def assemble_jacobian(sys, state):
    return sys.jacobian(sys.pack(state))


# ----------------------------------------------------------------------
# constrained nonlinear Poisson problem


def solve_constrained_poisson(
    sys,
    densities=None,
    quasi_fermi=None,
    sigma=1.0,
    psi0=None,
    v_a0=None,
    tol=1e-10,
    max_iter=200,
):
    """Minimise the convex energy of the nonlinear Poisson problem with mass constraint.

    Electron and hole terms are either frozen densities ``(n_n, n_p)`` or
    frozen quasi-Fermi potentials ``(v_n, v_p)``; in the latter case the
    densities follow psi through the state equation and the problem is the
    equilibrium Poisson equation.  ``sigma`` scales sources and Dirichlet
    data.  Returns ``(psi, v_a, info)``; ``v_a`` is None without ions.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    if (densities is None) == (quasi_fermi is None):
        raise ValueError("give exactly one of densities or quasi_fermi")
    N = sys.N
    free = ~sys.is_dirichlet
    fidx = np.nonzero(free)[0]
    nf = fidx.size
    ions = sys.ions
    za = sys.z_a
    stats = ((Z_N, sys.stat_n), (Z_P, sys.stat_p))

    if sigma == 0.0:
        psi = np.zeros(N)
        va = float(sys.stat_a.inverse(sys.mass / sys.ion_measure)) if ions else None
        return psi, va, {"iterations": 0, "gradient_norm": 0.0}

    if ions and not 0.0 < sys.mass < sys.ion_measure * sys.stat_a.saturation:
        raise PoissonSolveError("mass compatibility violated")

    psi = np.zeros(N) if psi0 is None else np.array(psi0, dtype=float)
    psi[sys.dir_nodes] = sigma * sys.dir_psi
    va = 0.0
    if ions:
        va = float(sys.stat_a.inverse(sys.mass / sys.ion_measure)) if v_a0 is None else float(v_a0)

    lap = sys.mesh.stiffness(sys.lam2)
    lap_ff = lap[fidx][:, fidx].tocsc()

    if densities is not None:
        fixed_charge = sys.vol * (np.asarray(densities[1]) - np.asarray(densities[0])) + sys.cvol
    else:
        qf = (np.asarray(quasi_fermi[0], dtype=float), np.asarray(quasi_fermi[1], dtype=float))

    def pieces(psi, va):
        """Energy, gradient (free psi, v_a) and Hessian diagonal pieces."""
        energy = 0.5 * psi @ (lap @ psi)
        grad = lap @ psi
        hdiag = np.zeros(N)
        if densities is not None:
            energy -= sigma * fixed_charge @ psi
            grad = grad - sigma * fixed_charge
        else:
            energy -= sigma * sys.cvol @ psi
            grad = grad - sigma * sys.cvol
            for (z, F), v in zip(stats, qf):
                eta = v - z * psi
                try:
                    f, df, _, _ = F.evaluate(eta)
                    energy += sigma * sys.vol @ F.antiderivative(eta)
                except StatisticsError as exc:
                    raise DensityRangeError(str(exc)) from exc
                grad = grad - sigma * z * sys.vol * f
                hdiag += sigma * z * z * sys.vol * df
        g_va = 0.0
        h_va = 0.0
        h_cross = None
        if ions:
            eta = va - za * psi
            f, df, _, _ = sys.stat_a.evaluate(eta)
            energy += sigma * (sys.ion_vol @ sys.stat_a.antiderivative(eta) - sys.mass * va)
            grad = grad - sigma * za * sys.ion_vol * f
            hdiag += sigma * za * za * sys.ion_vol * df
            g_va = sigma * (sys.ion_vol @ f - sys.mass)
            h_va = sigma * (sys.ion_vol @ df)
            h_cross = -sigma * za * sys.ion_vol * df
        return energy, grad, g_va, hdiag, h_va, h_cross

    def gnorm(grad, g_va):
        gn = np.max(np.abs(grad[fidx])) if nf else 0.0
        return max(gn, abs(g_va) / sys.ion_measure) if ions else gn

    scale = max(1.0, np.max(np.abs(sys.cvol)) if N else 1.0)
    energy, grad, g_va, hdiag, h_va, h_cross = pieces(psi, va)
    it = 0
    for it in range(1, max_iter + 1):
        gn = gnorm(grad, g_va)
        mass_ok = (not ions) or abs(g_va / sigma) <= 1e-12 * sys.mass
        if gn <= tol * scale and mass_ok:
            return psi, (va if ions else None), {"iterations": it - 1, "gradient_norm": gn}
        H = lap_ff + sp.diags(hdiag[fidx])
        rhs = -grad[fidx]
        if ions:
            col = h_cross[fidx][:, None]
            H = sp.bmat([[H, sp.csr_matrix(col)], [sp.csr_matrix(col.T), sp.csr_matrix([[h_va]])]])
            rhs = np.append(rhs, -g_va)
        step = spla.spsolve(H.tocsc(), rhs)
        d_psi = np.zeros(N)
        d_psi[fidx] = step[:nf]
        d_va = float(step[nf]) if ions else 0.0
        slope = -(rhs @ step)
        t = 1.0
        while True:
            try:
                trial = pieces(psi + t * d_psi, va + t * d_va)
            except DensityRangeError:
                trial = None
            if trial is not None:
                armijo = trial[0] <= energy + 1e-4 * t * slope
                if armijo or gnorm(trial[1], trial[2]) < gn:
                    break
            t *= 0.5
            if t < 1e-12:
                raise PoissonSolveError("line search failed", gradient_norm=gn)
        psi = psi + t * d_psi
        va = va + t * d_va
        energy, grad, g_va, hdiag, h_va, h_cross = trial
    raise PoissonSolveError(
        f"no convergence after {max_iter} iterations", gradient_norm=gnorm(grad, g_va)
    )
