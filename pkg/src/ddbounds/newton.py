"""Damped Newton iteration and parameter continuation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .fvm import DensityRangeError, DiscreteSystem, StateVector

__all__ = [
    "NewtonConfig",
    "SolveReport",
    "NewtonError",
    "MaxIterations",
    "SingularLinearSolve",
    "DensityRangeUnrecoverable",
    "newton_solve",
    "continuation_solve",
    "voltage_ladder",
    "decade_ladder",
]


class NewtonError(RuntimeError):
    """Base class; ``report`` holds the best iterate reached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MaxIterations(NewtonError):
    pass


class SingularLinearSolve(NewtonError):
    pass


class DensityRangeUnrecoverable(NewtonError):
    pass


@dataclass(frozen=True)
class NewtonConfig:
    max_iter: int = 60
    atol: float = 1e-11
    rtol: float = 0.0
    damping_initial: float = 0.1
    damping_growth: float = 2.0
    damping_min: float = 1e-4

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.atol <= 0 or self.rtol < 0:
            raise ValueError("tolerances must be positive")
        for name in ("damping_initial", "damping_min"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.damping_growth < 1:
            raise ValueError("damping_growth must be >= 1")


@dataclass
class SolveReport:
    converged: bool
    state: StateVector
    residual_norms: list = field(default_factory=list)
    damping: list = field(default_factory=list)
    wall_time: float = 0.0
    label: str = ""

    @property
    def iterations(self):
        return len(self.damping)


def _norm(r):
    return float(np.max(np.abs(r))) if r.size else 0.0


def newton_solve(sys: DiscreteSystem, u0: StateVector, cfg: NewtonConfig = NewtonConfig(),
                 label: str = "") -> SolveReport:
    """Damped Newton from ``u0`` (Dirichlet values are imposed first).

    A step is accepted when its densities are valid and the max-norm of the
    residual does not grow; otherwise the damping factor is halved down to
    ``cfg.damping_min``.  Raises a NewtonError subclass on failure, with the
    best iterate in ``exc.report``.
    """
    t0 = time.perf_counter()
    x = sys.apply_dirichlet(sys.pack(u0))
    try:
        res = sys.residual(x)
    except DensityRangeError as exc:
        raise DensityRangeUnrecoverable(f"initial state invalid: {exc}") from exc
    r0 = _norm(res)
    target = cfg.atol + cfg.rtol * r0
    report = SolveReport(False, sys.state(x), [r0], [], 0.0, label)
    damp = cfg.damping_initial

    def finish(ok):
        report.converged = ok
        report.state = sys.state(x)
        report.wall_time = time.perf_counter() - t0
        return report

    rn = r0
    for _ in range(cfg.max_iter):
        if rn <= target:
            return finish(True)
        res, J = sys.residual_and_jacobian(x)
        try:
            with np.errstate(all="ignore"):
                dx = spla.splu(J.tocsc()).solve(-res)
        except RuntimeError as exc:
            finish(False)
            raise SingularLinearSolve(f"sparse LU failed: {exc}", report) from exc
        if not np.all(np.isfinite(dx)):
            finish(False)
            raise SingularLinearSolve("non-finite Newton update", report)
        while True:
            trial = sys.apply_dirichlet(x + damp * dx)
            try:
                r_trial = _norm(sys.residual(trial))
            except DensityRangeError:
                r_trial = np.inf
            if r_trial <= rn or (r_trial <= target):
                break
            damp *= 0.5
            if damp < cfg.damping_min:
                finish(False)
                if np.isinf(r_trial):
                    raise DensityRangeUnrecoverable(
                        "densities invalid at minimal damping", report)
                raise MaxIterations("residual cannot be reduced at minimal damping", report)
        x = trial
        rn = r_trial
        report.residual_norms.append(rn)
        report.damping.append(damp)
        damp = min(1.0, damp * cfg.damping_growth)
    if rn <= target:
        return finish(True)
    finish(False)
    raise MaxIterations(f"no convergence in {cfg.max_iter} iterations "
                        f"(residual {rn:.3e})", report)


def continuation_solve(build: Callable[[float], DiscreteSystem], ladder: Sequence[float],
                       cfg: NewtonConfig = NewtonConfig(), initial: Optional[StateVector] = None,
                       label: str = "") -> list:
    """Solve along ``ladder``, warm-starting each rung from the previous one.

    ``build(value)`` returns the discrete system for a parameter value.  The
    first rung starts from ``initial`` or, if absent, from the equilibrium
    state of its own system.  A failing rung re-raises with the reports of
    the rungs solved so far in ``exc.reports``.
    """
    reports = []
    state = initial
    for value in ladder:
        sys = build(value)
        if state is None:
            state = sys.equilibrium_state()
        try:
            rep = newton_solve(sys, state, cfg, label=f"{label}{value!r}")
        except NewtonError as exc:
            exc.reports = reports
            exc.value = value
            raise
        reports.append(rep)
        state = rep.state
    return reports


def voltage_ladder(v_end, steps=9):
    """``steps`` uniform values from 0 to ``v_end`` (inclusive)."""
    return [float(v) for v in np.linspace(0.0, v_end, steps)]


def decade_ladder(g_end, g_start=1e-2):
    """Multiplicative decade steps from ``g_start`` up to ``g_end``."""
    if g_end <= 0:
        return []
    if g_end <= g_start:
        return [float(g_end)]
    k = int(np.floor(np.log10(g_end / g_start) + 1e-9))
    vals = [float(g_start * 10.0**i) for i in range(k + 1)]
    if not np.isclose(vals[-1], g_end, rtol=1e-12):
        vals.append(float(g_end))
    else:
        vals[-1] = float(g_end)
    return vals
