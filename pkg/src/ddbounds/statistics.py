"""Statistics functions mapping chemical potential to carrier density.

Three families are provided: Boltzmann, Fermi-Dirac of order 1/2 and
Blakemore (bounded, used for ionic vacancies).  Every class exposes the
same vectorised surface::

    F(eta), F'(eta), F^{-1}(n), D(n) = n (F^{-1})'(n), and an antiderivative

so the assembly code never branches on the statistics kind.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaincc, gamma

__all__ = [
    "StatisticsError",
    "Boltzmann",
    "FermiDiracHalf",
    "Blakemore",
    "make_statistics",
]

#: exp overflows a double slightly above this
ETA_OVERFLOW = 700.0
#: densities are clamped to this before taking logarithms
N_FLOOR = 1e-300

_SQRT_PI = np.sqrt(np.pi)


class StatisticsError(ValueError):
    """Argument outside the domain (or range) of a statistics function."""


def _asarray(x):
    return np.asarray(x, dtype=float)


def _check_finite(eta):
    if not np.all(np.isfinite(eta)):
        raise StatisticsError("chemical potential must be finite")


@dataclass(frozen=True)
class Boltzmann:
    """F(eta) = exp(eta)."""

    kind: str = field(default="boltzmann", init=False)

    @property
    def saturation(self):
        return np.inf

    def __call__(self, eta):
        eta = _asarray(eta)
        _check_finite(eta)
        if np.any(eta > ETA_OVERFLOW):
            raise StatisticsError(
                f"Boltzmann density overflows for eta={np.max(eta):.6g} > {ETA_OVERFLOW}"
            )
        return np.exp(eta)

    def derivative(self, eta):
        return self(eta)

    def log_derivative(self, eta):
        """d log F / d eta."""
        return np.ones_like(_asarray(eta))

    def antiderivative(self, eta):
        return self(eta)

    def evaluate(self, eta):
        """(F, F', log F, F'/F) in one pass."""
        f = self(eta)
        eta = _asarray(eta)
        return f, f, eta, np.ones_like(eta)

    def inverse(self, n):
        n = _asarray(n)
        if np.any(~(n > 0)):
            raise StatisticsError("density must be positive")
        return np.log(np.maximum(n, N_FLOOR))

    def diffusion_enhancement(self, n):
        n = _asarray(n)
        if np.any(~(n > 0)):
            raise StatisticsError("density must be positive")
        return np.ones_like(n)


# Gauss-Legendre rule shared by every Fermi-Dirac panel
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
#: panel breakpoints in xi, relative to max(eta, 0)
_FD_BREAKS = (-8.0, 0.0, 8.0, 60.0)


def _fd_panels(eta):
    """Quadrature nodes t and weights w in t = sqrt(xi), shape (len(eta), P)."""
    e0 = np.maximum(eta, 0.0)[:, None]
    b = np.concatenate(
        [np.zeros_like(e0)] + [np.maximum(e0 + s, 0.0) for s in _FD_BREAKS], axis=1
    )
    tb = np.sqrt(b)
    lo, hi = tb[:, :-1, None], tb[:, 1:, None]
    half = 0.5 * (hi - lo)
    t = lo + half * (_GL_X + 1.0)
    w = half * _GL_W
    n = eta.shape[0]
    return t.reshape(n, -1), w.reshape(n, -1), b[:, -1]


#: below this eta the alternating series in exp(eta) is used
_SERIES_MAX = -1.0
_SERIES_K = np.arange(1, 41, dtype=float)
_SERIES_SIGN = np.where(_SERIES_K % 2 == 1, 1.0, -1.0)
_SERIES_POW = {"f": 1.5, "df": 0.5, "F": 2.5}


def _fd_series(eta, which):
    """sum_k (-1)^(k+1) exp(k eta) / k^s; 40 terms reach eps for eta <= -1."""
    e = np.exp(eta[:, None] * _SERIES_K)
    return [e @ (_SERIES_SIGN / _SERIES_K ** _SERIES_POW[k]) for k in which]


@dataclass(frozen=True)
class FermiDiracHalf:
    """Fermi-Dirac integral of order 1/2, normalised so F(eta) ~ exp(eta).

    F(eta) = 2/sqrt(pi) int_0^inf sqrt(xi) / (exp(xi - eta) + 1) dxi

    Evaluated with 64-point Gauss-Legendre panels in t = sqrt(xi) split
    around the Fermi step, plus the closed-form tail beyond the last panel.
    """

    tol: float = 1e-10
    kind: str = field(default="fermi_dirac_half", init=False)

    @property
    def saturation(self):
        return np.inf

    def _integrals(self, eta, which):
        eta = _asarray(eta)
        _check_finite(eta)
        shape = eta.shape
        flat = eta.reshape(-1)
        low = flat <= _SERIES_MAX
        if low.all():
            return [v.reshape(shape) for v in _fd_series(flat, which)]
        if low.any():
            out = [np.empty_like(flat) for _ in which]
            for o, v in zip(out, _fd_series(flat[low], which)):
                o[low] = v
            for o, v in zip(out, self._integrals(flat[~low], which)):
                o[~low] = v
            return [o.reshape(shape) for o in out]
        t, w, xi_max = _fd_panels(flat)
        # xi = t^2, dxi = 2 t dt, integrand sqrt(xi) g dxi = 2 t^2 g dt
        arg = t * t - flat[:, None]
        out = []
        # exp(eta - xi) tail integral: 2/sqrt(pi) e^eta Gamma(3/2, xi_max)
        tail = (
            2.0 / _SQRT_PI * gamma(1.5) * gammaincc(1.5, xi_max)
            * np.exp(np.minimum(flat - xi_max, 0.0))
        )
        for kind in which:
            if kind == "f":
                g = expit(-arg)
            elif kind == "df":
                g = expit(-arg) * expit(arg)
            else:  # antiderivative: log(1 + exp(eta - xi))
                g = np.logaddexp(0.0, -arg)
            val = 4.0 / _SQRT_PI * np.sum(w * t * t * g, axis=1) + tail
            out.append(val.reshape(shape))
        return out

    def __call__(self, eta):
        return self._integrals(eta, ("f",))[0]

    def derivative(self, eta):
        return self._integrals(eta, ("df",))[0]

    def value_and_derivative(self, eta):
        return tuple(self._integrals(eta, ("f", "df")))

    def log_derivative(self, eta):
        f, df = self.value_and_derivative(eta)
        return df / f

    def antiderivative(self, eta):
        return self._integrals(eta, ("F",))[0]

    def evaluate(self, eta):
        f, df = self.value_and_derivative(eta)
        # underflowed densities surface as range errors downstream
        with np.errstate(divide="ignore", invalid="ignore"):
            return f, df, np.log(f), df / f

    def _initial_guess(self, n):
        # Boltzmann limit below, Sommerfeld (degenerate) limit above
        deg = (0.75 * _SQRT_PI * n) ** (2.0 / 3.0)
        return np.where(n < 1.0, np.log(n) + n / np.sqrt(8.0), np.maximum(deg, np.log(n)))

    def inverse(self, n):
        n = _asarray(n)
        if np.any(~(n > 0)) or not np.all(np.isfinite(n)):
            raise StatisticsError("density must be positive and finite")
        shape = n.shape
        n = np.maximum(n.reshape(-1), N_FLOOR)
        logn = np.log(n)
        # F <= exp gives eta >= log n; F convex and increasing bounds eta from above
        lo = logn.copy()
        hi = np.maximum(self._initial_guess(n), lo) + 1.0
        for _ in range(200):
            short = self(hi) < n
            if not short.any():
                break
            hi = np.where(short, hi + 2.0 * (hi - lo) + 1.0, hi)
        eta = np.clip(self._initial_guess(n), lo, hi)
        for _ in range(100):
            f, df = self.value_and_derivative(eta)
            resid = np.log(f) - logn
            lo = np.where(resid < 0, eta, lo)
            hi = np.where(resid > 0, eta, hi)
            step = resid / (df / f)
            new = eta - step
            outside = (new <= lo) | (new >= hi)
            new = np.where(outside, 0.5 * (lo + hi), new)
            done = np.abs(new - eta) <= 1e-14 * (1.0 + np.abs(eta))
            eta = new
            if done.all():
                break
        return eta.reshape(shape)

    def diffusion_enhancement(self, n):
        eta = self.inverse(n)
        f, df = self.value_and_derivative(eta)
        return f / df


@dataclass(frozen=True)
class Blakemore:
    """F(eta) = S / (exp(-eta) + 1), bounded above by the saturation S."""

    saturation: float = 1.0
    kind: str = field(default="blakemore", init=False)

    def __post_init__(self):
        if not self.saturation > 0:
            raise StatisticsError("Blakemore saturation density must be positive")

    def __call__(self, eta):
        eta = _asarray(eta)
        _check_finite(eta)
        return self.saturation * expit(eta)

    def derivative(self, eta):
        eta = _asarray(eta)
        _check_finite(eta)
        return self.saturation * expit(eta) * expit(-eta)

    def log_derivative(self, eta):
        return expit(-_asarray(eta))

    def antiderivative(self, eta):
        return self.saturation * np.logaddexp(0.0, _asarray(eta))

    def evaluate(self, eta):
        eta = _asarray(eta)
        _check_finite(eta)
        up, down = expit(eta), expit(-eta)
        f = self.saturation * up
        return f, f * down, np.log(self.saturation) - np.logaddexp(0.0, -eta), down

    def _check_range(self, n):
        n = _asarray(n)
        if np.any(~(n > 0)) or np.any(~(n < self.saturation)):
            raise StatisticsError(
                f"Blakemore density must lie in (0, {self.saturation})"
            )
        return n

    def inverse(self, n):
        n = self._check_range(n)
        return np.log(n) - np.log(self.saturation - n)

    def diffusion_enhancement(self, n):
        n = self._check_range(n)
        return self.saturation / (self.saturation - n)


def make_statistics(kind, saturation=None):
    """Build a statistics function from its config name."""
    kind = kind.lower()
    if kind == "boltzmann":
        return Boltzmann()
    if kind in ("fermi_dirac_half", "fd12", "fermi-dirac"):
        return FermiDiracHalf()
    if kind == "blakemore":
        if saturation is None:
            raise StatisticsError("Blakemore statistics need a saturation density")
        return Blakemore(float(saturation))
    raise StatisticsError(f"unknown statistics kind {kind!r}")
