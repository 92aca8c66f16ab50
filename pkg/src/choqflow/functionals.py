"""The constrained energy, its variation, and the exact identity diagnostics.

The central objects are the quadratic pieces (squared mass ``H``, squared
gradient norm, squared fractional seminorm) and the nonlocal interaction

    A_p(u) = integral of (I_alpha * |u|**p) |u|**p,

with the Riesz convolution carrying the standard normalization so that
whole-space closed forms apply verbatim.  From these the module assembles the
free energy, the action, the Euler-Lagrange field, and the scalar identities
(Nehari, dilation/virial, and their linear combination) whose residuals are
the package's main correctness instruments: they vanish on exact solutions
and their size measures how far a numerical state is from solving the
equation on the whole space.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.fft as sfft

from .grid import Field
from .operators import (
    _cached_multiplier,
    mixed_apply,
    riesz_convolve,
)

__all__ = [
    "ProblemParams",
    "EnergyBreakdown",
    "power_field",
    "choquard_energy",
    "action",
    "first_variation",
    "nehari_residual",
    "nehari_relative",
    "pohozaev_residual",
    "pohozaev_relative",
    "lagrange_multiplier",
    "energy_identity_gap",
    "combined_identity_residual",
    "equation_residual",
]

_TINY = 1e-300


def _keep_exact(x):
    # rationals (ints, Fractions) pass through so regime classification can
    # compare exponents exactly; everything else collapses to float
    if isinstance(x, numbers.Rational):
        return x if isinstance(x, (int, Fraction)) else Fraction(x)
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("parameters must be finite")
    return x


@dataclass(frozen=True)
class ProblemParams:
    """Problem data for the mixed local/nonlocal constrained minimization.

    Parameters
    ----------
    n : int
        Dimension (1, 2 or 3).
    alpha : float or Fraction
        Riesz-potential order, in ``(0, n)``.
    s : float or Fraction
        Fractional-Laplacian order, in ``(0, 1)``.
    p : float or Fraction
        Nonlinearity exponent; at least the lower critical value
        ``(n + alpha) / n``.  Rational values are kept exact so regime
        boundaries can be detected by equality rather than tolerance.
    lam : float
        Weight of the fractional operator, nonnegative.
    mu : float
        Interaction strength, nonnegative (zero gives the purely quadratic
        flow, useful as an oracle).
    tau : float
        Prescribed squared mass, positive.
    """

    n: int
    alpha: float | Fraction
    s: float | Fraction
    p: float | Fraction
    lam: float
    mu: float
    tau: float

    def __post_init__(self) -> None:
        if self.n not in (1, 2, 3):
            raise ValueError("dimension n must be 1, 2 or 3")
        alpha = _keep_exact(self.alpha)
        s = _keep_exact(self.s)
        p = _keep_exact(self.p)
        lam = float(self.lam)
        mu = float(self.mu)
        tau = float(self.tau)
        if not 0 < float(alpha) < self.n:
            raise ValueError("alpha must lie in (0, n)")
        if not 0 < float(s) < 1:
            raise ValueError("fractional order s must lie in (0, 1)")
        if float(p) < (self.n + float(alpha)) / self.n - 1e-12:
            raise ValueError(
                "p must be at least the lower critical exponent (n + alpha) / n"
            )
        if not np.isfinite(lam) or lam < 0:
            raise ValueError("lam must be nonnegative")
        if not np.isfinite(mu) or mu < 0:
            raise ValueError("mu must be nonnegative")
        if not np.isfinite(tau) or tau <= 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "tau", tau)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha": float(self.alpha),
            "s": float(self.s),
            "p": float(self.p),
            "lambda": self.lam,
            "mu": self.mu,
            "tau": self.tau,
        }


@dataclass(frozen=True)
class EnergyBreakdown:
    """All scalar pieces of the energy at one field.

    ``H`` squared mass, ``grad`` squared gradient norm, ``semi`` squared
    fractional seminorm, ``T = grad + lam * semi`` the full quadratic form,
    ``A`` the nonlocal interaction, ``S`` the action and ``I`` the free
    energy.  By construction ``S = I + H / 2`` holds exactly.
    """

    H: float
    grad: float
    semi: float
    T: float
    A: float
    S: float
    I: float

    def as_dict(self) -> dict:
        return {
            "H": self.H,
            "grad": self.grad,
            "semi": self.semi,
            "T": self.T,
            "A": self.A,
            "S": self.S,
            "I": self.I,
        }


def _grad_and_semi(u: Field, s: float) -> tuple[float, float]:
    # both quadratic forms from a single FFT
    g = u.grid
    lap = _cached_multiplier(g, "laplacian", None, "ball-average").table
    frac = _cached_multiplier(g, "fractional", float(s), "ball-average").table
    F = sfft.fftn(u.values)
    power = F.real ** 2 + F.imag ** 2
    w = g.cell_volume / g.N ** g.n
    return float(w * np.sum(lap * power)), float(w * np.sum(frac * power))


def power_field(u: Field, q: float) -> Field:
    """The field ``|u|**q`` on the same grid."""
    return Field(u.grid, np.abs(u.values) ** float(q))


def _signed_power(values: np.ndarray, q: float) -> np.ndarray:
    # |u|**q * sign(u); well defined at u = 0 for q > 0
    return np.sign(values) * np.abs(values) ** q


def choquard_energy(u: Field, params: ProblemParams, method: str = "freespace") -> float:
    """The interaction ``A_p(u)``, a double integral folded through the Riesz kernel."""
    f = power_field(u, float(params.p))
    pot = riesz_convolve(f, float(params.alpha), method=method)
    return pot.inner(f)


def action(u: Field, params: ProblemParams, method: str = "freespace") -> EnergyBreakdown:
    """Evaluate every energy piece at ``u`` in one pass."""
    p = float(params.p)
    H = u.l2_norm_sq()
    grad, semi = _grad_and_semi(u, float(params.s))
    T = grad + params.lam * semi
    A = choquard_energy(u, params, method=method)
    interaction = params.mu * A / (2.0 * p)
    I = 0.5 * T - interaction
    S = I + 0.5 * H
    return EnergyBreakdown(H=H, grad=grad, semi=semi, T=T, A=A, S=S, I=I)


def first_variation(u: Field, params: ProblemParams, method: str = "freespace") -> Field:
    """Gradient field of the action: ``L u + u - mu (I_alpha * |u|**p) |u|**(p-2) u``."""
    p = float(params.p)
    lin = mixed_apply(u, params.lam, float(params.s))
    out = lin.values + u.values
    if params.mu > 0.0:
        f = power_field(u, p)
        pot = riesz_convolve(f, float(params.alpha), method=method)
        out = out - params.mu * pot.values * _signed_power(u.values, p - 1.0)
    return Field(u.grid, out)


def nehari_residual(u: Field, params: ProblemParams, delta: float = 1.0,
                    method: str = "freespace") -> float:
    """Pairing of the Euler-Lagrange field with ``u``; zero on exact solutions."""
    bd = action(u, params, method=method)
    return bd.grad + params.lam * bd.semi + float(delta) * bd.H - params.mu * bd.A


def nehari_relative(u: Field, params: ProblemParams, delta: float = 1.0,
                    method: str = "freespace") -> float:
    """Nehari residual divided by the magnitude of its largest term."""
    bd = action(u, params, method=method)
    raw = bd.grad + params.lam * bd.semi + float(delta) * bd.H - params.mu * bd.A
    scale = max(bd.grad, abs(params.lam * bd.semi), abs(float(delta)) * bd.H,
                params.mu * bd.A, _TINY)
    return abs(raw) / scale


def pohozaev_residual(u: Field, params: ProblemParams, delta: float = 1.0,
                      method: str = "freespace") -> float:
    """Dilation (virial) identity residual; zero on whole-space solutions.

    The combination weights each energy piece by its scaling dimension, so a
    state that solves the equation but lives on a torus rather than the whole
    space shows a residual reflecting the domain truncation.
    """
    n = params.n
    s = float(params.s)
    p = float(params.p)
    bd = action(u, params, method=method)
    return (
        0.5 * (n - 2.0) * bd.grad
        + 0.5 * (n - 2.0 * s) * params.lam * bd.semi
        + 0.5 * n * float(delta) * bd.H
        - 0.5 * (n + float(params.alpha)) / p * params.mu * bd.A
    )


def pohozaev_relative(u: Field, params: ProblemParams, delta: float = 1.0,
                      method: str = "freespace") -> float:
    """Dilation residual divided by the magnitude of its largest term."""
    n = params.n
    s = float(params.s)
    p = float(params.p)
    bd = action(u, params, method=method)
    terms = (
        0.5 * (n - 2.0) * bd.grad,
        0.5 * (n - 2.0 * s) * params.lam * bd.semi,
        0.5 * n * float(delta) * bd.H,
        -0.5 * (n + float(params.alpha)) / p * params.mu * bd.A,
    )
    return abs(sum(terms)) / max(max(abs(t) for t in terms), _TINY)


def lagrange_multiplier(u: Field, params: ProblemParams,
                        method: str = "freespace") -> float:
    """Multiplier of the mass constraint at ``u``: ``(T - mu A) / (2 H)``."""
    bd = action(u, params, method=method)
    if bd.H <= 0.0:
        raise ValueError("cannot form the multiplier of the zero field")
    return (bd.T - params.mu * bd.A) / (2.0 * bd.H)


def energy_identity_gap(u: Field, params: ProblemParams,
                        method: str = "freespace") -> float:
    """``S - mu (p-1)/(2p) A``; vanishes where the action meets its Nehari value."""
    p = float(params.p)
    bd = action(u, params, method=method)
    return bd.S - params.mu * (p - 1.0) / (2.0 * p) * bd.A


def combined_identity_residual(u: Field, params: ProblemParams,
                               method: str = "freespace") -> float:
    """Residual of the combined mass/interaction identity.

    Eliminating the quadratic gradient term between the Nehari and dilation
    identities (both at unit mass shift) leaves

        (mu / 2p) A = (H + (1 - s) lam semi) / (n + alpha - p (n - 2)),

    whose residual this returns.  The denominator vanishes exactly at the
    upper critical exponent, where the identity degenerates.
    """
    n = params.n
    s = float(params.s)
    p = float(params.p)
    D = n + float(params.alpha) - p * (n - 2.0)
    if abs(D) < 1e-14:
        raise ValueError("combined identity degenerates at the upper critical exponent")
    bd = action(u, params, method=method)
    return params.mu / (2.0 * p) * bd.A - (bd.H + (1.0 - s) * params.lam * bd.semi) / D


def equation_residual(u: Field, params: ProblemParams, delta: float,
                      method: str = "freespace") -> tuple[float, float]:
    """L2 norm of the Euler-Lagrange field at mass shift ``delta``.

    Returns ``(raw, relative)`` where the relative form divides by the
    largest of the three term norms (linear part, shifted mass term,
    interaction term), so it is meaningful for both interacting and purely
    quadratic problems.
    """
    p = float(params.p)
    delta = float(delta)
    lin = mixed_apply(u, params.lam, float(params.s))
    nl = np.zeros_like(u.values)
    if params.mu > 0.0:
        f = power_field(u, p)
        pot = riesz_convolve(f, float(params.alpha), method=method)
        nl = params.mu * pot.values * _signed_power(u.values, p - 1.0)
    res = lin.values + delta * u.values - nl
    w = u.grid.cell_volume
    raw = float(np.sqrt(w * np.sum(res ** 2)))
    scale = max(
        float(np.sqrt(w * np.sum(lin.values ** 2))),
        abs(delta) * u.l2_norm(),
        float(np.sqrt(w * np.sum(nl ** 2))),
        _TINY,
    )
    return raw, raw / scale
