"""Exponent classification: where the constrained problem is solvable at all.

For fixed dimension, Riesz order and fractional order there are four special
nonlinearity exponents.  Below the first the interaction is not even
controlled; between the first and second the infimum is attained (the
existence window); from the second up to the mass-critical exponent the
energy stays bounded below but compactness may fail; past the mass-critical
value dilations drive the energy to minus infinity; and at or past the upper
(convolution-driven) critical exponent in three dimensions the variational
framework breaks down entirely.  The two endpoint exponents additionally
carry sign contradictions that rule out solutions pointwise, which
:func:`nonexistence_contradiction` evaluates on concrete fields.

Comparisons happen in exact rational arithmetic whenever the supplied
exponents are rational, so boundary cases are detected by equality instead of
luck; float inputs fall back to a relative tolerance.
"""

from __future__ import annotations

import enum
import numbers
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .functionals import ProblemParams
from .grid import Field
from .operators import frac_seminorm_sq, grad_norm_sq

__all__ = [
    "RegimeLabel",
    "CriticalExponents",
    "ContradictionReport",
    "critical_exponents",
    "classify",
    "classify_exponent",
    "mu_star_l2critical",
    "mu_star_equivalence",
    "nonexistence_contradiction",
]

_REL_TOL = 1e-12


class RegimeLabel(str, enum.Enum):
    """Qualitative behavior of the constrained energy at a given exponent."""

    LOWER_CRITICAL = "LowerCritical"
    EXISTENCE_WINDOW = "ExistenceWindow"
    BOUNDED_BELOW_OPEN = "BoundedBelowOpen"
    L2_CRITICAL = "L2Critical"
    UNBOUNDED_BELOW = "UnboundedBelow"
    HLS_CRITICAL = "HLSCritical"
    SUPERCRITICAL = "Supercritical"


def _exact(x):
    if isinstance(x, numbers.Rational):
        return x if isinstance(x, (int, Fraction)) else Fraction(x)
    return float(x)


def _ratio(num, den):
    # Fraction arithmetic when both ends are rational, float otherwise
    if isinstance(num, numbers.Rational) and isinstance(den, numbers.Rational):
        return Fraction(num, den) if not isinstance(num, Fraction) else num / den
    return float(num) / float(den)


def _cmp(a, b) -> int:
    """Three-way compare; exact for rationals, tolerant for floats."""
    if isinstance(a, numbers.Rational) and isinstance(b, numbers.Rational):
        return (a > b) - (a < b)
    fa, fb = float(a), float(b)
    if abs(fa - fb) <= _REL_TOL * max(1.0, abs(fa), abs(fb)):
        return 0
    return (fa > fb) - (fa < fb)


@dataclass(frozen=True)
class CriticalExponents:
    """The four boundary exponents (``hls_upper`` only exists for n >= 3).

    Entries are :class:`fractions.Fraction` when the inputs were rational.
    Always ``lower < s_upper <= l2_critical``, with equality of the last two
    exactly at ``s = 1``.
    """

    lower: float | Fraction
    s_upper: float | Fraction
    l2_critical: float | Fraction
    hls_upper: float | Fraction | None

    def __post_init__(self) -> None:
        if not (_cmp(self.lower, self.s_upper) < 0 and _cmp(self.s_upper, self.l2_critical) <= 0):
            raise ValueError("critical exponents out of order; invalid inputs")

    def as_dict(self) -> dict:
        return {
            "lower": float(self.lower),
            "s_upper": float(self.s_upper),
            "l2_critical": float(self.l2_critical),
            "hls_upper": None if self.hls_upper is None else float(self.hls_upper),
        }


def critical_exponents(n: int, alpha, s) -> CriticalExponents:
    """Boundary exponents for dimension ``n``, Riesz order ``alpha``, fractional order ``s``.

    ``s = 1`` is accepted here (the fractional operator degenerates to the
    Laplacian and the window's upper end meets the mass-critical exponent).
    """
    if n not in (1, 2, 3):
        raise ValueError("dimension n must be 1, 2 or 3")
    alpha = _exact(alpha)
    s = _exact(s)
    if not 0 < float(alpha) < n:
        raise ValueError("alpha must lie in (0, n)")
    if not 0 < float(s) <= 1:
        raise ValueError("fractional order s must lie in (0, 1]")
    lower = _ratio(n + alpha, n)
    s_upper = _ratio(2 * s + n + alpha, n)
    l2 = _ratio(2 + n + alpha, n)
    hls = _ratio(n + alpha, n - 2) if n >= 3 else None
    return CriticalExponents(lower=lower, s_upper=s_upper, l2_critical=l2, hls_upper=hls)


def classify_exponent(n: int, alpha, s, p) -> RegimeLabel:
    """Place the exponent ``p`` in the regime partition."""
    ce = critical_exponents(n, alpha, s)
    p = _exact(p)
    if _cmp(p, ce.lower) < 0:
        raise ValueError("p lies below the lower critical exponent")
    if _cmp(p, ce.lower) == 0:
        return RegimeLabel.LOWER_CRITICAL
    if ce.hls_upper is not None:
        c = _cmp(p, ce.hls_upper)
        if c == 0:
            return RegimeLabel.HLS_CRITICAL
        if c > 0:
            return RegimeLabel.SUPERCRITICAL
    if _cmp(p, ce.l2_critical) == 0:
        return RegimeLabel.L2_CRITICAL
    if _cmp(p, ce.l2_critical) > 0:
        return RegimeLabel.UNBOUNDED_BELOW
    if _cmp(p, ce.s_upper) < 0:
        return RegimeLabel.EXISTENCE_WINDOW
    # the window is open at its right end, so a tie at s_upper lands here
    return RegimeLabel.BOUNDED_BELOW_OPEN


def classify(params: ProblemParams) -> RegimeLabel:
    """Regime of a parameter set (exact when its exponents are rational)."""
    return classify_exponent(params.n, params.alpha, params.s, params.p)


def mu_star_l2critical(n: int, alpha, tau: float, gn_constant: float) -> float:
    """Coupling threshold at the mass-critical exponent.

    Below the returned value the quadratic part dominates the interaction for
    every admissible field and the energy stays bounded; at ``gn_constant = 1``,
    ``n = 3``, ``alpha = 2``, ``tau = 1`` the value is exactly ``7/6``.
    """
    if n not in (1, 2, 3):
        raise ValueError("dimension n must be 1, 2 or 3")
    alpha = float(alpha)
    if not 0 < alpha < n:
        raise ValueError("alpha must lie in (0, n)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if gn_constant <= 0:
        raise ValueError("the interpolation constant must be positive")
    return (2.0 + n + alpha) / (2.0 * n * gn_constant * tau ** ((alpha + 2.0) / n))


def mu_star_equivalence(n: int, alpha, p, tau: float, gn_constant: float) -> float:
    """Coupling threshold for the action/energy minimizer equivalence.

    Defined for exponents strictly between the lower and mass-critical
    values, where the exponent ``n + alpha + 2 - n p`` is positive.
    """
    if n not in (1, 2, 3):
        raise ValueError("dimension n must be 1, 2 or 3")
    alpha = float(alpha)
    p = float(p)
    if not 0 < alpha < n:
        raise ValueError("alpha must lie in (0, n)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if gn_constant <= 0:
        raise ValueError("the interpolation constant must be positive")
    e = n + alpha + 2.0 - n * p
    if not (p >= (n + alpha) / n - 1e-12 and e > 1e-12):
        raise ValueError("p must lie between the lower and mass-critical exponents")
    return p * tau ** (1.0 - p) / (gn_constant * e ** (e / 2.0))


@dataclass(frozen=True)
class ContradictionReport:
    """Two quantities a nonexistence-endpoint solution would have to equate.

    On any nontrivial field with positive fractional weight the two sides
    carry opposite strict signs, which is the numerical shadow of the
    endpoint nonexistence argument.
    """

    regime: RegimeLabel
    lhs_name: str
    rhs_name: str
    lhs: float
    rhs: float
    opposite_signs: bool

    def as_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "lhs_name": self.lhs_name,
            "rhs_name": self.rhs_name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "opposite_signs": self.opposite_signs,
        }


def nonexistence_contradiction(u: Field, params: ProblemParams) -> ContradictionReport:
    """Evaluate the endpoint sign contradiction on a concrete field.

    At the lower endpoint a solution would need its squared gradient norm to
    equal ``-s * lam`` times the squared fractional seminorm; at the upper
    endpoint its negative squared mass would need to equal ``(1 - s) * lam``
    times the squared seminorm.  Either identity pits a strictly positive
    quantity against a strictly negative one.
    """
    label = classify(params)
    s = float(params.s)
    if label is RegimeLabel.LOWER_CRITICAL:
        lhs = grad_norm_sq(u)
        rhs = -s * params.lam * frac_seminorm_sq(u, s)
        names = ("grad_norm_sq", "-s*lam*frac_seminorm_sq")
    elif label is RegimeLabel.HLS_CRITICAL:
        lhs = -params.tau
        rhs = (1.0 - s) * params.lam * frac_seminorm_sq(u, s)
        names = ("-tau", "(1-s)*lam*frac_seminorm_sq")
    else:
        raise ValueError(
            "contradiction diagnostics exist only at the endpoint exponents"
        )
    opposite = (lhs > 0.0 > rhs) or (lhs < 0.0 < rhs)
    return ContradictionReport(
        regime=label,
        lhs_name=names[0],
        rhs_name=names[1],
        lhs=float(lhs),
        rhs=float(rhs),
        opposite_signs=bool(opposite),
    )
