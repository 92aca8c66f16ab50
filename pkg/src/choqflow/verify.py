"""Sharp constants, interpolation ratios, and the self-check suite.

Two classes of checks live here.  The first is purely analytic: closed-form
constants (the sharp convolution-inequality constant, the Riesz kernel
normalization) evaluated through two independent log-gamma implementations,
one of them a from-scratch Stirling series, so a library regression cannot
pass silently.  The second is numerical: discrete functionals evaluated on
profiles with known whole-space values (Gaussians, the algebraic extremal
profile of the convolution inequality), plus finite-difference checks of the
energy gradient and tiny-grid direct convolutions.  :func:`full_suite`
bundles everything into one report and supports deliberate fault injection,
which must make it fail.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .functionals import ProblemParams, action, choquard_energy, first_variation
from .grid import (
    BoxDecayWarning,
    Field,
    GridSpec,
    inverse_transform,
    sample_gaussian,
    transform,
    SpectralField,
)
from .operators import (
    MultiplierCache,
    _riesz_A,
    apply_multiplier,
    build_multiplier,
    direct_convolve_oracle,
    frac_seminorm_sq,
    grad_norm_sq,
    riesz_convolve,
)

__all__ = [
    "ConstantReport",
    "lngamma_stirling",
    "gamma_crosscheck",
    "riesz_normalization",
    "hls_sharp_constant",
    "hls_constant_report",
    "hls_extremal_profile",
    "lebesgue_norm",
    "hls_ratio",
    "gn_ratio",
    "estimate_gn_constant",
    "linfty_bound_check",
    "gradient_check",
    "random_smooth_field",
    "full_suite",
]

# Bernoulli numbers B_2k entering the Stirling tail, k = 1..7
_BERNOULLI = (
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
)


def lngamma_stirling(x: float) -> float:
    """Log-gamma from the asymptotic series after an upward recurrence shift.

    Deliberately avoids the library implementation (a Lanczos-type rational
    fit) so the two can cross-validate each other.  Accurate to well below
    1e-12 in relative terms for positive arguments.
    """
    x = float(x)
    if not x > 0:
        raise ValueError("lngamma_stirling requires a positive argument")
    shift = 0.0
    y = x
    while y < 24.0:
        shift += math.log(y)
        y += 1.0
    out = (y - 0.5) * math.log(y) - y + 0.5 * math.log(2.0 * math.pi)
    ypow = y
    for k, (num, den) in enumerate(_BERNOULLI, start=1):
        out += num / (den * 2 * k * (2 * k - 1) * ypow)
        ypow *= y * y
    return out - shift


def gamma_crosscheck(count: int = 100, seed: int = 20240817) -> float:
    """Largest relative disagreement between the two log-gamma routes."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.05, 40.0, size=count)
    worst = 0.0
    for x in xs:
        a = math.lgamma(x)
        b = lngamma_stirling(x)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return worst


@dataclass(frozen=True)
class ConstantReport:
    """A named constant evaluated two ways."""

    name: str
    value: float
    crosscheck: float
    rel_gap: float


def riesz_normalization(n: int, alpha: float) -> float:
    """Normalization making ``|2 pi xi|**(-alpha)`` the symbol of the kernel."""
    alpha = float(alpha)
    if n not in (1, 2, 3):
        raise ValueError("dimension n must be 1, 2 or 3")
    if not 0.0 < alpha < n:
        raise ValueError("alpha must lie in (0, n)")
    return _riesz_A(n, alpha)


def hls_sharp_constant(n: int, alpha: float) -> float:
    """Sharp constant of the diagonal convolution inequality at conjugate exponents."""
    alpha = float(alpha)
    if n not in (1, 2, 3):
        raise ValueError("dimension n must be 1, 2 or 3")
    if not 0.0 < alpha < n:
        raise ValueError("alpha must lie in (0, n)")
    return math.pi ** ((n - alpha) / 2.0) * math.exp(
        math.lgamma(alpha / 2.0)
        - math.lgamma((n + alpha) / 2.0)
        - (alpha / n) * (math.lgamma(n / 2.0) - math.lgamma(float(n)))
    )


def hls_constant_report(n: int, alpha: float) -> ConstantReport:
    """The sharp constant via library log-gamma and via the Stirling route."""
    value = hls_sharp_constant(n, alpha)
    alpha = float(alpha)
    other = math.pi ** ((n - alpha) / 2.0) * math.exp(
        lngamma_stirling(alpha / 2.0)
        - lngamma_stirling((n + alpha) / 2.0)
        - (alpha / n) * (lngamma_stirling(n / 2.0) - lngamma_stirling(float(n)))
    )
    gap = abs(value - other) / max(abs(value), 1e-300)
    return ConstantReport(
        name=f"hls_sharp_constant({n},{alpha:g})", value=value, crosscheck=other, rel_gap=gap
    )


def hls_extremal_profile(grid: GridSpec, alpha: float, scale: float = 1.0) -> Field:
    """The algebraic optimizer shape ``(scale**2 + |x|**2) ** (-(n + alpha) / 2)``."""
    alpha = float(alpha)
    if not 0.0 < alpha < grid.n:
        raise ValueError("alpha must lie in (0, n)")
    if scale <= 0:
        raise ValueError("profile scale must be positive")
    return Field(grid, (scale ** 2 + grid.radius_sq()) ** (-(grid.n + alpha) / 2.0))


def lebesgue_norm(u: Field, t: float) -> float:
    """Cell-weighted Lebesgue norm of exponent ``t >= 1``."""
    t = float(t)
    if t < 1.0:
        raise ValueError("Lebesgue exponent must be at least 1")
    return float((u.grid.cell_volume * np.sum(np.abs(u.values) ** t)) ** (1.0 / t))


def hls_ratio(f: Field, h: Field, alpha: float, method: str = "freespace") -> float:
    """Diagonal convolution functional over the product of conjugate-exponent norms.

    Returns ``(double integral of f(x) h(y) / |x-y|**(n-alpha))`` divided by
    ``norm_t(f) * norm_t(h)`` with ``t = 2n / (n + alpha)``; bounded by
    :func:`hls_sharp_constant` with equality only on the matched algebraic
    profiles.
    """
    if f.grid != h.grid:
        raise ValueError("fields live on different grids")
    n = f.grid.n
    alpha = float(alpha)
    pairing = riesz_convolve(f, alpha, method=method).inner(h) / _riesz_A(n, alpha)
    t = 2.0 * n / (n + alpha)
    denom = lebesgue_norm(f, t) * lebesgue_norm(h, t)
    if denom == 0.0:
        raise ValueError("ratio undefined for the zero field")
    return pairing / denom


def gn_ratio(u: Field, params: ProblemParams, method: str = "freespace",
             allow_out_of_range: bool = False) -> float:
    """Interaction over the matched product of gradient and mass powers.

    The exponents ``(n p - n - alpha) / 2`` on the gradient term and
    ``(n + alpha - p (n - 2)) / 2`` on the mass term make the ratio invariant
    under both amplitude scaling and dilation, so on each profile shape it is
    a pure shape constant; its supremum over shapes is the sharp
    interpolation constant used by the coupling thresholds.

    The guarded exponent range is the stated one, capped above by the
    mixed-mass exponent ``(2 s + n + alpha) / n``; the ratio itself stays
    meaningful up to ``(n + alpha) / (n - 2)``, so ``allow_out_of_range``
    lifts the cap.
    """
    n = params.n
    p = float(params.p)
    alpha = float(params.alpha)
    if not allow_out_of_range:
        upper = (2.0 * float(params.s) + n + alpha) / n
        if not ((n + alpha) / n - 1e-12 <= p <= upper + 1e-12):
            raise ValueError(
                "p outside the interpolation range; pass allow_out_of_range to override"
            )
    A = choquard_energy(u, params, method=method)
    grad = grad_norm_sq(u)
    H = u.l2_norm_sq()
    if grad <= 0.0 or H <= 0.0:
        raise ValueError("ratio undefined for constant or zero fields")
    a = 0.5 * (n * p - n - alpha)
    b = 0.5 * (n + alpha - p * (n - 2.0))
    return A / (grad ** a * H ** b)


def _default_ratio_grid(n: int) -> GridSpec:
    if n == 1:
        return GridSpec(1, 512, 48.0)
    if n == 2:
        return GridSpec(2, 128, 24.0)
    return GridSpec(3, 64, 12.0)


def estimate_gn_constant(
    n: int,
    alpha: float,
    p: float,
    grid: GridSpec | None = None,
    widths: tuple = (0.5, 1.0, 2.0, 4.0),
    extra_profiles: tuple = (),
    method: str = "freespace",
    s: float = 1.0,
) -> float:
    """Empirical interpolation constant: max ratio over a profile family.

    The default family is a width ladder of Gaussians (boundary-decay
    warnings suppressed; mild truncation only lowers the ratios, so the
    estimate stays a lower bound).  Extra profiles can only increase it.
    ``s`` only widens or narrows the guarded exponent range; the ratio does
    not depend on it.
    """
    if grid is None:
        grid = _default_ratio_grid(n)
    if grid.n != n:
        raise ValueError("grid dimension does not match n")
    alpha = float(alpha)
    upper = (2.0 * float(s) + n + alpha) / n
    if not ((n + alpha) / n - 1e-12 <= float(p) <= upper + 1e-12):
        raise ValueError("p outside the interpolation range for this s")
    params = ProblemParams(n=n, alpha=alpha, s=0.5, p=p, lam=0.0, mu=1.0, tau=1.0)
    best = -math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoxDecayWarning)
        for a in widths:
            u = sample_gaussian(grid, float(a))
            best = max(best, gn_ratio(u, params, method=method, allow_out_of_range=True))
    for u in extra_profiles:
        best = max(best, gn_ratio(u, params, method=method, allow_out_of_range=True))
    if not math.isfinite(best):
        raise ValueError("empty profile family")
    return best


def linfty_bound_check(u: Field, params: ProblemParams, method: str = "freespace") -> float:
    """Sup norm of the interaction potential ``I_alpha * |u|**p``.

    Finiteness (and stability under box refinement) of this quantity is the
    discrete shadow of the regularity bootstrap; requires ``n >= 3`` and an
    exponent between the lower and upper critical values.
    """
    n = params.n
    if n < 3:
        raise ValueError("the potential bound check requires n >= 3")
    p = float(params.p)
    alpha = float(params.alpha)
    if not ((n + alpha) / n - 1e-12 <= p <= (n + alpha) / (n - 2.0) + 1e-12):
        raise ValueError("p outside the admissible range for the bound check")
    f = Field(u.grid, np.abs(u.values) ** p)
    pot = riesz_convolve(f, alpha, method=method)
    return float(np.max(np.abs(pot.values)))


def random_smooth_field(grid: GridSpec, rng: np.random.Generator,
                        decay_scale: float = 4.0) -> Field:
    """Seeded random field with spectrally decaying content (safe for FD tests)."""
    noise = rng.standard_normal(grid.shape)
    spec = transform(Field(grid, noise))
    xi_sq = grid.freq_mag_sq()
    cutoff = (grid.nyquist / decay_scale) ** 2
    damped = spec.coefficients * np.exp(-xi_sq / max(cutoff, 1e-300))
    out = inverse_transform(SpectralField(grid, damped))
    peak = float(np.max(np.abs(out.values)))
    if peak == 0.0:
        return out
    return Field(grid, out.values / peak)


def gradient_check(
    params: ProblemParams,
    grid: GridSpec,
    pairs: int = 20,
    eps: float = 1e-5,
    seed: int = 7,
    method: str = "freespace",
) -> float:
    """Worst mismatch between the action's directional FD quotient and its gradient.

    For each seeded pair ``(u, v)`` compares
    ``(S(u + eps v) - S(u - eps v)) / (2 eps)`` to the pairing of the
    first-variation field with ``v``.  Returns the maximum absolute gap.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        u = random_smooth_field(grid, rng)
        v = random_smooth_field(grid, rng)
        plus = action(Field(grid, u.values + eps * v.values), params, method=method).S
        minus = action(Field(grid, u.values - eps * v.values), params, method=method).S
        fd = (plus - minus) / (2.0 * eps)
        pairing = first_variation(u, params, method=method).inner(v)
        worst = max(worst, abs(fd - pairing))
    return worst


# ----------------------------------------------------------------------------
# bundled self-check suite
# ----------------------------------------------------------------------------

def _check(checks: list, name: str, value: float, bound: float, passed=None) -> None:
    ok = bool(value <= bound) if passed is None else bool(passed)
    checks.append({"name": name, "value": float(value), "bound": float(bound), "passed": ok})


def full_suite(quick: bool = False, corrupt: bool = False, seed: int = 20240817) -> dict:
    """Run the analytic and numerical self-checks; returns a JSON-able report.

    ``quick`` skips the heavier interpolation-ratio blocks.  ``corrupt``
    perturbs a multiplier table before the direct-convolution comparison and
    must therefore produce a failing report.
    """
    checks: list[dict] = []
    rng = np.random.default_rng(seed)

    _check(checks, "gamma-crosscheck", gamma_crosscheck(seed=seed), 1e-12)

    gap32 = abs(riesz_normalization(3, 2.0) * 4.0 * math.pi - 1.0)
    _check(checks, "riesz-normalization-3-2", gap32, 1e-12)
    gap1h = abs(riesz_normalization(1, 0.5) * math.sqrt(2.0 * math.pi) - 1.0)
    _check(checks, "riesz-normalization-1-0.5", gap1h, 1e-12)

    rep = hls_constant_report(3, 2.0)
    _check(checks, "hls-constant-3-2", rep.rel_gap, 1e-12)

    # tiny-grid direct convolution oracles (optionally sabotaged)
    g3 = GridSpec(3, 8, 4.0)
    cache = build_multiplier(g3, "riesz", 2.0)
    if corrupt:
        table = cache.table.copy()
        table[(1, 0, 0)] *= 1.001
        cache = MultiplierCache(grid=g3, kind=cache.kind, param=cache.param,
                                table=table, zero_mode=cache.zero_mode)
    f3 = Field(g3, rng.standard_normal(g3.shape))
    fast = apply_multiplier(f3, cache)
    slow = direct_convolve_oracle(f3, build_multiplier(g3, "riesz", 2.0))
    scale = max(float(np.max(np.abs(slow.values))), 1e-300)
    _check(checks, "direct-oracle-riesz-3d",
           float(np.max(np.abs(fast.values - slow.values))) / scale, 1e-10)

    g1 = GridSpec(1, 16, 8.0)
    cache1 = build_multiplier(g1, "fractional", 0.3)
    f1 = Field(g1, rng.standard_normal(g1.shape))
    fast1 = apply_multiplier(f1, cache1)
    slow1 = direct_convolve_oracle(f1, cache1)
    scale1 = max(float(np.max(np.abs(slow1.values))), 1e-300)
    _check(checks, "direct-oracle-fractional-1d",
           float(np.max(np.abs(fast1.values - slow1.values))) / scale1, 1e-10)

    # Gaussian closed forms
    g = GridSpec(3, 64, 16.0)
    u = sample_gaussian(g, 1.0)
    mass_target = (math.pi / 2.0) ** 1.5
    _check(checks, "gaussian-mass-3d",
           abs(u.l2_norm_sq() - mass_target) / mass_target, 1e-8)
    grad_target = 3.0 * mass_target
    _check(checks, "gaussian-grad-3d",
           abs(grad_norm_sq(u) - grad_target) / grad_target, 1e-8)

    # The seminorm symbol |2*pi*xi|^{2s} has a cusp at the origin, so the
    # lattice sum converges to the whole-space value only at rate L^-(n+2s);
    # the tight oracle is therefore a frequency-lattice quadrature with the
    # analytic Gaussian transform, which shares the lattice and isolates the
    # implementation (symbol, weights, FFT scaling) from the truncation error.
    g1d = GridSpec(1, 1024, 64.0)
    u1 = sample_gaussian(g1d, 1.0)
    xi1 = g1d.axis_freqs()
    uhat = math.sqrt(math.pi) * np.exp(-math.pi ** 2 * xi1 ** 2)
    quad = float(np.sum((2.0 * math.pi * np.abs(xi1)) * uhat ** 2) / g1d.L)
    _check(checks, "gaussian-seminorm-1d",
           abs(frac_seminorm_sq(u1, 0.5) - quad) / quad, 1e-8)

    # whole-space potential of a Gaussian along a lattice ray
    g32 = GridSpec(3, 32, 16.0)
    ug = sample_gaussian(g32, 1.0)
    pot = riesz_convolve(ug, 2.0)
    mid = g32.N // 2
    worst = 0.0
    for m in range(1, 11):
        r = g32.h * m
        target = math.pi ** 1.5 * math.erf(r) / (4.0 * math.pi * r)
        got = pot.values[(mid + m, mid, mid)]
        worst = max(worst, abs(got - target) / target)
    _check(checks, "newtonian-radial", worst, 1e-3)

    params = ProblemParams(n=3, alpha=2.0, s=0.5, p=1.8, lam=0.1, mu=1.0, tau=1.0)
    pairs = 5 if quick else 20
    _check(checks, "gradient-fd",
           gradient_check(params, GridSpec(3, 16, 8.0), pairs=pairs, seed=seed), 1e-5)

    if not quick:
        C = hls_sharp_constant(3, 2.0)
        gx = GridSpec(3, 64, 32.0)
        h = hls_extremal_profile(gx, 2.0, scale=2.0)
        ratio = hls_ratio(h, h, 2.0)
        _check(checks, "hls-extremal-ratio", abs(ratio - C) / C, 0.02)
        gauss_ratio = hls_ratio(sample_gaussian(gx, 0.25), sample_gaussian(gx, 0.25), 2.0)
        _check(checks, "hls-gaussian-strictly-below", gauss_ratio, C,
               passed=gauss_ratio < ratio)

        grid_r = GridSpec(3, 64, 10.0)
        p18 = ProblemParams(n=3, alpha=2.0, s=0.5, p=1.8, lam=0.0, mu=1.0, tau=1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoxDecayWarning)
            ratios = [
                gn_ratio(sample_gaussian(grid_r, a), p18) for a in (0.5, 1.0, 2.0)
            ]
        spread = (max(ratios) - min(ratios)) / max(ratios)
        _check(checks, "gn-dilation-invariance", spread, 1e-6)

    return {
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
        "quick": quick,
        "corrupt": corrupt,
        "seed": seed,
    }
