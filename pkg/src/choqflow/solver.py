"""Normalized semi-implicit gradient flow on the fixed-mass sphere.

Each iteration treats the stiff quadratic operator implicitly (a diagonal
solve in frequency space, unconditionally stable) and the interaction term
explicitly, then projects back onto the sphere of prescribed squared mass.
The free energy decreases monotonically along accepted steps; an increase
triggers automatic halving of the step size (a bounded number of times) after
rolling the state back.  Convergence requires both a relative energy
increment below ``tol_energy`` and a relative Euler-Lagrange residual below
``tol_residual`` at the flow's own mass shift.

The report attached to every solve carries the full energy breakdown, the
constraint multiplier and mass shift, the identity residuals, the regime
label of the exponents, and - when the exponents lie in an unbounded or
endpoint regime - either a dilation-divergence witness or the endpoint sign
contradiction evaluated at the final state.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.fft as sfft

from .functionals import (
    EnergyBreakdown,
    ProblemParams,
    _signed_power,
    action,
    energy_identity_gap,
    equation_residual,
    power_field,
)
from .grid import (
    BoxDecayWarning,
    Field,
    GridSpec,
    fourier_interpolate,
    sample_gaussian,
)
from .operators import _cached_multiplier, dealias as dealias_mask, riesz_convolve
from .regimes import ContradictionReport, RegimeLabel, classify, nonexistence_contradiction

__all__ = [
    "SolverOptions",
    "SolveReport",
    "gaussian_seed",
    "flow_step",
    "solve_ground_state",
    "dilation_energy_curve",
    "delta_rescale",
]

log = logging.getLogger(__name__)

#: witness dilation factors for the unbounded-from-below certificate
WITNESS_FACTORS = (2.0, 4.0, 8.0)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the flow; the defaults are the tested configuration."""

    dt: float = 0.1
    max_iters: int = 20000
    tol_energy: float = 1e-10
    tol_residual: float = 1e-6
    c: float = 1.0
    seed_width: float = 1.0
    riesz_method: str = "freespace"
    divergence_floor: float = -1e6
    max_dt_halvings: int = 10
    use_dealias: bool = False
    resolution_study: bool = False
    history_every: int = 50
    residual_every: int = 25
    initial_field: Field | None = None

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol_energy <= 0 or self.tol_residual <= 0:
            raise ValueError("tolerances must be positive")
        if self.c < 0:
            raise ValueError("mass shift c must be nonnegative")
        if self.seed_width <= 0:
            raise ValueError("seed width must be positive")
        if self.riesz_method not in ("freespace", "multiplier"):
            raise ValueError(f"unknown riesz method {self.riesz_method!r}")
        if self.history_every < 1 or self.residual_every < 1:
            raise ValueError("history and residual cadences must be positive")

    def as_dict(self) -> dict:
        return {
            "dt": self.dt,
            "max_iters": self.max_iters,
            "tol_energy": self.tol_energy,
            "tol_residual": self.tol_residual,
            "c": self.c,
            "seed_width": self.seed_width,
            "riesz_method": self.riesz_method,
            "divergence_floor": self.divergence_floor,
            "max_dt_halvings": self.max_dt_halvings,
            "use_dealias": self.use_dealias,
            "resolution_study": self.resolution_study,
            "history_every": self.history_every,
            "residual_every": self.residual_every,
            "custom_seed": self.initial_field is not None,
        }


@dataclass(frozen=True)
class SolveReport:
    """Everything measured at the end of a flow."""

    converged: bool
    iterations: int
    breakdown: EnergyBreakdown
    multiplier: float
    delta: float
    nehari_raw: float
    nehari_rel: float
    pohozaev_raw: float
    pohozaev_rel: float
    energy_gap_rel: float
    regime: str
    regime_flag: str | None
    contradiction: ContradictionReport | None
    dt_final: float
    dt_halvings: int
    params: ProblemParams
    grid: GridSpec
    options: SolverOptions
    history: tuple = dataclass_field(default_factory=tuple)
    resolution_drift: dict | None = None

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "breakdown": self.breakdown.as_dict(),
            "Lambda": self.multiplier,
            "delta": self.delta,
            "nehari_raw": self.nehari_raw,
            "nehari_rel": self.nehari_rel,
            "pohozaev_raw": self.pohozaev_raw,
            "pohozaev_rel": self.pohozaev_rel,
            "energy_gap_rel": self.energy_gap_rel,
            "regime": self.regime,
            "regime_flag": self.regime_flag,
            "contradiction": None if self.contradiction is None else self.contradiction.as_dict(),
            "dt_final": self.dt_final,
            "dt_halvings": self.dt_halvings,
            "params": self.params.as_dict(),
            "grid": {"n": self.grid.n, "N": self.grid.N, "L": self.grid.L},
            "options": self.options.as_dict(),
            "resolution_drift": self.resolution_drift,
            "history": [
                [it, I, None if (isinstance(r, float) and math.isnan(r)) else r]
                for it, I, r in self.history
            ],
        }


def gaussian_seed(grid: GridSpec, params: ProblemParams, width: float = 1.0) -> Field:
    """Mass-normalized Gaussian starting state.

    Decay warnings are suppressed: the seed only has to live on the right
    sphere, not decay inside the box.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoxDecayWarning)
        g = sample_gaussian(grid, width)
    norm = g.l2_norm()
    if norm == 0.0:
        raise ValueError("degenerate seed")
    return Field(grid, math.sqrt(params.tau) / norm * g.values)


def flow_step(u: Field, params: ProblemParams, opts: SolverOptions = SolverOptions()) -> Field:
    """One semi-implicit step followed by projection onto the mass sphere.

    The drive collects the interaction term, the stabilizing shift ``c * u``,
    and minus the current constraint-multiplier shift, so the step
    approximates the projected gradient flow of the free energy on the mass
    sphere; the stiff quadratic operator (plus the same shift ``c``) is
    absorbed into a diagonal implicit solve.  Including the multiplier shift
    in the drive makes any state solving the discrete Euler-Lagrange
    equation an exact fixed point, independent of ``dt``; without it the
    fixed point would solve a coupling-rescaled equation with an O(dt) bias.
    """
    p = float(params.p)
    bd = action(u, params, method=opts.riesz_method)
    delta = -(bd.T - params.mu * bd.A) / bd.H  # = -2 Lambda(u)
    drive = (opts.c - delta) * u.values
    if params.mu > 0.0:
        pot = riesz_convolve(power_field(u, p), float(params.alpha), method=opts.riesz_method)
        nl = pot.values * _signed_power(u.values, p - 1.0)
        if opts.use_dealias:
            nl = dealias_mask(Field(u.grid, nl)).values
        drive = drive + params.mu * nl
    w = _implicit(Field(u.grid, u.values + opts.dt * drive), params, opts)
    norm = w.l2_norm()
    if norm == 0.0 or not np.isfinite(norm):
        raise FloatingPointError("flow step produced a degenerate state")
    return Field(u.grid, math.sqrt(params.tau) / norm * w.values)


def _implicit(rhs: Field, params: ProblemParams, opts: SolverOptions) -> Field:
    g = rhs.grid
    lap = _cached_multiplier(g, "laplacian", None, "ball-average").table
    symbol = lap
    if params.lam > 0.0:
        frac = _cached_multiplier(g, "fractional", float(params.s), "ball-average").table
        symbol = lap + params.lam * frac
    denom = 1.0 + opts.dt * (opts.c + symbol)
    return Field(g, sfft.ifftn(sfft.fftn(rhs.values) / denom).real)


def _witness_flag(bd: EnergyBreakdown, params: ProblemParams, label: RegimeLabel) -> str | None:
    # certificate that dilations of the final state drive the energy down:
    # only meaningful where the theory predicts unboundedness
    if label not in (RegimeLabel.UNBOUNDED_BELOW, RegimeLabel.SUPERCRITICAL):
        return None
    curve = _curve_from_breakdown(bd, params, (1.0,) + WITNESS_FACTORS)
    vals = [v for _, v in curve]
    if all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 0.0:
        return "unbounded-dilation"
    return None


def _curve_from_breakdown(bd: EnergyBreakdown, params: ProblemParams, factors) -> list:
    n = params.n
    s = float(params.s)
    p = float(params.p)
    alpha = float(params.alpha)
    out = []
    for K in factors:
        K = float(K)
        if K <= 0:
            raise ValueError("dilation factor must be positive")
        val = (
            0.5 * K ** 2 * bd.grad
            + 0.5 * K ** (2.0 * s) * params.lam * bd.semi
            - params.mu / (2.0 * p) * K ** (n * p - n - alpha) * bd.A
        )
        out.append((K, val))
    return out


def solve_ground_state(
    params: ProblemParams,
    grid: GridSpec,
    opts: SolverOptions = SolverOptions(),
) -> tuple[Field, SolveReport]:
    """Run the flow to a constrained minimizer candidate and measure it.

    Returns the final state and its :class:`SolveReport`.  The flow stops on
    the combined energy/residual test, on reaching ``max_iters``, or on a
    divergence signal (energy below the floor or a non-finite value).
    """
    p = float(params.p)
    alpha = float(params.alpha)
    label = classify(params)

    if opts.initial_field is not None:
        if opts.initial_field.grid != grid:
            raise ValueError("initial field lives on a different grid")
        norm = opts.initial_field.l2_norm()
        if norm == 0.0:
            raise ValueError("degenerate initial field")
        u = Field(grid, math.sqrt(params.tau) / norm * opts.initial_field.values)
    else:
        u = gaussian_seed(grid, params, opts.seed_width)

    g = grid
    lap = _cached_multiplier(g, "laplacian", None, "ball-average").table
    frac = _cached_multiplier(g, "fractional", float(params.s), "ball-average").table
    symbol = lap + params.lam * frac
    weight = g.cell_volume / g.N ** g.n

    dt = opts.dt
    halvings = 0
    converged = False
    flagged: str | None = None
    history: list[tuple[int, float, float]] = []
    I_prev = math.inf
    state = None  # rollback slot: (values, pot_nl, I)
    eq_rel = math.nan
    it = 0

    for it in range(1, opts.max_iters + 1):
        vals = u.values
        F = sfft.fftn(vals)
        power = F.real ** 2 + F.imag ** 2
        grad = float(weight * np.sum(lap * power))
        semi = float(weight * np.sum(frac * power))
        H = float(g.cell_volume * np.sum(vals ** 2))
        T = grad + params.lam * semi

        if params.mu > 0.0:
            f = np.abs(vals) ** p
            pot = riesz_convolve(Field(g, f), alpha, method=opts.riesz_method).values
            A = float(g.cell_volume * np.sum(pot * f))
            nl = pot * _signed_power(vals, p - 1.0)
        else:
            A = 0.0
            nl = None
        I = 0.5 * T - params.mu * A / (2.0 * p)
        delta = (params.mu * A - T) / H  # = -2 Lambda at the current iterate

        if not np.isfinite(I) or I < opts.divergence_floor:
            flagged = "energy-floor"
            log.warning("flow diverged at iteration %d (I=%.3e)", it, I)
            break

        scale = max(abs(I), 0.5 * H, 1e-30)
        if I > I_prev + 1e-12 * scale and state is not None:
            if halvings < opts.max_dt_halvings:
                dt *= 0.5
                halvings += 1
                log.info(
                    "energy increased at iteration %d; halving dt to %.3e", it, dt
                )
                vals_prev, nl_prev, delta_prev, _ = state
                u = _advance(Field(g, vals_prev), nl_prev, delta_prev, params, opts, dt)
                continue
            log.warning("energy still increasing after %d halvings", halvings)

        rel_dI = abs(I - I_prev) / scale if np.isfinite(I_prev) else math.inf
        want_residual = rel_dI <= opts.tol_energy or it % opts.residual_every == 0
        if want_residual:
            lin = sfft.ifftn(symbol * F).real
            res = lin + delta * vals - (params.mu * nl if nl is not None else 0.0)
            raw = float(np.sqrt(g.cell_volume * np.sum(res ** 2)))
            nl_norm = (
                params.mu * float(np.sqrt(g.cell_volume * np.sum(nl ** 2)))
                if nl is not None
                else 0.0
            )
            den = max(
                float(np.sqrt(g.cell_volume * np.sum(lin ** 2))),
                abs(delta) * math.sqrt(H),
                nl_norm,
                1e-300,
            )
            eq_rel = raw / den
            if rel_dI <= opts.tol_energy and eq_rel <= opts.tol_residual:
                converged = True

        if it == 1 or it % opts.history_every == 0 or converged:
            history.append((it, I, eq_rel if want_residual else math.nan))
        if converged:
            break

        state = (vals, nl, delta, I)
        I_prev = I
        u = _advance(u, nl, delta, params, opts, dt)

    bd = action(u, params, method=opts.riesz_method)
    Lam = (bd.T - params.mu * bd.A) / (2.0 * bd.H)
    delta = -2.0 * Lam
    _, nehari_rel = equation_residual(u, params, delta, method=opts.riesz_method)
    nehari_raw = bd.grad + params.lam * bd.semi + delta * bd.H - params.mu * bd.A

    n = params.n
    s = float(params.s)
    poho_raw = (
        0.5 * (n - 2.0) * bd.grad
        + 0.5 * (n - 2.0 * s) * params.lam * bd.semi
        + 0.5 * n * delta * bd.H
        - 0.5 * (n + alpha) / p * params.mu * bd.A
    )
    poho_scale = 0.5 * (n + alpha) / p * params.mu * bd.A
    if poho_scale <= 0.0:
        poho_scale = max(bd.grad, abs(delta) * bd.H, 1e-300)
    poho_rel = abs(poho_raw) / poho_scale

    gap = energy_identity_gap(u, params, method=opts.riesz_method)
    gap_rel = abs(gap) / max(abs(bd.S), 1e-300)

    if flagged is None:
        flagged = _witness_flag(bd, params, label)
    contradiction = None
    if label in (RegimeLabel.LOWER_CRITICAL, RegimeLabel.HLS_CRITICAL):
        contradiction = nonexistence_contradiction(u, params)
        if flagged is None:
            flagged = "endpoint-contradiction"

    drift = None
    if opts.resolution_study and grid.N // 2 >= 8:
        coarse_grid = GridSpec(grid.n, grid.N // 2, grid.L)
        coarse_opts = SolverOptions(
            dt=opts.dt,
            max_iters=opts.max_iters,
            tol_energy=opts.tol_energy,
            tol_residual=opts.tol_residual,
            c=opts.c,
            seed_width=opts.seed_width,
            riesz_method=opts.riesz_method,
            max_dt_halvings=opts.max_dt_halvings,
            use_dealias=opts.use_dealias,
        )
        _, coarse = solve_ground_state(params, coarse_grid, coarse_opts)
        drift = {
            "coarse_N": coarse_grid.N,
            "coarse_I": coarse.breakdown.I,
            "coarse_Lambda": coarse.multiplier,
            "I_drift": abs(coarse.breakdown.I - bd.I),
            "Lambda_drift": abs(coarse.multiplier - Lam),
        }

    report = SolveReport(
        converged=converged,
        iterations=it,
        breakdown=bd,
        multiplier=Lam,
        delta=delta,
        nehari_raw=nehari_raw,
        nehari_rel=nehari_rel,
        pohozaev_raw=poho_raw,
        pohozaev_rel=poho_rel,
        energy_gap_rel=gap_rel,
        regime=label.value,
        regime_flag=flagged,
        contradiction=contradiction,
        dt_final=dt,
        dt_halvings=halvings,
        params=params,
        grid=grid,
        options=opts,
        history=tuple(history),
        resolution_drift=drift,
    )
    return u, report


def _advance(u: Field, nl: np.ndarray | None, delta: float, params: ProblemParams,
             opts: SolverOptions, dt: float) -> Field:
    # semi-implicit step reusing the already computed interaction term; the
    # -delta * u drive term keeps discrete solutions exact fixed points
    g = u.grid
    drive = (opts.c - delta) * u.values
    if nl is not None:
        if opts.use_dealias:
            nl = dealias_mask(Field(g, nl)).values
        drive = drive + params.mu * nl
    lap = _cached_multiplier(g, "laplacian", None, "ball-average").table
    symbol = lap
    if params.lam > 0.0:
        frac = _cached_multiplier(g, "fractional", float(params.s), "ball-average").table
        symbol = lap + params.lam * frac
    denom = 1.0 + dt * (opts.c + symbol)
    w = sfft.ifftn(sfft.fftn(u.values + dt * drive) / denom).real
    norm = math.sqrt(g.cell_volume * float(np.sum(w ** 2)))
    if norm == 0.0 or not np.isfinite(norm):
        raise FloatingPointError("flow step produced a degenerate state")
    return Field(g, math.sqrt(params.tau) / norm * w)


def dilation_energy_curve(
    u: Field,
    params: ProblemParams,
    factors,
    method: str = "freespace",
    resolution_study: bool = False,
):
    """Free energy along the mass-preserving dilation family of ``u``.

    Each entry is ``(K, I)`` with the value computed in closed form from the
    energy breakdown of ``u`` (each piece scales by an explicit power of
    ``K``).  With ``resolution_study=True`` entries gain a third component:
    the energy of the actually resampled field on the grid, which agrees with
    the closed form up to truncation and is a direct check that the
    discretization respects the scaling structure.
    """
    bd = action(u, params, method=method)
    curve = _curve_from_breakdown(bd, params, factors)
    if not resolution_study:
        return curve
    out = []
    for K, val in curve:
        resampled = fourier_interpolate(u, K)
        bd_K = action(resampled, params, method=method)
        out.append((K, val, bd_K.I))
    return out


def delta_rescale(u: Field, delta: float, params: ProblemParams) -> Field:
    """Mass-shift rescaling ``v(x) = delta**(-(2+alpha)/(4(p-1))) u(x / sqrt(delta))``.

    Implemented through band-limited interpolation, so the known scaling
    exponents of the quadratic and interaction functionals hold to truncation
    accuracy.  Large ``delta`` spreads the state (the interior dilation
    factor is ``delta**-0.5``) and can trip the box-decay warning; small
    ``delta`` compresses it toward the Nyquist limit.
    """
    delta = float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    p = float(params.p)
    alpha = float(params.alpha)
    K = delta ** -0.5
    interp = fourier_interpolate(u, K)
    coef = delta ** (-(2.0 + alpha) / (4.0 * (p - 1.0))) * delta ** (params.n / 4.0)
    return Field(u.grid, coef * interp.values)
