"""Transition detection, curve fits, sweeps and convergence studies.

Drives the solver across coupling grids, classifies the symmetry parameter
into its two bands to locate the localization transition, and fits the
power-law / logarithmic / exponential forms used to extract the critical
coupling and exponents.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .ansatz import ModelParams, VariationalState, random_state
from .bath import MeshSpec
from .errors import FitError, OptimizationFailure, ParameterError
from .observables import bath_observables, check_symmetry, spin_observables
from .optimizer import OptimizerOptions, multi_start
from .reporting import write_csv

__all__ = [
    "SweepRecord",
    "TransitionResult",
    "FitResult",
    "ConvergenceStudy",
    "RatioTable",
    "RECORD_COLUMNS",
    "MODE_COLUMNS",
    "mode_rows",
    "sweep_alpha",
    "write_records_csv",
    "detect_transition",
    "fit_power_law",
    "fit_log_form",
    "fit_exponential",
    "convergence_study",
    "ratio_function",
    "find_peak_frequency",
]

RECORD_COLUMNS = ("alpha", "energy", "zeta", "sigma_z", "sigma_x", "entropy",
                  "grad_norm", "converged")

MODE_COLUMNS = ("k", "omega_k", "lambda_k", "delta_x", "delta_p",
                "uncertainty_excess", "momentum_offset", "f_bar", "g_bar",
                "cor_x_low", "cor_p_low", "cor_x_top", "cor_p_top")


@dataclass
class SweepRecord:
    """One coupling point of a sweep: scalars for the records CSV plus refs."""

    alpha: float
    energy: float
    zeta: float
    sigma_z: float
    sigma_x: float
    entropy: float
    grad_norm: float
    converged: bool
    seed: int = 0
    partner_energy: float | None = None
    modes_file: str | None = None

    def csv_row(self):
        return tuple(getattr(self, col) for col in RECORD_COLUMNS)


def mode_rows(bath, bundle):
    avg = bundle.averages
    m = bath.n_modes
    low = min(bundle.cor_x)
    top = max(bundle.cor_x)
    f_bar = avg.mean_up if avg.mean_up is not None else [None] * m
    g_bar = avg.mean_down if avg.mean_down is not None else [None] * m
    for k in range(m):
        yield (k, bath.omegas[k], bath.couplings[k], bundle.delta_x[k],
               bundle.delta_p[k], bundle.uncertainty_excess[k],
               bundle.momentum_offset[k], f_bar[k], g_bar[k],
               bundle.cor_x[low][k], bundle.cor_p[low][k],
               bundle.cor_x[top][k], bundle.cor_p[top][k])


def sweep_alpha(alphas, params: ModelParams, mesh: MeshSpec, opts: OptimizerOptions,
                outdir=None, warm_start: bool = True, degeneracy_tol: float = 1e-8,
                log=None) -> list[SweepRecord]:
    """Solve the ground state on an ascending coupling grid.

    Each point runs the full multi-start search, optionally seeded with the
    previous point's winner as an extra start.  Unconverged points are
    recorded with converged=false and NaN observables and the sweep moves
    on.  Per-mode observable CSVs go to ``outdir`` when given.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size == 0 or np.any(np.diff(alphas) <= 0.0) and alphas.size > 1:
        raise ParameterError("alpha grid must be non-empty and strictly ascending")

    records = []
    bundles = []
    prev: VariationalState | None = None
    for i, alpha in enumerate(alphas):
        bath = mesh.build(float(alpha))
        extras = (prev,) if (warm_start and prev is not None) else ()
        try:
            sol = multi_start(params, bath, opts, extra_starts=extras)
        except OptimizationFailure as exc:
            if log is not None:
                print(f"alpha={alpha:g}: {exc}", file=log)
            records.append(SweepRecord(alpha=float(alpha), energy=np.nan, zeta=np.nan,
                                       sigma_z=np.nan, sigma_x=np.nan, entropy=np.nan,
                                       grad_norm=np.nan, converged=False, seed=opts.seed))
            bundles.append(None)
            continue
        prev = sol.state
        spin = spin_observables(sol.state)
        sym = check_symmetry(sol, params, bath, degeneracy_tol=degeneracy_tol, opts=opts)
        bundle = bath_observables(sol.state)
        record = SweepRecord(
            alpha=float(alpha), energy=sol.energy, zeta=sym.zeta,
            sigma_z=spin.sigma_z, sigma_x=spin.sigma_x, entropy=spin.entropy,
            grad_norm=sol.grad_norm, converged=sol.converged, seed=opts.seed,
            partner_energy=sym.partner_min_energy,
        )
        if outdir is not None:
            name = f"modes_alpha_{alpha:.6g}.csv"
            write_csv(f"{outdir}/{name}", MODE_COLUMNS, mode_rows(bath, bundle))
            record.modes_file = name
        records.append(record)
        bundles.append(bundle)
        if log is not None:
            print(f"alpha={alpha:g}: E={sol.energy:.12g} zeta={sym.zeta:.3f} "
                  f"gnorm={sol.grad_norm:.2e}", file=log)
    return records


def write_records_csv(path, records):
    write_csv(path, RECORD_COLUMNS, (r.csv_row() for r in records))


@dataclass(frozen=True)
class TransitionResult:
    """Bracketed jump of the symmetry parameter, if any."""

    found: bool
    alpha_c: float | None = None
    uncertainty: float | None = None
    last_high: float | None = None
    first_low: float | None = None
    stat_error: float | None = None
    suspects: tuple = ()


def _bracket(alphas, zetas):
    highs = [a for a, z in zip(alphas, zetas) if z > 0.5]
    lows = [a for a, z in zip(alphas, zetas) if z < 0.5]
    if not highs or not lows:
        return None
    last_high = max(highs)
    lows_above = [a for a in lows if a > last_high]
    if not lows_above:
        return None
    first_low = min(lows_above)
    return last_high, first_low


def detect_transition(records) -> TransitionResult:
    """Locate the zeta jump: midpoint of the last high and first low point.

    Points between the two bands (0.1 < zeta < 0.9) or unconverged ones are
    flagged as suspects and left out of the classification.  When records
    carry two or more distinct seeds, the seeds are split into two halves
    and the spread of the two half-estimates is reported as a statistical
    error, folded into the uncertainty.
    """
    clean = [r for r in records if r.converged and np.isfinite(r.zeta)]
    suspects = tuple(sorted(
        r.alpha for r in records
        if r not in clean or 0.1 < r.zeta < 0.9
    ))
    by_alpha: dict[float, list[float]] = {}
    for r in clean:
        by_alpha.setdefault(r.alpha, []).append(r.zeta)
    alphas = sorted(by_alpha)
    zetas = [float(np.mean(by_alpha[a])) for a in alphas]

    pair = _bracket(alphas, zetas)
    if pair is None:
        return TransitionResult(found=False, suspects=suspects)
    last_high, first_low = pair
    alpha_c = 0.5 * (last_high + first_low)
    unc = 0.5 * (first_low - last_high)

    stat = None
    seeds = sorted({r.seed for r in clean})
    if len(seeds) >= 2:
        half = seeds[: len(seeds) // 2]
        estimates = []
        for group in (half, [s for s in seeds if s not in half]):
            sub = [r for r in clean if r.seed in group]
            sub_alphas = sorted({r.alpha for r in sub})
            sub_zetas = [float(np.mean([r.zeta for r in sub if r.alpha == a]))
                         for a in sub_alphas]
            sub_pair = _bracket(sub_alphas, sub_zetas)
            if sub_pair is not None:
                estimates.append(0.5 * (sub_pair[0] + sub_pair[1]))
        if len(estimates) == 2:
            stat = 0.5 * abs(estimates[0] - estimates[1])
            unc = max(unc, stat)

    return TransitionResult(found=True, alpha_c=alpha_c, uncertainty=unc,
                            last_high=last_high, first_low=first_low,
                            stat_error=stat, suspects=suspects)


@dataclass(frozen=True)
class FitResult:
    """Fitted model parameters plus the residual norm (in fit coordinates)."""

    model: str
    params: tuple
    residual: float
    window: tuple | None = None
    y_at_zero: float | None = None


def _windowed(xs, ys, window):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError("x and y must be 1-d arrays of equal length")
    if window is not None:
        lo, hi = window
        mask = (xs >= lo) & (xs <= hi)
        xs, ys = xs[mask], ys[mask]
    return xs, ys


def fit_power_law(xs, ys, window=None) -> FitResult:
    """Least squares of log y on log x; returns (amplitude, exponent)."""
    xs, ys = _windowed(xs, ys, window)
    if xs.size < 2:
        raise FitError(f"power-law fit needs >= 2 points in the window, got {xs.size}")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise FitError("power-law fit requires strictly positive x and y data")
    coeffs, res = np.polynomial.polynomial.polyfit(np.log(xs), np.log(ys), 1, full=True)
    residual = float(np.sqrt(res[0][0])) if len(res[0]) else 0.0
    return FitResult(model="power", params=(float(np.exp(coeffs[0])), float(coeffs[1])),
                     residual=residual, window=tuple(window) if window else None)


def fit_exponential(xs, ys, window=None) -> FitResult:
    """Least squares of log y on x for y = prefactor * exp(-rate * x)."""
    xs, ys = _windowed(xs, ys, window)
    if xs.size < 2:
        raise FitError(f"exponential fit needs >= 2 points, got {xs.size}")
    if np.any(ys <= 0.0):
        raise FitError("exponential fit requires strictly positive y data")
    coeffs, res = np.polynomial.polynomial.polyfit(xs, np.log(ys), 1, full=True)
    residual = float(np.sqrt(res[0][0])) if len(res[0]) else 0.0
    return FitResult(model="exponential", params=(float(np.exp(coeffs[0])), float(-coeffs[1])),
                     residual=residual, window=tuple(window) if window else None)


def fit_log_form(xs, ys) -> FitResult:
    """Nonlinear fit of y = a ln(x + b) + c with x + b > 0 enforced.

    Also reports the extrapolated value y(0) = a ln(b) + c, which is how the
    infinite-mesh limit of the critical coupling is read off.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 4:
        raise FitError(f"log-form fit needs >= 4 points, got {xs.size}")

    b_floor = max(1e-12, -np.min(xs) + 1e-12)

    def resid(theta):
        a, b, c = theta
        return a * np.log(xs + b) + c - ys

    best = None
    for b0 in (b_floor * 10.0, np.median(xs), np.max(xs), 10.0 * np.max(xs)):
        b0 = max(b0, b_floor * 2.0)
        a0 = (ys[-1] - ys[0]) / max(np.log((xs[-1] + b0) / (xs[0] + b0)), 1e-12)
        c0 = float(np.mean(ys)) - a0 * float(np.mean(np.log(xs + b0)))
        try:
            res = least_squares(resid, x0=[a0, b0, c0],
                                bounds=([-np.inf, b_floor, -np.inf], [np.inf, np.inf, np.inf]))
        except ValueError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None or not best.success:
        raise FitError("log-form fit did not converge")
    sv = np.linalg.svd(best.jac, compute_uv=False)
    if sv[-1] <= 0.0 or sv[0] / sv[-1] > 1e14:
        raise FitError(f"log-form fit Jacobian is singular (condition {sv[0] / max(sv[-1], 1e-300):.2e})")
    a, b, c = (float(v) for v in best.x)
    return FitResult(model="logform", params=(a, b, c),
                     residual=float(np.linalg.norm(best.fun)),
                     y_at_zero=a * np.log(b) + c)


@dataclass(frozen=True)
class ConvergenceStudy:
    """Ground-state energies along N or M with shifts from the largest value."""

    axis: str
    values: tuple
    energies: tuple
    shifts: tuple
    fit: FitResult | None
    monotone: bool
    flagged: tuple


def _grow_state(state: VariationalState, bath, seed, reflect: bool) -> VariationalState:
    """Embed a winner into an (N+1)-term state via a zero-weight extra row.

    The plain variant duplicates (with jitter) the dominant row; it starts
    almost stationary, so it only engages when the landscape pulls it.  The
    reflected variant adds the sign-flipped row -- an antipolaron seed with
    a generically large weight gradient, which is what actually captures
    the next correction near the transition.
    """
    rng = np.random.default_rng(seed)
    pick = int(np.argmax(np.abs(state.weights_up) + np.abs(state.weights_down)))
    jitter = 1e-3 * bath.classical_shifts()
    sign = -1.0 if reflect else 1.0

    def extend(weights, disps):
        row = sign * disps[pick] + jitter * rng.standard_normal(disps.shape[1])
        return np.concatenate([weights, [0.0]]), np.vstack([disps, row])

    a, fu = extend(state.weights_up, state.disp_up)
    d, gd = extend(state.weights_down, state.disp_down)
    return VariationalState(a, d, fu, gd)


def convergence_study(alpha: float, params: ModelParams, mesh: MeshSpec, axis: str,
                      values, opts: OptimizerOptions, log=None) -> ConvergenceStudy:
    """Energy convergence along the superposition size N or the mesh size M.

    Along N each point warm-starts from the previous winner grown by one
    term (plus the usual fresh restarts), which makes the variational
    monotonicity structural.  The shift E - E(largest) is fitted with an
    exponential; an energy increase beyond 1e-10 flags the point as an
    unconverged optimization.
    """
    values = [int(v) for v in values]
    if len(values) < 2 or any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError("convergence study needs >= 2 strictly ascending values")
    if axis not in ("N", "M"):
        raise ParameterError(f"axis must be 'N' or 'M', got {axis!r}")

    energies = []
    prev = None
    for v in values:
        if axis == "N":
            bath = mesh.build(alpha)
            point_opts = replace(opts, n_terms=v)
            extras = () if prev is None else (
                _grow_state(prev, bath, opts.seed + v, reflect=False),
                _grow_state(prev, bath, opts.seed + v, reflect=True),
            )
        else:
            bath = replace(mesh, n_modes=v).build(alpha)
            point_opts = opts
            extras = ()
        sol = multi_start(params, bath, point_opts, extra_starts=extras)
        if axis == "N":
            prev = sol.state
        energies.append(sol.energy)
        if log is not None:
            print(f"{axis}={v}: E={sol.energy:.15g}", file=log)

    energies = np.array(energies)
    ref = energies[-1]
    shifts = energies - ref
    flagged = tuple(values[i + 1] for i in range(len(values) - 1)
                    if energies[i + 1] > energies[i] + 1e-10)

    xs = np.array(values[:-1], dtype=float)
    ys = shifts[:-1]
    keep = ys > 1e-14
    fit = None
    if np.count_nonzero(keep) >= 2:
        fit = fit_exponential(xs[keep], ys[keep])
    return ConvergenceStudy(axis=axis, values=tuple(values), energies=tuple(energies),
                            shifts=tuple(shifts), fit=fit, monotone=not flagged,
                            flagged=flagged)


@dataclass(frozen=True)
class RatioTable:
    """Correlation-fluctuation ratio R_l(omega_k) = Cor_X(k,l)/(DeltaX(l)-1/2)."""

    l_index: int
    omegas: np.ndarray
    values: np.ndarray
    offset: np.ndarray  # values - 1, the natural quantity at the cutoff mode


def ratio_function(omegas, delta_x, cor_x_row, l_index: int) -> RatioTable:
    """Ratio of the Cor_X row at fixed l to the anomalous fluctuation at l.

    The row's k = l entry is the vacuum-subtracted self-correlation, so the
    ratio is identically 1 there.  When the denominator is below 1e-14 the
    whole table is undefined (NaN), e.g. for a single-coherent-state ansatz.
    """
    omegas = np.asarray(omegas, dtype=float)
    cor_x_row = np.asarray(cor_x_row, dtype=float)
    if not (0 <= l_index < omegas.size):
        raise ParameterError(f"l_index {l_index} out of range")
    denom = float(np.asarray(delta_x)[l_index]) - 0.5
    if abs(denom) < 1e-14:
        values = np.full_like(cor_x_row, np.nan)
    else:
        values = cor_x_row / denom
    return RatioTable(l_index=l_index, omegas=omegas, values=values, offset=values - 1.0)


def find_peak_frequency(omegas, values, exclude: int | None = None) -> float:
    """Frequency of the maximum of a per-mode curve (e.g. -Cor_P rows)."""
    vals = np.array(values, dtype=float)
    if exclude is not None:
        vals[exclude] = -np.inf
    return float(np.asarray(omegas)[int(np.argmax(vals))])
