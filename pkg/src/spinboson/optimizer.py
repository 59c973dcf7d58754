"""Ground-state search: multi-start quasi-Newton descent with annealing escapes.

The stationarity conditions dH/dx - E dN/dx = 0 are solved by direct
minimization of E = H/N with L-BFGS line search, restarted from many random
initial states.  Restarts own independent RNG streams derived from the
master seed by index, so results do not depend on scheduling or worker
count.  An optional Metropolis annealing pass re-heats restarts that
stalled above the best energy found in the first pass.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize as _lbfgs

from .ansatz import (
    ModelParams,
    VariationalState,
    _model_arrays,
    _split_packed,
    _value,
    _value_and_grad,
    _weight_matrices,
    normalized,
    random_state,
)
from .bath import BathDiscretization
from .errors import DegenerateStateError, OptimizationFailure, ParameterError

__all__ = [
    "AnnealSchedule",
    "OptimizerOptions",
    "GroundStateSolution",
    "minimize",
    "multi_start",
    "anneal",
]

_BAD_ENERGY = 1e100


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature ladder for the Metropolis escape pass.

    ``steps`` proposals are made per temperature; proposal widths are
    ``proposal_scale * sqrt(T)`` times the natural scale of each parameter
    (1 for weights, the classical displacement for shifts).
    """

    t_initial: float = 1e-2
    decay: float = 0.85
    steps: int = 40
    levels: int = 25
    proposal_scale: float = 0.3

    def __post_init__(self):
        if not (self.t_initial > 0.0):
            raise ParameterError("initial temperature must be > 0")
        if not (0.0 < self.decay < 1.0):
            raise ParameterError("decay must lie in (0, 1)")
        if self.steps < 1 or self.levels < 1:
            raise ParameterError("steps and levels must be >= 1")
        if self.proposal_scale < 0.0:
            raise ParameterError("proposal_scale must be >= 0")

    def temperatures(self) -> np.ndarray:
        return self.t_initial * self.decay ** np.arange(self.levels)


@dataclass(frozen=True)
class OptimizerOptions:
    """Knobs of the ground-state search.

    grad_tol is the max-norm convergence threshold on the energy gradient;
    energy_tol > 0 additionally stops on relative energy stalls.  n_terms is
    the number of coherent superposition states of each random start.
    """

    grad_tol: float = 1e-9
    energy_tol: float = 0.0
    max_iters: int = 50_000
    n_starts: int = 16
    n_terms: int = 6
    anneal: AnnealSchedule | None = None
    seed: int = 0
    spread: float = 1.0
    workers: int = 1
    log_every: int = 0

    def __post_init__(self):
        if not (self.grad_tol > 0.0):
            raise ParameterError("grad_tol must be > 0")
        if self.n_starts < 1:
            raise ParameterError("n_starts must be >= 1")
        if self.n_terms < 1:
            raise ParameterError("n_terms must be >= 1")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")


@dataclass(frozen=True)
class GroundStateSolution:
    """Converged state (normalized), its energy, and solver diagnostics."""

    state: VariationalState
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    start_index: int = -1
    seed: int | None = None
    message: str = ""


def _objective(x, n, m, bias, tun, omegas, half_lam):
    try:
        a, d, fu, gd = _split_packed(x, n, m)
        e, g = _value_and_grad(a, d, fu, gd, bias, tun, omegas, half_lam)
    except DegenerateStateError:
        return _BAD_ENERGY, np.zeros_like(x)
    if not np.isfinite(e) or not np.all(np.isfinite(g)):
        return _BAD_ENERGY, np.zeros_like(x)
    return e, g


def _renorm_weights(x, n, m):
    """Scale the weights so <Psi|Psi> = 1; a pure gauge move, E unchanged.

    Fixing the gauge between solver restarts keeps the weight gradients on
    a common scale, which matters when polishing to tight tolerances.
    """
    a, d, fu, gd = _split_packed(x, n, m)
    nrm = _weight_matrices(a, d, fu, gd)[-1]
    if not np.isfinite(nrm) or nrm <= 0.0:
        return x
    y = x.copy()
    y[: 2 * n] /= np.sqrt(nrm)
    return y


def _polish_stationarity(x, args, max_iter=500):
    """Refine a near-stationary point by minimizing |grad E|^2.

    Line searches on E stall once energy differences fall below the
    floating-point resolution of E itself, around |grad| ~ 1e-8.  The
    analytic gradient is accurate to ~1e-15 absolute, so descending on
    phi = |grad|^2/2 (gradient H.g via central differences of the analytic
    gradient) keeps making measurable progress well past that floor.
    """

    def phi(y):
        e, gy = _objective(y, *args)
        if e >= _BAD_ENERGY:
            return _BAD_ENERGY, np.zeros_like(y)
        scale = np.linalg.norm(gy)
        if scale == 0.0:
            return 0.0, np.zeros_like(y)
        t = 1e-5 / scale
        ep, gp = _objective(y + t * gy, *args)
        em, gm = _objective(y - t * gy, *args)
        if ep >= _BAD_ENERGY or em >= _BAD_ENERGY:
            return _BAD_ENERGY, np.zeros_like(y)
        return 0.5 * scale**2, (gp - gm) / (2.0 * t)

    res = _lbfgs(phi, x, jac=True, method="L-BFGS-B",
                 options={"maxiter": max_iter, "ftol": 0.0, "gtol": 0.0, "maxcor": 20})
    return res.x, res.nit


def minimize(initial: VariationalState, params: ModelParams, bath: BathDiscretization,
             opts: OptimizerOptions) -> GroundStateSolution:
    """Descend from one initial state to a stationary point.

    Returns converged=True only when the final gradient max-norm is below
    ``opts.grad_tol``.  The L-BFGS memory is rebuilt and the search resumed
    whenever the line search stalls while the energy is still improving,
    which matters on the nearly flat landscapes close to the transition.
    The reported energy never exceeds the initial energy.
    """
    n, m = initial.n_terms, initial.n_modes
    if bath.n_modes != m:
        raise ParameterError("state and bath disagree on the number of modes")
    bias, tun, omegas, half_lam = _model_arrays(params, bath)
    args = (n, m, bias, tun, omegas, half_lam)

    x = initial.pack()
    e0, g0 = _objective(x, *args)
    if e0 >= _BAD_ENERGY:
        return GroundStateSolution(state=initial, energy=np.inf, grad_norm=np.inf,
                                   iterations=0, converged=False,
                                   message="non-finite energy at the initial state")

    total_iters = 0
    remaining = opts.max_iters
    e_prev, gnorm = e0, float(np.max(np.abs(g0)))
    message = ""

    callback = None
    if opts.log_every > 0:
        counter = {"it": 0}

        def callback(xk):
            counter["it"] += 1
            if counter["it"] % opts.log_every == 0:
                ek, gk = _objective(xk, *args)
                print(f"iter {counter['it']:7d}  E={ek:+.12e}  "
                      f"|grad|={np.max(np.abs(gk)):.3e}", file=sys.stderr)

    x = _renorm_weights(x, n, m)
    while remaining > 0 and gnorm > opts.grad_tol:
        res = _lbfgs(
            _objective, x, args=args, jac=True, method="L-BFGS-B",
            callback=callback,
            options={
                "maxiter": remaining,
                "maxfun": 20 * remaining,
                "ftol": opts.energy_tol,
                "gtol": opts.grad_tol,
                "maxcor": 20,
                "maxls": 40,
            },
        )
        total_iters += res.nit
        remaining -= max(res.nit, 1)
        x_new = _renorm_weights(res.x, n, m)
        e, g = _objective(x_new, *args)
        gnorm_new = float(np.max(np.abs(g)))
        message = res.message if isinstance(res.message, str) else res.message.decode()
        if e >= _BAD_ENERGY:
            return GroundStateSolution(state=initial, energy=e0,
                                       grad_norm=float(np.max(np.abs(g0))),
                                       iterations=total_iters, converged=False,
                                       message="search aborted on non-finite energy")
        improved = (e < e_prev - 1e-15 * max(1.0, abs(e_prev))) or (gnorm_new < 0.7 * gnorm)
        x, e_prev, gnorm = x_new, e, gnorm_new
        if not improved:
            break  # a fresh L-BFGS memory would not make progress

    if opts.grad_tol < gnorm <= 1e-5:
        # energy descent has hit its floating-point floor near a minimum;
        # switch to polishing the stationarity condition itself
        x_pol, nit = _polish_stationarity(x, args)
        total_iters += nit
        e_pol, g_pol = _objective(x_pol, *args)
        if (e_pol < _BAD_ENERGY
                and e_pol <= e_prev + 1e-12 * max(1.0, abs(e_prev))
                and float(np.max(np.abs(g_pol))) < gnorm):
            x = x_pol

    e, g = _objective(x, *args)
    gnorm = float(np.max(np.abs(g)))
    if e > e0:  # line searches only ever accept decreases; keep the guarantee airtight
        x, e, gnorm = initial.pack(), e0, float(np.max(np.abs(g0)))
    state = normalized(VariationalState.unpack(x, n, m))
    return GroundStateSolution(
        state=state,
        energy=float(e),
        grad_norm=gnorm,
        iterations=total_iters,
        converged=bool(gnorm <= opts.grad_tol),
        message=message,
    )


def _restart_seeds(opts: OptimizerOptions):
    """Per-restart seed pairs (init, anneal), derived by index only."""
    children = np.random.SeedSequence(opts.seed).spawn(opts.n_starts)
    return [child.spawn(2) for child in children]


def _run_restart(payload):
    index, seed_pair, params, bath, opts = payload
    start = random_state(opts.n_terms, bath, seed_pair[0], opts.spread)
    sol = minimize(start, params, bath, opts)
    return replace(sol, start_index=index, seed=opts.seed)


def _run_anneal(payload):
    index, seed_pair, params, bath, opts, state = payload
    rng = np.random.default_rng(seed_pair[1])
    shaken = anneal(state, params, bath, opts.anneal, rng)
    sol = minimize(shaken, params, bath, opts)
    return replace(sol, start_index=index, seed=opts.seed)


def _map(fn, payloads, workers):
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, payloads))
    return [fn(p) for p in payloads]


def multi_start(params: ModelParams, bath: BathDiscretization, opts: OptimizerOptions,
                extra_starts: tuple = ()) -> GroundStateSolution:
    """Best converged solution over many random restarts.

    ``extra_starts`` (e.g. a warm start from a neighbouring parameter point)
    are minimized alongside the random restarts and indexed after them.
    When an annealing schedule is set, every restart that ended more than
    1e-8 above the first-pass minimum is re-heated and re-minimized; the
    escape decision uses the completed first pass, never the (scheduling
    dependent) incumbent, so results stay deterministic under parallel
    execution.  Raises OptimizationFailure when no restart converges.
    """
    seeds = _restart_seeds(opts)
    payloads = [(i, seeds[i], params, bath, opts) for i in range(opts.n_starts)]
    solutions = _map(_run_restart, payloads, opts.workers)
    for j, start in enumerate(extra_starts):
        sol = minimize(start, params, bath, opts)
        solutions.append(replace(sol, start_index=opts.n_starts + j, seed=opts.seed))

    finite = [s for s in solutions if np.isfinite(s.energy)]
    if opts.anneal is not None and finite:
        best = min(s.energy for s in finite)
        stalled = [s for s in solutions if not np.isfinite(s.energy) or s.energy > best + 1e-8]
        payloads = [
            (s.start_index, seeds[s.start_index % opts.n_starts], params, bath, opts, s.state)
            for s in stalled
        ]
        solutions.extend(_map(_run_anneal, payloads, opts.workers))

    converged = [s for s in solutions if s.converged]
    if not converged:
        best = min(solutions, key=lambda s: (s.energy, s.start_index))
        raise OptimizationFailure(
            f"none of {len(solutions)} restarts converged "
            f"(best energy {best.energy!r}, grad norm {best.grad_norm!r})",
            diagnostics={
                "best_energy": best.energy,
                "best_grad_norm": best.grad_norm,
                "iterations": best.iterations,
                "n_restarts": len(solutions),
            },
        )
    return min(converged, key=lambda s: (s.energy, s.start_index))


def anneal(state: VariationalState, params: ModelParams, bath: BathDiscretization,
           schedule: AnnealSchedule, rng: np.random.Generator) -> VariationalState:
    """Metropolis walk over weights and displacements; returns the best visit.

    Gaussian proposals shrink with sqrt(T); uphill moves are accepted with
    probability exp(-dE/T).  A proposal scale of zero returns the input
    unchanged, and a temperature near zero reduces to greedy descent.
    """
    n, m = state.n_terms, state.n_modes
    bias, tun, omegas, half_lam = _model_arrays(params, bath)

    scales = np.concatenate([
        np.ones(2 * n),
        np.tile(bath.classical_shifts(), 2 * n),
    ])
    x = state.pack()
    try:
        e = _value(*_split_packed(x, n, m), bias, tun, omegas, half_lam)
    except DegenerateStateError:
        e = _BAD_ENERGY
    best_x, best_e = x, e
    for t in schedule.temperatures():
        width = schedule.proposal_scale * np.sqrt(t)
        for _ in range(schedule.steps):
            trial = x + width * scales * rng.standard_normal(x.size)
            try:
                e_trial = _value(*_split_packed(trial, n, m), bias, tun, omegas, half_lam)
            except DegenerateStateError:
                continue
            if not np.isfinite(e_trial):
                continue
            de = e_trial - e
            if de <= 0.0 or rng.random() < np.exp(-de / t):
                x, e = trial, e_trial
                if e < best_e:
                    best_x, best_e = x, e
    return VariationalState.unpack(best_x, n, m)
