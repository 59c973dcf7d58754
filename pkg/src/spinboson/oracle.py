"""Truncated-Fock exact diagonalization on tiny baths.

Brute-force reference for every closed form in :mod:`ansatz` and
:mod:`observables`: the Hamiltonian is built densely over the
spin (x) Fock product basis, trial states are expanded in number states,
and all observables are evaluated as plain matrix elements.  Deliberately
capped at M <= 3 modes; this exists to validate formulas, not to scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.sparse.linalg import eigsh

from .ansatz import ModelParams, VariationalState, apply_parity, random_state
from .bath import BathDiscretization
from .errors import BasisSizeError, ParameterError, TruncationError

__all__ = [
    "FockBasisSpec",
    "ExactGround",
    "build_hamiltonian",
    "exact_ground",
    "evaluate_state",
    "oracle_observables",
    "ValidationReport",
    "validation_gate",
]


@dataclass(frozen=True)
class FockBasisSpec:
    """Spin (x) product Fock basis with n_max bosons per mode, M <= 3 modes."""

    n_modes: int
    n_max: int
    dim_cap: int = 200_000

    def __post_init__(self):
        if not (1 <= self.n_modes <= 3):
            raise ParameterError(f"oracle supports 1..3 modes, got {self.n_modes}")
        if self.n_max < 1:
            raise ParameterError(f"n_max must be >= 1, got {self.n_max}")
        if self.dimension > self.dim_cap:
            need = 8.0 * self.dimension**2
            raise BasisSizeError(
                f"basis dimension {self.dimension} exceeds cap {self.dim_cap}; "
                f"a dense Hamiltonian would need {need:.2e} bytes"
            )

    @property
    def boson_dim(self) -> int:
        return (self.n_max + 1) ** self.n_modes

    @property
    def dimension(self) -> int:
        return 2 * self.boson_dim


def _annihilator(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, n_max + 1.0)), 1)


def _embed(basis: FockBasisSpec, k: int, op: np.ndarray) -> np.ndarray:
    """Lift a single-mode operator into the boson product space (mode 0 slowest)."""
    eye = np.eye(basis.n_max + 1)
    mats = [op if j == k else eye for j in range(basis.n_modes)]
    return reduce(np.kron, mats)


def _boson_pieces(bath: BathDiscretization, basis: FockBasisSpec):
    """(sum_k omega_k n_k, sum_k lambda_k (b_k + b_k^+)) as dense matrices."""
    b = _annihilator(basis.n_max)
    number = b.T @ b
    quad = b + b.T
    h_bath = np.zeros((basis.boson_dim, basis.boson_dim))
    drive = np.zeros_like(h_bath)
    for k in range(basis.n_modes):
        h_bath += bath.omegas[k] * _embed(basis, k, number)
        drive += bath.couplings[k] * _embed(basis, k, quad)
    return h_bath, drive


def build_hamiltonian(params: ModelParams, bath: BathDiscretization,
                      basis: FockBasisSpec) -> np.ndarray:
    """Dense real symmetric Hamiltonian over the spin (x) Fock basis."""
    if bath.n_modes != basis.n_modes:
        raise ParameterError("bath and basis disagree on the number of modes")
    h_bath, drive = _boson_pieces(bath, basis)
    eye_b = np.eye(basis.boson_dim)
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    h = (
        0.5 * params.bias * np.kron(sz, eye_b)
        - 0.5 * params.tunneling * np.kron(sx, eye_b)
        + np.kron(np.eye(2), h_bath)
        + 0.5 * np.kron(sz, drive)
    )
    return h


@dataclass(frozen=True)
class ExactGround:
    """Lowest eigenpair plus a truncation-convergence flag (None if unchecked)."""

    energy: float
    vector: np.ndarray
    truncation_converged: bool | None = None


def _lowest_eigenpair(h: np.ndarray):
    dim = h.shape[0]
    if dim <= 64:
        vals, vecs = np.linalg.eigh(h)
        e, v = float(vals[0]), vecs[:, 0]
    else:
        v0 = np.full(dim, 1.0 / math.sqrt(dim))
        vals, vecs = eigsh(h, k=1, which="SA", v0=v0, maxiter=50 * dim)
        e, v = float(vals[0]), vecs[:, 0]
    # fix the overall sign for reproducibility
    imax = int(np.argmax(np.abs(v)))
    if v[imax] < 0.0:
        v = -v
    return e, v


def exact_ground(params: ModelParams, bath: BathDiscretization, basis: FockBasisSpec,
                 check_truncation: bool = True) -> ExactGround:
    """Lowest eigenpair of the truncated Hamiltonian.

    With ``check_truncation`` the diagonalization is repeated at n_max + 5;
    the result is flagged unconverged when the energy moves by more than
    1e-9 relative.
    """
    e, v = _lowest_eigenpair(build_hamiltonian(params, bath, basis))
    flag = None
    if check_truncation:
        bigger = FockBasisSpec(basis.n_modes, basis.n_max + 5, dim_cap=basis.dim_cap * 8)
        e2, _ = _lowest_eigenpair(build_hamiltonian(params, bath, bigger))
        flag = bool(abs(e2 - e) <= 1e-9 * max(1.0, abs(e)))
    return ExactGround(energy=e, vector=v, truncation_converged=flag)


def _coherent_coeffs(shift: float, n_max: int) -> np.ndarray:
    """Number-state coefficients shift^n exp(-shift^2/2)/sqrt(n!)."""
    c = np.empty(n_max + 1)
    c[0] = math.exp(-0.5 * shift * shift)
    for n in range(n_max):
        c[n + 1] = c[n] * shift / math.sqrt(n + 1.0)
    return c


def evaluate_state(state: VariationalState, basis: FockBasisSpec,
                   norm_tol: float = 1e-10) -> np.ndarray:
    """Expand the coherent-state superposition in the truncated Fock basis.

    Refuses when any single coherent product loses more than ``norm_tol``
    of its norm to the truncation.
    """
    if state.n_modes != basis.n_modes:
        raise ParameterError("state and basis disagree on the number of modes")
    up = np.zeros(basis.boson_dim)
    down = np.zeros(basis.boson_dim)
    for block, weights, disps in (
        (up, state.weights_up, state.disp_up),
        (down, state.weights_down, state.disp_down),
    ):
        for w, row in zip(weights, disps):
            coeffs = [_coherent_coeffs(h, basis.n_max) for h in row]
            loss = 1.0 - float(np.prod([c @ c for c in coeffs]))
            if loss > norm_tol:
                raise TruncationError(
                    f"coherent state loses {loss:.3e} of its norm at n_max={basis.n_max}"
                )
            block += w * reduce(np.kron, coeffs)
    return np.concatenate([up, down])


def oracle_observables(vector: np.ndarray, basis: FockBasisSpec,
                       params: ModelParams, bath: BathDiscretization) -> dict:
    """All observables of a basis vector as brute-force matrix elements.

    Returns energy, norm, sigma_z, sigma_x, parity, per-mode position means,
    and the full second-moment matrices xx[k, l] = <x_k x_l> and
    pp[k, l] = <p_k p_l>, everything normalized by <v|v>.
    """
    b_dim = basis.boson_dim
    u = vector[:b_dim]
    w = vector[b_dim:]
    nn = float(u @ u + w @ w)

    h_bath, drive = _boson_pieces(bath, basis)
    energy = (
        0.5 * params.bias * (u @ u - w @ w)
        - params.tunneling * (u @ w)
        + u @ h_bath @ u + w @ h_bath @ w
        + 0.5 * (u @ drive @ u - w @ drive @ w)
    ) / nn

    ladder = _annihilator(basis.n_max)
    x_ops = [_embed(basis, k, (ladder + ladder.T) / math.sqrt(2.0)) for k in range(basis.n_modes)]
    q_ops = [_embed(basis, k, ladder.T - ladder) for k in range(basis.n_modes)]

    def both(op):
        return float(u @ op @ u + w @ op @ w) / nn

    m = basis.n_modes
    x_mean = np.array([both(x) for x in x_ops])
    xx = np.empty((m, m))
    pp = np.empty((m, m))
    for k in range(m):
        for l in range(k, m):
            xx[k, l] = xx[l, k] = both(x_ops[k] @ x_ops[l])
            pp[k, l] = pp[l, k] = -0.5 * both(q_ops[k] @ q_ops[l])

    signs = np.diag([-1.0 if n % 2 else 1.0 for n in range(basis.n_max + 1)])
    parity_boson = reduce(np.kron, [signs] * m).diagonal()
    return {
        "norm": nn,
        "energy": float(energy),
        "sigma_z": float(u @ u - w @ w) / nn,
        "sigma_x": 2.0 * float(u @ w) / nn,
        "parity": 2.0 * float(u @ (parity_boson * w)) / nn,
        "x_mean": x_mean,
        "xx": xx,
        "pp": pp,
    }


@dataclass(frozen=True)
class ValidationReport:
    """Max absolute deviations of every closed form from the oracle."""

    checks: dict
    tol: float
    n_states: int

    @property
    def passed(self) -> bool:
        return all(err <= self.tol for err in self.checks.values())

    def lines(self):
        out = []
        for name, err in self.checks.items():
            tag = "PASS" if err <= self.tol else "FAIL"
            out.append(f"{tag}  {name:<22s} max |closed form - oracle| = {err:.3e}")
        return out


def validation_gate(n_states: int = 100, seed: int = 20240810, tol: float = 1e-9,
                    n_max: int = 30) -> ValidationReport:
    """Compare every analytic formula against the Fock oracle on random states.

    Cycles over one- and two-mode toy baths, 1..3 superposition terms, and a
    few (bias, tunneling) combinations.  Run this before trusting any
    large-M result.
    """
    from . import observables as obs
    from .bath import SpectralDensity, discretize_log

    baths = [
        discretize_log(SpectralDensity(alpha=0.6, s=1.0), ratio=4.0, n_modes=1),
        discretize_log(SpectralDensity(alpha=0.6, s=1.0), ratio=3.0, n_modes=2),
        discretize_log(SpectralDensity(alpha=0.3, s=0.75), ratio=5.0, n_modes=2),
    ]
    models = [
        ModelParams(bias=0.0, tunneling=0.0),
        ModelParams(bias=0.0, tunneling=0.3),
        ModelParams(bias=0.15, tunneling=0.7),
    ]
    bases = {bath.n_modes: FockBasisSpec(bath.n_modes, n_max) for bath in baths}

    errs: dict[str, float] = {}

    def note(name, delta):
        errs[name] = max(errs.get(name, 0.0), float(np.max(np.abs(delta))))

    seeds = np.random.SeedSequence(seed).spawn(n_states)
    for i in range(n_states):
        bath = baths[i % len(baths)]
        params = models[i % len(models)]
        basis = bases[bath.n_modes]
        state = random_state(1 + i % 3, bath, seeds[i], spread=1.5)
        vec = evaluate_state(state, basis)
        ref = oracle_observables(vec, basis, params, bath)

        from .ansatz import energy as ansatz_energy
        from .ansatz import norm as ansatz_norm

        note("norm", ansatz_norm(state) - ref["norm"])
        note("energy", ansatz_energy(state, params, bath) - ref["energy"])

        spin = obs.spin_observables(state)
        note("sigma_z", spin.sigma_z - ref["sigma_z"])
        note("sigma_x", spin.sigma_x - ref["sigma_x"])
        note("parity", obs.parity_expectation(state) - ref["parity"])
        note("parity_covariance",
             obs.parity_expectation(apply_parity(state)) - obs.parity_expectation(state))

        dx, dp = obs.mode_variances_all(state)
        ref_dx = ref["xx"].diagonal() - ref["x_mean"] ** 2
        ref_dp = ref["pp"].diagonal()
        note("delta_x", dx - ref_dx)
        note("delta_p", dp - ref_dp)

        if bath.n_modes == 2:
            cx, cp = obs.correlations(state, 0, 1)
            note("cor_x", cx - (ref["xx"][0, 1] - ref["x_mean"][0] * ref["x_mean"][1]))
            note("cor_p", cp - ref["pp"][0, 1])

        avg = obs.average_displacements(state)
        for mean, weights, disps in (
            (avg.mean_up, state.weights_up, state.disp_up),
            (avg.mean_down, state.weights_down, state.disp_down),
        ):
            if mean is None:
                continue
            branch = VariationalState(weights, np.zeros_like(weights), disps, np.zeros_like(disps))
            bvec = evaluate_state(branch, basis)
            bref = oracle_observables(bvec, basis, params, bath)
            note("mean_displacement", mean - bref["x_mean"] / math.sqrt(2.0))

    return ValidationReport(checks=errs, tol=tol, n_states=n_states)
