"""Ground-state observables of the coherent-state ansatz, in closed form.

Spin expectations, spin-bath entanglement entropy, per-mode quadrature
fluctuations, cross-mode correlations, average displacements, and the
parity-based symmetry parameter.  Matrix elements between real coherent
states reduce to polynomials in the displacements times the Gaussian
overlap kernels; every formula here is validated against the Fock oracle
(see :func:`spinboson.oracle.validation_gate`).

All expectation values divide by <Psi|Psi> internally, so callers do not
need to normalize first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ansatz import (
    ModelParams,
    VariationalState,
    _gauss_overlap,
    _norm_guard,
    _weight_matrices,
    apply_parity,
    energy,
)
from .bath import BathDiscretization
from .errors import DomainError
from .optimizer import GroundStateSolution, OptimizerOptions, minimize

__all__ = [
    "SpinObservables",
    "BathObservables",
    "AverageDisplacements",
    "SymmetryCheck",
    "spin_observables",
    "mode_variances",
    "mode_variances_all",
    "correlations",
    "correlation_rows",
    "average_displacements",
    "parity_expectation",
    "check_symmetry",
    "symmetry_parameter",
    "bath_observables",
]

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SpinObservables:
    """Spin expectations and the entanglement entropy of the spin.

    ``sigma_y`` is identically zero for real displacements; it is kept so the
    Bloch-vector entropy formula reads the same as in the complex case.
    ``entropy`` is in nats; ``entropy_bits`` rescales to base 2.
    """

    sigma_z: float
    sigma_x: float
    sigma_y: float
    entropy: float

    @property
    def entropy_bits(self) -> float:
        return self.entropy / LOG2


@dataclass(frozen=True)
class AverageDisplacements:
    """Branch weights and weighted mean displacements.

    A branch with (numerically) zero weight has no meaningful mean; its
    array is reported as None rather than zero.
    """

    weight_up: float
    weight_down: float
    mean_up: np.ndarray | None
    mean_down: np.ndarray | None


@dataclass(frozen=True)
class BathObservables:
    """Per-mode bundle consumed by sweeps and the per-mode CSV."""

    delta_x: np.ndarray
    delta_p: np.ndarray
    uncertainty_excess: np.ndarray  # delta_x * delta_p - 1/4
    momentum_offset: np.ndarray     # 1/2 - delta_p
    averages: AverageDisplacements
    cor_x: dict
    cor_p: dict


def _moment_pieces(state: VariationalState):
    a, d = state.weights_up, state.weights_down
    fu, gd = state.disp_up, state.disp_down
    _, _, K, wa, wd, nrm = _weight_matrices(a, d, fu, gd)
    _norm_guard(nrm, a, d)
    return K, wa, wd, nrm, fu, gd


def spin_observables(state: VariationalState) -> SpinObservables:
    """<sigma_z>, <sigma_x>, <sigma_y> = 0 and the von Neumann entropy.

    The entropy follows from the Bloch vector: with
    w_pm = (1 +- |<sigma>|)/2, S = -w_+ ln w_+ - w_- ln w_-.
    """
    K, wa, wd, nrm, _, _ = _moment_pieces(state)
    a, d = state.weights_up, state.weights_down
    sz = float(wa.sum() - wd.sum()) / nrm
    sx = 2.0 * float(a @ K @ d) / nrm
    bloch = math.sqrt(sx * sx + sz * sz)
    if bloch > 1.0 + 1e-12:
        raise DomainError(f"Bloch vector length {bloch} exceeds 1")
    r = min(bloch, 1.0)
    entropy = 0.0
    for w in ((1.0 + r) / 2.0, (1.0 - r) / 2.0):
        if w > 0.0:
            entropy -= w * math.log(w)
    return SpinObservables(sigma_z=sz, sigma_x=sx, sigma_y=0.0, entropy=entropy)


def _branch_quadratics(weight_mat, disps, nrm):
    """Per-mode x-mean and vacuum-subtracted <x x>, <p p> contributions.

    For one spin branch with pair weights W and displacement rows r,
        sum_mn W_mn (r_mk + r_nk)/sqrt(2)              -> x_mean * nrm
        sum_mn W_mn (r_mk + r_nk)(r_ml + r_nl)/2       -> xx * nrm
        sum_mn W_mn -(r_mk - r_nk)(r_ml - r_nl)/2      -> pp * nrm
    where xx/pp are the second moments without the +1/2 vacuum diagonal.
    """
    row = weight_mat.sum(axis=1)
    x_mean = math.sqrt(2.0) * (row @ disps) / nrm
    outer = disps.T @ (weight_mat @ disps)
    diag = disps.T @ (row[:, None] * disps)
    xx = (diag + outer) / nrm
    pp = (outer - diag) / nrm
    return x_mean, xx, pp


def _second_moments(state: VariationalState):
    """Normalized <x_k>, and vacuum-subtracted <x_k x_l>, <p_k p_l> matrices."""
    _, wa, wd, nrm, fu, gd = _moment_pieces(state)
    xu, xxu, ppu = _branch_quadratics(wa, fu, nrm)
    xd, xxd, ppd = _branch_quadratics(wd, gd, nrm)
    xx = xxu + xxd
    pp = ppu + ppd
    # the matrices are symmetric analytically; enforce it bitwise
    xx = 0.5 * (xx + xx.T)
    pp = 0.5 * (pp + pp.T)
    return xu + xd, xx, pp


def mode_variances_all(state: VariationalState) -> tuple[np.ndarray, np.ndarray]:
    """Variance of x_k and of p_k for every mode (vacuum value is 1/2 each)."""
    x_mean, xx, pp = _second_moments(state)
    dx = xx.diagonal() + 0.5 - x_mean**2
    dp = pp.diagonal() + 0.5
    return dx, dp


def mode_variances(state: VariationalState, k: int) -> tuple[float, float]:
    """(Delta X, Delta P) of mode k; a single coherent state gives (1/2, 1/2)."""
    if not (0 <= k < state.n_modes):
        raise DomainError(f"mode index {k} out of range for M={state.n_modes}")
    dx, dp = mode_variances_all(state)
    return float(dx[k]), float(dp[k])


def correlations(state: VariationalState, k: int, l: int) -> tuple[float, float]:
    """(Cor_X, Cor_P) between two distinct modes.

    Cor_X = <x_k x_l> - <x_k><x_l> and Cor_P = <p_k p_l> (momentum means
    vanish for real displacements).  Symmetric in (k, l) by construction.
    """
    m = state.n_modes
    if not (0 <= k < m and 0 <= l < m):
        raise DomainError(f"mode indices ({k}, {l}) out of range for M={m}")
    if k == l:
        raise DomainError("use mode_variances for the k = l case")
    x_mean, xx, pp = _second_moments(state)
    return float(xx[k, l] - x_mean[k] * x_mean[l]), float(pp[k, l])


def correlation_rows(state: VariationalState, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Cor_X(k, l) and Cor_P(k, l) for all k at fixed l.

    The k = l entries hold the vacuum-subtracted self-correlations
    Delta X - 1/2 and Delta P - 1/2, the natural diagonal continuation used
    by the correlation-fluctuation ratio.
    """
    m = state.n_modes
    if not (0 <= l < m):
        raise DomainError(f"mode index {l} out of range for M={m}")
    x_mean, xx, pp = _second_moments(state)
    cx = xx[:, l] - x_mean * x_mean[l]
    cp = pp[:, l].copy()
    return cx, cp


def average_displacements(state: VariationalState) -> AverageDisplacements:
    """Branch weights sqrt(sum W) and kernel-weighted mean displacements.

    mean_up[k] = sum_mn W_mn (f_mk + f_nk) / (2 sum W) for the up branch and
    likewise for down; independent of the overall state normalization.
    """
    _, wa, wd, _, fu, gd = _moment_pieces(state)
    out = []
    for weight_mat, disps, wvec in ((wa, fu, state.weights_up), (wd, gd, state.weights_down)):
        total = float(weight_mat.sum())
        scale = float(wvec @ wvec)
        if scale == 0.0 or total <= 1e-14 * scale:
            out.append((0.0, None))
        else:
            row = weight_mat.sum(axis=1)
            out.append((math.sqrt(total), (row @ disps) / total))
    (w_up, mean_up), (w_dn, mean_dn) = out
    return AverageDisplacements(weight_up=w_up, weight_down=w_dn,
                                mean_up=mean_up, mean_down=mean_dn)


def parity_expectation(state: VariationalState) -> float:
    """<sigma_x exp(i pi sum_k n_k)>; +-1 on parity eigenstates.

    The number-parity factor flips real displacements, so the matrix element
    reduces to the Gaussian overlap between up rows and sign-flipped down
    rows: 2 sum_mn a_m d_n exp(-1/2 sum_k (f_mk + g_nk)^2) / <Psi|Psi>.
    """
    a, d = state.weights_up, state.weights_down
    _, _, _, wa, wd, nrm = _weight_matrices(a, d, state.disp_up, state.disp_down)
    _norm_guard(nrm, a, d)
    flipped = _gauss_overlap(state.disp_up, -state.disp_down)
    return 2.0 * float(a @ flipped @ d) / nrm


@dataclass(frozen=True)
class SymmetryCheck:
    """Symmetry parameter with the degeneracy evidence behind it."""

    zeta: float
    parity: float
    degenerate: bool
    partner_energy: float | None
    partner_min_energy: float | None


def check_symmetry(solution: GroundStateSolution, params: ModelParams,
                   bath: BathDiscretization, degeneracy_tol: float = 1e-8,
                   opts: OptimizerOptions | None = None) -> SymmetryCheck:
    """Evaluate zeta = <parity> * Delta_E for a converged ground state.

    Delta_E = 1 only when the parity image of the state has the same energy
    (within degeneracy_tol * max(1, |E|)) and re-minimizing from the parity
    image does not find anything lower.  A finite bias breaks the symmetry
    outright, so Delta_E = 0 there without any re-minimization.
    """
    if not solution.converged:
        raise DomainError("symmetry parameter requires a converged solution")
    par = parity_expectation(solution.state)
    if params.bias != 0.0:
        return SymmetryCheck(zeta=0.0, parity=par, degenerate=False,
                             partner_energy=None, partner_min_energy=None)
    e0 = solution.energy
    tol = degeneracy_tol * max(1.0, abs(e0))
    partner = apply_parity(solution.state)
    e1 = energy(partner, params, bath)
    if abs(e1 - e0) > tol:
        return SymmetryCheck(zeta=0.0, parity=par, degenerate=False,
                             partner_energy=e1, partner_min_energy=None)
    if opts is None:
        opts = OptimizerOptions()
    partner_sol = minimize(partner, params, bath, opts)
    degenerate = bool(abs(partner_sol.energy - e0) <= tol)
    zeta = par if degenerate else 0.0
    return SymmetryCheck(zeta=zeta, parity=par, degenerate=degenerate,
                         partner_energy=e1, partner_min_energy=partner_sol.energy)


def symmetry_parameter(solution: GroundStateSolution, params: ModelParams,
                       bath: BathDiscretization, degeneracy_tol: float = 1e-8,
                       opts: OptimizerOptions | None = None) -> float:
    return check_symmetry(solution, params, bath, degeneracy_tol, opts).zeta


def bath_observables(state: VariationalState, row_indices=(0, -1)) -> BathObservables:
    """Bundle of all per-mode quantities plus correlation rows at fixed l.

    ``row_indices`` selects the reference modes l for Cor(k, l) rows;
    negative values count from the top of the mesh.
    """
    dx, dp = mode_variances_all(state)
    m = state.n_modes
    cor_x = {}
    cor_p = {}
    for l in row_indices:
        idx = l % m
        cx, cp = correlation_rows(state, idx)
        cor_x[idx] = cx
        cor_p[idx] = cp
    return BathObservables(
        delta_x=dx,
        delta_p=dp,
        uncertainty_excess=dx * dp - 0.25,
        momentum_offset=0.5 - dp,
        averages=average_displacements(state),
        cor_x=cor_x,
        cor_p=cor_p,
    )
