"""Multi-coherent-state trial wavefunction for the spin-boson model.

The trial state superposes N displaced bath vacua per spin branch,

    |Psi> = |up>   sum_n a_n |shift f_n>  +  |down> sum_n d_n |shift g_n>,

with real weights and real per-mode displacements.  Because displacements
are real, all overlaps are Gaussian kernels

    F_mn = exp(-1/2 sum_k (f_mk - f_nk)^2)        (up-up, likewise down-down)
    K_mn = exp(-1/2 sum_k (f_mk - g_nk)^2)        (up-down cross overlap)

and the energy of the Hamiltonian

    H = bias/2 sigma_z - tunneling/2 sigma_x
        + sum_k omega_k b_k^+ b_k + sigma_z/2 sum_k lambda_k (b_k^+ + b_k)

has a closed form together with its exact gradient.  The energy is invariant
under a common rescaling of all weights; states are only renormalized for
reporting.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .bath import BathDiscretization
from .errors import DegenerateStateError, ParameterError

__all__ = [
    "ModelParams",
    "VariationalState",
    "OverlapKernels",
    "overlap_kernels",
    "norm",
    "energy",
    "energy_gradient",
    "energy_and_gradient",
    "random_state",
    "apply_parity",
    "normalized",
    "state_to_json_dict",
    "state_from_json_dict",
    "save_state",
    "load_state",
]

# Relative floor below which a computed norm is treated as pure cancellation
# noise rather than a physical near-degenerate superposition.
NORM_FLOOR = 1e-14


@dataclass(frozen=True)
class ModelParams:
    """Spin parameters: energy bias (epsilon) and tunneling amplitude (Delta >= 0)."""

    bias: float = 0.0
    tunneling: float = 0.0

    def __post_init__(self):
        if not (self.tunneling >= 0.0):
            raise ParameterError(f"tunneling must be >= 0, got {self.tunneling}")
        if not np.isfinite(self.bias):
            raise ParameterError("bias must be finite")


@dataclass(frozen=True)
class VariationalState:
    """Weights and displacements of the coherent-state superposition.

    ``weights_up``/``weights_down`` have shape (N,), the displacement arrays
    shape (N, M).  All entries must be finite; arrays are copied and frozen.
    """

    weights_up: np.ndarray
    weights_down: np.ndarray
    disp_up: np.ndarray
    disp_down: np.ndarray

    def __post_init__(self):
        for name, ndim in (
            ("weights_up", 1),
            ("weights_down", 1),
            ("disp_up", 2),
            ("disp_down", 2),
        ):
            arr = np.array(getattr(self, name), dtype=float, ndmin=ndim)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.weights_up.shape[0]
        if n < 1 or self.disp_up.ndim != 2:
            raise ParameterError("state needs at least one superposition term")
        m = self.disp_up.shape[1]
        if m < 1:
            raise ParameterError("state needs at least one bath mode")
        if self.weights_down.shape != (n,) or self.disp_up.shape != (n, m) or self.disp_down.shape != (n, m):
            raise ParameterError("weight/displacement shapes are inconsistent")
        for name in ("weights_up", "weights_down", "disp_up", "disp_down"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ParameterError(f"{name} contains non-finite entries")

    @property
    def n_terms(self) -> int:
        return int(self.weights_up.shape[0])

    @property
    def n_modes(self) -> int:
        return int(self.disp_up.shape[1])

    def pack(self) -> np.ndarray:
        """Flatten to [weights_up, weights_down, disp_up, disp_down]."""
        return np.concatenate(
            [self.weights_up, self.weights_down, self.disp_up.ravel(), self.disp_down.ravel()]
        )

    @classmethod
    def unpack(cls, x: np.ndarray, n_terms: int, n_modes: int) -> "VariationalState":
        a, d, fu, gd = _split_packed(np.asarray(x, dtype=float), n_terms, n_modes)
        return cls(a, d, fu, gd)


def _split_packed(x, n, m):
    if x.shape != (2 * n + 2 * n * m,):
        raise ParameterError(f"packed vector has wrong length {x.shape} for N={n}, M={m}")
    a = x[:n]
    d = x[n : 2 * n]
    fu = x[2 * n : 2 * n + n * m].reshape(n, m)
    gd = x[2 * n + n * m :].reshape(n, m)
    return a, d, fu, gd


@dataclass(frozen=True)
class OverlapKernels:
    """Gaussian overlap matrices: up-up, down-down, and up-down cross."""

    up: np.ndarray
    down: np.ndarray
    cross: np.ndarray


def _gauss_overlap(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """exp(-1/2 sum_k (x_mk - y_nk)^2) for every row pair (m, n)."""
    diff = x[:, None, :] - y[None, :, :]
    return np.exp(-0.5 * np.einsum("mnk,mnk->mn", diff, diff))


def overlap_kernels(state: VariationalState) -> OverlapKernels:
    fu, gd = state.disp_up, state.disp_down
    return OverlapKernels(
        up=_gauss_overlap(fu, fu),
        down=_gauss_overlap(gd, gd),
        cross=_gauss_overlap(fu, gd),
    )


def _norm_guard(nrm, a, d):
    scale = float(a @ a + d @ d)
    if scale == 0.0:
        raise DegenerateStateError("all weights are zero")
    if not np.isfinite(nrm) or nrm <= NORM_FLOOR * scale:
        raise DegenerateStateError(f"state norm {nrm!r} underflows (weight scale {scale!r})")


def _weight_matrices(a, d, fu, gd):
    F = _gauss_overlap(fu, fu)
    G = _gauss_overlap(gd, gd)
    K = _gauss_overlap(fu, gd)
    wa = (a[:, None] * a[None, :]) * F
    wd = (d[:, None] * d[None, :]) * G
    nrm = float(wa.sum() + wd.sum())
    return F, G, K, wa, wd, nrm


def _pair_energies(fu, gd, bias, omegas, half_lam):
    """Per-pair diagonal Hamiltonian terms h_mn for both spin branches."""
    su = fu @ half_lam
    sd_ = gd @ half_lam
    hu = 0.5 * bias + fu @ (fu * omegas).T + su[:, None] + su[None, :]
    hd = -0.5 * bias + gd @ (gd * omegas).T - sd_[:, None] - sd_[None, :]
    return hu, hd


def _value(a, d, fu, gd, bias, tunneling, omegas, half_lam):
    _, _, K, wa, wd, nrm = _weight_matrices(a, d, fu, gd)
    _norm_guard(nrm, a, d)
    hu, hd = _pair_energies(fu, gd, bias, omegas, half_lam)
    ham = float((wa * hu).sum() + (wd * hd).sum() - tunneling * (a @ K @ d))
    return ham / nrm


def _value_and_grad(a, d, fu, gd, bias, tunneling, omegas, half_lam):
    """Energy and its exact gradient in packed order; both O(N^2 M)."""
    F, G, K, wa, wd, nrm = _weight_matrices(a, d, fu, gd)
    _norm_guard(nrm, a, d)
    hu, hd = _pair_energies(fu, gd, bias, omegas, half_lam)
    ham = float((wa * hu).sum() + (wd * hd).sum() - tunneling * (a @ K @ d))
    e = ham / nrm

    kd = K @ d
    ka = K.T @ a
    grad_a = (2.0 * ((F * (hu - e)) @ a) - tunneling * kd) / nrm
    grad_d = (2.0 * ((G * (hd - e)) @ d) - tunneling * ka) / nrm

    U = wa * (hu - e)
    V = wd * (hd - e)
    grad_fu = (
        2.0 * (U @ fu - U.sum(axis=1)[:, None] * fu)
        + 2.0 * (wa @ (fu * omegas) + wa.sum(axis=1)[:, None] * half_lam[None, :])
        + tunneling * ((a * kd)[:, None] * fu - a[:, None] * (K @ (d[:, None] * gd)))
    ) / nrm
    grad_gd = (
        2.0 * (V @ gd - V.sum(axis=1)[:, None] * gd)
        + 2.0 * (wd @ (gd * omegas) - wd.sum(axis=1)[:, None] * half_lam[None, :])
        + tunneling * ((d * ka)[:, None] * gd - d[:, None] * (K.T @ (a[:, None] * fu)))
    ) / nrm

    grad = np.concatenate([grad_a, grad_d, grad_fu.ravel(), grad_gd.ravel()])
    return e, grad


def _model_arrays(params: ModelParams, bath: BathDiscretization):
    return params.bias, params.tunneling, bath.omegas, 0.5 * bath.couplings


def norm(state: VariationalState) -> float:
    """<Psi|Psi>; raises DegenerateStateError when it underflows."""
    a, d = state.weights_up, state.weights_down
    _, _, _, _, _, nrm = _weight_matrices(a, d, state.disp_up, state.disp_down)
    _norm_guard(nrm, a, d)
    return nrm


def energy(state: VariationalState, params: ModelParams, bath: BathDiscretization) -> float:
    """Variational energy <Psi|H|Psi> / <Psi|Psi> in closed form."""
    if bath.n_modes != state.n_modes:
        raise ParameterError("state and bath disagree on the number of modes")
    bias, tun, omegas, half_lam = _model_arrays(params, bath)
    return _value(state.weights_up, state.weights_down, state.disp_up, state.disp_down,
                  bias, tun, omegas, half_lam)


def energy_and_gradient(state: VariationalState, params: ModelParams,
                        bath: BathDiscretization) -> tuple[float, np.ndarray]:
    """Energy plus its exact gradient with respect to all weights/displacements.

    A vanishing gradient is precisely the stationarity condition
    dH/dx - E dN/dx = 0 of the variational problem (divided by the norm).
    """
    if bath.n_modes != state.n_modes:
        raise ParameterError("state and bath disagree on the number of modes")
    bias, tun, omegas, half_lam = _model_arrays(params, bath)
    return _value_and_grad(state.weights_up, state.weights_down, state.disp_up,
                           state.disp_down, bias, tun, omegas, half_lam)


def energy_gradient(state: VariationalState, params: ModelParams,
                    bath: BathDiscretization) -> np.ndarray:
    """Gradient of the energy, flattened in ``pack`` order."""
    return energy_and_gradient(state, params, bath)[1]


def random_state(n_terms: int, bath: BathDiscretization, seed, spread: float = 1.0) -> VariationalState:
    """Draw a random trial state, deterministic in the seed.

    Weights are uniform in [-1, 1]; displacements are uniform within
    +- spread * lambda_k / (2 omega_k), i.e. scaled by the classical
    single-branch displacement of each mode.
    """
    if n_terms < 1:
        raise ParameterError(f"n_terms must be >= 1, got {n_terms}")
    if not (spread >= 0.0):
        raise ParameterError(f"spread must be >= 0, got {spread}")
    rng = np.random.default_rng(seed)
    m = bath.n_modes
    ranges = spread * bath.classical_shifts()
    return VariationalState(
        weights_up=rng.uniform(-1.0, 1.0, n_terms),
        weights_down=rng.uniform(-1.0, 1.0, n_terms),
        disp_up=rng.uniform(-1.0, 1.0, (n_terms, m)) * ranges[None, :],
        disp_down=rng.uniform(-1.0, 1.0, (n_terms, m)) * ranges[None, :],
    )


def apply_parity(state: VariationalState) -> VariationalState:
    """Image of the state under sigma_x * exp(i pi sum_k b_k^+ b_k).

    The boson factor flips every real displacement (|h> -> |-h>), sigma_x
    swaps the spin branches, so weights swap and displacements swap with a
    sign flip.  Applying it twice restores the input exactly.
    """
    return VariationalState(
        weights_up=state.weights_down,
        weights_down=state.weights_up,
        disp_up=-state.disp_down,
        disp_down=-state.disp_up,
    )


def normalized(state: VariationalState) -> VariationalState:
    """Rescale both weight vectors so <Psi|Psi> = 1 (energy is unchanged)."""
    scale = 1.0 / np.sqrt(norm(state))
    return VariationalState(
        weights_up=scale * state.weights_up,
        weights_down=scale * state.weights_down,
        disp_up=state.disp_up,
        disp_down=state.disp_down,
    )


def state_to_json_dict(state: VariationalState, seed=None, mesh_fingerprint=None) -> dict:
    """Checkpoint document: fields N, M, A, D, f, g, seed, mesh_fingerprint."""
    return {
        "N": state.n_terms,
        "M": state.n_modes,
        "A": state.weights_up.tolist(),
        "D": state.weights_down.tolist(),
        "f": state.disp_up.tolist(),
        "g": state.disp_down.tolist(),
        "seed": seed,
        "mesh_fingerprint": mesh_fingerprint,
    }


def state_from_json_dict(doc: dict) -> VariationalState:
    state = VariationalState(
        weights_up=np.array(doc["A"], dtype=float),
        weights_down=np.array(doc["D"], dtype=float),
        disp_up=np.array(doc["f"], dtype=float),
        disp_down=np.array(doc["g"], dtype=float),
    )
    if state.n_terms != doc["N"] or state.n_modes != doc["M"]:
        raise ParameterError("checkpoint N/M fields disagree with array shapes")
    return state


def save_state(path, state: VariationalState, seed=None, mesh_fingerprint=None):
    """Write a checkpoint atomically (temp file + rename)."""
    doc = state_to_json_dict(state, seed=seed, mesh_fingerprint=mesh_fingerprint)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=1)
    os.replace(tmp, path)


def load_state(path) -> tuple[VariationalState, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return state_from_json_dict(doc), doc
